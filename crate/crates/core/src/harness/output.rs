//! CSV and JSON files written after an experiment.
//!
//! Rates are written in Mbps with three decimals.
//!
//! | file | columns |
//! |------|---------|
//! | `fig3_convergence.csv` | `n,strategy,t,min_ap,running_avg_mbps` |
//! | `fig4_per_ap.csv` | `n,strategy,ap,mean_rate_mbps` |
//! | `fig5_means.csv` | `n,strategy,single_scenario_min_mbps,mean_min_mbps` |
//! | `fig6_ecdf.csv` | `n,strategy,rate_mbps,fraction` |
//! | `fig7_density.csv` | `n,strategy,mean_min_mbps,p90_mbps` |
//! | `summary.json` | the whole [`ExperimentReport`] |
//!
//! With `write_traces`, `traces/n<N>_<strategy>.json` and `.csv` hold the
//! full iteration trace of the reference scenario.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::{ExperimentConfig, ExperimentReport, REFERENCE_SCENARIO};
use crate::engine;
use crate::error::{Error, Result};

fn mbps(bps: f64) -> String {
    format!("{:.3}", bps / 1e6)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn fig3_convergence(report: &ExperimentReport) -> String {
    let mut out = String::from("n,strategy,t,min_ap,running_avg_mbps\n");
    for b in &report.batches {
        for s in &b.strategies {
            for (t, v) in s.reference.min_rate_running_avg_bps.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{},{}", b.n, s.strategy, t + 1, s.reference.min_ap, mbps(*v));
            }
        }
    }
    out
}

pub fn fig4_per_ap(report: &ExperimentReport) -> String {
    let mut out = String::from("n,strategy,ap,mean_rate_mbps\n");
    for b in &report.batches {
        for s in &b.strategies {
            for (ap, v) in s.reference.mean_rates_bps.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", b.n, s.strategy, ap, mbps(*v));
            }
        }
    }
    out
}

pub fn fig5_means(report: &ExperimentReport) -> String {
    let mut out = String::from("n,strategy,single_scenario_min_mbps,mean_min_mbps\n");
    for b in &report.batches {
        for s in &b.strategies {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                b.n,
                s.strategy,
                mbps(s.min_rates_bps[REFERENCE_SCENARIO]),
                mbps(s.mean_min_rate_bps)
            );
        }
    }
    out
}

pub fn fig6_ecdf(report: &ExperimentReport) -> String {
    let mut out = String::from("n,strategy,rate_mbps,fraction\n");
    for b in &report.batches {
        for s in &b.strategies {
            for p in &s.ecdf {
                let _ = writeln!(out, "{},{},{},{:.6}", b.n, s.strategy, mbps(p.rate_bps), p.fraction);
            }
        }
    }
    out
}

pub fn fig7_density(report: &ExperimentReport) -> String {
    let mut out = String::from("n,strategy,mean_min_mbps,p90_mbps\n");
    for b in &report.batches {
        for s in &b.strategies {
            let _ = writeln!(out, "{},{},{},{}", b.n, s.strategy, mbps(s.mean_min_rate_bps), mbps(s.p90_bps));
        }
    }
    out
}

/// Writes every output file into `dir`, creating it if needed. Returns the
/// paths written.
pub fn write_all(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("fig3_convergence.csv", fig3_convergence(report)),
        ("fig4_per_ap.csv", fig4_per_ap(report)),
        ("fig5_means.csv", fig5_means(report)),
        ("fig6_ecdf.csv", fig6_ecdf(report)),
        ("fig7_density.csv", fig7_density(report)),
        ("summary.json", report.to_json()?),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        write(&path, &body)?;
        written.push(path);
    }
    if report.config.write_traces {
        written.extend(write_traces(&report.config, report, &dir.join("traces"))?);
    }
    Ok(written)
}

fn write_traces(config: &ExperimentConfig, report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for b in &report.batches {
        for &strategy in &config.strategies {
            let run = engine::run_scenario_with(
                &b.reference_scenario,
                strategy,
                config.iterations,
                config.run_seed(REFERENCE_SCENARIO),
                config.engine,
            )?;
            let json = dir.join(format!("n{}_{}.json", b.n, strategy));
            write(&json, &run.to_json()?)?;
            let csv = dir.join(format!("n{}_{}.csv", b.n, strategy));
            let file = fs::File::create(&csv).map_err(|e| Error::io(&csv, e))?;
            run.write_csv(BufWriter::new(file)).map_err(|e| Error::io(&csv, e))?;
            written.push(json);
            written.push(csv);
        }
    }
    Ok(written)
}
