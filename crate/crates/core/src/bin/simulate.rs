//! Batch experiment runner.
//!
//!   simulate --config exp.json --strategy all --scenarios 500 --iterations 2000 \
//!            --aps 2,4,8,12,16 --seed 1 --workers 8 --out results/

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use mlo_sim::harness::{self, output, ExperimentConfig};
use mlo_sim::{Error, Result, Strategy};

#[derive(Debug, Parser)]
#[command(name = "simulate", about = "Multi-link Wi-Fi link-activation experiments")]
struct Args {
    /// JSON file with ExperimentConfig fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// fixed, random, rl, frl or all.
    #[arg(long)]
    strategy: Option<String>,

    #[arg(long)]
    scenarios: Option<usize>,

    #[arg(long)]
    iterations: Option<u64>,

    /// Comma-separated AP counts, e.g. 2,4,8,12,16.
    #[arg(long, value_delimiter = ',')]
    aps: Option<Vec<usize>>,

    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,

    #[arg(long)]
    out: Option<PathBuf>,

    /// Skip writing the per-iteration traces of the reference scenario.
    #[arg(long)]
    no_traces: bool,
}

fn parse_strategies(s: &str) -> Result<Vec<Strategy>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Strategy::ALL.to_vec());
    }
    s.split(',').map(|t| t.trim().parse()).collect()
}

fn build_config(args: &Args) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = &args.strategy {
        cfg.strategies = parse_strategies(s)?;
    }
    if let Some(v) = args.scenarios {
        cfg.num_scenarios = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = &args.aps {
        cfg.n_values = v.clone();
    }
    if let Some(v) = args.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = &args.out {
        cfg.output_dir = v.clone();
    }
    if args.no_traces {
        cfg.write_traces = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &Args) -> Result<()> {
    let cfg = build_config(args)?;
    let started = Instant::now();
    let report = harness::run_experiment(&cfg)?;
    let written = output::write_all(&report, &cfg.output_dir)?;

    println!(
        "{} scenarios x {} iterations, seed {}, {:.1}s",
        cfg.num_scenarios,
        cfg.iterations,
        cfg.master_seed,
        started.elapsed().as_secs_f64()
    );
    println!("{:>4}  {:<8} {:>16} {:>12}", "n", "strategy", "mean min Mbps", "p90 Mbps");
    for b in &report.batches {
        for s in &b.strategies {
            println!(
                "{:>4}  {:<8} {:>16.3} {:>12.3}",
                b.n,
                s.strategy,
                s.mean_min_rate_bps / 1e6,
                s.p90_bps / 1e6
            );
        }
    }
    println!("wrote {} files to {}", written.len(), cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
