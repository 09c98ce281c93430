//! Monte Carlo experiment driver.
//!
//! Every scenario index gets its own child seed; all strategies run on the
//! same sampled world for that index. Scenarios are spread over a bounded
//! rayon pool and reduced in index order, so results do not depend on the
//! worker count.

pub mod metrics;
pub mod output;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Strategy;
use crate::engine::{self, EngineConfig, Simulation};
use crate::error::{Error, Result};
use crate::scenario::{sample_scenario, PhysicalConfig, Scenario};
use crate::seed;

pub use metrics::{compute_ecdf, percentile, EcdfPoint};

/// Index of the scenario whose convergence curve and per-AP rates are reported.
pub const REFERENCE_SCENARIO: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategies: Vec<Strategy>,
    pub num_scenarios: usize,
    pub iterations: u64,
    pub n_values: Vec<usize>,
    pub k: usize,
    pub area_side_m: f64,
    pub d_m: f64,
    pub physical: PhysicalConfig,
    pub engine: EngineConfig,
    pub master_seed: u64,
    /// Scenario-level parallelism; 0 uses every available core.
    #[serde(skip_serializing)]
    pub workers: usize,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    /// Also write the full trace of the reference scenario for each strategy.
    pub write_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            num_scenarios: 500,
            iterations: 2000,
            n_values: vec![8],
            k: 4,
            area_side_m: 100.0,
            d_m: 10.0,
            physical: PhysicalConfig::default(),
            engine: EngineConfig::default(),
            master_seed: 1,
            workers: 0,
            output_dir: PathBuf::from("results"),
            write_traces: true,
        }
    }
}

impl ExperimentConfig {
    pub fn density_sweep_defaults() -> Self {
        Self {
            n_values: vec![2, 4, 8, 12, 16],
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::config("at least one strategy is required"));
        }
        if self.num_scenarios == 0 {
            return Err(Error::config("num_scenarios must be >= 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be >= 1"));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::config("n_values must be a nonempty list of counts >= 1"));
        }
        if self.engine.share_period == 0 {
            return Err(Error::config("engine.share_period must be >= 1"));
        }
        self.physical.validate()?;
        if !(self.d_m > 0.0 && self.d_m < self.area_side_m) {
            return Err(Error::config("need 0 < d_m < area_side_m"));
        }
        crate::agents::ActionSpace::enumerate(self.k)?;
        Ok(())
    }

    /// The world used for scenario index `s` at density `n`.
    pub fn scenario(&self, n: usize, s: usize) -> Result<Scenario> {
        let mut rng = seed::child_stream(self.master_seed, &[seed::purpose::SCENARIO, s as u64]);
        sample_scenario(&mut rng, n, self.k, self.area_side_m, self.d_m, self.physical)
    }

    pub fn run_seed(&self, s: usize) -> u64 {
        seed::child_seed(self.master_seed, &[seed::purpose::RUN, s as u64])
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))
    }
}

/// Outcome of one strategy on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub strategy: Strategy,
    pub scenario_hash: u64,
    /// Time-averaged rate of every AP.
    pub mean_rates_bps: Vec<f64>,
    /// Smallest entry of `mean_rates_bps`.
    pub min_rate_bps: f64,
    pub min_ap: usize,
}

/// Convergence curve and per-AP rates for the reference scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRun {
    pub strategy: Strategy,
    pub min_ap: usize,
    pub mean_rates_bps: Vec<f64>,
    /// Running average of the min AP's rate at every iteration.
    pub min_rate_running_avg_bps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    /// Mean over scenarios of each scenario's min-AP time-averaged rate.
    pub mean_min_rate_bps: f64,
    pub p90_bps: f64,
    pub ecdf: Vec<EcdfPoint>,
    /// Per-scenario min rates in scenario-index order.
    pub min_rates_bps: Vec<f64>,
    pub reference: ReferenceRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n: usize,
    pub num_scenarios: usize,
    pub iterations: u64,
    pub reference_scenario: Scenario,
    pub strategies: Vec<StrategySummary>,
}

impl BatchSummary {
    pub fn get(&self, strategy: Strategy) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy == strategy)
    }

    pub fn mean_min_rate(&self, strategy: Strategy) -> Option<f64> {
        self.get(strategy).map(|s| s.mean_min_rate_bps)
    }
}

/// Stable fingerprint of a scenario's geometry and constants.
pub fn scenario_hash(scenario: &Scenario) -> u64 {
    let mut h = DefaultHasher::new();
    let bits = |v: f64| v.to_bits();
    scenario.num_links.hash(&mut h);
    bits(scenario.area_side_m).hash(&mut h);
    bits(scenario.ap_sta_distance_m).hash(&mut h);
    for p in scenario.ap_positions.iter().chain(&scenario.sta_positions) {
        bits(p.x).hash(&mut h);
        bits(p.y).hash(&mut h);
    }
    let c = &scenario.physical;
    for v in [
        c.pathloss_intercept_db,
        c.attenuation_factor,
        c.wall_attenuation_db_per_wall,
        c.walls_per_meter,
        c.tx_power_dbm,
        c.bandwidth_hz_per_link,
        c.noise_floor_dbm,
        c.sensitivity_dbm,
    ] {
        bits(v).hash(&mut h);
    }
    h.finish()
}

/// Runs one strategy on one scenario, keeping only per-AP rate sums.
pub fn evaluate(
    scenario: &Scenario,
    strategy: Strategy,
    iterations: u64,
    seed: u64,
    config: EngineConfig,
) -> Result<ScenarioOutcome> {
    if iterations == 0 {
        return Err(Error::config("iterations must be >= 1"));
    }
    let mut sim = Simulation::new(scenario, strategy, seed, config)?;
    let mut sums = vec![0.0; scenario.num_aps()];
    for _ in 0..iterations {
        let rec = sim.step()?;
        for (s, r) in sums.iter_mut().zip(&rec.rates_bps) {
            *s += r;
        }
    }
    let mean_rates_bps: Vec<f64> = sums.iter().map(|s| s / iterations as f64).collect();
    let min_ap = engine::argmin(&mean_rates_bps).expect("at least one AP");
    Ok(ScenarioOutcome {
        strategy,
        scenario_hash: scenario_hash(scenario),
        min_rate_bps: mean_rates_bps[min_ap],
        min_ap,
        mean_rates_bps,
    })
}

/// All strategies on scenario `s` at density `n`.
pub fn evaluate_scenario(config: &ExperimentConfig, n: usize, s: usize) -> Result<Vec<ScenarioOutcome>> {
    let scenario = config.scenario(n, s)?;
    let seed = config.run_seed(s);
    config
        .strategies
        .iter()
        .map(|&st| evaluate(&scenario, st, config.iterations, seed, config.engine))
        .collect()
}

fn reference_run(config: &ExperimentConfig, scenario: &Scenario, strategy: Strategy) -> Result<ReferenceRun> {
    let run = engine::run_scenario_with(
        scenario,
        strategy,
        config.iterations,
        config.run_seed(REFERENCE_SCENARIO),
        config.engine,
    )?;
    let mean_rates_bps = run.mean_rates()?;
    Ok(ReferenceRun {
        strategy,
        min_ap: engine::argmin(&mean_rates_bps).expect("at least one AP"),
        mean_rates_bps,
        min_rate_running_avg_bps: engine::min_rate_timeseries(&run)?,
    })
}

/// Monte Carlo batch at a single density `n`.
pub fn run_batch(config: &ExperimentConfig, n: usize) -> Result<BatchSummary> {
    config.validate()?;
    if n == 0 {
        return Err(Error::config("n must be >= 1"));
    }
    let pool = config.pool()?;
    let outcomes: Vec<Vec<ScenarioOutcome>> = pool.install(|| {
        (0..config.num_scenarios)
            .into_par_iter()
            .map(|s| evaluate_scenario(config, n, s))
            .collect::<Result<Vec<_>>>()
    })?;

    for (s, row) in outcomes.iter().enumerate() {
        if row.windows(2).any(|w| w[0].scenario_hash != w[1].scenario_hash) {
            return Err(Error::Contract(format!("strategies saw different worlds at scenario {s}")));
        }
    }

    let reference_scenario = config.scenario(n, REFERENCE_SCENARIO)?;
    let strategies = config
        .strategies
        .iter()
        .enumerate()
        .map(|(col, &strategy)| {
            let min_rates_bps: Vec<f64> = outcomes.iter().map(|row| row[col].min_rate_bps).collect();
            let mut sorted = min_rates_bps.clone();
            sorted.sort_by(f64::total_cmp);
            Ok(StrategySummary {
                strategy,
                mean_min_rate_bps: metrics::mean(&min_rates_bps)?,
                p90_bps: metrics::percentile_sorted(&sorted, 0.9),
                ecdf: compute_ecdf(&min_rates_bps)?,
                min_rates_bps,
                reference: reference_run(config, &reference_scenario, strategy)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BatchSummary {
        n,
        num_scenarios: config.num_scenarios,
        iterations: config.iterations,
        reference_scenario,
        strategies,
    })
}

/// One batch per entry of `config.n_values`.
pub fn density_sweep(config: &ExperimentConfig) -> Result<Vec<BatchSummary>> {
    config.validate()?;
    config.n_values.iter().map(|&n| run_batch(config, n)).collect()
}

/// Everything an experiment produces; serialized as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub batches: Vec<BatchSummary>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(ExperimentReport {
        config: config.clone(),
        batches: density_sweep(config)?,
    })
}
