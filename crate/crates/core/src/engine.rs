//! The synchronous iteration loop.
//!
//! Each iteration every agent picks a link set without seeing the others'
//! current choices, rates are evaluated under the joint profile, federated
//! agents receive their neighbours' rewards, and every agent updates.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::agents::{global_reward_with, local_reward, ActionSpace, AgentState, GlobalRewardConfig, RewardExchange, RewardTable, Strategy};
use crate::error::{Error, Result};
use crate::radio::{ActivationProfile, LinkBudget};
use crate::real::Real;
use crate::scenario::Scenario;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub global_reward: GlobalRewardConfig,
    /// Neighbours share rewards every `share_period` iterations; in between,
    /// federated agents reuse the last values they received.
    pub share_period: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            global_reward: GlobalRewardConfig::default(),
            share_period: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct IterationRecord<T = f64> {
    pub t: u64,
    pub actions: ActivationProfile,
    pub rates_bps: Vec<T>,
    pub local_rewards: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub global_rewards: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AgentTables<T = f64> {
    pub local: RewardTable<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub global: Option<RewardTable<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RunResult<T = f64> {
    pub scenario: Scenario<T>,
    pub strategy: Strategy,
    pub seed: u64,
    pub neighbor_sets: Vec<Vec<usize>>,
    pub trace: Vec<IterationRecord<T>>,
    /// Reward tables at the end of the run.
    pub tables: Vec<AgentTables<T>>,
}

impl<T: Real> RunResult<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Writes the trace as `t,ap,action_mask,rate_bps,local_reward,global_reward`.
    /// `global_reward` is empty for non-federated runs.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,ap,action_mask,rate_bps,local_reward,global_reward")?;
        for rec in &self.trace {
            for (ap, set) in rec.actions.per_ap.iter().enumerate() {
                write!(
                    out,
                    "{},{},{},{:.3},{:.3},",
                    rec.t,
                    ap,
                    set.mask(),
                    rec.rates_bps[ap].as_f64(),
                    rec.local_rewards[ap].as_f64()
                )?;
                if let Some(g) = &rec.global_rewards {
                    write!(out, "{:.3}", g[ap].as_f64())?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    /// Time-averaged rate of every AP over the whole run.
    pub fn mean_rates(&self) -> Result<Vec<T>> {
        mean_rates(&self.trace)
    }
}

/// Stepwise simulation of one scenario under one strategy.
pub struct Simulation<T: Real = f64> {
    budget: LinkBudget<T>,
    space: ActionSpace,
    agents: Vec<AgentState<T>>,
    neighbors: Vec<Vec<usize>>,
    strategy: Strategy,
    config: EngineConfig,
    shared: Vec<T>,
    t: u64,
}

impl<T: Real> Simulation<T> {
    pub fn new(scenario: &Scenario<T>, strategy: Strategy, seed: u64, config: EngineConfig) -> Result<Self> {
        scenario.validate()?;
        if config.share_period == 0 {
            return Err(Error::config("share_period must be >= 1"));
        }
        let space = ActionSpace::enumerate(scenario.num_links)?;
        let n = scenario.num_aps();
        let agents = (0..n)
            .map(|i| {
                let rng = seed::child_stream(seed, &[seed::purpose::AGENT, i as u64]);
                AgentState::new(i, strategy, &space, rng)
            })
            .collect();
        Ok(Self {
            budget: LinkBudget::new(scenario)?,
            space,
            agents,
            neighbors: scenario.neighbor_sets()?,
            strategy,
            config,
            shared: vec![T::zero(); n],
            t: 0,
        })
    }

    pub fn neighbor_sets(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn agents(&self) -> &[AgentState<T>] {
        &self.agents
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    pub fn tables(&self) -> Vec<AgentTables<T>> {
        self.agents
            .iter()
            .map(|a| AgentTables {
                local: a.local_table.clone(),
                global: a.global_table.clone(),
            })
            .collect()
    }

    /// Runs one iteration and returns its record.
    pub fn step(&mut self) -> Result<IterationRecord<T>> {
        self.t += 1;
        let t = self.t;
        let space = &self.space;

        let profile = ActivationProfile::new(
            self.agents.iter_mut().map(|a| a.select_action(space, t)).collect(),
        );
        let rates = self.budget.rates_bps(&profile);
        let local: Vec<T> = rates.iter().copied().map(local_reward).collect();

        let global = if self.strategy.is_federated() {
            let cfg = self.config.global_reward;
            let offered: Vec<T> = match cfg.exchange {
                RewardExchange::Instant => local.clone(),
                RewardExchange::Averaged => self
                    .agents
                    .iter()
                    .zip(&profile.per_ap)
                    .zip(&local)
                    .map(|((a, &act), &r)| projected_mean(&a.local_table, space.index_of(act).unwrap_or(0), r))
                    .collect(),
            };
            if (t - 1).is_multiple_of(self.config.share_period) {
                self.shared.clone_from(&offered);
            }
            let mut buf = Vec::new();
            let g = (0..self.agents.len())
                .map(|i| {
                    buf.clear();
                    buf.extend(self.neighbors[i].iter().map(|&j| self.shared[j]));
                    global_reward_with(&cfg, offered[i], &buf)
                })
                .collect::<Vec<_>>();
            Some(g)
        } else {
            None
        };

        for (i, agent) in self.agents.iter_mut().enumerate() {
            agent.update(space, profile.per_ap[i], local[i], global.as_ref().map(|g| g[i]))?;
        }

        Ok(IterationRecord {
            t,
            actions: profile,
            rates_bps: rates,
            local_rewards: local,
            global_rewards: global,
        })
    }
}

fn projected_mean<T: Real>(table: &RewardTable<T>, o: usize, r: T) -> T {
    let c = T::from_u64(table.count(o) + 1).expect("count fits the float type");
    table.mean(o) + (r - table.mean(o)) / c
}

/// Runs `iterations` steps with the default engine configuration.
pub fn run_scenario<T: Real>(
    scenario: &Scenario<T>,
    strategy: Strategy,
    iterations: u64,
    seed: u64,
) -> Result<RunResult<T>> {
    run_scenario_with(scenario, strategy, iterations, seed, EngineConfig::default())
}

pub fn run_scenario_with<T: Real>(
    scenario: &Scenario<T>,
    strategy: Strategy,
    iterations: u64,
    seed: u64,
    config: EngineConfig,
) -> Result<RunResult<T>> {
    if iterations == 0 {
        return Err(Error::config("iterations must be >= 1"));
    }
    let mut sim = Simulation::new(scenario, strategy, seed, config)?;
    let trace = (0..iterations).map(|_| sim.step()).collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        scenario: scenario.clone(),
        strategy,
        seed,
        neighbor_sets: sim.neighbors.clone(),
        tables: sim.tables(),
        trace,
    })
}

pub fn mean_rates<T: Real>(trace: &[IterationRecord<T>]) -> Result<Vec<T>> {
    let first = trace.first().ok_or(Error::EmptyInput("trace"))?;
    let mut sums = vec![T::zero(); first.rates_bps.len()];
    for rec in trace {
        for (s, &r) in sums.iter_mut().zip(&rec.rates_bps) {
            *s = *s + r;
        }
    }
    let len = T::from_usize(trace.len()).expect("trace length fits the float type");
    Ok(sums.into_iter().map(|s| s / len).collect())
}

/// Index of the smallest value; the first one wins ties.
pub fn argmin<T: Real>(values: &[T]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, T)>, (i, &v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Running average rate of the AP whose time-averaged rate is lowest.
pub fn min_rate_timeseries<T: Real>(result: &RunResult<T>) -> Result<Vec<T>> {
    min_rate_timeseries_of(&result.trace)
}

pub fn min_rate_timeseries_of<T: Real>(trace: &[IterationRecord<T>]) -> Result<Vec<T>> {
    let means = mean_rates(trace)?;
    let ap = argmin(&means).ok_or(Error::EmptyInput("rates"))?;
    let mut sum = T::zero();
    Ok(trace
        .iter()
        .enumerate()
        .map(|(idx, rec)| {
            sum = sum + rec.rates_bps[ap];
            sum / T::from_usize(idx + 1).expect("index fits the float type")
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::LinkSet;
    use crate::scenario::{PhysicalConfig, Point};

    fn single(k: usize) -> Scenario {
        Scenario {
            area_side_m: 100.0,
            ap_positions: vec![Point::new(50.0, 50.0)],
            sta_positions: vec![Point::new(60.0, 50.0)],
            ap_sta_distance_m: 10.0,
            num_links: k,
            physical: PhysicalConfig::default(),
        }
    }

    fn rec(t: u64, rates: &[f64]) -> IterationRecord {
        IterationRecord {
            t,
            actions: ActivationProfile::uniform(rates.len(), LinkSet::single(0)),
            rates_bps: rates.to_vec(),
            local_rewards: rates.to_vec(),
            global_rewards: None,
        }
    }

    #[test]
    fn hand_built_min_rate_series() {
        let trace = vec![rec(1, &[1.0, 5.0]), rec(2, &[3.0, 5.0]), rec(3, &[2.0, 5.0])];
        assert_eq!(min_rate_timeseries_of(&trace).unwrap(), vec![1.0, 2.0, 2.0]);
        assert!(matches!(min_rate_timeseries_of::<f64>(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn single_ap_learns_full_mask() {
        let res = run_scenario(&single(4), Strategy::LocalRl, 2000, 7).unwrap();
        let tail = &res.trace[1800..];
        let full = tail.iter().filter(|r| r.actions.per_ap[0] == LinkSet::full(4)).count();
        assert!(full as f64 >= 0.95 * 200.0, "full mask in {full}/200");
    }

    #[test]
    fn fixed_is_constant_and_full() {
        let sc: Scenario = crate::scenario::sample_scenario(
            &mut seed::stream(5),
            6,
            4,
            100.0,
            10.0,
            PhysicalConfig::default(),
        )
        .unwrap();
        let res = run_scenario(&sc, Strategy::Fixed, 50, 1).unwrap();
        for r in &res.trace {
            assert!(r.actions.per_ap.iter().all(|&a| a == LinkSet::full(4)));
            assert_eq!(r.rates_bps, res.trace[0].rates_bps);
        }
        let series = min_rate_timeseries(&res).unwrap();
        assert!(series.iter().all(|&v| (v - series[0]).abs() <= 1e-9 * series[0]));
    }

    #[test]
    fn trace_csv_layout() {
        let res = run_scenario(&single(2), Strategy::FederatedRl, 3, 1).unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,ap,action_mask,rate_bps,local_reward,global_reward");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1].split(',').count(), 6);
        assert!(!lines[1].ends_with(','));

        let res = run_scenario(&single(2), Strategy::Random, 2, 1).unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn zero_iterations_rejected() {
        assert!(run_scenario(&single(2), Strategy::Fixed, 0, 1).is_err());
        let cfg = EngineConfig { share_period: 0, ..Default::default() };
        assert!(run_scenario_with(&single(2), Strategy::Fixed, 5, 1, cfg).is_err());
    }

    #[test]
    fn run_result_json_round_trip() {
        let res = run_scenario(&single(2), Strategy::FederatedRl, 5, 9).unwrap();
        let back: RunResult = serde_json::from_str(&res.to_json().unwrap()).unwrap();
        assert_eq!(back, res);
    }

    #[test]
    fn f32_runs() {
        let sc = crate::scenario::Scenario::<f32> {
            area_side_m: 100.0,
            ap_positions: vec![Point::new(50.0, 50.0), Point::new(55.0, 50.0)],
            sta_positions: vec![Point::new(60.0, 50.0), Point::new(45.0, 50.0)],
            ap_sta_distance_m: 10.0,
            num_links: 2,
            physical: PhysicalConfig::default(),
        };
        let res = run_scenario(&sc, Strategy::FederatedRl, 100, 3).unwrap();
        assert_eq!(res.trace.len(), 100);
        assert!(res.trace.iter().all(|r| r.rates_bps.iter().all(|v| v.is_finite() && *v > 0.0)));
    }

    #[test]
    fn stale_sharing_reuses_previous_values() {
        let sc: Scenario = Scenario {
            area_side_m: 100.0,
            ap_positions: vec![Point::new(50.0, 50.0), Point::new(55.0, 50.0)],
            sta_positions: vec![Point::new(60.0, 50.0), Point::new(45.0, 50.0)],
            ap_sta_distance_m: 10.0,
            num_links: 2,
            physical: PhysicalConfig::default(),
        };
        let cfg = EngineConfig { share_period: 4, ..Default::default() };
        let res = run_scenario_with(&sc, Strategy::FederatedRl, 12, 3, cfg).unwrap();
        for r in &res.trace {
            let g = r.global_rewards.as_ref().unwrap();
            let shared_at = r.t - (r.t - 1) % 4;
            let src = &res.trace[(shared_at - 1) as usize].local_rewards;
            for i in 0..2 {
                let expect = r.local_rewards[i].min(src[1 - i]);
                assert_eq!(g[i], expect);
            }
        }
    }
}
