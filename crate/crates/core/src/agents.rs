//! Link-activation policies.
//!
//! Each AP owns one [`AgentState`]. The learning policies are ε-greedy
//! bandits over every nonempty subset of links with ε = 1/√t. The local
//! learner ranks actions by the mean of its own achieved rate; the
//! federated learner ranks them by the mean of the worst rate seen among
//! itself and its neighbours.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::LinkSet;
use crate::real::Real;
use crate::scenario::MAX_LINKS;
use crate::seed::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Every link active at every iteration.
    #[serde(rename = "fixed")]
    Fixed,
    /// A uniformly random nonempty subset at every iteration.
    #[serde(rename = "random")]
    Random,
    /// ε-greedy on the AP's own rate.
    #[serde(rename = "rl")]
    LocalRl,
    /// ε-greedy on the minimum rate over the AP and its neighbours.
    #[serde(rename = "frl")]
    FederatedRl,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Fixed,
        Strategy::Random,
        Strategy::LocalRl,
        Strategy::FederatedRl,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Fixed => "fixed",
            Strategy::Random => "random",
            Strategy::LocalRl => "rl",
            Strategy::FederatedRl => "frl",
        }
    }

    pub fn is_federated(self) -> bool {
        self == Strategy::FederatedRl
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Strategy::Fixed),
            "random" => Ok(Strategy::Random),
            "rl" => Ok(Strategy::LocalRl),
            "frl" => Ok(Strategy::FederatedRl),
            other => Err(Error::config(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Which value a federated agent receives from each neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardExchange {
    /// The neighbour's instantaneous local reward for this iteration.
    #[default]
    Instant,
    /// The neighbour's running mean local reward for the action it just played.
    Averaged,
}

/// How the federated reward is formed from the shared values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalRewardConfig {
    /// Include the AP's own reward in the minimum.
    pub include_self: bool,
    pub exchange: RewardExchange,
}

impl Default for GlobalRewardConfig {
    fn default() -> Self {
        Self {
            include_self: true,
            exchange: RewardExchange::Instant,
        }
    }
}

/// Every nonempty link subset, in ascending mask order.
///
/// Action index `o` corresponds to mask `o + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    k: usize,
    actions: Vec<LinkSet>,
}

impl ActionSpace {
    pub fn enumerate(k: usize) -> Result<Self> {
        if !(1..=MAX_LINKS).contains(&k) {
            return Err(Error::config(format!("k must be in 1..={MAX_LINKS}, got {k}")));
        }
        let top = (1u32 << k) - 1;
        let actions = (1..=top)
            .map(|m| LinkSet::new(m as u16, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { k, actions })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[LinkSet] {
        &self.actions
    }

    pub fn get(&self, o: usize) -> LinkSet {
        self.actions[o]
    }

    pub fn full(&self) -> LinkSet {
        LinkSet::full(self.k)
    }

    pub fn index_of(&self, action: LinkSet) -> Option<usize> {
        let m = action.mask() as usize;
        (m >= 1 && m <= self.actions.len()).then(|| m - 1)
    }
}

pub fn enumerate_actions(k: usize) -> Result<ActionSpace> {
    ActionSpace::enumerate(k)
}

/// Per-action selection counts and running mean rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<u16, TableEntry<T>>",
    into = "BTreeMap<u16, TableEntry<T>>",
    bound = "T: Real"
)]
pub struct RewardTable<T = f64> {
    count: Vec<u64>,
    mean: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TableEntry<T> {
    pub count: u64,
    pub mean: T,
}

impl<T: Real> From<RewardTable<T>> for BTreeMap<u16, TableEntry<T>> {
    fn from(table: RewardTable<T>) -> Self {
        table
            .count
            .iter()
            .zip(&table.mean)
            .enumerate()
            .map(|(o, (&count, &mean))| ((o + 1) as u16, TableEntry { count, mean }))
            .collect()
    }
}

impl<T: Real> TryFrom<BTreeMap<u16, TableEntry<T>>> for RewardTable<T> {
    type Error = Error;

    fn try_from(map: BTreeMap<u16, TableEntry<T>>) -> Result<Self> {
        let p = map.len();
        if !(p + 1).is_power_of_two() || p == 0 {
            return Err(Error::config(format!("{p} table entries is not 2^k - 1")));
        }
        let mut table = RewardTable::new(p);
        for (o, (mask, entry)) in map.into_iter().enumerate() {
            if mask as usize != o + 1 {
                return Err(Error::config(format!("table is missing action mask {}", o + 1)));
            }
            table.count[o] = entry.count;
            table.mean[o] = entry.mean;
        }
        Ok(table)
    }
}

impl<T: Real> RewardTable<T> {
    pub fn new(p: usize) -> Self {
        Self {
            count: vec![0; p],
            mean: vec![T::zero(); p],
        }
    }

    pub fn len(&self) -> usize {
        self.count.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count.is_empty()
    }

    pub fn count(&self, o: usize) -> u64 {
        self.count[o]
    }

    pub fn mean(&self, o: usize) -> T {
        self.mean[o]
    }

    pub fn means(&self) -> &[T] {
        &self.mean
    }

    pub fn counts(&self) -> &[u64] {
        &self.count
    }

    pub fn total_updates(&self) -> u64 {
        self.count.iter().sum()
    }

    /// Credits `reward` to action `o` with an incremental mean update.
    pub fn record(&mut self, o: usize, reward: T) {
        self.count[o] += 1;
        let c = T::from_u64(self.count[o]).expect("count fits the float type");
        self.mean[o] = self.mean[o] + (reward - self.mean[o]) / c;
    }

    /// Builds a table directly from means, with every action counted once.
    pub fn from_means(means: Vec<T>) -> Self {
        Self {
            count: vec![1; means.len()],
            mean: means,
        }
    }

    /// Index of the highest mean, ties broken uniformly at random.
    pub fn argmax<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let best = self
            .mean
            .iter()
            .copied()
            .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
        let ties: Vec<usize> = (0..self.mean.len()).filter(|&o| self.mean[o] == best).collect();
        match ties.len() {
            0 => rng.gen_range(0..self.mean.len()),
            1 => ties[0],
            m => ties[rng.gen_range(0..m)],
        }
    }
}

/// Exploration probability at iteration `t` (1-based).
pub fn epsilon(t: u64) -> f64 {
    1.0 / (t as f64).sqrt()
}

/// The instantaneous local reward is the achieved rate itself.
#[inline]
pub fn local_reward<T: Real>(rate_bps: T) -> T {
    rate_bps
}

/// Minimum over the AP's own reward and the rewards shared by its neighbours.
pub fn global_reward<T: Real>(own_instant: T, neighbor_instants: &[T]) -> T {
    neighbor_instants.iter().copied().fold(own_instant, T::min)
}

/// [`global_reward`] with the own-reward term optionally excluded. An AP
/// with no neighbours always falls back to its own reward.
pub fn global_reward_with<T: Real>(cfg: &GlobalRewardConfig, own: T, neighbors: &[T]) -> T {
    if cfg.include_self || neighbors.is_empty() {
        global_reward(own, neighbors)
    } else {
        neighbors[1..].iter().copied().fold(neighbors[0], T::min)
    }
}

/// One AP's policy and learning state.
#[derive(Debug, Clone)]
pub struct AgentState<T = f64> {
    pub ap_index: usize,
    pub strategy: Strategy,
    pub local_table: RewardTable<T>,
    pub global_table: Option<RewardTable<T>>,
    last_action: Option<LinkSet>,
    last_explored: bool,
    rng: Stream,
}

impl<T: Real> AgentState<T> {
    pub fn new(ap_index: usize, strategy: Strategy, space: &ActionSpace, rng: Stream) -> Self {
        Self {
            ap_index,
            strategy,
            local_table: RewardTable::new(space.len()),
            global_table: strategy.is_federated().then(|| RewardTable::new(space.len())),
            last_action: None,
            last_explored: false,
            rng,
        }
    }

    pub fn last_action(&self) -> Option<LinkSet> {
        self.last_action
    }

    /// Whether the last learning-policy selection was an exploration step.
    pub fn last_explored(&self) -> bool {
        self.last_explored
    }

    /// The table the policy exploits: global for federated agents, local otherwise.
    pub fn decision_table(&self) -> &RewardTable<T> {
        self.global_table.as_ref().unwrap_or(&self.local_table)
    }

    /// Picks this iteration's link set. `t` starts at 1.
    pub fn select_action(&mut self, space: &ActionSpace, t: u64) -> LinkSet {
        assert!(t >= 1, "iterations are numbered from 1");
        let p = space.len();
        let action = match self.strategy {
            Strategy::Fixed => {
                self.last_explored = false;
                space.full()
            }
            Strategy::Random => {
                self.last_explored = true;
                space.get(self.rng.gen_range(0..p))
            }
            Strategy::LocalRl | Strategy::FederatedRl => {
                self.last_explored = self.rng.gen::<f64>() < epsilon(t);
                let o = if self.last_explored {
                    self.rng.gen_range(0..p)
                } else {
                    let table = self.global_table.as_ref().unwrap_or(&self.local_table);
                    table.argmax(&mut self.rng)
                };
                space.get(o)
            }
        };
        self.last_action = Some(action);
        action
    }

    /// Exploitation-only choice, for inspecting the learned policy.
    pub fn exploit(&mut self, space: &ActionSpace) -> LinkSet {
        let table = self.global_table.as_ref().unwrap_or(&self.local_table);
        space.get(table.argmax(&mut self.rng))
    }

    /// Credits the rewards for the last selected action.
    ///
    /// Federated agents must receive a global reward; other strategies
    /// ignore it. Fixed and random agents still keep local statistics for
    /// reporting.
    pub fn update(
        &mut self,
        space: &ActionSpace,
        action: LinkSet,
        local_r: T,
        global_r: Option<T>,
    ) -> Result<()> {
        if self.last_action != Some(action) {
            return Err(Error::Contract(format!(
                "AP {} updated with {action} but last selected {:?}",
                self.ap_index, self.last_action
            )));
        }
        let o = space
            .index_of(action)
            .ok_or_else(|| Error::Contract(format!("{action} is not in the action space")))?;
        if let Some(table) = self.global_table.as_mut() {
            let g = global_r.ok_or_else(|| {
                Error::Contract(format!("federated AP {} got no global reward", self.ap_index))
            })?;
            table.record(o, g);
        }
        self.local_table.record(o, local_r);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    fn agent(strategy: Strategy, k: usize, s: u64) -> (AgentState, ActionSpace) {
        let space = ActionSpace::enumerate(k).unwrap();
        (AgentState::new(0, strategy, &space, seed::stream(s)), space)
    }

    #[test]
    fn action_space_sizes_and_order() {
        assert_eq!(enumerate_actions(4).unwrap().len(), 15);
        let one = enumerate_actions(1).unwrap();
        assert_eq!(one.actions(), &[LinkSet::single(0)]);
        let two = enumerate_actions(2).unwrap();
        let masks: Vec<u16> = two.actions().iter().map(|a| a.mask()).collect();
        assert_eq!(masks, vec![0b01, 0b10, 0b11]);
        assert_eq!(enumerate_actions(16).unwrap().len(), 65535);
        assert!(enumerate_actions(0).is_err());
        assert!(enumerate_actions(17).is_err());
        let four = enumerate_actions(4).unwrap();
        assert!(four.actions().iter().all(|a| !a.is_empty()));
        assert!(four.actions().contains(&LinkSet::full(4)));
        assert_eq!(four.index_of(LinkSet::full(4)), Some(14));
        assert_eq!(four.index_of(LinkSet::EMPTY), None);
    }

    #[test]
    fn fixed_always_full() {
        let (mut a, space) = agent(Strategy::Fixed, 4, 1);
        for t in 1..=50 {
            let act = a.select_action(&space, t);
            assert_eq!(act.mask(), 0b1111);
            a.update(&space, act, (t as f64) * 3.0, None).unwrap();
        }
    }

    #[test]
    fn first_iteration_always_explores() {
        for s in 0..200 {
            let (mut a, space) = agent(Strategy::LocalRl, 4, s);
            a.local_table = RewardTable::from_means((0..15).map(|o| o as f64).collect());
            a.select_action(&space, 1);
            assert!(a.last_explored());
        }
    }

    #[test]
    fn random_is_roughly_uniform() {
        let (mut a, space) = agent(Strategy::Random, 2, 9);
        let mut hits = [0u32; 3];
        for t in 1..=30_000 {
            hits[space.index_of(a.select_action(&space, t)).unwrap()] += 1;
        }
        for h in hits {
            assert!((h as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.015, "{hits:?}");
        }
    }

    #[test]
    fn exploitation_ties_split_evenly() {
        let table = RewardTable::from_means(vec![5e6, 9e6, 9e6]);
        let mut rng = seed::stream(11);
        let trials = 10_000;
        let mut hits = [0u32; 3];
        for _ in 0..trials {
            hits[table.argmax(&mut rng)] += 1;
        }
        assert_eq!(hits[0], 0);
        for h in &hits[1..] {
            assert!((*h as f64 / trials as f64 - 0.5).abs() <= 0.03, "{hits:?}");
        }
    }

    #[test]
    fn local_reward_is_identity() {
        assert_eq!(local_reward(865.9e6), 865.9e6);
        assert_eq!(local_reward(0.0), 0.0);
        let r = 123.456_789_f64;
        assert_eq!(local_reward(r).to_bits(), r.to_bits());
    }

    #[test]
    fn global_reward_examples() {
        assert_eq!(global_reward(300e6, &[150e6, 420e6]), 150e6);
        assert_eq!(global_reward(100.0, &[]), 100.0);
        let excl = GlobalRewardConfig { include_self: false, ..Default::default() };
        assert_eq!(global_reward_with(&excl, 100.0, &[150.0, 420.0]), 150.0);
        assert_eq!(global_reward_with(&excl, 100.0, &[]), 100.0);
        assert_eq!(global_reward_with(&GlobalRewardConfig::default(), 100.0, &[150.0]), 100.0);
    }

    #[test]
    fn update_examples() {
        let (mut a, space) = agent(Strategy::LocalRl, 2, 3);
        let act = a.select_action(&space, 1);
        let o = space.index_of(act).unwrap();
        a.update(&space, act, 10.0, None).unwrap();
        assert_eq!((a.local_table.count(o), a.local_table.mean(o)), (1, 10.0));
        a.update(&space, act, 20.0, None).unwrap();
        assert_eq!((a.local_table.count(o), a.local_table.mean(o)), (2, 15.0));
        let other = space.actions().iter().copied().find(|&x| x != act).unwrap();
        assert!(matches!(a.update(&space, other, 1.0, None), Err(Error::Contract(_))));
    }

    #[test]
    fn federated_updates_both_tables() {
        let (mut a, space) = agent(Strategy::FederatedRl, 2, 3);
        let act = a.select_action(&space, 1);
        let o = space.index_of(act).unwrap();
        assert!(a.update(&space, act, 10.0, None).is_err());
        a.update(&space, act, 10.0, Some(4.0)).unwrap();
        assert_eq!(a.local_table.mean(o), 10.0);
        assert_eq!(a.global_table.as_ref().unwrap().mean(o), 4.0);
        assert_eq!(a.decision_table().mean(o), 4.0);
    }

    #[test]
    fn federated_exploits_global_table() {
        let (mut a, space) = agent(Strategy::FederatedRl, 2, 5);
        a.local_table = RewardTable::from_means(vec![9.0, 1.0, 1.0]);
        a.global_table = Some(RewardTable::from_means(vec![1.0, 1.0, 9.0]));
        for _ in 0..100 {
            assert_eq!(a.exploit(&space).mask(), 0b11);
        }
    }

    #[test]
    fn unvisited_actions_start_at_zero() {
        let t: RewardTable = RewardTable::new(15);
        assert!(t.counts().iter().all(|&c| c == 0));
        assert!(t.means().iter().all(|&m| m == 0.0));
        assert_eq!(t.total_updates(), 0);
    }

    #[test]
    fn table_json_is_keyed_by_mask() {
        let mut t: RewardTable = RewardTable::new(3);
        t.record(2, 7.5);
        let text = serde_json::to_string(&t).unwrap();
        assert_eq!(
            text,
            r#"{"1":{"count":0,"mean":0.0},"2":{"count":0,"mean":0.0},"3":{"count":1,"mean":7.5}}"#
        );
        let back: RewardTable = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<RewardTable>(r#"{"1":{"count":0,"mean":0.0},"3":{"count":0,"mean":0.0}}"#).is_err());
    }

    #[test]
    fn strategy_tags_parse() {
        for s in Strategy::ALL {
            assert_eq!(s.tag().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.tag()));
        }
        assert!("ucb".parse::<Strategy>().is_err());
    }

    // Exploration steps at iteration t occur with probability 1/sqrt(t).
    // Iterations are binned so each bin's expected count is large, then a
    // chi-square statistic over the bins is compared with the 1% critical value.
    #[test]
    fn exploration_frequency_follows_inverse_sqrt() {
        let (mut a, space) = agent(Strategy::LocalRl, 4, 2024);
        a.local_table = RewardTable::from_means((0..15).map(|o| o as f64).collect());
        let horizon = 10_000u64;
        let edges = [1u64, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10_001];
        let mut observed = vec![0f64; edges.len() - 1];
        let mut expected = vec![0f64; edges.len() - 1];
        for t in 1..=horizon {
            a.select_action(&space, t);
            let b = edges.windows(2).position(|w| t >= w[0] && t < w[1]).unwrap();
            expected[b] += epsilon(t);
            if a.last_explored() {
                observed[b] += 1.0;
            }
        }
        // Bin 0 holds only t = 1, which always explores.
        let chi2: f64 = observed
            .iter()
            .zip(&expected)
            .skip(1)
            .map(|(o, e)| (o - e).powi(2) / e)
            .sum();
        assert_eq!(observed[0], 1.0);
        // 11 degrees of freedom, alpha = 0.01.
        assert!(chi2 < 24.725, "chi2 = {chi2}, observed {observed:?}, expected {expected:?}");
    }

    proptest! {
        #[test]
        fn incremental_mean_equals_batch_mean(rewards in proptest::collection::vec(0.0f64..2e9, 1..1000)) {
            let mut t: RewardTable = RewardTable::new(1);
            for &r in &rewards {
                t.record(0, r);
            }
            let batch = rewards.iter().sum::<f64>() / rewards.len() as f64;
            prop_assert_eq!(t.count(0), rewards.len() as u64);
            prop_assert!((t.mean(0) - batch).abs() <= 1e-9 * batch.abs().max(1e-300));
        }

        #[test]
        fn argmax_is_scale_invariant(means in proptest::collection::vec(0u32..20, 3..16), scale in 1e-3f64..1e6, s in any::<u64>()) {
            let base: Vec<f64> = means.iter().map(|&m| m as f64).collect();
            let scaled: Vec<f64> = base.iter().map(|m| m * scale).collect();
            let a = RewardTable::from_means(base);
            let b = RewardTable::from_means(scaled);
            let mut ra = seed::stream(s);
            let mut rb = seed::stream(s);
            for _ in 0..20 {
                prop_assert_eq!(a.argmax(&mut ra), b.argmax(&mut rb));
            }
        }

        #[test]
        fn counts_sum_to_updates(choices in proptest::collection::vec(0usize..15, 0..500)) {
            let mut t: RewardTable = RewardTable::new(15);
            for &o in &choices {
                t.record(o, 1.0);
            }
            prop_assert_eq!(t.total_updates(), choices.len() as u64);
        }

        #[test]
        fn federated_reward_never_exceeds_own(own in 0.0f64..1e9, others in proptest::collection::vec(0.0f64..1e9, 0..10)) {
            prop_assert!(global_reward(own, &others) <= own);
        }
    }
}
