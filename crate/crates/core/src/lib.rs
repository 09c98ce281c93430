//! Multi-link Wi-Fi link-activation simulator.
//!
//! A set of access points, each serving one station over up to `k` shared
//! radio links, repeatedly decide which subset of links to activate. Four
//! policies are provided: all links always on, uniformly random subsets, a
//! local ε-greedy bandit rewarded by the AP's own rate, and a federated
//! variant rewarded by the worst rate among the AP and its neighbours.
//!
//! The numeric core (`scenario`, `radio`, `agents`, `engine`) is generic
//! over the floating-point type; the aliases below fix it to `f64`, which is
//! what the batch harness and CLI use.

pub mod agents;
pub mod engine;
pub mod error;
pub mod harness;
pub mod radio;
pub mod real;
pub mod scenario;
pub mod seed;

pub use agents::{ActionSpace, GlobalRewardConfig, Strategy};
pub use error::{Error, Result};
pub use radio::{ActivationProfile, LinkSet};
pub use real::Real;

pub type PhysicalConfig = scenario::PhysicalConfig<f64>;
pub type Scenario = scenario::Scenario<f64>;
pub type Point = scenario::Point<f64>;
pub type RewardTable = agents::RewardTable<f64>;
pub type AgentState = agents::AgentState<f64>;
pub type IterationRecord = engine::IterationRecord<f64>;
pub type RunResult = engine::RunResult<f64>;
pub type LinkBudget = radio::LinkBudget<f64>;

pub type PhysicalConfigF32 = scenario::PhysicalConfig<f32>;
pub type ScenarioF32 = scenario::Scenario<f32>;
pub type RunResultF32 = engine::RunResult<f32>;
