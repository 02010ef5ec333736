//! Exact finite MDP over truncated queue lengths and channel states.
//!
//! A state is the vector of transmission queues `Q_i ≤ q_max`, computing
//! queues `K_ij ≤ k_max` and per-link channel indices; an action fixes every
//! MD's (ES, power level) choice and every ES's core split. The kernel
//! mirrors [`crate::dynamics::step`] under `queue_caps`, so a solved policy
//! can be replayed in the simulator on the same truncated dynamics.
//!
//! ```text
//! MdpSpec ──enumerate_states──▶ StateSpace
//!    │                              │
//!    └──build_transition_model──▶ TransitionModel ──value_iteration──▶ SolvedPolicy
//!                                   │
//!                                   └──brute_force_best_policy (tests)
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{hash_json, validate_config, ArrivalKind, ConfigError, QueueCaps, ScenarioConfig, ValidatedConfig};

mod kernel;
mod oracle;
mod policy;
mod solve;
mod space;

pub use kernel::{build_transition_model, TransitionModel};
pub use oracle::{brute_force_best_policy, evaluate_policy_exact, policy_iteration, OracleResult};
pub use policy::{SolvedPolicy, SolvedPolicyError};
pub use kernel::build_transition_model_with;
pub use solve::{evaluate_policy, iterate, predicted_average_reward, value_iteration, value_iteration_with};
pub use space::{enumerate_actions, enumerate_states, ActionSpace, MdpAction, StateSpace};

pub const DEFAULT_STATE_CAP: u64 = 2_000_000;
pub const ACTION_CAP: u64 = 10_000;
pub const DEFAULT_MAX_ITERATIONS: u64 = 1_000_000;
/// Upper bound on stored kernel entries (successor, probability pairs).
pub const KERNEL_ENTRY_CAP: u64 = 50_000_000;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("state space has {count:.6e} states, cap is {cap}; lower q_max/k_max or the number of MDs, ESs or channel states")]
    StateSpaceTooLarge { count: f64, cap: u64 },
    #[error("action space has {count:.6e} actions, cap is {cap}; lower the number of power levels or cores")]
    ActionSpaceTooLarge { count: f64, cap: u64 },
    #[error("transition model would hold about {entries:.3e} entries, cap is {cap}")]
    ModelTooLarge { entries: f64, cap: u64 },
    #[error("MDP instance unsupported: {0}")]
    Unsupported(String),
    #[error("value iteration did not reach residual {epsilon} within {iterations} iterations (residual {residual})")]
    NonConvergence { iterations: u64, residual: f64, epsilon: f64 },
    #[error("oracle would enumerate {candidates:.3e} policies over {states} states")]
    OracleTooLarge { candidates: f64, states: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// Tasks completed at the servers this slot.
    #[default]
    Completions,
    /// Expected arrivals accepted into a transmission queue this slot.
    AdmittedThroughput,
}

fn default_gamma() -> f64 {
    0.95
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_state_cap() -> u64 {
    DEFAULT_STATE_CAP
}

fn default_max_iterations() -> u64 {
    DEFAULT_MAX_ITERATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSpec {
    pub base: ScenarioConfig,
    pub q_max: u32,
    pub k_max: u32,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub reward_kind: RewardKind,
    #[serde(default = "default_state_cap")]
    pub state_cap: u64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u64,
}

impl MdpSpec {
    pub fn new(base: ScenarioConfig, q_max: u32, k_max: u32) -> Self {
        MdpSpec {
            base,
            q_max,
            k_max,
            gamma: default_gamma(),
            epsilon: default_epsilon(),
            reward_kind: RewardKind::Completions,
            state_cap: DEFAULT_STATE_CAP,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn hash(&self) -> String {
        hash_json(self)
    }

    pub fn caps(&self) -> QueueCaps {
        QueueCaps {
            q_max: self.q_max,
            k_max: self.k_max,
        }
    }

    /// The base scenario with `queue_caps` set to this spec's truncation, so
    /// the simulator runs exactly the modeled dynamics.
    pub fn truncated_base(&self) -> ScenarioConfig {
        let mut c = self.base.clone();
        c.queue_caps = Some(self.caps());
        c
    }

    /// Check sizes first, then the modeling restrictions.
    pub fn validate(&self) -> Result<ValidatedConfig, MdpError> {
        let cfg = validate_config(self.base.clone())?;
        let count = state_count(&cfg, self.q_max, self.k_max);
        if count > self.state_cap as f64 {
            return Err(MdpError::StateSpaceTooLarge {
                count,
                cap: self.state_cap,
            });
        }
        let actions = action_count(&cfg);
        if actions > ACTION_CAP as f64 {
            return Err(MdpError::ActionSpaceTooLarge {
                count: actions,
                cap: ACTION_CAP,
            });
        }
        let unsupported = |m: &str| Err(MdpError::Unsupported(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return unsupported("gamma must lie in (0, 1)");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return unsupported("epsilon must be finite and > 0");
        }
        if self.q_max < 1 || self.k_max < 1 {
            return unsupported("q_max and k_max must be at least 1");
        }
        let c = &cfg.cfg;
        if c.deadline_slots != 0 {
            return unsupported("deadline_slots must be 0 (task ages are not part of the state)");
        }
        if c.arrival_kind != ArrivalKind::Bernoulli {
            return unsupported("arrivals must be Bernoulli");
        }
        if !c.backhaul_links.is_empty() {
            return unsupported("backhaul links are not modeled");
        }
        if c.local_compute.is_some() {
            return unsupported("local computing is not modeled");
        }
        if c.queue_caps.is_some_and(|caps| caps != self.caps()) {
            return unsupported("scenario queue_caps differ from q_max/k_max");
        }
        Ok(cfg)
    }
}

/// Π(q_max+1)·Π(k_max+1)·Π|channel states|, as a float so that huge
/// instances report a count instead of overflowing.
pub fn state_count(cfg: &ValidatedConfig, q_max: u32, k_max: u32) -> f64 {
    let (u, j) = (cfg.num_mds() as i32, cfg.num_ess() as i32);
    let ch = cfg.cfg.channel_states.num_states() as f64;
    (q_max as f64 + 1.0).powi(u) * (k_max as f64 + 1.0).powi(u * j) * ch.powi(u * j)
}

/// (1 + J·(levels−1))^U per-MD choices times the core splits of every ES.
pub fn action_count(cfg: &ValidatedConfig) -> f64 {
    let (u, j) = (cfg.num_mds() as i32, cfg.num_ess() as f64);
    let levels = cfg.cfg.power_levels.len() as f64 - 1.0;
    let md = (1.0 + j * levels).powi(u);
    let cores: f64 = cfg
        .cores
        .iter()
        // splits of at most M cores over U MDs: C(M + U, U)
        .map(|&m| binomial(m as u64 + u as u64, u as u64))
        .product();
    md * cores
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Build the model and run value iteration in one call.
pub fn solve(spec: &MdpSpec) -> Result<SolvedPolicy, MdpError> {
    let model = build_transition_model(spec)?;
    value_iteration(spec, &model)
}
