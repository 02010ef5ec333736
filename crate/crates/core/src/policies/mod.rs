//! Per-slot decision makers mapping a [`SystemState`] to an [`Action`].
//!
//! Policies are pure: the same state, configuration and slot always yield the
//! same action. Randomized policies draw from the slot's policy stream.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::ValidatedConfig;
use crate::mdp::{SolvedPolicy, SolvedPolicyError};
use crate::model::{Action, SystemState};

mod backpressure;
mod baselines;
mod local;
mod random;

pub use backpressure::{decide_backpressure, select_best, Candidate};
pub use baselines::{decide_computation_based, decide_transmission_based};
pub use local::{admit_count, decide_local_offload_threshold};
pub use random::decide_random_feasible;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy `{0}` (expected transmission, computation, backpressure, random, local_threshold or mdp)")]
    Unknown(String),
    #[error("policy `{policy}`: {reason}")]
    BadParam { policy: String, reason: String },
    #[error("local_threshold policy requires `local_compute` in the scenario")]
    LocalComputeDisabled,
    #[error(transparent)]
    Solved(#[from] SolvedPolicyError),
}

/// Policy selection with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyId {
    /// Best instantaneous link at full power; computing load ignored.
    TransmissionBased,
    /// Least-loaded server at full power; channel quality ignored.
    ComputationBased,
    /// Differential-backlog max-weight with energy penalty weight `v`.
    Backpressure { v: f64 },
    RandomFeasible,
    /// Arrivals go local while the local queue is below `theta`.
    LocalOffloadThreshold { theta: f64, v: f64 },
    /// Table lookup in a solved MDP policy file.
    Solved { path: String },
}

impl PolicyId {
    pub fn parse(
        id: &str,
        params: &BTreeMap<String, f64>,
        policy_file: Option<&str>,
    ) -> Result<Self, PolicyError> {
        let bad = |reason: String| PolicyError::BadParam {
            policy: id.to_string(),
            reason,
        };
        let allow = |keys: &[&str]| -> Result<(), PolicyError> {
            match params.keys().find(|k| !keys.contains(&k.as_str())) {
                Some(k) => Err(bad(format!("unknown parameter `{k}`"))),
                None => Ok(()),
            }
        };
        let v = || -> Result<f64, PolicyError> {
            let v = params.get("V").or_else(|| params.get("v")).copied().unwrap_or(0.0);
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(bad(format!("V = {v} must be finite and >= 0")))
            }
        };
        match id {
            "transmission" | "transmission_based" => {
                allow(&[])?;
                Ok(PolicyId::TransmissionBased)
            }
            "computation" | "computation_based" => {
                allow(&[])?;
                Ok(PolicyId::ComputationBased)
            }
            "backpressure" | "lyapunov" => {
                allow(&["V", "v"])?;
                Ok(PolicyId::Backpressure { v: v()? })
            }
            "random" | "random_feasible" => {
                allow(&[])?;
                Ok(PolicyId::RandomFeasible)
            }
            "local_threshold" => {
                allow(&["V", "v", "theta"])?;
                let theta = *params
                    .get("theta")
                    .ok_or_else(|| bad("missing parameter `theta`".into()))?;
                if theta.is_nan() || theta < 0.0 {
                    return Err(bad(format!("theta = {theta} must be >= 0")));
                }
                Ok(PolicyId::LocalOffloadThreshold { theta, v: v()? })
            }
            "mdp" | "solved" => {
                allow(&[])?;
                let path = policy_file.ok_or_else(|| bad("requires `policy_file`".into()))?;
                Ok(PolicyId::Solved { path: path.to_string() })
            }
            other => Err(PolicyError::Unknown(other.to_string())),
        }
    }

    pub fn from_config(cfg: &ValidatedConfig) -> Result<Self, PolicyError> {
        let c = &cfg.cfg;
        Self::parse(&c.policy_id, &c.policy_params, c.policy_file.as_deref())
    }

    pub fn label(&self) -> &'static str {
        match self {
            PolicyId::TransmissionBased => "transmission",
            PolicyId::ComputationBased => "computation",
            PolicyId::Backpressure { .. } => "backpressure",
            PolicyId::RandomFeasible => "random",
            PolicyId::LocalOffloadThreshold { .. } => "local_threshold",
            PolicyId::Solved { .. } => "mdp",
        }
    }

    /// Drift-penalty weight, for policies that have one.
    pub fn v(&self) -> Option<f64> {
        match self {
            PolicyId::Backpressure { v } | PolicyId::LocalOffloadThreshold { v, .. } => Some(*v),
            _ => None,
        }
    }
}

pub trait Policy: Send + Sync {
    fn id(&self) -> &PolicyId;
    fn decide(&self, state: &SystemState, cfg: &ValidatedConfig) -> Action;
}

struct Heuristic {
    id: PolicyId,
}

impl Policy for Heuristic {
    fn id(&self) -> &PolicyId {
        &self.id
    }

    fn decide(&self, state: &SystemState, cfg: &ValidatedConfig) -> Action {
        match &self.id {
            PolicyId::TransmissionBased => decide_transmission_based(state, cfg),
            PolicyId::ComputationBased => decide_computation_based(state, cfg),
            PolicyId::Backpressure { v } => decide_backpressure(state, cfg, *v),
            PolicyId::RandomFeasible => decide_random_feasible(state, cfg),
            PolicyId::LocalOffloadThreshold { theta, v } => {
                decide_local_offload_threshold(state, cfg, *theta, *v)
            }
            PolicyId::Solved { .. } => unreachable!("solved policies are table lookups"),
        }
    }
}

pub(crate) struct SolvedLookup {
    id: PolicyId,
    table: SolvedPolicy,
}

impl Policy for SolvedLookup {
    fn id(&self) -> &PolicyId {
        &self.id
    }

    fn decide(&self, state: &SystemState, _cfg: &ValidatedConfig) -> Action {
        self.table.decide_unchecked(state)
    }
}

/// Instantiate a policy for a validated scenario.
pub fn build_policy(id: PolicyId, cfg: &ValidatedConfig) -> Result<Box<dyn Policy>, PolicyError> {
    match &id {
        PolicyId::LocalOffloadThreshold { .. } if cfg.cfg.local_compute.is_none() => {
            Err(PolicyError::LocalComputeDisabled)
        }
        PolicyId::Solved { path } => {
            let table = SolvedPolicy::load(path)?;
            table.check_compatible(cfg)?;
            Ok(Box::new(SolvedLookup { id, table }))
        }
        _ => Ok(Box::new(Heuristic { id })),
    }
}

/// Wrap an in-memory solved policy after checking it fits `cfg`.
pub fn solved_policy(table: SolvedPolicy, cfg: &ValidatedConfig) -> Result<Box<dyn Policy>, PolicyError> {
    table.check_compatible(cfg)?;
    Ok(Box::new(SolvedLookup {
        id: PolicyId::Solved { path: String::new() },
        table,
    }))
}

/// MDs ordered by descending K_ij at `es`, ties to the lowest index.
fn by_backlog_desc(state: &SystemState, es: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..state.num_mds).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(state.k(i, es)), i));
    order
}

/// Even integer split of `cores` over all MDs; the remainder goes to the
/// largest queues.
pub(crate) fn even_split_cores(state: &SystemState, es: usize, cores: u32) -> Vec<u32> {
    let u = state.num_mds as u32;
    let mut alloc = vec![cores / u; state.num_mds];
    for &i in by_backlog_desc(state, es).iter().take((cores % u) as usize) {
        alloc[i] += 1;
    }
    alloc
}

/// Walk queues from the largest backlog down, giving each the cores it needs
/// to drain this slot until none are left.
pub(crate) fn backlog_first_cores(state: &SystemState, es: usize, cores: u32, per_core: u32) -> Vec<u32> {
    let mut alloc = vec![0; state.num_mds];
    let mut left = cores;
    for i in by_backlog_desc(state, es) {
        let k = state.k(i, es);
        if left == 0 || k == 0 {
            break;
        }
        let need = if per_core == 0 { left } else { k.div_ceil(per_core) };
        let give = need.min(left);
        alloc[i] = give;
        left -= give;
    }
    alloc
}

/// One core at a time to the queue with the largest backlog not yet covered
/// by already-assigned cores; stops once every backlog is covered.
pub(crate) fn greedy_cores(state: &SystemState, es: usize, cores: u32, per_core: u32) -> Vec<u32> {
    let mut alloc = vec![0u32; state.num_mds];
    let mut remaining: Vec<i64> = (0..state.num_mds).map(|i| state.k(i, es) as i64).collect();
    for _ in 0..cores {
        let best = (0..state.num_mds).max_by_key(|&i| (remaining[i], std::cmp::Reverse(i)));
        match best {
            Some(i) if remaining[i] > 0 => {
                alloc[i] += 1;
                remaining[i] -= per_core.max(1) as i64;
            }
            _ => break,
        }
    }
    alloc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn parse_ids_and_params() {
        assert_eq!(
            PolicyId::parse("backpressure", &params(&[("V", 2.0)]), None).unwrap(),
            PolicyId::Backpressure { v: 2.0 }
        );
        assert_eq!(
            PolicyId::parse("lyapunov", &params(&[]), None).unwrap(),
            PolicyId::Backpressure { v: 0.0 }
        );
        assert!(PolicyId::parse("backpressure", &params(&[("V", -1.0)]), None).is_err());
        assert!(PolicyId::parse("transmission", &params(&[("V", 1.0)]), None).is_err());
        assert!(PolicyId::parse("local_threshold", &params(&[]), None).is_err());
        assert!(matches!(
            PolicyId::parse("greedy", &params(&[]), None),
            Err(PolicyError::Unknown(_))
        ));
        assert!(PolicyId::parse("mdp", &params(&[]), None).is_err());
        assert_eq!(
            PolicyId::parse("mdp", &params(&[]), Some("p.json")).unwrap().label(),
            "mdp"
        );
    }

    #[test]
    fn core_split_rules() {
        let s = SystemState::from_counts(3, 1, 0, &[0, 0, 0], &[1, 5, 5], &[0; 3]);
        assert_eq!(even_split_cores(&s, 0, 7), vec![2, 3, 2]);
        assert_eq!(backlog_first_cores(&s, 0, 3, 4), vec![0, 2, 1]);
        assert_eq!(backlog_first_cores(&s, 0, 10, 4), vec![1, 2, 2]);
        assert_eq!(greedy_cores(&s, 0, 3, 4), vec![1, 1, 1]);
        assert_eq!(greedy_cores(&s, 0, 10, 4), vec![1, 2, 2]);
        let empty = SystemState::new(2, 1);
        assert_eq!(greedy_cores(&empty, 0, 4, 1), vec![0, 0]);
        assert_eq!(even_split_cores(&empty, 0, 4), vec![2, 2]);
    }
}
