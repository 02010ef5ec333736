use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ValidatedConfig;
use crate::model::{Action, SystemState};

use super::kernel::TransitionModel;
use super::space::{enumerate_actions, state_space, ActionSpace, StateSpace};
use super::MdpSpec;

#[derive(Debug, Error)]
pub enum SolvedPolicyError {
    #[error("cannot access policy file `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse policy file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("policy file is inconsistent: {0}")]
    Corrupt(String),
    #[error("policy was solved for scenario hash {expected}, this scenario hashes to {found}")]
    SpecMismatch { expected: String, found: String },
}

/// On-disk form of a solved policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PolicyFile {
    spec: MdpSpec,
    spec_hash: String,
    config_hash: String,
    iterations: u64,
    residual: f64,
    residual_history: Vec<f64>,
    policy: Vec<u32>,
    values: Vec<f64>,
}

/// Greedy policy table with its value function and solve metadata.
#[derive(Debug, Clone)]
pub struct SolvedPolicy {
    file: PolicyFile,
    states: StateSpace,
    actions: ActionSpace,
}

impl SolvedPolicy {
    pub(crate) fn new(
        spec: MdpSpec,
        model: &TransitionModel,
        policy: Vec<u32>,
        values: Vec<f64>,
        iterations: u64,
        residual_history: Vec<f64>,
    ) -> Self {
        SolvedPolicy {
            file: PolicyFile {
                spec_hash: spec.hash(),
                config_hash: spec.base.dynamics_hash(),
                residual: residual_history.last().copied().unwrap_or(0.0),
                spec,
                iterations,
                residual_history,
                policy,
                values,
            },
            states: model.states.clone(),
            actions: model.actions.clone(),
        }
    }

    pub fn spec(&self) -> &MdpSpec {
        &self.file.spec
    }

    pub fn spec_hash(&self) -> &str {
        &self.file.spec_hash
    }

    pub fn policy(&self) -> &[u32] {
        &self.file.policy
    }

    pub fn values(&self) -> &[f64] {
        &self.file.values
    }

    pub fn iterations(&self) -> u64 {
        self.file.iterations
    }

    pub fn residual(&self) -> f64 {
        self.file.residual
    }

    pub fn residual_history(&self) -> &[f64] {
        &self.file.residual_history
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.file).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SolvedPolicyError> {
        let file: PolicyFile = serde_json::from_str(text)?;
        let corrupt = |m: String| Err(SolvedPolicyError::Corrupt(m));
        if file.spec.hash() != file.spec_hash {
            return corrupt("embedded spec does not match its hash".into());
        }
        if file.spec.base.dynamics_hash() != file.config_hash {
            return corrupt("embedded scenario does not match its hash".into());
        }
        let cfg = file
            .spec
            .validate()
            .map_err(|e| SolvedPolicyError::Corrupt(format!("embedded spec is invalid: {e}")))?;
        let states = state_space(&cfg, &file.spec);
        let actions = enumerate_actions(&cfg);
        if file.policy.len() != states.len() || file.values.len() != states.len() {
            return corrupt(format!("table has {} entries for {} states", file.policy.len(), states.len()));
        }
        if let Some(a) = file.policy.iter().find(|&&a| a as usize >= actions.len()) {
            return corrupt(format!("action index {a} out of range ({} actions)", actions.len()));
        }
        Ok(SolvedPolicy { file, states, actions })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SolvedPolicyError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| SolvedPolicyError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SolvedPolicyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SolvedPolicyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Fails with `SpecMismatch` unless `cfg` has the dynamics this policy
    /// was solved for.
    pub fn check_compatible(&self, cfg: &ValidatedConfig) -> Result<(), SolvedPolicyError> {
        let found = cfg.cfg.dynamics_hash();
        if found != self.file.config_hash {
            return Err(SolvedPolicyError::SpecMismatch {
                expected: self.file.config_hash.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn action_index(&self, state: &SystemState) -> usize {
        self.file.policy[self.states.index_clamped(state)] as usize
    }

    /// Stored action for `state` with queues clamped to the caps. The caller
    /// is responsible for having checked compatibility.
    pub fn decide_unchecked(&self, state: &SystemState) -> Action {
        self.actions.to_action(self.action_index(state))
    }

    pub fn decide(&self, state: &SystemState, cfg: &ValidatedConfig) -> Result<Action, SolvedPolicyError> {
        self.check_compatible(cfg)?;
        Ok(self.decide_unchecked(state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;
    use crate::mdp::solve;
    use crate::mdp::tests::unit_spec;

    fn solved() -> SolvedPolicy {
        solve(&unit_spec(0.6, 2, 2)).unwrap()
    }

    #[test]
    fn lookup_and_clamp() {
        let sol = solved();
        let empty = SystemState::new(1, 1);
        assert_eq!(sol.action_index(&empty), sol.policy()[0] as usize);
        let over = SystemState::from_counts(1, 1, 0, &[9], &[1], &[0]);
        let at = SystemState::from_counts(1, 1, 0, &[2], &[1], &[0]);
        assert_eq!(sol.decide_unchecked(&over), sol.decide_unchecked(&at));
    }

    #[test]
    fn hash_mismatch_is_rejected() {
        let sol = solved();
        let same = validate_config(unit_spec(0.6, 2, 2).base).unwrap();
        sol.check_compatible(&same).unwrap();
        let mut seeded = unit_spec(0.6, 2, 2).base;
        seeded.rng_seed = 99;
        sol.check_compatible(&validate_config(seeded).unwrap()).unwrap();
        let other = validate_config(unit_spec(0.7, 2, 2).base).unwrap();
        assert!(matches!(
            sol.decide(&SystemState::new(1, 1), &other),
            Err(SolvedPolicyError::SpecMismatch { .. })
        ));
    }

    #[test]
    fn file_round_trip_and_tamper_detection() {
        let sol = solved();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        sol.save(&path).unwrap();
        let back = SolvedPolicy::load(&path).unwrap();
        assert_eq!(back.policy(), sol.policy());
        assert_eq!(back.values(), sol.values());
        assert_eq!(back.spec_hash(), sol.spec_hash());

        let text = std::fs::read_to_string(&path).unwrap().replace("\"q_max\":2", "\"q_max\":3");
        assert!(matches!(SolvedPolicy::from_json(&text), Err(SolvedPolicyError::Corrupt(_))));
        assert!(matches!(
            SolvedPolicy::load(dir.path().join("missing.json")),
            Err(SolvedPolicyError::Io { .. })
        ));
    }
}
