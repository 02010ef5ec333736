//! Horizon loop: decide, compose migrations, step, accumulate metrics.

use thiserror::Error;

use crate::config::ValidatedConfig;
use crate::dynamics::{step, SlotRecord, StepError};
use crate::metrics::{MetricsAccumulator, RunSummary};
use crate::model::SystemState;
use crate::multihop::plan_migrations;
use crate::policies::{build_policy, Policy, PolicyError, PolicyId};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Step(#[from] StepError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Overrides the configured horizon; 0 yields an empty run.
    pub horizon: Option<u64>,
    /// Keep every [`SlotRecord`] in the output.
    pub record_slots: bool,
    /// Plan backhaul migrations when links exist.
    pub enable_multihop: bool,
    /// Label carried into the summary.
    pub lambda_multiplier: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            horizon: None,
            record_slots: false,
            enable_multihop: true,
            lambda_multiplier: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub records: Vec<SlotRecord>,
    pub final_state: SystemState,
}

/// Run the policy named in the scenario with default options.
pub fn run_trajectory(cfg: &ValidatedConfig) -> Result<RunOutput, RunError> {
    let policy = build_policy(PolicyId::from_config(cfg)?, cfg)?;
    run_trajectory_with(cfg, policy.as_ref(), &RunOptions::default())
}

pub fn run_trajectory_with(cfg: &ValidatedConfig, policy: &dyn Policy, opts: &RunOptions) -> Result<RunOutput, RunError> {
    let horizon = opts.horizon.unwrap_or(cfg.cfg.horizon);
    let migrate = opts.enable_multihop && !cfg.cfg.backhaul_links.is_empty();
    let mut state = SystemState::initial(cfg);
    let mut acc = MetricsAccumulator::new(cfg);
    let mut records = Vec::new();
    for _ in 0..horizon {
        let mut action = policy.decide(&state, cfg);
        if migrate {
            action.migrate = plan_migrations(&state, cfg, cfg.cfg.migration_threshold);
        }
        let rec = step(&mut state, &action, cfg)?;
        acc.observe(&rec);
        if opts.record_slots {
            records.push(rec);
        }
    }
    let summary = acc.finish(cfg, policy.id(), opts.lambda_multiplier, &state);
    Ok(RunOutput {
        summary,
        records,
        final_state: state,
    })
}
