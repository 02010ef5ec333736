//! Arrival-rate sweeps over policies and seeds, and the bundled presets.
//!
//! Cells run independently (in parallel when enabled) and are merged in
//! `(policy, λ multiplier, seed)` order, so output never depends on
//! scheduling. A failing cell becomes a row with an error message.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{
    validate_config, ChannelModel, ConfigError, LocalCompute, PerNode, Placement, QueueCaps, ScenarioConfig,
    ArrivalKind, BackhaulLink,
};
use crate::exec::{map_indices, ExecMode};
use crate::geometry::Point;
use crate::mdp::{solve, MdpSpec, SolvedPolicy};
use crate::policies::{build_policy, solved_policy, PolicyId};
use crate::report::SweepRow;
use crate::sim::{run_trajectory_with, RunOptions};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

/// A policy entry: a bare id or an id with parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyEntry {
    Name(String),
    Full {
        id: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
        #[serde(default)]
        policy_file: Option<String>,
    },
}

impl PolicyEntry {
    pub fn id(&self) -> &str {
        match self {
            PolicyEntry::Name(id) | PolicyEntry::Full { id, .. } => id,
        }
    }

    fn params(&self) -> BTreeMap<String, f64> {
        match self {
            PolicyEntry::Name(_) => BTreeMap::new(),
            PolicyEntry::Full { params, .. } => params.clone(),
        }
    }

    fn policy_file(&self) -> Option<&str> {
        match self {
            PolicyEntry::Name(_) => None,
            PolicyEntry::Full { policy_file, .. } => policy_file.as_deref(),
        }
    }

    /// An MDP policy to be solved in memory for each multiplier.
    fn solves_in_memory(&self) -> bool {
        matches!(self.id(), "mdp" | "solved") && self.policy_file().is_none()
    }
}

/// Truncation and solver settings for in-memory MDP cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpParams {
    pub q_max: u32,
    pub k_max: u32,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_gamma() -> f64 {
    0.95
}

fn default_epsilon() -> f64 {
    1e-6
}

/// Scenario given by path (relative to the sweep file) or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Path(String),
    Inline(Box<ScenarioConfig>),
}

/// Sweep file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub scenario: ScenarioSource,
    pub lambda_multipliers: Vec<f64>,
    pub policies: Vec<PolicyEntry>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub mdp: Option<MdpParams>,
}

/// A sweep with its scenario loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub base: ScenarioConfig,
    pub lambda_multipliers: Vec<f64>,
    pub policies: Vec<PolicyEntry>,
    pub seeds: Vec<u64>,
    pub horizon: Option<u64>,
    pub mdp: Option<MdpParams>,
    pub out_dir: Option<PathBuf>,
}

impl SweepSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<SweepPlan, SweepError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let spec: SweepSpec = serde_json::from_str(&text).map_err(ConfigError::Parse)?;
        spec.resolve(path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(self, dir: &Path) -> Result<SweepPlan, SweepError> {
        let base = match self.scenario {
            ScenarioSource::Path(p) => ScenarioConfig::load(dir.join(p))?,
            ScenarioSource::Inline(c) => *c,
        };
        let plan = SweepPlan {
            base,
            lambda_multipliers: self.lambda_multipliers,
            policies: self.policies,
            seeds: self.seeds,
            horizon: self.horizon,
            mdp: self.mdp,
            out_dir: self.out_dir.map(|d| dir.join(d)),
        };
        plan.check()?;
        Ok(plan)
    }
}

impl SweepPlan {
    pub fn check(&self) -> Result<(), SweepError> {
        let invalid = |m: &str| Err(SweepError::Invalid(m.to_string()));
        if self.lambda_multipliers.is_empty() || self.policies.is_empty() || self.seeds.is_empty() {
            return invalid("lambda_multipliers, policies and seeds must be non-empty");
        }
        if self.lambda_multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return invalid("lambda multipliers must be finite and > 0");
        }
        validate_config(self.base.clone())?;
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.lambda_multipliers.len() * self.policies.len() * self.seeds.len()
    }
}

struct Cell {
    policy: usize,
    lambda: usize,
    seed: u64,
}

fn mdp_spec(base: &ScenarioConfig, params: &Option<MdpParams>) -> MdpSpec {
    let (q, k) = match (params, base.queue_caps) {
        (Some(p), _) => (p.q_max, p.k_max),
        (None, Some(c)) => (c.q_max, c.k_max),
        (None, None) => (3, 3),
    };
    let mut spec = MdpSpec::new(base.clone(), q, k);
    if let Some(p) = params {
        spec.gamma = p.gamma;
        spec.epsilon = p.epsilon;
    }
    spec
}

pub fn run_sweep(plan: &SweepPlan, mode: ExecMode) -> Vec<SweepRow> {
    // One MDP solve per multiplier, shared by that multiplier's cells.
    let needs_mdp = plan.policies.iter().any(PolicyEntry::solves_in_memory);
    let solved: Vec<Option<Result<SolvedPolicy, String>>> = plan
        .lambda_multipliers
        .iter()
        .map(|&m| {
            needs_mdp.then(|| solve(&mdp_spec(&plan.base.with_rate_multiplier(m), &plan.mdp)).map_err(|e| e.to_string()))
        })
        .collect();

    let mut cells = Vec::with_capacity(plan.num_cells());
    for policy in 0..plan.policies.len() {
        for lambda in 0..plan.lambda_multipliers.len() {
            for &seed in &plan.seeds {
                cells.push(Cell { policy, lambda, seed });
            }
        }
    }
    let mut rows = map_indices(mode, cells.len(), |n| {
        let cell = &cells[n];
        run_cell(plan, cell, solved[cell.lambda].as_ref())
    });
    rows.sort_by(|a, b| {
        a.policy
            .cmp(&b.policy)
            .then(a.lambda_multiplier.total_cmp(&b.lambda_multiplier))
            .then(a.seed.cmp(&b.seed))
    });
    rows
}

fn run_cell(plan: &SweepPlan, cell: &Cell, solved: Option<&Result<SolvedPolicy, String>>) -> SweepRow {
    let entry = &plan.policies[cell.policy];
    let multiplier = plan.lambda_multipliers[cell.lambda];
    let mut cfg = plan.base.with_rate_multiplier(multiplier);
    cfg.rng_seed = cell.seed;
    cfg.policy_id = entry.id().to_string();
    cfg.policy_params = entry.params();
    cfg.policy_file = entry.policy_file().map(str::to_string);
    let parsed = if entry.solves_in_memory() {
        Ok(PolicyId::Solved { path: String::new() })
    } else {
        PolicyId::parse(entry.id(), &cfg.policy_params, cfg.policy_file.as_deref())
    };
    let (label, v) = match &parsed {
        Ok(id) => (id.label().to_string(), id.v()),
        Err(_) => (entry.id().to_string(), None),
    };
    let result = (|| -> Result<_, String> {
        let id = parsed.map_err(|e| e.to_string())?;
        let vcfg = validate_config(cfg.clone()).map_err(|e| e.to_string())?;
        let policy = if entry.solves_in_memory() {
            let table = solved.expect("solved when needed").clone()?;
            solved_policy(table, &vcfg).map_err(|e| e.to_string())?
        } else {
            build_policy(id, &vcfg).map_err(|e| e.to_string())?
        };
        let opts = RunOptions {
            horizon: plan.horizon,
            lambda_multiplier: multiplier,
            ..Default::default()
        };
        run_trajectory_with(&vcfg, policy.as_ref(), &opts)
            .map(|o| o.summary)
            .map_err(|e| e.to_string())
    })();
    SweepRow {
        scenario_id: cfg.scenario_id,
        policy: label,
        v,
        lambda_multiplier: multiplier,
        seed: cell.seed,
        result,
    }
}

/// A named, ready-to-run sweep.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub plan: SweepPlan,
}

pub const PRESET_NAMES: [&str; 3] = ["case-study", "case-study-mdp", "multihop"];

pub fn preset(name: &str) -> Result<Preset, SweepError> {
    match name {
        "case-study" => Ok(Preset {
            name: "case-study",
            description: "4 grid ESs with 2/4/6/8 cores, 40 uniformly placed MDs on 100x100 m; backpressure vs transmission- and computation-based",
            plan: SweepPlan {
                base: case_study_scenario(),
                lambda_multipliers: vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0],
                policies: vec![
                    PolicyEntry::Full {
                        id: "backpressure".into(),
                        params: BTreeMap::from([("V".to_string(), 0.0)]),
                        policy_file: None,
                    },
                    PolicyEntry::Name("transmission".into()),
                    PolicyEntry::Name("computation".into()),
                ],
                seeds: (1..=20).collect(),
                horizon: None,
                mdp: None,
                out_dir: None,
            },
        }),
        "case-study-mdp" => Ok(Preset {
            name: "case-study-mdp",
            description: "2 ESs, 2 MDs with truncated queues; solved MDP vs backpressure vs baselines",
            plan: SweepPlan {
                base: case_study_mdp_scenario(),
                lambda_multipliers: vec![0.25, 0.5, 0.75, 1.0],
                policies: vec![
                    PolicyEntry::Name("mdp".into()),
                    PolicyEntry::Name("backpressure".into()),
                    PolicyEntry::Name("transmission".into()),
                    PolicyEntry::Name("computation".into()),
                ],
                seeds: (1..=20).collect(),
                horizon: None,
                mdp: Some(MdpParams {
                    q_max: 3,
                    k_max: 3,
                    gamma: 0.95,
                    epsilon: 1e-6,
                }),
                out_dir: None,
            },
        }),
        "multihop" => Ok(Preset {
            name: "multihop",
            description: "2 ESs with all MDs near ES 0, nearest-ES offloading relieved by a backhaul link",
            plan: SweepPlan {
                base: multihop_scenario(true),
                lambda_multipliers: vec![0.5, 1.0, 1.5, 2.0],
                policies: vec![PolicyEntry::Name("transmission".into())],
                seeds: (1..=20).collect(),
                horizon: None,
                mdp: None,
                out_dir: None,
            },
        }),
        other => Err(SweepError::UnknownPreset(other.to_string())),
    }
}

fn base_radio(id: &str) -> ScenarioConfig {
    ScenarioConfig {
        scenario_id: id.into(),
        num_mds: 1,
        num_ess: 1,
        horizon: 2000,
        slot_duration: 0.01,
        area_side: 100.0,
        es_positions: Placement::Grid,
        md_positions: Placement::Grid,
        task_size_bits: 1e5,
        task_cycles: 1e7,
        deadline_slots: 0,
        arrival_rates: PerNode::All(0.1),
        arrival_kind: ArrivalKind::Poisson,
        power_levels: vec![0.0, 0.1, 0.2],
        bandwidth_hz: 1e7,
        noise_psd: 4e-21,
        pathloss_exponent: 3.0,
        reference_gain: 1e-3,
        reference_distance: 1.0,
        channel_states: ChannelModel::default(),
        cores_per_es: PerNode::All(4),
        core_speed_hz: 2e9,
        local_compute: None,
        backhaul_links: vec![],
        migration_threshold: 0.0,
        queue_caps: None,
        policy_id: "backpressure".into(),
        policy_params: BTreeMap::new(),
        policy_file: None,
        rng_seed: 1,
    }
}

pub fn case_study_scenario() -> ScenarioConfig {
    ScenarioConfig {
        num_mds: 40,
        num_ess: 4,
        md_positions: Placement::Uniform { seed: 2024 },
        deadline_slots: 50,
        arrival_rates: PerNode::All(1.0),
        cores_per_es: PerNode::Each(vec![2, 4, 6, 8]),
        ..base_radio("case-study")
    }
}

pub fn case_study_mdp_scenario() -> ScenarioConfig {
    ScenarioConfig {
        num_mds: 2,
        num_ess: 2,
        es_positions: Placement::Explicit(vec![Point::new(25.0, 50.0), Point::new(75.0, 50.0)]),
        md_positions: Placement::Explicit(vec![Point::new(35.0, 50.0), Point::new(45.0, 50.0)]),
        arrival_kind: ArrivalKind::Bernoulli,
        arrival_rates: PerNode::All(1.0),
        power_levels: vec![0.0, 0.2],
        channel_states: ChannelModel::constant(),
        cores_per_es: PerNode::All(1),
        core_speed_hz: 1e9,
        queue_caps: Some(QueueCaps { q_max: 3, k_max: 3 }),
        ..base_radio("case-study-mdp")
    }
}

/// Two ESs 80 m apart with every MD clustered near ES 0.
pub fn multihop_scenario(with_link: bool) -> ScenarioConfig {
    let mds: Vec<Point> = (0..8).map(|k| Point::new(8.0 + 2.0 * (k % 4) as f64, 46.0 + 4.0 * (k / 4) as f64)).collect();
    ScenarioConfig {
        num_mds: 8,
        num_ess: 2,
        es_positions: Placement::Explicit(vec![Point::new(10.0, 50.0), Point::new(90.0, 50.0)]),
        md_positions: Placement::Explicit(mds),
        deadline_slots: 20,
        arrival_rates: PerNode::All(1.0),
        cores_per_es: PerNode::All(2),
        backhaul_links: if with_link {
            vec![BackhaulLink {
                es_a: 0,
                es_b: 1,
                delay_slots: 1,
                capacity_tasks_per_slot: 8,
            }]
        } else {
            vec![]
        },
        ..base_radio("multihop")
    }
}

/// A configuration with local computing enabled, for threshold policies.
pub fn with_local_compute(mut c: ScenarioConfig) -> ScenarioConfig {
    c.local_compute = Some(LocalCompute {
        local_core_speed_hz: 1e9,
        local_energy_coeff: 1e-27,
    });
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_plan() -> SweepPlan {
        let mut base = crate::config::tests::tiny();
        base.horizon = 50;
        SweepPlan {
            base,
            lambda_multipliers: vec![0.5, 1.0, 2.0],
            policies: vec![PolicyEntry::Name("transmission".into()), PolicyEntry::Name("backpressure".into())],
            seeds: (1..=5).collect(),
            horizon: None,
            mdp: None,
            out_dir: None,
        }
    }

    #[test]
    fn cell_count_and_order() {
        let rows = run_sweep(&tiny_plan(), ExecMode::Parallel);
        assert_eq!(rows.len(), 30);
        let keys: Vec<(String, f64, u64)> = rows.iter().map(|r| (r.policy.clone(), r.lambda_multiplier, r.seed)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        assert_eq!(keys, sorted);
        assert!(rows.iter().all(|r| r.result.is_ok()));
    }

    #[test]
    fn modes_produce_identical_rows() {
        let plan = tiny_plan();
        assert_eq!(run_sweep(&plan, ExecMode::Sequential), run_sweep(&plan, ExecMode::Parallel));
    }

    #[test]
    fn failing_cells_are_recorded() {
        let mut plan = tiny_plan();
        plan.policies.push(PolicyEntry::Name("nonsense".into()));
        // Bernoulli rate 0.3 · 4 > 1 fails validation
        plan.lambda_multipliers.push(4.0);
        let rows = run_sweep(&plan, ExecMode::Sequential);
        assert_eq!(rows.len(), 3 * 4 * 5);
        assert!(rows.iter().filter(|r| r.policy == "nonsense").all(|r| r.result.is_err()));
        assert!(rows.iter().filter(|r| r.lambda_multiplier == 4.0).all(|r| r.result.is_err()));
    }

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            p.plan.check().unwrap();
        }
        validate_config(multihop_scenario(false)).unwrap();
        assert!(matches!(preset("nope"), Err(SweepError::UnknownPreset(_))));
    }

    #[test]
    fn sweep_file_resolves_relative_scenario() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("base.json"), crate::config::tests::tiny().to_json_pretty()).unwrap();
        let spec = r#"{"scenario": "base.json", "lambda_multipliers": [1.0], "policies": ["backpressure", {"id": "backpressure", "params": {"V": 2}}], "seeds": [1, 2]}"#;
        std::fs::write(dir.path().join("sweep.json"), spec).unwrap();
        let plan = SweepSpec::load(dir.path().join("sweep.json")).unwrap();
        assert_eq!(plan.num_cells(), 4);
        let bad = r#"{"scenario": "base.json", "lambda_multipliers": [], "policies": ["backpressure"], "seeds": [1]}"#;
        std::fs::write(dir.path().join("bad.json"), bad).unwrap();
        assert!(matches!(SweepSpec::load(dir.path().join("bad.json")), Err(SweepError::Invalid(_))));
    }
}
