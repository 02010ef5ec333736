//! Scenario configuration: the static description of one experiment instance.
//!
//! Scenario files are JSON whose keys are exactly the snake_case field names
//! of [`ScenarioConfig`]. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{self, Point};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config at `{field}`: {reason}")]
    Malformed { field: String, reason: String },
    #[error("inconsistent dimensions for `{field}`: expected {expected} entries, found {found}")]
    InconsistentDimensions {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn malformed(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Malformed {
        field: field.into(),
        reason: reason.into(),
    }
}

/// A value given once for every node, or one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode<T> {
    All(T),
    Each(Vec<T>),
}

impl<T: Clone> PerNode<T> {
    pub fn expand(&self, field: &str, n: usize) -> Result<Vec<T>, ConfigError> {
        match self {
            PerNode::All(v) => Ok(vec![v.clone(); n]),
            PerNode::Each(vs) if vs.len() == n => Ok(vs.clone()),
            PerNode::Each(vs) => Err(ConfigError::InconsistentDimensions {
                field: field.to_string(),
                expected: n,
                found: vs.len(),
            }),
        }
    }
}

impl PerNode<f64> {
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            PerNode::All(v) => PerNode::All(v * factor),
            PerNode::Each(vs) => PerNode::Each(vs.iter().map(|v| v * factor).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    /// Centroids of a ⌈√n⌉×⌈√n⌉ partition of the square, row-major from the origin.
    Grid,
    /// i.i.d. uniform over the square.
    Uniform { seed: u64 },
    Explicit(Vec<Point>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalKind {
    #[default]
    Bernoulli,
    Poisson,
}

/// Finite-state Markov fading: multiplier per state plus a row-stochastic
/// transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    pub multipliers: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            multipliers: vec![0.5, 1.5],
            transition: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        }
    }
}

impl ChannelModel {
    pub fn constant() -> Self {
        ChannelModel {
            multipliers: vec![1.0],
            transition: vec![vec![1.0]],
        }
    }

    pub fn num_states(&self) -> usize {
        self.multipliers.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalCompute {
    pub local_core_speed_hz: f64,
    /// Effective switched capacitance κ; dynamic power is κ·f³.
    pub local_energy_coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackhaulLink {
    pub es_a: usize,
    pub es_b: usize,
    pub delay_slots: u64,
    pub capacity_tasks_per_slot: u32,
}

/// Hard caps on queue lengths; tasks that would exceed a cap are dropped
/// with reason `Overflow`. Used to run the truncated dynamics an MDP was
/// solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueCaps {
    pub q_max: u32,
    pub k_max: u32,
}

fn default_scenario_id() -> String {
    "scenario".to_string()
}

fn default_policy_id() -> String {
    "backpressure".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_scenario_id")]
    pub scenario_id: String,
    pub num_mds: usize,
    pub num_ess: usize,
    pub horizon: u64,
    /// Slot length τ in seconds.
    pub slot_duration: f64,
    pub area_side: f64,
    pub es_positions: Placement,
    pub md_positions: Placement,
    pub task_size_bits: f64,
    pub task_cycles: f64,
    /// Maximum end-to-end age in slots; 0 disables expiry.
    #[serde(default)]
    pub deadline_slots: u64,
    pub arrival_rates: PerNode<f64>,
    #[serde(default)]
    pub arrival_kind: ArrivalKind,
    /// Transmit powers in watts, ascending, first entry 0.
    pub power_levels: Vec<f64>,
    /// Uplink bandwidth per ES in Hz.
    pub bandwidth_hz: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    pub pathloss_exponent: f64,
    pub reference_gain: f64,
    pub reference_distance: f64,
    #[serde(default)]
    pub channel_states: ChannelModel,
    pub cores_per_es: PerNode<u32>,
    pub core_speed_hz: f64,
    #[serde(default)]
    pub local_compute: Option<LocalCompute>,
    #[serde(default)]
    pub backhaul_links: Vec<BackhaulLink>,
    /// Backlog imbalance threshold δ for backhaul migration.
    #[serde(default)]
    pub migration_threshold: f64,
    #[serde(default)]
    pub queue_caps: Option<QueueCaps>,
    #[serde(default = "default_policy_id")]
    pub policy_id: String,
    #[serde(default)]
    pub policy_params: BTreeMap<String, f64>,
    /// Solved MDP policy file, required by policy `mdp`.
    #[serde(default)]
    pub policy_file: Option<String>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Hash of everything that shapes the dynamics. Seed, horizon, naming
    /// and policy selection are excluded.
    pub fn dynamics_hash(&self) -> String {
        let mut c = self.clone();
        c.scenario_id.clear();
        c.horizon = 0;
        c.rng_seed = 0;
        c.policy_id.clear();
        c.policy_params.clear();
        c.policy_file = None;
        hash_json(&c)
    }

    /// Like [`dynamics_hash`](Self::dynamics_hash) but also blind to the
    /// arrival rates, so runs of one arrival-rate sweep compare equal.
    pub fn structural_hash(&self) -> String {
        let mut c = self.clone();
        c.scenario_id.clear();
        c.horizon = 0;
        c.rng_seed = 0;
        c.policy_id.clear();
        c.policy_params.clear();
        c.policy_file = None;
        c.arrival_rates = PerNode::All(0.0);
        hash_json(&c)
    }

    pub fn with_rate_multiplier(&self, factor: f64) -> Self {
        let mut c = self.clone();
        c.arrival_rates = c.arrival_rates.scaled(factor);
        c
    }
}

pub(crate) fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes");
    let digest = Sha256::digest(&bytes);
    hex::encode(&digest[..16])
}

/// A checked scenario with derived constants.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub cfg: ScenarioConfig,
    pub es_positions: Vec<Point>,
    pub md_positions: Vec<Point>,
    /// Mean path gain ḡ_ij, row-major `i * J + j`.
    pub mean_gains: Vec<f64>,
    pub arrival_rates: Vec<f64>,
    pub cores: Vec<u32>,
    /// Cycles one core executes in one slot (f·τ).
    pub core_cycles_per_slot: f64,
}

impl ValidatedConfig {
    pub fn num_mds(&self) -> usize {
        self.cfg.num_mds
    }

    pub fn num_ess(&self) -> usize {
        self.cfg.num_ess
    }

    pub fn gain(&self, md: usize, es: usize) -> f64 {
        self.mean_gains[md * self.cfg.num_ess + es]
    }

    pub fn max_power(&self) -> f64 {
        *self.cfg.power_levels.last().expect("validated non-empty")
    }

    /// Tasks one ES core completes per slot.
    pub fn tasks_per_core(&self) -> u32 {
        (self.core_cycles_per_slot / self.cfg.task_cycles).floor() as u32
    }

    /// Tasks all ES cores complete per slot.
    pub fn edge_capacity(&self) -> f64 {
        self.cores.iter().map(|&m| m as f64).sum::<f64>() * self.tasks_per_core() as f64
    }

    pub fn total_arrival_rate(&self) -> f64 {
        self.arrival_rates.iter().sum()
    }

    /// Rate multiplier at which mean arrivals equal edge capacity.
    pub fn saturation_multiplier(&self) -> f64 {
        self.edge_capacity() / self.total_arrival_rate()
    }

    pub fn local_tasks_per_slot(&self) -> u32 {
        match &self.cfg.local_compute {
            Some(lc) => (lc.local_core_speed_hz * self.cfg.slot_duration / self.cfg.task_cycles)
                .floor() as u32,
            None => 0,
        }
    }
}

pub fn validate_config(cfg: ScenarioConfig) -> Result<ValidatedConfig, ConfigError> {
    if cfg.num_mds < 1 {
        return Err(malformed("num_mds", "need at least one mobile device"));
    }
    if cfg.num_ess < 1 {
        return Err(malformed("num_ess", "need at least one edge server"));
    }
    if cfg.horizon < 1 {
        return Err(malformed("horizon", "need at least one slot"));
    }
    positive("slot_duration", cfg.slot_duration)?;
    positive("area_side", cfg.area_side)?;
    positive("task_size_bits", cfg.task_size_bits)?;
    positive("task_cycles", cfg.task_cycles)?;
    positive("bandwidth_hz", cfg.bandwidth_hz)?;
    positive("noise_psd", cfg.noise_psd)?;
    positive("reference_gain", cfg.reference_gain)?;
    positive("reference_distance", cfg.reference_distance)?;
    positive("core_speed_hz", cfg.core_speed_hz)?;
    if !(cfg.pathloss_exponent.is_finite() && cfg.pathloss_exponent >= 0.0) {
        return Err(malformed("pathloss_exponent", "must be finite and >= 0"));
    }
    if !(cfg.migration_threshold.is_finite() && cfg.migration_threshold >= 0.0) {
        return Err(malformed("migration_threshold", "must be finite and >= 0"));
    }

    let levels = &cfg.power_levels;
    if levels.is_empty() {
        return Err(malformed("power_levels", "must not be empty"));
    }
    if levels[0] != 0.0 {
        return Err(malformed("power_levels[0]", "first power level must be 0"));
    }
    for (k, w) in levels.windows(2).enumerate() {
        if !(w[1].is_finite() && w[1] > w[0]) {
            return Err(malformed(
                format!("power_levels[{}]", k + 1),
                "power levels must be finite and strictly ascending",
            ));
        }
    }

    validate_channel(&cfg.channel_states)?;

    let arrival_rates = cfg.arrival_rates.expand("arrival_rates", cfg.num_mds)?;
    for (i, &rate) in arrival_rates.iter().enumerate() {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(malformed(
                format!("arrival_rates[{i}]"),
                format!("rate {rate} must be finite and >= 0"),
            ));
        }
        if cfg.arrival_kind == ArrivalKind::Bernoulli && rate > 1.0 {
            return Err(malformed(
                format!("arrival_rates[{i}]"),
                format!("Bernoulli rate {rate} exceeds 1"),
            ));
        }
    }

    let cores = cfg.cores_per_es.expand("cores_per_es", cfg.num_ess)?;

    if let Some(lc) = &cfg.local_compute {
        positive("local_compute.local_core_speed_hz", lc.local_core_speed_hz)?;
        if !(lc.local_energy_coeff.is_finite() && lc.local_energy_coeff >= 0.0) {
            return Err(malformed(
                "local_compute.local_energy_coeff",
                "must be finite and >= 0",
            ));
        }
    }

    for (k, link) in cfg.backhaul_links.iter().enumerate() {
        let field = format!("backhaul_links[{k}]");
        if link.es_a >= cfg.num_ess || link.es_b >= cfg.num_ess {
            return Err(malformed(field, "endpoint out of range"));
        }
        if link.es_a == link.es_b {
            return Err(malformed(field, "endpoints must be distinct"));
        }
        if link.capacity_tasks_per_slot < 1 {
            return Err(malformed(field, "capacity must be at least 1"));
        }
    }

    let (es_positions, md_positions) = geometry::place_nodes(&cfg)?;
    let mut mean_gains = Vec::with_capacity(cfg.num_mds * cfg.num_ess);
    for md in &md_positions {
        for es in &es_positions {
            mean_gains.push(geometry::mean_gain(md.distance(es), &cfg));
        }
    }
    let core_cycles_per_slot = cfg.core_speed_hz * cfg.slot_duration;

    Ok(ValidatedConfig {
        cfg,
        es_positions,
        md_positions,
        mean_gains,
        arrival_rates,
        cores,
        core_cycles_per_slot,
    })
}

fn positive(field: &str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(malformed(field, format!("{value} must be finite and > 0")))
    }
}

fn validate_channel(ch: &ChannelModel) -> Result<(), ConfigError> {
    let n = ch.multipliers.len();
    if n == 0 {
        return Err(malformed("channel_states.multipliers", "must not be empty"));
    }
    if n > u8::MAX as usize {
        return Err(malformed("channel_states.multipliers", "at most 255 states"));
    }
    for (k, &m) in ch.multipliers.iter().enumerate() {
        if !(m.is_finite() && m >= 0.0) {
            return Err(malformed(
                format!("channel_states.multipliers[{k}]"),
                "must be finite and >= 0",
            ));
        }
    }
    if ch.transition.len() != n {
        return Err(ConfigError::InconsistentDimensions {
            field: "channel_states.transition".into(),
            expected: n,
            found: ch.transition.len(),
        });
    }
    for (r, row) in ch.transition.iter().enumerate() {
        if row.len() != n {
            return Err(ConfigError::InconsistentDimensions {
                field: format!("channel_states.transition[{r}]"),
                expected: n,
                found: row.len(),
            });
        }
        if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(malformed(
                format!("channel_states.transition[{r}]"),
                "probabilities must be finite and >= 0",
            ));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(malformed(
                format!("channel_states.transition[{r}]"),
                format!("row sums to {sum}, expected 1"),
            ));
        }
    }
    Ok(())
}
