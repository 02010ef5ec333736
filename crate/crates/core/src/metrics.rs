//! Run summaries and across-seed comparison.
//!
//! Latency is counted from the arrival slot to the completion slot; result
//! download time is not modeled. Queue averages use post-step occupancy, so
//! Little's law `L = λ·W` holds with the same slot convention.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::config::ValidatedConfig;
use crate::dynamics::SlotRecord;
use crate::model::{SystemState, TaskLocation};
use crate::policies::PolicyId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario_id: String,
    pub policy: String,
    #[serde(rename = "V")]
    pub v: Option<f64>,
    pub lambda_multiplier: f64,
    pub seed: u64,
    pub horizon: u64,
    pub structural_hash: String,
    pub arrivals: u64,
    pub completions: u64,
    pub drops_deadline: u64,
    pub drops_overflow: u64,
    /// Tasks still queued or in transit at the end.
    pub residual: u64,
    /// Completions per slot.
    pub throughput: f64,
    /// Completions over arrivals; 1 when nothing arrived.
    pub completion_ratio: f64,
    pub mean_latency_slots: f64,
    pub p95_latency_slots: f64,
    pub energy_j_total: f64,
    pub energy_j_per_md: Vec<f64>,
    /// Infinite when nothing completed.
    pub energy_j_per_completion: f64,
    pub mean_q_per_md: Vec<f64>,
    /// Row-major `i·J + j`.
    pub mean_k_per_pair: Vec<f64>,
    pub mean_q: f64,
    /// Mean over ESs of the time-averaged total server backlog.
    pub mean_k: f64,
    /// Coefficient of variation of the per-ES backlog time averages.
    pub load_imbalance: f64,
}

/// Streaming accumulation of slot records.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    num_ess: usize,
    slots: u64,
    arrivals: u64,
    completions: u64,
    drops_deadline: u64,
    drops_overflow: u64,
    /// `latency_hist[d]` = completions with latency d.
    latency_hist: Vec<u64>,
    energy: Vec<f64>,
    sum_q: Vec<f64>,
    sum_k: Vec<f64>,
}

impl MetricsAccumulator {
    pub fn new(cfg: &ValidatedConfig) -> Self {
        let (u, j) = (cfg.num_mds(), cfg.num_ess());
        MetricsAccumulator {
            num_ess: j,
            slots: 0,
            arrivals: 0,
            completions: 0,
            drops_deadline: 0,
            drops_overflow: 0,
            latency_hist: Vec::new(),
            energy: vec![0.0; u],
            sum_q: vec![0.0; u],
            sum_k: vec![0.0; u * j],
        }
    }

    pub fn observe(&mut self, rec: &SlotRecord) {
        self.slots += 1;
        self.arrivals += rec.total_arrivals();
        self.drops_deadline += rec.drops_deadline.iter().map(|&d| d as u64).sum::<u64>();
        self.drops_overflow += rec.drops_overflow.iter().map(|&d| d as u64).sum::<u64>();
        for task in &rec.finished {
            if let TaskLocation::Completed(t) = task.location {
                let d = (t - task.born_slot) as usize;
                if self.latency_hist.len() <= d {
                    self.latency_hist.resize(d + 1, 0);
                }
                self.latency_hist[d] += 1;
                self.completions += 1;
            }
        }
        for (e, x) in self.energy.iter_mut().zip(&rec.energy) {
            *e += x;
        }
        for (s, &q) in self.sum_q.iter_mut().zip(&rec.q_md) {
            *s += q as f64;
        }
        for (s, &k) in self.sum_k.iter_mut().zip(&rec.k_es) {
            *s += k as f64;
        }
    }

    pub fn finish(&self, cfg: &ValidatedConfig, policy: &PolicyId, lambda_multiplier: f64, last: &SystemState) -> RunSummary {
        let t = self.slots.max(1) as f64;
        let mean_q_per_md: Vec<f64> = self.sum_q.iter().map(|s| s / t).collect();
        let mean_k_per_pair: Vec<f64> = self.sum_k.iter().map(|s| s / t).collect();
        let jn = self.num_ess;
        let per_es: Vec<f64> = (0..jn)
            .map(|j| mean_k_per_pair.iter().skip(j).step_by(jn).sum())
            .collect();
        let (latency_mean, latency_p95) = latency_stats(&self.latency_hist, self.completions);
        let energy_total: f64 = self.energy.iter().sum();
        RunSummary {
            scenario_id: cfg.cfg.scenario_id.clone(),
            policy: policy.label().to_string(),
            v: policy.v(),
            lambda_multiplier,
            seed: cfg.cfg.rng_seed,
            horizon: self.slots,
            structural_hash: cfg.cfg.structural_hash(),
            arrivals: self.arrivals,
            completions: self.completions,
            drops_deadline: self.drops_deadline,
            drops_overflow: self.drops_overflow,
            residual: last.population(),
            throughput: if self.slots == 0 { 0.0 } else { self.completions as f64 / t },
            completion_ratio: if self.arrivals == 0 {
                1.0
            } else {
                self.completions as f64 / self.arrivals as f64
            },
            mean_latency_slots: latency_mean,
            p95_latency_slots: latency_p95,
            energy_j_total: energy_total,
            energy_j_per_completion: if self.completions == 0 {
                f64::INFINITY
            } else {
                energy_total / self.completions as f64
            },
            energy_j_per_md: self.energy.clone(),
            mean_q: mean(&mean_q_per_md),
            mean_k: mean(&per_es),
            load_imbalance: coefficient_of_variation(&per_es),
            mean_q_per_md,
            mean_k_per_pair,
        }
    }
}

/// Summarize a recorded trajectory.
pub fn summarize(records: &[SlotRecord], cfg: &ValidatedConfig, policy: &PolicyId, lambda_multiplier: f64, last: &SystemState) -> RunSummary {
    let mut acc = MetricsAccumulator::new(cfg);
    records.iter().for_each(|r| acc.observe(r));
    acc.finish(cfg, policy, lambda_multiplier, last)
}

/// Mean and nearest-rank 95th percentile; NaN when empty.
fn latency_stats(hist: &[u64], n: u64) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let total: u64 = hist.iter().enumerate().map(|(d, &c)| d as u64 * c).sum();
    let rank = (0.95 * n as f64).ceil() as u64;
    let mut seen = 0;
    let mut p95 = 0;
    for (d, &c) in hist.iter().enumerate() {
        seen += c;
        if seen >= rank {
            p95 = d;
            break;
        }
    }
    (total as f64 / n as f64, p95 as f64)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    if m == 0.0 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    var.sqrt() / m
}

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("runs come from structurally different scenarios ({0} vs {1})")]
    IncompatibleRuns(String, String),
}

/// Sample mean with a 95% Student-t confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    /// NaN samples are skipped; no samples give NaN.
    pub fn from_samples(xs: &[f64]) -> Self {
        let xs: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, half_width: f64::NAN };
        }
        if xs.iter().all(|&x| x == xs[0]) {
            return Estimate { mean: xs[0], half_width: 0.0 };
        }
        let m = mean(&xs);
        let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        Estimate {
            mean: m,
            half_width: t_quantile_975(n - 1) * s / (n as f64).sqrt(),
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    /// Whether this interval lies strictly above `other`.
    pub fn strictly_above(&self, other: &Estimate) -> bool {
        self.lower() > other.upper()
    }
}

pub fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df >= 1")
        .inverse_cdf(0.975)
}

/// One row per (policy, λ multiplier) across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub v: Option<f64>,
    pub lambda_multiplier: f64,
    pub runs: usize,
    pub throughput: Estimate,
    pub completion_ratio: Estimate,
    pub mean_latency_slots: Estimate,
    pub energy_j_per_completion: Estimate,
}

/// Group summaries by policy and arrival-rate multiplier, sorted by both.
pub fn compare_runs(runs: &[RunSummary]) -> Result<Vec<ComparisonRow>, CompareError> {
    if let Some(first) = runs.first() {
        if let Some(other) = runs.iter().find(|r| r.structural_hash != first.structural_hash) {
            return Err(CompareError::IncompatibleRuns(
                first.structural_hash.clone(),
                other.structural_hash.clone(),
            ));
        }
    }
    let mut keys: Vec<(String, Option<f64>, f64)> = Vec::new();
    for r in runs {
        let key = (r.policy.clone(), r.v, r.lambda_multiplier);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.unwrap_or(-1.0).total_cmp(&b.1.unwrap_or(-1.0)))
            .then(a.2.total_cmp(&b.2))
    });
    Ok(keys
        .into_iter()
        .map(|(policy, v, lambda)| {
            let group: Vec<&RunSummary> = runs
                .iter()
                .filter(|r| r.policy == policy && r.v == v && r.lambda_multiplier == lambda)
                .collect();
            let est = |f: fn(&RunSummary) -> f64| Estimate::from_samples(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            ComparisonRow {
                runs: group.len(),
                throughput: est(|r| r.throughput),
                completion_ratio: est(|r| r.completion_ratio),
                mean_latency_slots: est(|r| r.mean_latency_slots),
                energy_j_per_completion: est(|r| r.energy_j_per_completion),
                policy,
                v,
                lambda_multiplier: lambda,
            }
        })
        .collect())
}
