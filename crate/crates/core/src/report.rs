//! CSV output: one summary row per run, sweep rows with an error column,
//! and per-slot traces.

use std::io::Write;

pub use csv::Error as CsvError;

use crate::config::ValidatedConfig;
use crate::dynamics::SlotRecord;
use crate::metrics::RunSummary;

pub const SUMMARY_COLUMNS: [&str; 18] = [
    "scenario_id",
    "policy",
    "V",
    "lambda_multiplier",
    "seed",
    "arrivals",
    "completions",
    "drops_deadline",
    "drops_overflow",
    "throughput",
    "completion_ratio",
    "mean_latency_slots",
    "p95_latency_slots",
    "energy_J_total",
    "energy_J_per_completion",
    "mean_Q",
    "mean_K",
    "load_imbalance",
];

pub const TRACE_COLUMNS: [&str; 13] = [
    "slot", "md_id", "es_id", "q", "k", "channel", "power_w", "assoc", "cores", "uplink", "served", "drops", "energy_j",
];

/// One sweep cell: identifying fields plus a summary or an error message.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario_id: String,
    pub policy: String,
    pub v: Option<f64>,
    pub lambda_multiplier: f64,
    pub seed: u64,
    pub result: Result<RunSummary, String>,
}

fn num(x: f64) -> String {
    x.to_string()
}

fn summary_fields(s: &RunSummary) -> Vec<String> {
    vec![
        s.scenario_id.clone(),
        s.policy.clone(),
        s.v.map(num).unwrap_or_default(),
        num(s.lambda_multiplier),
        s.seed.to_string(),
        s.arrivals.to_string(),
        s.completions.to_string(),
        s.drops_deadline.to_string(),
        s.drops_overflow.to_string(),
        num(s.throughput),
        num(s.completion_ratio),
        num(s.mean_latency_slots),
        num(s.p95_latency_slots),
        num(s.energy_j_total),
        num(s.energy_j_per_completion),
        num(s.mean_q),
        num(s.mean_k),
        num(s.load_imbalance),
    ]
}

pub fn write_summary_csv<W: Write>(out: W, runs: &[RunSummary]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for s in runs {
        w.write_record(summary_fields(s))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS.iter().chain(&["error"]))?;
    for row in rows {
        let mut fields = match &row.result {
            Ok(s) => summary_fields(s),
            Err(_) => {
                let mut f = vec![String::new(); SUMMARY_COLUMNS.len()];
                f[0] = row.scenario_id.clone();
                f[1] = row.policy.clone();
                f[2] = row.v.map(num).unwrap_or_default();
                f[3] = num(row.lambda_multiplier);
                f[4] = row.seed.to_string();
                f
            }
        };
        fields.push(row.result.as_ref().err().cloned().unwrap_or_default());
        w.write_record(fields)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (slot, MD, ES). MD-level columns repeat across that MD's
/// rows; `served` and `k` are per pair, `cores` is ES j's allocation to MD i.
pub fn write_trace_csv<W: Write>(out: W, records: &[SlotRecord], cfg: &ValidatedConfig) -> csv::Result<()> {
    let (u, jn) = (cfg.num_mds(), cfg.num_ess());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for rec in records {
        for i in 0..u {
            let drops = rec.drops_deadline[i] + rec.drops_overflow[i];
            let assoc = rec.action.assoc[i].map(|j| j.to_string()).unwrap_or_default();
            for j in 0..jn {
                let idx = i * jn + j;
                w.write_record([
                    rec.slot.to_string(),
                    i.to_string(),
                    j.to_string(),
                    rec.q_md[i].to_string(),
                    rec.k_es[idx].to_string(),
                    rec.channel_idx[idx].to_string(),
                    num(rec.action.power[i]),
                    assoc.clone(),
                    rec.action.cores[j][i].to_string(),
                    rec.rates.actual_uplink[i].to_string(),
                    rec.rates.actual_served[idx].to_string(),
                    drops.to_string(),
                    num(rec.energy[i]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
