mod common;

use common::{tiny, validated};
use edgebench_core::config::{ArrivalKind, PerNode};
use edgebench_core::report::{write_summary_csv, write_sweep_csv, SUMMARY_COLUMNS};
use edgebench_core::sim::run_trajectory;

const GOLDEN: &str = include_str!("golden/summary.csv");

fn golden_run() -> Vec<u8> {
    let mut c = tiny();
    c.horizon = 200;
    c.arrival_kind = ArrivalKind::Poisson;
    c.arrival_rates = PerNode::All(1.5);
    c.deadline_slots = 6;
    c.rng_seed = 42;
    let out = run_trajectory(&validated(c)).unwrap();
    let mut buf = Vec::new();
    write_summary_csv(&mut buf, &[out.summary]).unwrap();
    buf
}

#[test]
fn summary_header_is_stable() {
    let header = GOLDEN.lines().next().unwrap();
    assert_eq!(header, SUMMARY_COLUMNS.join(","));
    assert_eq!(
        header,
        "scenario_id,policy,V,lambda_multiplier,seed,arrivals,completions,drops_deadline,drops_overflow,\
         throughput,completion_ratio,mean_latency_slots,p95_latency_slots,energy_J_total,\
         energy_J_per_completion,mean_Q,mean_K,load_imbalance"
    );
}

#[test]
fn summary_rows_match_golden_file() {
    let got = String::from_utf8(golden_run()).unwrap();
    assert_eq!(got, GOLDEN);
}

#[test]
fn sweep_csv_appends_error_column() {
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &[]).unwrap();
    let header = String::from_utf8(buf).unwrap();
    assert_eq!(header.trim_end(), format!("{},error", SUMMARY_COLUMNS.join(",")));
}
