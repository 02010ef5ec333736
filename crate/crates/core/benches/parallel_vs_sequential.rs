use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use edgebench_core::exec::ExecMode;
use edgebench_core::mdp::{build_transition_model_with, value_iteration_with, MdpSpec};
use edgebench_core::sweep::{case_study_mdp_scenario, preset, run_sweep};

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn sweep(c: &mut Criterion) {
    let mut plan = preset("case-study").unwrap().plan;
    plan.seeds = (1..=4).collect();
    plan.lambda_multipliers = vec![0.5, 1.5];
    plan.horizon = Some(300);
    let mut group = c.benchmark_group("case_study_sweep");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| b.iter(|| run_sweep(&plan, mode)));
    }
    group.finish();
}

fn mdp(c: &mut Criterion) {
    let spec = MdpSpec::new(case_study_mdp_scenario(), 3, 3);
    let model = build_transition_model_with(&spec, ExecMode::Parallel).unwrap();
    let mut group = c.benchmark_group("mdp");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new("build_model", name), &mode, |b, &mode| {
            b.iter(|| build_transition_model_with(&spec, mode).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("value_iteration", name), &mode, |b, &mode| {
            b.iter(|| value_iteration_with(&spec, &model, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, mdp);
criterion_main!(benches);
