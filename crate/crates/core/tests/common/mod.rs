#![allow(dead_code)]

use std::collections::BTreeMap;

use edgebench_core::config::{
    validate_config, ArrivalKind, BackhaulLink, ChannelModel, LocalCompute, PerNode, Placement, QueueCaps,
    ScenarioConfig, ValidatedConfig,
};
use edgebench_core::dynamics::{step, SlotRecord};
use edgebench_core::geometry::Point;
use edgebench_core::mdp::MdpSpec;
use edgebench_core::model::SystemState;
use edgebench_core::multihop::plan_migrations;
use edgebench_core::policies::Policy;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One MD, one ES; uplink carries 2 tasks per slot at 0.1 W, one core does
/// 4 tasks per slot.
pub fn tiny() -> ScenarioConfig {
    ScenarioConfig {
        scenario_id: "tiny".into(),
        num_mds: 1,
        num_ess: 1,
        horizon: 10,
        slot_duration: 0.1,
        area_side: 100.0,
        es_positions: Placement::Grid,
        md_positions: Placement::Explicit(vec![Point::new(50.0, 60.0)]),
        task_size_bits: 5e4,
        task_cycles: 2.5e7,
        deadline_slots: 0,
        arrival_rates: PerNode::All(0.3),
        arrival_kind: ArrivalKind::Bernoulli,
        power_levels: vec![0.0, 0.1],
        bandwidth_hz: 1e6,
        noise_psd: 1e-13,
        pathloss_exponent: 3.0,
        reference_gain: 1e-3,
        reference_distance: 1.0,
        channel_states: ChannelModel::constant(),
        cores_per_es: PerNode::All(1),
        core_speed_hz: 1e9,
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

/// Good state at full gain, bad state in outage.
pub fn outage_channel(stay_good: f64, stay_bad: f64) -> ChannelModel {
    ChannelModel {
        multipliers: vec![1.0, 0.0],
        transition: vec![vec![stay_good, 1.0 - stay_good], vec![1.0 - stay_bad, stay_bad]],
    }
}

/// U=1, J=1 MDP instance with `tasks_per_core` tasks per core.
pub fn unit_spec(lambda: f64, q_max: u32, k_max: u32, cores: u32, tasks_per_core: u32) -> MdpSpec {
    let mut c = tiny();
    c.arrival_rates = PerNode::All(lambda);
    c.cores_per_es = PerNode::All(cores);
    c.core_speed_hz = 2.5e8 * tasks_per_core as f64;
    MdpSpec::new(c, q_max, k_max)
}

pub const HEURISTICS: [&str; 4] = ["transmission", "computation", "backpressure", "random"];

/// A random small scenario with every optional feature exercised at times.
pub fn random_config(rng: &mut ChaCha8Rng, horizon: u64) -> ScenarioConfig {
    let num_mds = rng.random_range(1..=5);
    let num_ess = rng.random_range(1..=3);
    let poisson = rng.random_bool(0.5);
    let rates: Vec<f64> = (0..num_mds)
        .map(|_| if poisson { rng.random_range(0.0..3.0) } else { rng.random_range(0.0..=1.0) })
        .collect();
    let channel = match rng.random_range(0..3) {
        0 => ChannelModel::constant(),
        1 => ChannelModel::default(),
        _ => outage_channel(rng.random_range(0.5..1.0), rng.random_range(0.0..0.9)),
    };
    let mut links = Vec::new();
    if num_ess >= 2 && rng.random_bool(0.6) {
        for a in 0..num_ess {
            for b in a + 1..num_ess {
                if rng.random_bool(0.7) {
                    links.push(BackhaulLink {
                        es_a: a,
                        es_b: b,
                        delay_slots: rng.random_range(0..=3),
                        capacity_tasks_per_slot: rng.random_range(1..=6),
                    });
                }
            }
        }
    }
    let local = rng.random_bool(0.3).then(|| LocalCompute {
        local_core_speed_hz: rng.random_range(1e8..1e9),
        local_energy_coeff: 1e-27,
    });
    let mut policy_ids: Vec<&str> = HEURISTICS.to_vec();
    if local.is_some() {
        policy_ids.push("local_threshold");
    }
    let policy_id = policy_ids[rng.random_range(0..policy_ids.len())];
    let mut params = BTreeMap::new();
    if matches!(policy_id, "backpressure" | "local_threshold") {
        params.insert("V".to_string(), rng.random_range(0.0..50.0));
    }
    if policy_id == "local_threshold" {
        params.insert("theta".to_string(), rng.random_range(0.0..6.0f64).floor());
    }
    ScenarioConfig {
        scenario_id: "random".into(),
        num_mds,
        num_ess,
        horizon,
        md_positions: Placement::Uniform { seed: rng.random() },
        deadline_slots: if rng.random_bool(0.5) { 0 } else { rng.random_range(1..=30) },
        arrival_rates: PerNode::Each(rates),
        arrival_kind: if poisson { ArrivalKind::Poisson } else { ArrivalKind::Bernoulli },
        power_levels: vec![0.0, 0.05, 0.1],
        channel_states: channel,
        cores_per_es: PerNode::Each((0..num_ess).map(|_| rng.random_range(0..=4)).collect()),
        core_speed_hz: rng.random_range(2.5e8..1.5e9),
        local_compute: local,
        backhaul_links: links,
        migration_threshold: rng.random_range(0.0..4.0f64).floor(),
        queue_caps: rng.random_bool(0.3).then(|| QueueCaps {
            q_max: rng.random_range(1..=8),
            k_max: rng.random_range(1..=8),
        }),
        policy_id: policy_id.into(),
        policy_params: params,
        rng_seed: rng.random(),
        ..tiny()
    }
}

pub fn validated(c: ScenarioConfig) -> ValidatedConfig {
    validate_config(c).expect("valid scenario")
}

/// Run `policy` slot by slot, handing every record and post-step state to
/// `visit`.
pub fn drive(
    cfg: &ValidatedConfig,
    policy: &dyn Policy,
    horizon: u64,
    mut visit: impl FnMut(&SlotRecord, &SystemState),
) -> SystemState {
    let mut state = SystemState::initial(cfg);
    let links = !cfg.cfg.backhaul_links.is_empty();
    for _ in 0..horizon {
        let mut action = policy.decide(&state, cfg);
        if links {
            action.migrate = plan_migrations(&state, cfg, cfg.cfg.migration_threshold);
        }
        let rec = step(&mut state, &action, cfg).expect("policy actions are valid");
        visit(&rec, &state);
    }
    state
}

/// Random state with queue lengths up to `max_len` and random channels.
pub fn random_state(rng: &mut ChaCha8Rng, cfg: &ValidatedConfig, max_len: u32) -> SystemState {
    let (u, j) = (cfg.num_mds(), cfg.num_ess());
    let q: Vec<u32> = (0..u).map(|_| rng.random_range(0..=max_len)).collect();
    let k: Vec<u32> = (0..u * j).map(|_| rng.random_range(0..=max_len)).collect();
    let n = cfg.cfg.channel_states.num_states() as u8;
    let ch: Vec<u8> = (0..u * j).map(|_| rng.random_range(0..n)).collect();
    SystemState::from_counts(u, j, rng.random_range(0..1000), &q, &k, &ch)
}

/// Coefficient of determination of the least-squares line through `ys`
/// indexed by position.
pub fn linear_r2(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in ys.iter().enumerate() {
        let dx = x as f64 - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}
