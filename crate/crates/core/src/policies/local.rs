use crate::config::ValidatedConfig;
use crate::model::{Action, SystemState};

use super::decide_backpressure;

/// How many of the next arrivals fit under the local threshold: arrival `k`
/// (0-based) goes local while `q_local + k < theta`.
pub fn admit_count(q_local: u32, theta: f64) -> u32 {
    if theta.is_infinite() {
        return u32::MAX;
    }
    let room = (theta - q_local as f64).ceil();
    if room <= 0.0 {
        0
    } else {
        room.min(u32::MAX as f64) as u32
    }
}

/// Stream-level partial offloading: arrivals fill the local queue up to
/// `theta`, the rest is offloaded under backpressure with weight `v`.
pub fn decide_local_offload_threshold(state: &SystemState, cfg: &ValidatedConfig, theta: f64, v: f64) -> Action {
    let mut a = decide_backpressure(state, cfg, v);
    for (admit, &q) in a.local_admit.iter_mut().zip(&state.q_local) {
        *admit = admit_count(q, theta);
    }
    a
}
