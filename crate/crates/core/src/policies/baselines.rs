use crate::config::ValidatedConfig;
use crate::dynamics::{link_gain, tasks_for_cores};
use crate::model::{Action, SystemState};

use super::{backlog_first_cores, even_split_cores};

/// Associate with the strongest instantaneous link at full power. Cores are
/// split evenly, blind to computing backlog.
pub fn decide_transmission_based(state: &SystemState, cfg: &ValidatedConfig) -> Action {
    let (u, jn) = (cfg.num_mds(), cfg.num_ess());
    let mut a = Action::idle(u, jn);
    let p = cfg.max_power();
    for i in 0..u {
        if state.q_md[i] == 0 || p <= 0.0 {
            continue;
        }
        let mut best = 0;
        for j in 1..jn {
            if link_gain(state, cfg, i, j) > link_gain(state, cfg, i, best) {
                best = j;
            }
        }
        a.power[i] = p;
        a.assoc[i] = Some(best);
    }
    for j in 0..jn {
        a.cores[j] = even_split_cores(state, j, cfg.cores[j]);
    }
    a
}

/// Associate with the server holding the smallest total backlog at full
/// power, blind to channel quality. Cores go to the largest backlogs first.
pub fn decide_computation_based(state: &SystemState, cfg: &ValidatedConfig) -> Action {
    let (u, jn) = (cfg.num_mds(), cfg.num_ess());
    let mut a = Action::idle(u, jn);
    let p = cfg.max_power();
    let backlog: Vec<u64> = (0..jn).map(|j| state.es_backlog(j)).collect();
    let target = (0..jn).min_by_key(|&j| (backlog[j], j)).expect("J >= 1");
    for i in 0..u {
        if state.q_md[i] == 0 || p <= 0.0 {
            continue;
        }
        a.power[i] = p;
        a.assoc[i] = Some(target);
    }
    let per_core = tasks_for_cores(1, cfg);
    for j in 0..jn {
        a.cores[j] = backlog_first_cores(state, j, cfg.cores[j], per_core);
    }
    a
}
