//! Max-weight / drift-plus-penalty control of the tandem queues.
//!
//! An MD's weight for sending to ES `j` at power `p` is
//! `max(Q_i − K_ij, 0)·r̂_i(p, j) − V·p·τ`: the differential backlog times the
//! rate it would get, less the energy penalty. With `V = 0` this is pure
//! max-weight scheduling. The rate depends on how many MDs share ES `j`'s
//! band, which itself depends on everyone's choice. A provisional pass with
//! solo bandwidth seeds the assignment; then MDs in index order re-pick
//! against the others' current choices until a round changes nothing (at
//! most [`SHARING_ROUNDS`] rounds).

use crate::config::ValidatedConfig;
use crate::dynamics::{link_gain, shannon_tasks, tasks_for_cores};
use crate::model::{Action, SystemState};

use super::greedy_cores;

/// A transmission option: ES index, power-level index, weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub es: usize,
    pub level: usize,
    pub weight: f64,
}

/// Highest-weight candidate, first in iteration order on ties, or `None`
/// when no candidate beats idling (weight 0).
pub fn select_best(candidates: impl IntoIterator<Item = Candidate>) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for c in candidates {
        if c.weight > best.map_or(0.0, |b| b.weight) {
            best = Some(c);
        }
    }
    best
}

fn candidates<'a>(
    state: &'a SystemState,
    cfg: &'a ValidatedConfig,
    md: usize,
    v: f64,
    sharers: impl Fn(usize) -> u32 + 'a,
) -> impl Iterator<Item = Candidate> + 'a {
    let levels = &cfg.cfg.power_levels;
    let tau = cfg.cfg.slot_duration;
    let q = state.q_md[md] as f64;
    (0..cfg.num_ess()).flat_map(move |j| {
        let backlog = (q - state.k(md, j) as f64).max(0.0);
        let share = cfg.cfg.bandwidth_hz / sharers(j).max(1) as f64;
        let gain = link_gain(state, cfg, md, j);
        (1..levels.len()).map(move |l| {
            let p = levels[l];
            let rate = shannon_tasks(p, gain, share, cfg) as f64;
            Candidate {
                es: j,
                level: l,
                weight: backlog * rate - v * p * tau,
            }
        })
    })
}

pub const SHARING_ROUNDS: usize = 4;

pub fn decide_backpressure(state: &SystemState, cfg: &ValidatedConfig, v: f64) -> Action {
    let (u, jn) = (cfg.num_mds(), cfg.num_ess());
    let mut a = Action::idle(u, jn);

    let mut choice: Vec<Option<Candidate>> = (0..u)
        .map(|i| {
            if state.q_md[i] == 0 {
                return None;
            }
            select_best(candidates(state, cfg, i, v, |_| 1))
        })
        .collect();
    let mut load = vec![0u32; jn];
    for c in choice.iter().flatten() {
        load[c.es] += 1;
    }

    for _ in 0..SHARING_ROUNDS {
        let mut changed = false;
        for i in 0..u {
            if state.q_md[i] == 0 {
                continue;
            }
            let mine = choice[i].map(|c| c.es);
            if let Some(j) = mine {
                load[j] -= 1;
            }
            let best = select_best(candidates(state, cfg, i, v, |j| load[j] + 1));
            if let Some(c) = best {
                load[c.es] += 1;
            }
            if best.map(|c| (c.es, c.level)) != choice[i].map(|c| (c.es, c.level)) {
                changed = true;
            }
            choice[i] = best;
        }
        if !changed {
            break;
        }
    }

    for (i, c) in choice.iter().enumerate() {
        if let Some(c) = c {
            a.power[i] = cfg.cfg.power_levels[c.level];
            a.assoc[i] = Some(c.es);
        }
    }

    let per_core = tasks_for_cores(1, cfg);
    for j in 0..jn {
        a.cores[j] = greedy_cores(state, j, cfg.cores[j], per_core);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{tests::tiny, validate_config, ChannelModel, PerNode, Placement};
    use crate::geometry::Point;
    use proptest::prelude::*;

    /// One MD equidistant from two ESs, so rates to both are equal.
    fn symmetric(levels: Vec<f64>) -> ValidatedConfig {
        let mut c = tiny();
        c.num_ess = 2;
        c.es_positions = Placement::Explicit(vec![Point::new(40.0, 50.0), Point::new(60.0, 50.0)]);
        c.md_positions = Placement::Explicit(vec![Point::new(50.0, 50.0)]);
        c.channel_states = ChannelModel::constant();
        c.power_levels = levels;
        c.cores_per_es = PerNode::All(1);
        validate_config(c).unwrap()
    }

    #[test]
    fn larger_differential_backlog_wins() {
        let cfg = symmetric(vec![0.0, 0.1]);
        let s = SystemState::from_counts(1, 2, 0, &[6], &[2, 5], &[0, 0]);
        let a = decide_backpressure(&s, &cfg, 0.0);
        assert_eq!(a.assoc, vec![Some(0)]);
        assert_eq!(a.power, vec![0.1]);
    }

    #[test]
    fn empty_queue_idles() {
        let cfg = symmetric(vec![0.0, 0.1]);
        let s = SystemState::from_counts(1, 2, 0, &[0], &[0, 0], &[0, 0]);
        let a = decide_backpressure(&s, &cfg, 0.0);
        assert_eq!((a.assoc[0], a.power[0]), (None, 0.0));
    }

    #[test]
    fn zero_differential_backlog_idles() {
        let cfg = symmetric(vec![0.0, 0.1]);
        let s = SystemState::from_counts(1, 2, 0, &[3], &[3, 3], &[0, 0]);
        let a = decide_backpressure(&s, &cfg, 0.0);
        assert_eq!(a.assoc[0], None);
    }

    #[test]
    fn energy_penalty_prefers_lower_power_then_idles() {
        let cfg = symmetric(vec![0.0, 0.1, 10.0]);
        let s = SystemState::from_counts(1, 2, 0, &[6], &[0, 0], &[0, 0]);
        let rate = |p| shannon_tasks(p, cfg.gain(0, 0), 1e6, &cfg) as f64;
        let (lo, hi) = (rate(0.1), rate(10.0));
        assert!(hi > lo && lo > 0.0);
        assert_eq!(decide_backpressure(&s, &cfg, 0.0).power, vec![10.0]);
        // V large enough that the extra rate does not pay for the extra power
        let v = 6.0 * (hi - lo) / ((10.0 - 0.1) * 0.1) * 1.01;
        assert_eq!(decide_backpressure(&s, &cfg, v).power, vec![0.1]);
        let v = 6.0 * lo / (0.1 * 0.1) * 1.01;
        assert_eq!(decide_backpressure(&s, &cfg, v).power[0], 0.0);
    }

    #[test]
    fn sharing_is_resolved_by_best_response() {
        // Both MDs are closer to ES0. Alone, an MD picks ES0. Together, the
        // first one re-picks the full band at ES1 over half the band at ES0,
        // after which ES0 is uncontested for the second.
        let mut c = tiny();
        c.num_ess = 2;
        c.num_mds = 2;
        c.es_positions = Placement::Explicit(vec![Point::new(45.0, 50.0), Point::new(55.0, 50.0)]);
        c.md_positions = Placement::Explicit(vec![Point::new(49.0, 50.0), Point::new(49.5, 50.0)]);
        c.channel_states = ChannelModel::constant();
        c.power_levels = vec![0.0, 1e3];
        c.task_size_bits = 1e3;
        let cfg = validate_config(c).unwrap();
        let solo = SystemState::from_counts(2, 2, 0, &[50, 0], &[0; 4], &[0; 4]);
        assert_eq!(decide_backpressure(&solo, &cfg, 0.0).assoc, vec![Some(0), None]);
        let both = SystemState::from_counts(2, 2, 0, &[50, 50], &[0; 4], &[0; 4]);
        assert_eq!(decide_backpressure(&both, &cfg, 0.0).assoc, vec![Some(1), Some(0)]);
    }

    #[test]
    fn select_best_breaks_ties_to_first() {
        let c = |es, level, weight| Candidate { es, level, weight };
        assert_eq!(select_best([c(0, 1, 2.0), c(1, 1, 2.0)]).unwrap().es, 0);
        assert_eq!(select_best([c(0, 1, 0.0), c(1, 1, -1.0)]), None);
        assert_eq!(select_best([]), None);
    }

    proptest! {
        #[test]
        fn argmax_is_scale_invariant(
            weights in proptest::collection::vec(-50.0f64..50.0, 1..24),
            scale in 1e-3f64..1e3,
        ) {
            let cands: Vec<Candidate> = weights
                .iter()
                .enumerate()
                .map(|(k, &w)| Candidate { es: k / 4, level: 1 + k % 4, weight: w })
                .collect();
            let pick = |s: f64| {
                select_best(cands.iter().map(|c| Candidate { weight: c.weight * s, ..*c }))
                    .map(|c| (c.es, c.level))
            };
            prop_assert_eq!(pick(1.0), pick(scale));
        }

        #[test]
        fn never_worse_than_idling(q in 0u32..20, k0 in 0u32..20, k1 in 0u32..20) {
            let cfg = symmetric(vec![0.0, 0.05, 0.1]);
            let s = SystemState::from_counts(1, 2, 0, &[q], &[k0, k1], &[0, 0]);
            let a = decide_backpressure(&s, &cfg, 0.0);
            if let Some(j) = a.assoc[0] {
                prop_assert!(q > s.k(0, j));
            }
        }
    }
}
