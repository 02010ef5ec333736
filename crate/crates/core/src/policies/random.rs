use rand::Rng;

use crate::config::ValidatedConfig;
use crate::model::{Action, SystemState};
use crate::rng::{slot_rng, Stream};

use super::even_split_cores;

/// Uniform choice among the (ES, positive power) pairs for every MD with a
/// non-empty queue; even core split. Randomness comes from the slot's policy
/// stream, so reruns repeat the same choices.
pub fn decide_random_feasible(state: &SystemState, cfg: &ValidatedConfig) -> Action {
    let (u, jn) = (cfg.num_mds(), cfg.num_ess());
    let mut a = Action::idle(u, jn);
    let levels = &cfg.cfg.power_levels;
    let positive = levels.len() - 1;
    let mut rng = slot_rng(cfg.cfg.rng_seed, Stream::Policy, state.slot);
    if positive > 0 {
        for i in 0..u {
            if state.q_md[i] == 0 {
                continue;
            }
            let pick = rng.random_range(0..jn * positive);
            a.assoc[i] = Some(pick / positive);
            a.power[i] = levels[1 + pick % positive];
        }
    }
    for j in 0..jn {
        a.cores[j] = even_split_cores(state, j, cfg.cores[j]);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{tests::tiny, validate_config};

    #[test]
    fn single_option_is_always_taken() {
        let cfg = validate_config(tiny()).unwrap();
        for slot in 0..50 {
            let mut s = SystemState::from_counts(1, 1, 0, &[2], &[0], &[0]);
            s.slot = slot;
            let a = decide_random_feasible(&s, &cfg);
            assert_eq!((a.assoc[0], a.power[0]), (Some(0), 0.1));
        }
    }

    #[test]
    fn zero_power_only_idles() {
        let mut c = tiny();
        c.power_levels = vec![0.0];
        let cfg = validate_config(c).unwrap();
        let s = SystemState::from_counts(1, 1, 0, &[4], &[0], &[0]);
        let a = decide_random_feasible(&s, &cfg);
        assert_eq!((a.assoc[0], a.power[0]), (None, 0.0));
    }

    #[test]
    fn choices_repeat_for_fixed_seed() {
        let mut c = tiny();
        c.num_ess = 3;
        c.num_mds = 4;
        c.md_positions = crate::config::Placement::Grid;
        c.power_levels = vec![0.0, 0.05, 0.1];
        let cfg = validate_config(c).unwrap();
        let run = || {
            (0..100)
                .map(|t| {
                    let mut s = SystemState::from_counts(4, 3, 0, &[1, 2, 3, 4], &[0; 12], &[0; 12]);
                    s.slot = t;
                    decide_random_feasible(&s, &cfg)
                })
                .collect::<Vec<_>>()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        let distinct: std::collections::BTreeSet<_> = a.iter().map(|x| format!("{:?}", x.assoc)).collect();
        assert!(distinct.len() > 10);
    }
}
