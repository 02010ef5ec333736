use crate::config::ValidatedConfig;
use crate::model::{Action, SystemState};

use super::{MdpError, MdpSpec};

/// Mixed-radix indexing of truncated states. Digits, least significant
/// first: `Q_0..Q_{U−1}` (radix q_max+1), `K_ij` row-major (radix k_max+1),
/// then channel indices row-major. Index 0 is the all-empty state with
/// every channel in state 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub num_mds: usize,
    pub num_ess: usize,
    pub q_max: u32,
    pub k_max: u32,
    pub num_channels: usize,
    len: usize,
}

/// A decoded state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateDigits {
    pub q: Vec<u32>,
    pub k: Vec<u32>,
    pub ch: Vec<u8>,
}

impl StateSpace {
    /// `n` states with no queue structure.
    pub(crate) fn flat(n: usize) -> Self {
        StateSpace {
            num_mds: 0,
            num_ess: 0,
            q_max: 0,
            k_max: 0,
            num_channels: 1,
            len: n,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn pairs(&self) -> usize {
        self.num_mds * self.num_ess
    }

    pub fn encode(&self, q: &[u32], k: &[u32], ch: &[u8]) -> usize {
        debug_assert_eq!((q.len(), k.len(), ch.len()), (self.num_mds, self.pairs(), self.pairs()));
        let mut idx = 0usize;
        let mut stride = 1usize;
        for &d in q {
            debug_assert!(d <= self.q_max);
            idx += d as usize * stride;
            stride *= self.q_max as usize + 1;
        }
        for &d in k {
            debug_assert!(d <= self.k_max);
            idx += d as usize * stride;
            stride *= self.k_max as usize + 1;
        }
        for &d in ch {
            idx += d as usize * stride;
            stride *= self.num_channels;
        }
        idx
    }

    pub fn decode(&self, mut idx: usize) -> StateDigits {
        let mut next = |radix: usize| {
            let d = idx % radix;
            idx /= radix;
            d
        };
        let q = (0..self.num_mds).map(|_| next(self.q_max as usize + 1) as u32).collect();
        let k = (0..self.pairs()).map(|_| next(self.k_max as usize + 1) as u32).collect();
        let ch = (0..self.pairs()).map(|_| next(self.num_channels) as u8).collect();
        StateDigits { q, k, ch }
    }

    /// Index of a simulator state after clamping queues to the caps.
    pub fn index_clamped(&self, state: &SystemState) -> usize {
        let q: Vec<u32> = state.q_md.iter().map(|&x| x.min(self.q_max)).collect();
        let k: Vec<u32> = state.k_es.iter().map(|&x| x.min(self.k_max)).collect();
        let top = (self.num_channels - 1) as u8;
        let ch: Vec<u8> = state.channel_idx.iter().map(|&c| c.min(top)).collect();
        self.encode(&q, &k, &ch)
    }
}

/// Index the truncated state space of `spec`.
pub fn enumerate_states(spec: &MdpSpec) -> Result<StateSpace, MdpError> {
    let cfg = spec.validate()?;
    Ok(state_space(&cfg, spec))
}

pub(crate) fn state_space(cfg: &ValidatedConfig, spec: &MdpSpec) -> StateSpace {
    let count = super::state_count(cfg, spec.q_max, spec.k_max);
    StateSpace {
        num_mds: cfg.num_mds(),
        num_ess: cfg.num_ess(),
        q_max: spec.q_max,
        k_max: spec.k_max,
        num_channels: cfg.cfg.channel_states.num_states(),
        len: count as usize,
    }
}

/// A joint decision: each MD's `(es, power level)` or idle, and each ES's
/// core split `cores[j][i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdpAction {
    pub md: Vec<Option<(usize, usize)>>,
    pub cores: Vec<Vec<u32>>,
}

/// Every joint action, index 0 being all-idle with no cores assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    pub actions: Vec<MdpAction>,
    power_levels: Vec<f64>,
}

impl ActionSpace {
    /// `n` actions that do not map to simulator actions.
    pub(crate) fn opaque(n: usize) -> Self {
        ActionSpace {
            actions: vec![MdpAction { md: Vec::new(), cores: Vec::new() }; n],
            power_levels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn to_action(&self, idx: usize) -> Action {
        let a = &self.actions[idx];
        let u = a.md.len();
        let mut out = Action::idle(u, a.cores.len());
        for (i, choice) in a.md.iter().enumerate() {
            if let Some((j, level)) = *choice {
                out.assoc[i] = Some(j);
                out.power[i] = self.power_levels[level];
            }
        }
        out.cores = a.cores.clone();
        out
    }

    /// Position of a simulator action, if it is expressible in this space.
    /// Associations without power count as idle; migrations and local
    /// admission are not representable.
    pub fn index_of(&self, action: &Action) -> Option<usize> {
        if !action.migrate.is_empty() || action.local_admit.iter().any(|&x| x > 0) {
            return None;
        }
        let mut md = Vec::with_capacity(action.power.len());
        for (p, assoc) in action.power.iter().zip(&action.assoc) {
            if *p > 0.0 {
                let level = self.power_levels.iter().position(|l| l == p)?;
                md.push(Some(((*assoc)?, level)));
            } else {
                md.push(None);
            }
        }
        let target = MdpAction {
            md,
            cores: action.cores.clone(),
        };
        self.actions.iter().position(|a| *a == target)
    }
}

/// All joint actions in a fixed order: MD choices vary slowest, core splits
/// fastest; within each factor, lower indices come first.
pub fn enumerate_actions(cfg: &ValidatedConfig) -> ActionSpace {
    let (u, jn) = (cfg.num_mds(), cfg.num_ess());
    let levels = cfg.cfg.power_levels.len();
    let mut md_choices: Vec<Option<(usize, usize)>> = vec![None];
    for j in 0..jn {
        for l in 1..levels {
            md_choices.push(Some((j, l)));
        }
    }
    let per_es: Vec<Vec<Vec<u32>>> = cfg.cores.iter().map(|&m| core_splits(u, m)).collect();

    let md_tuples = cartesian(&vec![md_choices; u]);
    let core_tuples = cartesian(&per_es);
    let mut actions = Vec::with_capacity(md_tuples.len() * core_tuples.len());
    for md in &md_tuples {
        for cores in &core_tuples {
            actions.push(MdpAction {
                md: md.clone(),
                cores: cores.clone(),
            });
        }
    }
    ActionSpace {
        actions,
        power_levels: cfg.cfg.power_levels.clone(),
    }
}

/// All vectors of `u` non-negative integers summing to at most `m`, in
/// lexicographic order.
fn core_splits(u: usize, m: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, u: usize, left: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == u {
            out.push(prefix.clone());
            return;
        }
        for x in 0..=left {
            prefix.push(x);
            rec(prefix, u, left - x, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(u), u, m, &mut out);
    out
}

/// Cartesian product with the first factor varying slowest.
fn cartesian<T: Clone>(factors: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for f in factors {
        out = out
            .iter()
            .flat_map(|prefix| {
                f.iter().map(move |x| {
                    let mut v = prefix.clone();
                    v.push(x.clone());
                    v
                })
            })
            .collect();
    }
    out
}
