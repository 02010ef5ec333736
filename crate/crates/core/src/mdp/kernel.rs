use crate::config::ValidatedConfig;
use crate::dynamics::{shannon_tasks, tasks_for_cores};
use crate::exec::{map_indices, ExecMode};

use super::space::{enumerate_actions, state_space, ActionSpace, StateSpace};
use super::{MdpError, MdpSpec, RewardKind, KERNEL_ENTRY_CAP};

/// Sparse kernel `P(s′|s,a)` and reward `R(s,a)`, one CSR row per
/// `(s, a)` pair at position `s·|A| + a`. Successors within a row are
/// sorted by index.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    pub states: StateSpace,
    pub actions: ActionSpace,
    row_ptr: Vec<usize>,
    next: Vec<u32>,
    prob: Vec<f64>,
    reward: Vec<f64>,
}

impl TransitionModel {
    /// A model given directly by its rows, `rows[s·A + a]` listing
    /// `(successor, probability)`. States and actions carry no queue meaning.
    pub fn from_rows(num_actions: usize, rows: Vec<Vec<(u32, f64)>>, reward: Vec<f64>) -> Self {
        assert!(num_actions > 0 && rows.len().is_multiple_of(num_actions) && rows.len() == reward.len());
        let num_states = rows.len() / num_actions;
        let mut row_ptr = vec![0];
        let (mut next, mut prob) = (Vec::new(), Vec::new());
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (n, p) in row {
                assert!((n as usize) < num_states);
                next.push(n);
                prob.push(p);
            }
            row_ptr.push(next.len());
        }
        TransitionModel {
            states: StateSpace::flat(num_states),
            actions: ActionSpace::opaque(num_actions),
            row_ptr,
            next,
            prob,
            reward,
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_entries(&self) -> usize {
        self.next.len()
    }

    pub fn row(&self, s: usize, a: usize) -> (&[u32], &[f64]) {
        let r = s * self.num_actions() + a;
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.next[span.clone()], &self.prob[span])
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions() + a]
    }

    /// `R(s,a) + γ·Σ P(s′|s,a)·v(s′)`.
    pub fn q_value(&self, s: usize, a: usize, v: &[f64], gamma: f64) -> f64 {
        let (next, prob) = self.row(s, a);
        let ev: f64 = next.iter().zip(prob).map(|(&n, &p)| p * v[n as usize]).sum();
        self.reward(s, a) + gamma * ev
    }

    /// Whether two actions in state `s` have identical rows and rewards.
    pub fn same_row(&self, s: usize, a: usize, b: usize) -> bool {
        self.reward(s, a) == self.reward(s, b) && self.row(s, a) == self.row(s, b)
    }
}

pub fn build_transition_model(spec: &MdpSpec) -> Result<TransitionModel, MdpError> {
    build_transition_model_with(spec, ExecMode::default())
}

/// Enumerate arrivals and channel moves exactly for every state-action pair.
pub fn build_transition_model_with(spec: &MdpSpec, mode: ExecMode) -> Result<TransitionModel, MdpError> {
    let cfg = spec.validate()?;
    let states = state_space(&cfg, spec);
    let actions = enumerate_actions(&cfg);
    let pairs = cfg.num_mds() * cfg.num_ess();
    let outcomes = (cfg.cfg.channel_states.num_states() as f64).powi(pairs as i32)
        * 2f64.powi(cfg.num_mds() as i32);
    let entries = states.len() as f64 * actions.len() as f64 * outcomes.min(states.len() as f64);
    if entries > KERNEL_ENTRY_CAP as f64 {
        return Err(MdpError::ModelTooLarge {
            entries,
            cap: KERNEL_ENTRY_CAP,
        });
    }

    let builder = RowBuilder::new(&cfg, spec, &states, &actions);
    let per_state = map_indices(mode, states.len(), |s| builder.state_rows(s));

    let rows = states.len() * actions.len();
    let total: usize = per_state.iter().map(|b| b.next.len()).sum();
    let mut row_ptr = Vec::with_capacity(rows + 1);
    let mut next = Vec::with_capacity(total);
    let mut prob = Vec::with_capacity(total);
    let mut reward = Vec::with_capacity(rows);
    row_ptr.push(0);
    for block in per_state {
        for len in block.lens {
            row_ptr.push(row_ptr.last().unwrap() + len);
        }
        next.extend(block.next);
        prob.extend(block.prob);
        reward.extend(block.reward);
    }
    Ok(TransitionModel {
        states,
        actions,
        row_ptr,
        next,
        prob,
        reward,
    })
}

struct StateBlock {
    lens: Vec<usize>,
    next: Vec<u32>,
    prob: Vec<f64>,
    reward: Vec<f64>,
}

struct RowBuilder<'a> {
    cfg: &'a ValidatedConfig,
    spec: &'a MdpSpec,
    states: &'a StateSpace,
    actions: &'a ActionSpace,
    /// Per-MD Bernoulli arrival probabilities.
    lambdas: Vec<f64>,
}

impl<'a> RowBuilder<'a> {
    fn new(cfg: &'a ValidatedConfig, spec: &'a MdpSpec, states: &'a StateSpace, actions: &'a ActionSpace) -> Self {
        RowBuilder {
            cfg,
            spec,
            states,
            actions,
            lambdas: cfg.arrival_rates.clone(),
        }
    }

    /// Joint channel successors of `ch`, zero-probability moves omitted.
    fn channel_moves(&self, ch: &[u8]) -> Vec<(Vec<u8>, f64)> {
        let t = &self.cfg.cfg.channel_states.transition;
        let mut out: Vec<(Vec<u8>, f64)> = vec![(Vec::with_capacity(ch.len()), 1.0)];
        for &c in ch {
            let row = &t[c as usize];
            out = out
                .into_iter()
                .flat_map(|(prefix, p)| {
                    row.iter().enumerate().filter(|(_, &q)| q > 0.0).map(move |(n, &q)| {
                        let mut v = prefix.clone();
                        v.push(n as u8);
                        (v, p * q)
                    })
                })
                .collect();
        }
        out
    }

    /// Arrival vectors with their probabilities, zero-probability ones omitted.
    fn arrival_moves(&self) -> Vec<(Vec<u32>, f64)> {
        let mut out: Vec<(Vec<u32>, f64)> = vec![(Vec::new(), 1.0)];
        for &lam in &self.lambdas {
            out = out
                .into_iter()
                .flat_map(|(prefix, p)| {
                    [(0u32, 1.0 - lam), (1u32, lam)].into_iter().filter(|(_, q)| *q > 0.0).map(move |(a, q)| {
                        let mut v = prefix.clone();
                        v.push(a);
                        (v, p * q)
                    })
                })
                .collect();
        }
        out
    }

    fn state_rows(&self, s: usize) -> StateBlock {
        let cfg = self.cfg;
        let (u, jn) = (cfg.num_mds(), cfg.num_ess());
        let (q_max, k_max) = (self.spec.q_max, self.spec.k_max);
        let d = self.states.decode(s);
        let chan = self.channel_moves(&d.ch);
        let arr = self.arrival_moves();
        let mut block = StateBlock {
            lens: Vec::with_capacity(self.actions.len()),
            next: Vec::new(),
            prob: Vec::new(),
            reward: Vec::with_capacity(self.actions.len()),
        };
        let multipliers = &cfg.cfg.channel_states.multipliers;
        let mut succ: Vec<(u32, f64)> = Vec::new();

        for act in &self.actions.actions {
            // computing service, deterministic
            let mut k1 = d.k.clone();
            let mut completions = 0u32;
            for (j, alloc) in act.cores.iter().enumerate() {
                for (i, &cores) in alloc.iter().enumerate() {
                    let idx = i * jn + j;
                    let served = k1[idx].min(tasks_for_cores(cores, cfg));
                    k1[idx] -= served;
                    completions += served;
                }
            }
            let mut sharers = vec![0u32; jn];
            for (j, _) in act.md.iter().flatten() {
                sharers[*j] += 1;
            }

            succ.clear();
            let mut admitted = 0.0;
            for (ch_next, p_ch) in &chan {
                let mut k2 = k1.clone();
                let mut q1 = d.q.clone();
                for (i, choice) in act.md.iter().enumerate() {
                    let Some((j, level)) = *choice else { continue };
                    let idx = i * jn + j;
                    let gain = cfg.gain(i, j) * multipliers[ch_next[idx] as usize];
                    let share = cfg.cfg.bandwidth_hz / sharers[j] as f64;
                    let r = shannon_tasks(cfg.cfg.power_levels[level], gain, share, cfg);
                    let moved = q1[i].min(r);
                    q1[i] -= moved;
                    k2[idx] = (k2[idx] + moved).min(k_max);
                }
                if self.spec.reward_kind == RewardKind::AdmittedThroughput {
                    let room: f64 = (0..u).filter(|&i| q1[i] < q_max).map(|i| self.lambdas[i]).sum();
                    admitted += p_ch * room;
                }
                for (a, p_a) in &arr {
                    let q2: Vec<u32> = q1.iter().zip(a).map(|(&q, &x)| (q + x).min(q_max)).collect();
                    let n = self.states.encode(&q2, &k2, ch_next) as u32;
                    succ.push((n, p_ch * p_a));
                }
            }
            succ.sort_by_key(|&(n, _)| n);
            let start = block.next.len();
            for &(n, p) in &succ {
                if block.next.len() > start && *block.next.last().unwrap() == n {
                    *block.prob.last_mut().unwrap() += p;
                } else {
                    block.next.push(n);
                    block.prob.push(p);
                }
            }
            block.lens.push(block.next.len() - start);
            block.reward.push(match self.spec.reward_kind {
                RewardKind::Completions => completions as f64,
                RewardKind::AdmittedThroughput => admitted,
            });
        }
        block
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ChannelModel, PerNode, Placement};
    use crate::mdp::tests::unit_spec;
    use crate::model::Action;

    fn action_index(model: &TransitionModel, a: &Action) -> usize {
        model.actions.index_of(a).unwrap()
    }

    #[test]
    fn example_row_with_half_arrival_rate() {
        let model = build_transition_model(&unit_spec(0.5, 2, 2)).unwrap();
        let sp = &model.states;
        let s = sp.encode(&[0], &[1], &[0]);
        let mut a = Action::idle(1, 1);
        a.cores[0][0] = 1;
        let a = action_index(&model, &a);
        assert_eq!(model.reward(s, a), 1.0);
        let (next, prob) = model.row(s, a);
        let mut got: Vec<(usize, f64)> = next.iter().map(|&n| n as usize).zip(prob.iter().copied()).collect();
        got.sort_by_key(|x| x.0);
        let mut want = vec![(sp.encode(&[1], &[0], &[0]), 0.5), (sp.encode(&[0], &[0], &[0]), 0.5)];
        want.sort_by_key(|x| x.0);
        assert_eq!(got, want);
    }

    #[test]
    fn no_randomness_means_single_successors() {
        let mut spec = unit_spec(0.0, 2, 2);
        spec.base.num_ess = 2;
        spec.base.es_positions = Placement::Grid;
        spec.base.channel_states = ChannelModel {
            multipliers: vec![0.5, 1.5],
            transition: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let m = build_transition_model(&spec).unwrap();
        for s in 0..m.num_states() {
            for a in 0..m.num_actions() {
                assert_eq!(m.row(s, a).0.len(), 1);
            }
        }
    }

    #[test]
    fn rows_are_stochastic() {
        let mut spec = unit_spec(0.37, 2, 3);
        spec.base.num_mds = 2;
        spec.base.md_positions = Placement::Grid;
        spec.base.arrival_rates = PerNode::Each(vec![0.37, 0.81]);
        spec.base.channel_states = ChannelModel::default();
        spec.base.power_levels = vec![0.0, 0.05, 0.1];
        let m = build_transition_model(&spec).unwrap();
        for s in 0..m.num_states() {
            for a in 0..m.num_actions() {
                let (next, prob) = m.row(s, a);
                let sum: f64 = prob.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12, "row ({s},{a}) sums to {sum}");
                assert!(prob.iter().all(|&p| p >= 0.0));
                assert!(next.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn overflow_at_caps_is_dropped() {
        let model = build_transition_model(&unit_spec(1.0, 2, 2)).unwrap();
        let sp = &model.states;
        let s = sp.encode(&[2], &[2], &[0]);
        // idle: the arrival finds Q full
        let (next, prob) = model.row(s, 0);
        assert_eq!((next, prob), (&[s as u32][..], &[1.0][..]));
        // transmitting two tasks into a full K drops both, Q refills by one
        let mut a = Action::idle(1, 1);
        a.power[0] = 0.1;
        a.assoc[0] = Some(0);
        let a = action_index(&model, &a);
        let (next, _) = model.row(s, a);
        assert_eq!(next, &[sp.encode(&[1], &[2], &[0]) as u32]);
        assert_eq!(model.reward(s, a), 0.0);
    }

    #[test]
    fn admitted_reward_counts_room() {
        let mut spec = unit_spec(0.4, 2, 2);
        spec.reward_kind = RewardKind::AdmittedThroughput;
        let model = build_transition_model(&spec).unwrap();
        let full = model.states.encode(&[2], &[0], &[0]);
        assert_eq!(model.reward(full, 0), 0.0);
        assert_eq!(model.reward(0, 0), 0.4);
        let mut a = Action::idle(1, 1);
        a.power[0] = 0.1;
        a.assoc[0] = Some(0);
        assert_eq!(model.reward(full, action_index(&model, &a)), 0.4);
    }

    #[test]
    fn modes_build_identical_models() {
        let mut spec = unit_spec(0.6, 2, 2);
        spec.base.channel_states = ChannelModel::default();
        let a = build_transition_model_with(&spec, ExecMode::Sequential).unwrap();
        let b = build_transition_model_with(&spec, ExecMode::Parallel).unwrap();
        assert_eq!((&a.row_ptr, &a.next, &a.prob, &a.reward), (&b.row_ptr, &b.next, &b.prob, &b.reward));
    }
}
