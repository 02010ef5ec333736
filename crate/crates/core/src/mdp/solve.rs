use crate::exec::{fill_indexed, ExecMode};

use super::kernel::TransitionModel;
use super::policy::SolvedPolicy;
use super::{MdpError, MdpSpec};

pub fn value_iteration(spec: &MdpSpec, model: &TransitionModel) -> Result<SolvedPolicy, MdpError> {
    value_iteration_with(spec, model, ExecMode::default())
}

/// Jacobi value iteration `V ← max_a [R + γ·P·V]` from `V = 0` until the
/// sup-norm change is at most `epsilon`, then the greedy policy with ties
/// going to the lowest action index.
pub fn value_iteration_with(spec: &MdpSpec, model: &TransitionModel, mode: ExecMode) -> Result<SolvedPolicy, MdpError> {
    let (policy, v, history) = iterate(model, spec.gamma, spec.epsilon, spec.max_iterations, mode)?;
    let iterations = history.len() as u64;
    Ok(SolvedPolicy::new(spec.clone(), model, policy, v, iterations, history))
}

/// Greedy policy, final values and residual history.
pub type Iterated = (Vec<u32>, Vec<f64>, Vec<f64>);

/// Core loop of value iteration.
pub fn iterate(
    model: &TransitionModel,
    gamma: f64,
    epsilon: f64,
    max_iterations: u64,
    mode: ExecMode,
) -> Result<Iterated, MdpError> {
    let n = model.num_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0u64;
    loop {
        if iterations >= max_iterations {
            return Err(MdpError::NonConvergence {
                iterations,
                residual: history.last().copied().unwrap_or(f64::INFINITY),
                epsilon,
            });
        }
        fill_indexed(mode, &mut next, |s, out| *out = greedy(model, s, &v, gamma).1);
        iterations += 1;
        let residual = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        history.push(residual);
        std::mem::swap(&mut v, &mut next);
        if residual <= epsilon {
            break;
        }
    }
    let mut policy = vec![0u32; n];
    fill_indexed(mode, &mut policy, |s, out| *out = greedy(model, s, &v, gamma).0 as u32);
    Ok((policy, v, history))
}

/// Best action and its value in state `s`; the first maximizer wins.
pub(crate) fn greedy(model: &TransitionModel, s: usize, v: &[f64], gamma: f64) -> (usize, f64) {
    let mut best = (0, model.q_value(s, 0, v, gamma));
    for a in 1..model.num_actions() {
        let q = model.q_value(s, a, v, gamma);
        if q > best.1 {
            best = (a, q);
        }
    }
    best
}

/// Discounted value of a fixed policy by successive approximation, stopped
/// once the sup-norm change is at most `tol`.
pub fn evaluate_policy(model: &TransitionModel, policy: &[u32], gamma: f64, tol: f64) -> Vec<f64> {
    let mut v = vec![0.0; model.num_states()];
    loop {
        let next: Vec<f64> = (0..v.len()).map(|s| model.q_value(s, policy[s] as usize, &v, gamma)).collect();
        let change = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change <= tol {
            return v;
        }
    }
}

/// Expected mean per-slot reward over the first `horizon` slots under
/// `policy`, starting from state `start`: `(1/N)·Σ_t μ_t·R_π`.
pub fn predicted_average_reward(model: &TransitionModel, policy: &[u32], start: usize, horizon: u64) -> f64 {
    let n = model.num_states();
    let mut mu = vec![0.0; n];
    let mut next = vec![0.0; n];
    mu[start] = 1.0;
    let mut total = 0.0;
    for _ in 0..horizon {
        next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..n {
            if mu[s] == 0.0 {
                continue;
            }
            let a = policy[s] as usize;
            total += mu[s] * model.reward(s, a);
            let (succ, prob) = model.row(s, a);
            for (&t, &p) in succ.iter().zip(prob) {
                next[t as usize] += mu[s] * p;
            }
        }
        std::mem::swap(&mut mu, &mut next);
    }
    total / horizon.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ChannelModel;
    use crate::mdp::build_transition_model;
    use crate::mdp::tests::unit_spec;

    #[test]
    fn single_state_geometric_series() {
        let m = TransitionModel::from_rows(1, vec![vec![(0, 1.0)]], vec![1.0]);
        let (_, v, _) = iterate(&m, 0.9, 1e-12, 10_000, ExecMode::Sequential).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn single_state_two_actions() {
        let m = TransitionModel::from_rows(2, vec![vec![(0, 1.0)], vec![(0, 1.0)]], vec![0.0, 1.0]);
        let (pi, v, _) = iterate(&m, 0.5, 1e-12, 10_000, ExecMode::Sequential).unwrap();
        assert_eq!(pi, vec![1]);
        assert!((v[0] - 2.0).abs() < 1e-9);
        let spec = crate::mdp::tests::unit_spec(0.0, 1, 1);
        let spec = MdpSpec { gamma: 0.5, ..spec };
        let best = crate::mdp::brute_force_best_policy(&spec, &m).unwrap();
        assert_eq!(best.policy, vec![1]);
        assert!((best.values[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reward_gives_zero_value() {
        let spec = unit_spec(0.0, 2, 2);
        let model = build_transition_model(&spec).unwrap();
        let sol = value_iteration(&spec, &model).unwrap();
        // λ = 0 from the empty state: nothing ever completes
        assert_eq!(sol.values()[0], 0.0);
    }

    #[test]
    fn residuals_never_increase() {
        let mut spec = unit_spec(0.6, 2, 2);
        spec.base.channel_states = ChannelModel::default();
        spec.epsilon = 1e-10;
        let model = build_transition_model(&spec).unwrap();
        let sol = value_iteration(&spec, &model).unwrap();
        let h = sol.residual_history();
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
        assert!(sol.residual() <= 1e-10);
        assert_eq!(h.len() as u64, sol.iterations());
    }

    #[test]
    fn modes_agree_bitwise() {
        let mut spec = unit_spec(0.6, 2, 2);
        spec.base.channel_states = ChannelModel::default();
        let model = build_transition_model(&spec).unwrap();
        let a = value_iteration_with(&spec, &model, ExecMode::Sequential).unwrap();
        let b = value_iteration_with(&spec, &model, ExecMode::Parallel).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.policy(), b.policy());
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let mut spec = unit_spec(0.6, 2, 2);
        spec.max_iterations = 3;
        spec.epsilon = 1e-12;
        let model = build_transition_model(&spec).unwrap();
        assert!(matches!(value_iteration(&spec, &model), Err(MdpError::NonConvergence { iterations: 3, .. })));
    }

    #[test]
    fn predicted_reward_of_always_serve() {
        // λ = 1, r = 2, one task per core: steady state completes one per slot
        let spec = unit_spec(1.0, 2, 2);
        let model = build_transition_model(&spec).unwrap();
        let sol = value_iteration(&spec, &model).unwrap();
        let avg = predicted_average_reward(&model, sol.policy(), 0, 10_000);
        assert!((avg - 1.0).abs() < 1e-3, "{avg}");
    }
}
