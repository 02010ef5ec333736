//! Exact reference solutions for small models, used to check value
//! iteration.

use nalgebra::{DMatrix, DVector};

use super::kernel::TransitionModel;
use super::{MdpError, MdpSpec};

/// Largest number of candidate policies the oracle enumerates.
pub const ORACLE_CANDIDATE_CAP: f64 = 2e7;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Componentwise maximum of the values of all enumerated policies.
    pub values: Vec<f64>,
    /// A policy attaining `values` (largest value sum, first found).
    pub policy: Vec<u32>,
    pub candidates: u64,
}

/// Exact discounted value `(I − γ·P_π)⁻¹·R_π` by dense LU.
pub fn evaluate_policy_exact(model: &TransitionModel, policy: &[u32], gamma: f64) -> Vec<f64> {
    let n = model.num_states();
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for s in 0..n {
        let a = policy[s] as usize;
        r[s] = model.reward(s, a);
        let (next, prob) = model.row(s, a);
        for (&t, &p) in next.iter().zip(prob) {
            m[(s, t as usize)] -= gamma * p;
        }
    }
    let v = m.lu().solve(&r).expect("I − γP is nonsingular for γ < 1");
    v.iter().copied().collect()
}

/// Representative actions per state: the first of every group of actions
/// with identical rows and rewards.
fn distinct_actions(model: &TransitionModel) -> Vec<Vec<u32>> {
    (0..model.num_states())
        .map(|s| {
            let mut reps: Vec<u32> = Vec::new();
            for a in 0..model.num_actions() {
                if !reps.iter().any(|&b| model.same_row(s, a, b as usize)) {
                    reps.push(a as u32);
                }
            }
            reps
        })
        .collect()
}

/// Enumerate every stationary deterministic policy, evaluate each exactly
/// and keep the best. Actions with identical rows are enumerated once.
/// Refuses with [`MdpError::OracleTooLarge`] unless the candidate count is
/// at most 2·10⁷, or every state has at most 4 distinct actions and there are
/// at most 12 states.
pub fn brute_force_best_policy(spec: &MdpSpec, model: &TransitionModel) -> Result<OracleResult, MdpError> {
    let n = model.num_states();
    let reps = distinct_actions(model);
    let candidates: f64 = reps.iter().map(|r| r.len() as f64).product();
    let small = reps.iter().all(|r| r.len() <= 4) && n <= 12;
    if candidates > ORACLE_CANDIDATE_CAP && !small {
        return Err(MdpError::OracleTooLarge { candidates, states: n });
    }
    let mut digits = vec![0usize; n];
    let mut best_values = vec![f64::NEG_INFINITY; n];
    let mut best: Option<(f64, Vec<u32>)> = None;
    let mut count = 0u64;
    loop {
        let policy: Vec<u32> = digits.iter().zip(&reps).map(|(&d, r)| r[d]).collect();
        let v = evaluate_policy_exact(model, &policy, spec.gamma);
        count += 1;
        for (b, x) in best_values.iter_mut().zip(&v) {
            *b = b.max(*x);
        }
        let sum: f64 = v.iter().sum();
        if best.as_ref().is_none_or(|(s, _)| sum > *s) {
            best = Some((sum, policy));
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == n {
                let (_, policy) = best.expect("at least one policy");
                return Ok(OracleResult {
                    values: best_values,
                    policy,
                    candidates: count,
                });
            }
            digits[pos] += 1;
            if digits[pos] < reps[pos].len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Howard policy iteration with exact evaluation; switches an action only
/// on a strict improvement beyond round-off. Limited to 2,000 states.
pub fn policy_iteration(spec: &MdpSpec, model: &TransitionModel) -> Result<(Vec<u32>, Vec<f64>), MdpError> {
    let n = model.num_states();
    if n > 2000 {
        return Err(MdpError::OracleTooLarge {
            candidates: f64::INFINITY,
            states: n,
        });
    }
    let mut policy = vec![0u32; n];
    loop {
        let v = evaluate_policy_exact(model, &policy, spec.gamma);
        let mut changed = false;
        for s in 0..n {
            let current = model.q_value(s, policy[s] as usize, &v, spec.gamma);
            let mut best = (policy[s], current);
            for a in 0..model.num_actions() {
                let q = model.q_value(s, a, &v, spec.gamma);
                if q > best.1 + 1e-12 * (1.0 + best.1.abs()) {
                    best = (a as u32, q);
                }
            }
            if best.0 != policy[s] {
                policy[s] = best.0;
                changed = true;
            }
        }
        if !changed {
            return Ok((policy, v));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ChannelModel;
    use crate::mdp::tests::unit_spec;
    use crate::mdp::{build_transition_model, value_iteration};

    #[test]
    fn exact_evaluation_of_three_state_chain() {
        // λ = 0, one core, one task per core, r = 2: from (Q=2, K=0) under
        // "transmit and serve" the chain is (2,0) → (0,2) → (0,1) → (0,0).
        let spec = unit_spec(0.0, 2, 2);
        let model = build_transition_model(&spec).unwrap();
        let sp = &model.states;
        let mut act = crate::model::Action::idle(1, 1);
        act.power[0] = 0.1;
        act.assoc[0] = Some(0);
        act.cores[0][0] = 1;
        let a = model.actions.index_of(&act).unwrap() as u32;
        let policy = vec![a; model.num_states()];
        let v = evaluate_policy_exact(&model, &policy, 0.9);
        // hand solution: V(0,0)=0, V(0,1)=1, V(0,2)=1+0.9·1=1.9, V(2,0)=0.9·1.9=1.71
        let at = |q, k| v[sp.encode(&[q], &[k], &[0])];
        assert!((at(0, 0) - 0.0).abs() < 1e-12);
        assert!((at(0, 1) - 1.0).abs() < 1e-12);
        assert!((at(0, 2) - 1.9).abs() < 1e-12);
        assert!((at(2, 0) - 1.71).abs() < 1e-12);
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let mut spec = unit_spec(0.6, 3, 2);
        spec.base.channel_states = ChannelModel::default();
        let model = build_transition_model(&spec).unwrap();
        assert!(matches!(
            brute_force_best_policy(&spec, &model),
            Err(MdpError::OracleTooLarge { .. })
        ));
        // exact policy iteration still applies and agrees with value iteration
        let (pi, v_pi) = policy_iteration(&spec, &model).unwrap();
        let mut tight = spec.clone();
        tight.epsilon = 1e-10;
        let sol = value_iteration(&tight, &model).unwrap();
        let v_vi = evaluate_policy_exact(&model, sol.policy(), spec.gamma);
        let gap = v_pi.iter().zip(&v_vi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-6, "gap {gap}");
        assert_eq!(pi.len(), 24);
    }

    #[test]
    fn oracle_matches_value_iteration_on_small_instance() {
        let mut spec = unit_spec(0.6, 2, 2);
        spec.epsilon = 1e-10;
        let model = build_transition_model(&spec).unwrap();
        let best = brute_force_best_policy(&spec, &model).unwrap();
        let sol = value_iteration(&spec, &model).unwrap();
        let v = evaluate_policy_exact(&model, sol.policy(), spec.gamma);
        for (a, b) in v.iter().zip(&best.values) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        let v_best = evaluate_policy_exact(&model, &best.policy, spec.gamma);
        for (a, b) in v_best.iter().zip(&best.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
