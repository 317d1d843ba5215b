use serde::{Deserialize, Serialize};

use super::IndexError;
use crate::linalg::{solve_dense, stationary};
use crate::model::BanditClass;

/// Return-cycle quantities of a deterministic policy, all measured from s₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyValue {
    /// Expected reward collected from s₀ until the next return.
    pub v: f64,
    /// Expected cost likewise.
    pub u: f64,
    /// Expected return time.
    pub l: f64,
    /// Long-run average reward V/L.
    pub gamma: f64,
    /// Long-run average cost U/L.
    pub omega: f64,
}

/// Solves (I − P_masked) x = c for one-step payoffs `c`, returning x(s₀).
fn taboo_value(cls: &BanditClass, actions: &[usize], c: &[f64]) -> Result<f64, IndexError> {
    let n = cls.state_count;
    let s0 = cls.ergodic_state;
    let mut m = vec![vec![0.0; n]; n];
    for s in 0..n {
        m[s][s] += 1.0;
        for (next, &p) in cls.row(s, actions[s]).iter().enumerate() {
            if next != s0 {
                m[s][next] -= p;
            }
        }
    }
    let x = solve_dense(&m, c).ok_or(IndexError::Singular)?;
    Ok(x[s0])
}

/// Γ and Ω of `actions` from the taboo systems for rewards, `costs[s][a]` and the constant 1.
pub fn policy_value(cls: &BanditClass, actions: &[usize], costs: &[Vec<f64>]) -> Result<PolicyValue, IndexError> {
    let r: Vec<f64> = (0..cls.state_count).map(|s| cls.r(s, actions[s])).collect();
    let f: Vec<f64> = (0..cls.state_count).map(|s| costs[s][actions[s]]).collect();
    let v = taboo_value(cls, actions, &r)?;
    let u = taboo_value(cls, actions, &f)?;
    let l = taboo_value(cls, actions, &vec![1.0; cls.state_count])?;
    if !(l >= 1.0 - 1e-9) || !l.is_finite() {
        return Err(IndexError::Singular);
    }
    Ok(PolicyValue {
        v,
        u,
        l,
        gamma: v / l,
        omega: u / l,
    })
}

/// Stationary-distribution form of Γ and Ω, for cross-checks.
pub fn stationary_value(cls: &BanditClass, actions: &[usize], costs: &[Vec<f64>]) -> Option<(f64, f64)> {
    let pi = stationary(&cls.policy_kernel(actions))?;
    let g = (0..cls.state_count).map(|s| pi[s] * cls.r(s, actions[s])).sum();
    let o = (0..cls.state_count).map(|s| pi[s] * costs[s][actions[s]]).sum();
    Some((g, o))
}
