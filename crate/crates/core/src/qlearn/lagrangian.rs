use super::QError;
use crate::model::{BanditClass, ConstraintSet};

#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianQ {
    /// `q[s][a]`, normalized so that max_a Q(s₀, a) = 0.
    pub q: Vec<Vec<f64>>,
    /// Optimal long-run average of the charged reward.
    pub gain: f64,
    pub iterations: usize,
}

/// Lazy-chain weight used to make relative value iteration aperiodic.
const LAZY: f64 = 0.5;

/// r(s,a) − Σ_ℓ γ_ℓ f_{i,ℓ}(s,a).
fn charged_rewards(cls: &BanditClass, class: usize, constraints: &ConstraintSet, gamma: &[f64]) -> Vec<Vec<f64>> {
    (0..cls.state_count)
        .map(|s| {
            (0..cls.action_count)
                .map(|a| {
                    cls.r(s, a)
                        - constraints
                            .constraints
                            .iter()
                            .zip(gamma)
                            .map(|(c, g)| g * c.costs[class][s][a])
                            .sum::<f64>()
                })
                .collect()
        })
        .collect()
}

/// Solves the average-reward optimality equation for the charged reward by relative
/// value iteration, then maps the relative values back to taboo-form Q-factors:
/// Q(s,a) = c(s,a) − D + Σ_{s'≠s₀} p(s,a,s') max_a' Q(s',a').
pub fn lagrangian_q(
    cls: &BanditClass,
    class: usize,
    constraints: &ConstraintSet,
    gamma: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<LagrangianQ, QError> {
    let c = charged_rewards(cls, class, constraints, gamma);
    let (ns, na, s0) = (cls.state_count, cls.action_count, cls.ergodic_state);
    let backup = |h: &[f64], s: usize, a: usize| {
        let mean: f64 = cls.row(s, a).iter().zip(h).map(|(p, v)| p * v).sum();
        c[s][a] + LAZY * mean + (1.0 - LAZY) * h[s]
    };
    let mut h = vec![0.0; ns];
    for m in 1..=max_iter {
        let th: Vec<f64> = (0..ns)
            .map(|s| (0..na).map(|a| backup(&h, s, a)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let (lo, hi) = th
            .iter()
            .zip(&h)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (t, v)| (lo.min(t - v), hi.max(t - v)));
        let gain = th[s0];
        h = th.iter().map(|v| v - gain).collect();
        if hi - lo < tol {
            let rel: Vec<f64> = h.iter().map(|v| LAZY * v).collect();
            let q = (0..ns)
                .map(|s| {
                    (0..na)
                        .map(|a| {
                            let cont: f64 = cls
                                .row(s, a)
                                .iter()
                                .enumerate()
                                .filter(|&(next, _)| next != s0)
                                .map(|(next, p)| p * rel[next])
                                .sum();
                            c[s][a] - gain + cont
                        })
                        .collect()
                })
                .collect();
            return Ok(LagrangianQ { q, gain, iterations: m });
        }
    }
    Err(QError::NoConvergence {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Whittle index of state `s` for a binary-action class under constraint 0, by bisection on
/// the charge γ for Q^γ(s,1) − Q^γ(s,0).
///
/// The bracket is ±10·R_max/(f(s,1) − f(s,0)).
pub fn whittle_bisection(
    cls: &BanditClass,
    class: usize,
    constraints: &ConstraintSet,
    s: usize,
    tol: f64,
) -> Result<f64, QError> {
    if cls.action_count != 2 || constraints.len() != 1 {
        return Err(QError::NotBinary);
    }
    let costs = &constraints.constraints[0].costs[class][s];
    let df = costs[1] - costs[0];
    if df <= 0.0 {
        return Err(QError::NonIndexable(s));
    }
    let bound = 10.0 * cls.reward_bound().max(1e-12) / df;
    let gap = |g: f64| -> Result<f64, QError> {
        let lq = lagrangian_q(cls, class, constraints, &[g], 1e-13, 1_000_000)?;
        Ok(lq.q[s][1] - lq.q[s][0])
    };
    let (mut lo, mut hi) = (-bound, bound);
    if gap(lo)? < 0.0 || gap(hi)? > 0.0 {
        return Err(QError::NonIndexable(s));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
