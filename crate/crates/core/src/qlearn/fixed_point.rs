use super::QError;
use crate::linalg::solve_dense;
use crate::model::BanditClass;

/// Kernels are indexed `[a][s][s']`, Q and rewards `[s][a]`.
///
/// (T Q)(s,a) = r(s,a) + Σ_{s'≠s₀} p(s,a,s') Q(s', pol(s')).
pub fn apply_t(
    cls: &BanditClass,
    pol: &[usize],
    rewards: &[Vec<f64>],
    kernels: &[Vec<Vec<f64>>],
    q: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let s0 = cls.ergodic_state;
    (0..cls.state_count)
        .map(|s| {
            (0..cls.action_count)
                .map(|a| {
                    let cont: f64 = kernels[a][s]
                        .iter()
                        .enumerate()
                        .filter(|&(next, _)| next != s0)
                        .map(|(next, &p)| p * q[next][pol[next]])
                        .sum();
                    rewards[s][a] + cont
                })
                .collect()
        })
        .collect()
}

/// Whether every state reaches s₀ under `pol` on the support of `kernels`.
pub fn anchor_reachable(cls: &BanditClass, pol: &[usize], kernels: &[Vec<Vec<f64>>]) -> bool {
    let n = cls.state_count;
    let mut reach = vec![false; n];
    reach[cls.ergodic_state] = true;
    loop {
        let mut changed = false;
        for s in 0..n {
            if !reach[s] && kernels[pol[s]][s].iter().enumerate().any(|(next, &p)| p > 0.0 && reach[next]) {
                reach[s] = true;
                changed = true;
            }
        }
        if !changed {
            return reach.iter().all(|&r| r);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoint {
    pub q: Vec<Vec<f64>>,
    pub iterations: usize,
    /// sp(Q_{m+1} − Q_m) for every iteration, anchor included.
    pub spans: Vec<f64>,
}

/// Span of a difference table with the implicit terminal entry 0 included.
fn anchored_span(next: &[Vec<f64>], prev: &[Vec<f64>]) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for (x, y) in next.iter().flatten().zip(prev.iter().flatten()) {
        let d = x - y;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    hi - lo
}

/// Value iteration until the anchored span of successive differences drops below `tol`.
pub fn solve_q_fixed_point(
    cls: &BanditClass,
    pol: &[usize],
    rewards: &[Vec<f64>],
    kernels: &[Vec<Vec<f64>>],
    q0: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint, QError> {
    if !anchor_reachable(cls, pol, kernels) {
        return Err(QError::GoodCaseViolated);
    }
    let mut q = q0.to_vec();
    let mut spans = Vec::new();
    for m in 1..=max_iter {
        let next = apply_t(cls, pol, rewards, kernels, &q);
        let span = anchored_span(&next, &q);
        spans.push(span);
        q = next;
        if span < tol {
            return Ok(FixedPoint { q, iterations: m, spans });
        }
    }
    Err(QError::NoConvergence {
        iterations: max_iter,
        residual: spans.last().copied().unwrap_or(f64::NAN),
    })
}

/// Direct solve of (I − P_masked) Q = r over all SA pairs.
pub fn solve_q_linear(
    cls: &BanditClass,
    pol: &[usize],
    rewards: &[Vec<f64>],
    kernels: &[Vec<Vec<f64>>],
) -> Result<Vec<Vec<f64>>, QError> {
    let (ns, na) = (cls.state_count, cls.action_count);
    let idx = |s: usize, a: usize| s * na + a;
    let n = ns * na;
    let mut m = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for s in 0..ns {
        for a in 0..na {
            let row = idx(s, a);
            m[row][row] += 1.0;
            for (next, &p) in kernels[a][s].iter().enumerate() {
                if next != cls.ergodic_state {
                    m[row][idx(next, pol[next])] -= p;
                }
            }
            b[row] = rewards[s][a];
        }
    }
    let x = solve_dense(&m, &b).ok_or(QError::Singular)?;
    Ok((0..ns).map(|s| x[s * na..(s + 1) * na].to_vec()).collect())
}
