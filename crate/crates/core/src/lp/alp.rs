//! Adapted-LP (ALP) rounding: integer action counts per (class, state) group that track α*.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::LpError;
use crate::engine::{EngineError, Policy};
use crate::model::{largest_remainder, ConstraintMode, RandomizedPolicy, SaIndex, WcgInstance};

/// Slack on constraint checks, matching the engine's feasibility test.
const FEAS_TOL: f64 = 1e-9;

fn violation(inst: &WcgInstance, residuals: &[f64]) -> f64 {
    inst.constraints
        .constraints
        .iter()
        .zip(residuals)
        .map(|(c, &r)| match c.mode {
            ConstraintMode::Equality => r.abs(),
            ConstraintMode::Inequality => r.max(0.0),
        })
        .sum()
}

/// Result of rounding one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct AlpDecision {
    pub actions: Vec<usize>,
    /// Repair moves applied after rounding.
    pub swaps: usize,
    /// `counts[g][a]` per (class, state) label g.
    pub counts: Vec<Vec<usize>>,
}

/// Rounds α*(t) to integer actions and repairs the original constraints.
///
/// Each (class, state) group gets largest-remainder counts of α*·(group size). While a
/// constraint is violated, one arm moves between actions in one group, choosing the move
/// that most reduces total violation; ties are broken by `rng`. Arms inside a group take
/// actions in index order.
pub fn alp_actions<R: Rng + ?Sized>(
    inst: &WcgInstance,
    sa: &SaIndex,
    alpha: &[f64],
    states: &[usize],
    rng: &mut R,
) -> Result<AlpDecision, LpError> {
    let classes = inst.arm_classes();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); sa.state_total()];
    for (g, (&i, &s)) in classes.iter().zip(states).enumerate() {
        members[sa.state_label(i, s)].push(g);
    }
    let mut owner = vec![(0, 0); sa.state_total()];
    for (i, cls) in inst.classes.iter().enumerate() {
        for s in 0..cls.state_count {
            owner[sa.state_label(i, s)] = (i, s);
        }
    }
    let mut counts: Vec<Vec<usize>> = members
        .iter()
        .enumerate()
        .map(|(g, arms)| {
            let (i, s) = owner[g];
            largest_remainder(&alpha[sa.state_range(i, s)], arms.len())
        })
        .collect();

    let cons = &inst.constraints.constraints;
    let mut residuals: Vec<f64> = cons.iter().map(|c| -(inst.scale as f64) * c.bound).collect();
    for (g, row) in counts.iter().enumerate() {
        let (i, s) = owner[g];
        for (a, &n) in row.iter().enumerate() {
            for (r, c) in residuals.iter_mut().zip(cons) {
                *r += n as f64 * c.costs[i][s][a];
            }
        }
    }

    let mut swaps = 0;
    let mut current = violation(inst, &residuals);
    let cap = 4 * inst.total_arms() * inst.classes.iter().map(|c| c.action_count).max().unwrap_or(1) + 16;
    while current > FEAS_TOL {
        if swaps >= cap {
            return Err(LpError::Irreparable { violation: current });
        }
        let mut best: Option<(f64, Vec<(usize, usize, usize)>)> = None;
        for (g, row) in counts.iter().enumerate() {
            let (i, s) = owner[g];
            for from in (0..row.len()).filter(|&a| row[a] > 0) {
                for to in (0..row.len()).filter(|&a| a != from) {
                    let trial: Vec<f64> = residuals
                        .iter()
                        .zip(cons)
                        .map(|(r, c)| r + c.costs[i][s][to] - c.costs[i][s][from])
                        .collect();
                    let v = violation(inst, &trial);
                    match &mut best {
                        Some((bv, moves)) if (v - *bv).abs() <= 1e-12 => moves.push((g, from, to)),
                        Some((bv, _)) if v > *bv => {}
                        _ => best = Some((v, vec![(g, from, to)])),
                    }
                }
            }
        }
        let Some((v, moves)) = best.filter(|(v, _)| *v < current - 1e-12) else {
            return Err(LpError::Irreparable { violation: current });
        };
        let (g, from, to) = moves[rng.random_range(0..moves.len())];
        let (i, s) = owner[g];
        for (r, c) in residuals.iter_mut().zip(cons) {
            *r += c.costs[i][s][to] - c.costs[i][s][from];
        }
        counts[g][from] -= 1;
        counts[g][to] += 1;
        current = v;
        swaps += 1;
    }

    let mut actions = vec![0; states.len()];
    for (g, arms) in members.iter().enumerate() {
        let mut it = arms.iter();
        for (a, &n) in counts[g].iter().enumerate() {
            for &arm in it.by_ref().take(n) {
                actions[arm] = a;
            }
        }
    }
    Ok(AlpDecision { actions, swaps, counts })
}

/// ALP policy following a time-indexed α*, with epoch 0 of α* at system time `start`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlpPolicy {
    pub alpha: RandomizedPolicy,
    pub start: usize,
    pub swaps: usize,
    sa: SaIndex,
}

impl AlpPolicy {
    pub fn new(inst: &WcgInstance, alpha: RandomizedPolicy, start: usize) -> Self {
        AlpPolicy {
            alpha,
            start,
            swaps: 0,
            sa: SaIndex::new(inst),
        }
    }
}

impl Policy for AlpPolicy {
    fn act(
        &mut self,
        inst: &WcgInstance,
        t: usize,
        states: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, EngineError> {
        let alpha = self.alpha.at(t.saturating_sub(self.start));
        let d = alp_actions(inst, &self.sa, alpha, states, rng).map_err(|e| EngineError::Policy(e.to_string()))?;
        self.swaps += d.swaps;
        Ok(d.actions)
    }
}
