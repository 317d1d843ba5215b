use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ds_adaptive_greedy, IndexError, MpIndexTable};
use crate::engine::{EngineError, Policy};
use crate::model::WcgInstance;
use crate::qlearn::whittle_bisection;

/// Slack on the budget check to absorb cost round-off.
pub const BUDGET_SLACK: f64 = 1e-9;

/// Per-class label costs and the total budget h·bound.
pub fn budget_terms(inst: &WcgInstance) -> Result<(Vec<Vec<f64>>, f64), IndexError> {
    let costs = (0..inst.classes.len())
        .map(|i| inst.constraints.label_costs(i).ok_or(IndexError::NoBudget))
        .collect::<Result<Vec<_>, _>>()?;
    let budget = inst.constraints.constraints[0].bound * inst.scale as f64;
    Ok((costs, budget))
}

/// Greedy index assembly under the budget.
///
/// Every (arm, label ≥ 1) candidate is ranked by ν_i(state, label) descending with ties in
/// random order. All arms start at label 0; scanning the ranking, an arm moves up to a
/// candidate label when that label is higher than its current one and the budget still holds.
pub fn mp_assemble_actions<R: Rng + ?Sized>(
    inst: &WcgInstance,
    nu: &[Vec<Vec<f64>>],
    states: &[usize],
    rng: &mut R,
) -> Result<Vec<usize>, IndexError> {
    let (costs, budget) = budget_terms(inst)?;
    let classes = inst.arm_classes();
    let mut cands: Vec<(f64, u64, usize, usize)> = Vec::new();
    for (g, (&i, &s)) in classes.iter().zip(states).enumerate() {
        for a in 1..inst.classes[i].action_count {
            cands.push((nu[i][s][a], rng.random(), g, a));
        }
    }
    cands.sort_unstable_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut actions = vec![0usize; states.len()];
    let mut total: f64 = classes.iter().map(|&i| costs[i][0]).sum();
    for &(_, _, g, a) in &cands {
        let i = classes[g];
        let cur = actions[g];
        if a > cur {
            let next = total - costs[i][cur] + costs[i][a];
            if next <= budget + BUDGET_SLACK {
                actions[g] = a;
                total = next;
            }
        }
    }
    Ok(actions)
}

/// Index policy over a fixed `[i][s][a]` index table.
#[derive(Clone, Debug, PartialEq)]
pub struct MpIndexPolicy {
    pub nu: Vec<Vec<Vec<f64>>>,
}

impl MpIndexPolicy {
    /// Offline MP indices from the downshift computation of every class.
    pub fn from_ds<R: Rng + ?Sized>(inst: &WcgInstance, tie_rng: &mut R) -> Result<(Self, Vec<MpIndexTable>), IndexError> {
        let (costs, _) = budget_terms(inst)?;
        let tables = inst
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| ds_adaptive_greedy(c, i, &costs[i], tie_rng))
            .collect::<Result<Vec<_>, _>>()?;
        let nu = tables.iter().map(|t| t.nu.clone()).collect();
        Ok((MpIndexPolicy { nu }, tables))
    }

    /// Whittle indices by bisection; binary-action classes only.
    pub fn from_whittle(inst: &WcgInstance, tol: f64) -> Result<Self, IndexError> {
        let mut nu = Vec::new();
        for (i, c) in inst.classes.iter().enumerate() {
            let mut table = vec![vec![0.0; c.action_count]; c.state_count];
            for (s, row) in table.iter_mut().enumerate() {
                row[1] = whittle_bisection(c, i, &inst.constraints, s, tol)?;
            }
            nu.push(table);
        }
        Ok(MpIndexPolicy { nu })
    }
}

impl Policy for MpIndexPolicy {
    fn act(
        &mut self,
        inst: &WcgInstance,
        _t: usize,
        states: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, EngineError> {
        mp_assemble_actions(inst, &self.nu, states, rng).map_err(|e| EngineError::Policy(e.to_string()))
    }
}
