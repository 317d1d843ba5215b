use super::{ConstraintMode, ModelError, SaIndex, WcgInstance};

/// Counts of arms per SA label; Z_ι = count_ι / Σ N_i.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occupancy {
    pub counts: Vec<u32>,
    pub total: u32,
}

impl Occupancy {
    pub fn fraction(&self, iota: usize) -> f64 {
        self.counts[iota] as f64 / self.total as f64
    }

    pub fn fractions(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|k| self.fraction(k)).collect()
    }
}

fn check_lengths(inst: &WcgInstance, states: &[usize], actions: &[usize]) -> Result<(), ModelError> {
    let n = inst.total_arms();
    if states.len() != n || actions.len() != n {
        return Err(ModelError::Dimension {
            expected: n,
            states: states.len(),
            actions: actions.len(),
        });
    }
    Ok(())
}

pub fn occupancy_from_state(
    inst: &WcgInstance,
    sa: &SaIndex,
    states: &[usize],
    actions: &[usize],
) -> Result<Occupancy, ModelError> {
    check_lengths(inst, states, actions)?;
    let mut counts = vec![0u32; sa.total()];
    for ((&i, &s), &a) in inst.arm_classes().iter().zip(states).zip(actions) {
        counts[sa.label(i, s, a)] += 1;
    }
    Ok(Occupancy {
        counts,
        total: states.len() as u32,
    })
}

/// residual_ℓ = Σ_{i,n} f_{i,ℓ}(s, a) − h·bound_ℓ.
pub fn eval_constraints(inst: &WcgInstance, states: &[usize], actions: &[usize]) -> Result<Vec<f64>, ModelError> {
    check_lengths(inst, states, actions)?;
    let classes = inst.arm_classes();
    Ok(inst
        .constraints
        .constraints
        .iter()
        .map(|c| {
            let load: f64 = classes
                .iter()
                .zip(states)
                .zip(actions)
                .map(|((&i, &s), &a)| c.costs[i][s][a])
                .sum();
            load - inst.scale as f64 * c.bound
        })
        .collect())
}

/// Feasibility of residuals within `tol`.
pub fn residuals_feasible(inst: &WcgInstance, residuals: &[f64], tol: f64) -> bool {
    inst.constraints
        .constraints
        .iter()
        .zip(residuals)
        .all(|(c, &r)| match c.mode {
            ConstraintMode::Equality => r.abs() <= tol,
            ConstraintMode::Inequality => r <= tol,
        })
}

/// Total violation: Σ |r| over equalities plus Σ max(r, 0) over inequalities.
pub fn violation(inst: &WcgInstance, residuals: &[f64]) -> f64 {
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
