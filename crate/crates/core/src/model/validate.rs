use std::fmt;

use serde::Serialize;

use super::WcgInstance;

const ROW_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}: {}", v.location, v.message)?;
        }
        Ok(())
    }
}

pub fn validate_instance(inst: &WcgInstance) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if inst.classes.is_empty() {
        rep.push("classes", "at least one class is required");
    }
    if inst.base_counts.len() != inst.classes.len() {
        rep.push(
            "base_counts",
            format!("{} counts for {} classes", inst.base_counts.len(), inst.classes.len()),
        );
    }
    if let Some(i) = inst.base_counts.iter().position(|&n| n == 0) {
        rep.push(format!("base_counts[{i}]"), "must be positive");
    }
    if inst.scale == 0 {
        rep.push("scale", "must be positive");
    }
    if !(inst.discount > 0.0 && inst.discount <= 1.0) {
        rep.push("discount", "must lie in (0, 1]");
    }

    for (i, cls) in inst.classes.iter().enumerate() {
        let (ns, na) = (cls.state_count, cls.action_count);
        if ns == 0 || na == 0 {
            rep.push(format!("class {i}"), "state and action counts must be positive");
            continue;
        }
        if cls.ergodic_state >= ns {
            rep.push(format!("class {i}"), format!("ergodic_state {} out of range", cls.ergodic_state));
        }
        if cls.kernels.len() != na {
            rep.push(format!("class {i}"), format!("{} kernels for {na} actions", cls.kernels.len()));
        } else {
            for (a, k) in cls.kernels.iter().enumerate() {
                if k.len() != ns || k.iter().any(|row| row.len() != ns) {
                    rep.push(format!("class {i}, action {a}"), format!("kernel must be {ns}x{ns}"));
                    continue;
                }
                for (s, row) in k.iter().enumerate() {
                    if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                        rep.push(format!("class {i}, action {a}, state {s}"), "entries must lie in [0, 1]");
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_TOL {
                        rep.push(format!("class {i}, action {a}, state {s}"), format!("row sums to {sum}"));
                    }
                }
            }
        }
        if cls.mean_rewards.len() != ns || cls.mean_rewards.iter().any(|r| r.len() != na) {
            rep.push(format!("class {i}"), format!("mean_rewards must be {ns}x{na}"));
        } else if cls.mean_rewards.iter().flatten().any(|r| !r.is_finite()) {
            rep.push(format!("class {i}"), "mean_rewards must be finite");
        }
        match &cls.reward_law {
            super::RewardLawSpec::Shared(law) => {
                if let Some(msg) = law.problems() {
                    rep.push(format!("class {i}, reward_law"), msg);
                }
            }
            super::RewardLawSpec::PerPair(table) => {
                if table.len() != ns || table.iter().any(|r| r.len() != na) {
                    rep.push(format!("class {i}, reward_law"), format!("table must be {ns}x{na}"));
                } else {
                    for (s, row) in table.iter().enumerate() {
                        for (a, law) in row.iter().enumerate() {
                            if let Some(msg) = law.problems() {
                                rep.push(format!("class {i}, reward_law[{s}][{a}]"), msg);
                            }
                        }
                    }
                }
            }
        }
        if let Some(dist) = inst.initial_distribution.as_ref().and_then(|d| d.get(i)) {
            let sum: f64 = dist.iter().sum();
            if dist.len() != ns || dist.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                rep.push(format!("initial_distribution[{i}]"), "must be a distribution over the class states");
            }
        }
    }
    if let Some(d) = &inst.initial_distribution {
        if d.len() != inst.classes.len() {
            rep.push("initial_distribution", "one distribution per class is required");
        }
    }

    let cs = &inst.constraints;
    for (l, c) in cs.constraints.iter().enumerate() {
        if !c.bound.is_finite() {
            rep.push(format!("constraint {l}"), "bound must be finite");
        }
        if c.costs.len() != inst.classes.len() {
            rep.push(format!("constraint {l}"), "one cost matrix per class is required");
            continue;
        }
        for (i, (m, cls)) in c.costs.iter().zip(&inst.classes).enumerate() {
            if m.len() != cls.state_count || m.iter().any(|r| r.len() != cls.action_count) {
                rep.push(format!("constraint {l}, class {i}"), "cost matrix shape mismatch");
            } else if m.iter().flatten().any(|v| !v.is_finite()) {
                rep.push(format!("constraint {l}, class {i}"), "costs must be finite");
            }
        }
    }
    if cs.budget_label {
        if cs.constraints.len() != 1 {
            rep.push("constraints", "budget_label requires exactly one constraint");
        } else if cs.constraints[0].mode != super::ConstraintMode::Inequality {
            rep.push("constraint 0", "budget_label requires inequality mode");
        } else {
            for (i, m) in cs.constraints[0].costs.iter().enumerate() {
                let Some(first) = m.first() else { continue };
                if m.iter().any(|row| row != first) {
                    rep.push(format!("constraint 0, class {i}"), "budget costs must depend on the action label only");
                }
                if first.first().is_some_and(|&f| f < 0.0) {
                    rep.push(format!("constraint 0, class {i}"), "passive cost must be non-negative");
                }
                if first.windows(2).any(|w| w[0] >= w[1]) {
                    rep.push(format!("constraint 0, class {i}"), "multi-gear order: costs must increase strictly with the label");
                }
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{BanditClass, ConstraintSet, Horizon, RewardLawSpec};

    #[test]
    fn identity_zero_reward_is_clean() {
        let inst = WcgInstance {
            classes: vec![BanditClass {
                state_count: 2,
                action_count: 2,
                kernels: vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2],
                mean_rewards: vec![vec![0.0; 2]; 2],
                reward_law: RewardLawSpec::default(),
                ergodic_state: 0,
            }],
            base_counts: vec![3],
            scale: 1,
            constraints: ConstraintSet::default(),
            horizon: Horizon::Finite(5),
            discount: 1.0,
            initial_distribution: None,
        };
        assert!(validate_instance(&inst).is_ok());
    }

    #[test]
    fn short_row_is_named() {
        let mut inst = fixtures::two_state();
        inst.classes[0].kernels[1][0] = vec![0.6, 0.3];
        let rep = validate_instance(&inst);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].location, "class 0, action 1, state 0");
    }

    #[test]
    fn equal_label_costs_break_gear_order() {
        let mut inst = fixtures::two_state();
        inst.constraints.constraints[0].costs[0] = vec![vec![1.0, 1.0]; 2];
        let rep = validate_instance(&inst);
        assert_eq!(rep.violations.len(), 1);
        assert!(rep.violations[0].message.contains("multi-gear order"));
    }

    #[test]
    fn fixtures_are_valid() {
        assert!(validate_instance(&fixtures::two_state()).is_ok());
        assert!(validate_instance(&fixtures::mixed_two_class()).is_ok());
        assert!(validate_instance(&fixtures::three_gear()).is_ok());
    }
}
