use serde::{Deserialize, Serialize};

use super::{SaIndex, WcgInstance};

/// A deterministic per-class map from state to action.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalPolicy {
    /// `actions[i][s]`, 0-based.
    pub actions: Vec<Vec<usize>>,
}

impl LocalPolicy {
    pub fn constant(inst: &WcgInstance, action: usize) -> Self {
        LocalPolicy {
            actions: inst
                .classes
                .iter()
                .map(|c| vec![action.min(c.action_count - 1); c.state_count])
                .collect(),
        }
    }

    pub fn top(inst: &WcgInstance) -> Self {
        LocalPolicy {
            actions: inst
                .classes
                .iter()
                .map(|c| vec![c.action_count - 1; c.state_count])
                .collect(),
        }
    }

    pub fn class(&self, i: usize) -> &[usize] {
        &self.actions[i]
    }

    /// Problems with totality and ranges, if any.
    pub fn check(&self, inst: &WcgInstance) -> Result<(), String> {
        if self.actions.len() != inst.classes.len() {
            return Err(format!(
                "policy covers {} classes, instance has {}",
                self.actions.len(),
                inst.classes.len()
            ));
        }
        for (i, (acts, cls)) in self.actions.iter().zip(&inst.classes).enumerate() {
            if acts.len() != cls.state_count {
                return Err(format!("class {i}: policy has {} states, expected {}", acts.len(), cls.state_count));
            }
            if let Some(s) = acts.iter().position(|&a| a >= cls.action_count) {
                return Err(format!("class {i}, state {s}: action {} out of range", acts[s]));
            }
        }
        Ok(())
    }

    /// The same policy as a time-constant randomized policy with point masses.
    pub fn to_randomized(&self, sa: &SaIndex) -> RandomizedPolicy {
        let mut alpha = vec![0.0; sa.total()];
        for (i, acts) in self.actions.iter().enumerate() {
            for (s, &a) in acts.iter().enumerate() {
                alpha[sa.label(i, s, a)] = 1.0;
            }
        }
        RandomizedPolicy { alpha: vec![alpha] }
    }
}

/// Time-indexed action distributions α_ι(t).
///
/// Epochs past the stored horizon reuse the last stored distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedPolicy {
    /// `alpha[t][ι]`.
    pub alpha: Vec<Vec<f64>>,
}

impl RandomizedPolicy {
    pub fn stationary(alpha: Vec<f64>) -> Self {
        RandomizedPolicy { alpha: vec![alpha] }
    }

    /// Uniform over actions in every state.
    pub fn uniform(sa: &SaIndex, inst: &WcgInstance) -> Self {
        let alpha = (0..sa.total())
            .map(|iota| 1.0 / inst.classes[sa.pair(iota).0].action_count as f64)
            .collect();
        RandomizedPolicy::stationary(alpha)
    }

    pub fn horizon(&self) -> usize {
        self.alpha.len()
    }

    pub fn at(&self, t: usize) -> &[f64] {
        &self.alpha[t.min(self.alpha.len() - 1)]
    }

    /// Checks ranges and per-(i, s, t) normalization within 1e-10.
    pub fn check(&self, sa: &SaIndex) -> Result<(), String> {
        if self.alpha.is_empty() {
            return Err("randomized policy has no epochs".into());
        }
        for (t, alpha) in self.alpha.iter().enumerate() {
            if alpha.len() != sa.total() {
                return Err(format!("epoch {t}: {} entries, expected {}", alpha.len(), sa.total()));
            }
            if let Some(iota) = alpha.iter().position(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(format!("epoch {t}: α[{iota}] = {} outside [0,1]", alpha[iota]));
            }
            for g in 0..sa.state_total() {
                let sum: f64 = (0..sa.total()).filter(|&k| sa.state_of(k) == g).map(|k| alpha[k]).sum();
                if (sum - 1.0).abs() > 1e-10 {
                    return Err(format!("epoch {t}: state group {g} sums to {sum}"));
                }
            }
        }
        Ok(())
    }
}
