use serde::{Deserialize, Serialize};

/// Scalar step-size families η_t.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// 1/(t+1).
    #[default]
    Harmonic,
    /// scale/(t+offset).
    Shifted { scale: f64, offset: f64 },
    /// scale/(t+offset)^exponent.
    Power { scale: f64, offset: f64, exponent: f64 },
}

impl StepSchedule {
    pub fn eta(&self, t: usize) -> f64 {
        let t = t as f64;
        match *self {
            StepSchedule::Harmonic => 1.0 / (t + 1.0),
            StepSchedule::Shifted { scale, offset } => scale / (t + offset),
            StepSchedule::Power { scale, offset, exponent } => scale / (t + offset).powf(exponent),
        }
    }

    /// Σ η = ∞ and Σ η² < ∞, decided from the family parameters.
    pub fn is_robbins_monro(&self) -> bool {
        match *self {
            StepSchedule::Harmonic => true,
            StepSchedule::Shifted { scale, offset } => scale > 0.0 && offset > 0.0,
            StepSchedule::Power { scale, offset, exponent } => {
                scale > 0.0 && offset > 0.0 && exponent > 0.5 && exponent <= 1.0
            }
        }
    }
}
