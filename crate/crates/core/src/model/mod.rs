//! Problem instances, SA-pair labels, constraints, policies and validation.

mod ergodic;
mod instance;
mod occupancy;
mod policy;
mod sa_index;
mod validate;

use thiserror::Error;

pub use ergodic::check_ergodic;
pub use instance::{
    largest_remainder, BanditClass, Constraint, ConstraintMode, ConstraintSet, Horizon, RewardLaw, RewardLawSpec,
    WcgInstance,
};
pub use occupancy::{eval_constraints, occupancy_from_state, residuals_feasible, violation, Occupancy};
pub use policy::{LocalPolicy, RandomizedPolicy};
pub use sa_index::SaIndex;
pub use validate::{validate_instance, ValidationReport, Violation};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("expected {expected} arms, got {states} states and {actions} actions")]
    Dimension {
        expected: usize,
        states: usize,
        actions: usize,
    },
}
