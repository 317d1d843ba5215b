//! Offline marginal-productivity (MP) indices and the budgeted index policy.

mod assemble;
mod ds;
mod value;

use thiserror::Error;

pub use assemble::{budget_terms, mp_assemble_actions, MpIndexPolicy, BUDGET_SLACK};
pub use ds::{downshift_ratio, ds_adaptive_greedy, IndexEntry, MpIndexTable};
pub use value::{policy_value, stationary_value, PolicyValue};

use crate::qlearn::QError;

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("class {class}: labels {labels:?} are not ergodic")]
    NotErgodic { class: usize, labels: Vec<usize> },
    #[error("return-time system is singular")]
    Singular,
    #[error("instance has no single budget constraint")]
    NoBudget,
    #[error(transparent)]
    Bisection(#[from] QError),
}
