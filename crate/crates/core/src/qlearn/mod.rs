//! Q-factor learning driven by the live trajectory, model estimation, and exact
//! fixed-point and Lagrangian oracles.

mod counts;
mod estimate;
mod fixed_point;
mod lagrangian;
mod schedule;
mod table;

use thiserror::Error;

pub use counts::{collect_counts, TransitionCounts};
pub use estimate::EstimatedModel;
pub use fixed_point::{anchor_reachable, apply_t, solve_q_fixed_point, solve_q_linear, FixedPoint};
pub use lagrangian::{lagrangian_q, whittle_bisection, LagrangianQ};
pub use schedule::StepSchedule;
pub use table::{sup_distance, write_q_trace_csv, LearningProcess, QLearner, QTable, QTraceRow, RewardSpec};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum QError {
    #[error("ergodic state unreachable under the kernel's support")]
    GoodCaseViolated,
    #[error("no convergence after {iterations} iterations (last residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular linear system")]
    Singular,
    #[error("SA label {0} has no estimate")]
    Unestimated(usize),
    #[error("bisection bracket shows no sign change at state {0}")]
    NonIndexable(usize),
    #[error("Whittle bisection needs two actions and one constraint")]
    NotBinary,
}
