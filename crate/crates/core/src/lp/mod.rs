//! Occupancy LPs of the relaxed problem, a self-contained simplex solver, policy extraction,
//! the robust (ε, x₀)-LP, ALP rounding and the online OALP composition.

mod alp;
mod eps;
mod oalp;
mod occupancy;
mod problem;
mod simplex;

use thiserror::Error;

pub use alp::{alp_actions, AlpDecision, AlpPolicy};
pub use eps::{build_eps_lp, solve_eps_path, EpsLp, EpsLpConfig, EpsLpSolution, Kernels, DEFAULT_EPS};
pub use oalp::{
    explore_until_covered, oalp_phase2, oalp_run, CoverageObserver, Explorer, ModelSource, OalpConfig, OalpReport,
    OalpRun,
};
pub use occupancy::{
    build_lp, build_lp_from_states, build_lp_with, policy_from_x, states_condition, ConversionMaps, FlowMatrices,
    InitialCondition, ModelData, OccupancyLp,
};
pub use problem::{LpProblem, LpRow, RowKind};
pub use simplex::{decimal_rational, solve_lp, solve_lp_exact, Field, LpSolution, LpStatus, PIVOT_TOL};

use crate::engine::EngineError;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed LP: {0}")]
    Shape(String),
    #[error("inconsistent initial condition: {0}")]
    BadInitial(String),
    #[error("kernel row of SA pair {0} is not estimated")]
    Unestimated(usize),
    #[error("simplex hit its pivot limit of {0}")]
    IterationLimit(usize),
    #[error("LP is {0:?}")]
    NotOptimal(LpStatus),
    #[error("no integer repair satisfies the constraints (violation {violation})")]
    Irreparable { violation: f64 },
    #[error("coverage not reached after {steps} exploration steps ({covered} SA pairs seen)")]
    Coverage { steps: usize, covered: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
}
