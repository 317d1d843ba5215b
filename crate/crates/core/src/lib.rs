//! Weakly coupled gangs (WCG) of multi-action restless bandits.
//!
//! The crate is layered bottom-up:
//!
//! - [`model`]: instances, SA-pair labels, constraints, policies, validation.
//! - [`engine`]: the stochastic simulator and occupancy bookkeeping.
//! - [`qlearn`]: Q-factor learning on a live trajectory, model estimation,
//!   value iteration and Lagrangian Q-factors.
//! - [`indices`]: offline marginal-productivity (MP) indices and the index policy.
//! - [`ompi`]: the online MP index policy.
//! - [`lp`]: occupancy LPs, the simplex solver, ALP rounding and OALP.
//! - [`harness`]: scenarios, sweeps and metrics.

pub mod engine;
pub mod fixtures;
pub mod harness;
pub mod indices;
mod linalg;
pub mod lp;
pub mod model;
pub mod ompi;
pub mod qlearn;
