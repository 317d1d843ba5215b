//! Simulation of the WCG process under an arbitrary policy.

mod episode;
mod expected;
mod policies;
pub mod rng;
mod state;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use episode::{run_episode, run_from, write_trajectories_csv, EpisodeOptions, StepSummary, Trajectory};
pub use expected::{deviation_l2, deviation_linf, expected_occupancy, split_by_policy, state_marginal};
pub use state::{step_system, SystemState};

pub(crate) use state::sample_row;

use crate::model::{ModelError, WcgInstance};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("expected {expected} arms, got {got}")]
    ArmCount { expected: usize, got: usize },
    #[error("arm {arm}: action {action} out of range")]
    InvalidAction { arm: usize, action: usize },
    #[error("arm {arm}: state {state} out of range")]
    InvalidState { arm: usize, state: usize },
    #[error("infeasible actions at t={t}: residuals {residuals:?}")]
    Infeasible { t: usize, residuals: Vec<f64> },
    #[error("randomized policy: {0}")]
    BadPolicy(String),
    #[error("initial occupancy must sum to 1, got {0}")]
    BadInitial(f64),
    #[error("policy failed: {0}")]
    Policy(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One transition of the live system, as seen by policies and learners.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord<'a> {
    pub t: usize,
    pub states: &'a [usize],
    pub actions: &'a [usize],
    pub rewards: &'a [f64],
    pub next_states: &'a [usize],
}

/// Maps the current system state to an action per arm.
pub trait Policy {
    fn act(
        &mut self,
        inst: &WcgInstance,
        t: usize,
        states: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, EngineError>;

    /// Called after every transition; learning policies update here.
    fn observe(&mut self, _inst: &WcgInstance, _step: &StepRecord<'_>) {}
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn act(
        &mut self,
        inst: &WcgInstance,
        t: usize,
        states: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, EngineError> {
        (**self).act(inst, t, states, rng)
    }

    fn observe(&mut self, inst: &WcgInstance, step: &StepRecord<'_>) {
        (**self).observe(inst, step)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn act(
        &mut self,
        inst: &WcgInstance,
        t: usize,
        states: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, EngineError> {
        (**self).act(inst, t, states, rng)
    }

    fn observe(&mut self, inst: &WcgInstance, step: &StepRecord<'_>) {
        (**self).observe(inst, step)
    }
}

/// Passive consumer of transitions; never touches the system's randomness.
pub trait Observer {
    fn observe(&mut self, inst: &WcgInstance, step: &StepRecord<'_>);
}

/// A policy with an observer riding along.
pub struct Watched<P, O> {
    pub policy: P,
    pub observer: O,
}

impl<P: Policy, O: Observer> Policy for Watched<P, O> {
    fn act(
        &mut self,
        inst: &WcgInstance,
        t: usize,
        states: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, EngineError> {
        self.policy.act(inst, t, states, rng)
    }

    fn observe(&mut self, inst: &WcgInstance, step: &StepRecord<'_>) {
        self.policy.observe(inst, step);
        self.observer.observe(inst, step);
    }
}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn observe(&mut self, inst: &WcgInstance, step: &StepRecord<'_>) {
        (**self).observe(inst, step)
    }
}

impl Observer for Vec<Box<dyn Observer + Send>> {
    fn observe(&mut self, inst: &WcgInstance, step: &StepRecord<'_>) {
        for o in self.iter_mut() {
            o.observe(inst, step);
        }
    }
}
