use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::rng::{arm_rng, aux_rng, POLICY_STREAM};
use super::EngineError;
use crate::model::WcgInstance;

/// Per-arm states at time `t` together with every RNG stream that drives them.
#[derive(Clone, Debug)]
pub struct SystemState {
    pub t: usize,
    states: Vec<usize>,
    classes: Vec<usize>,
    arm_rngs: Vec<ChaCha8Rng>,
    policy_rng: ChaCha8Rng,
}

impl SystemState {
    /// Arms start from the instance's initial placement.
    pub fn new(inst: &WcgInstance, seed: u64) -> Self {
        Self::build(inst, inst.initial_states(), seed)
    }

    pub fn from_states(inst: &WcgInstance, states: Vec<usize>, seed: u64) -> Result<Self, EngineError> {
        if states.len() != inst.total_arms() {
            return Err(EngineError::ArmCount {
                expected: inst.total_arms(),
                got: states.len(),
            });
        }
        let classes = inst.arm_classes();
        if let Some(g) = (0..states.len()).find(|&g| states[g] >= inst.classes[classes[g]].state_count) {
            return Err(EngineError::InvalidState { arm: g, state: states[g] });
        }
        Ok(Self::build(inst, states, seed))
    }

    fn build(inst: &WcgInstance, states: Vec<usize>, seed: u64) -> Self {
        let mut arm_rngs = Vec::with_capacity(states.len());
        for i in 0..inst.classes.len() {
            for n in 0..inst.arm_count(i) {
                arm_rngs.push(arm_rng(seed, i, n));
            }
        }
        SystemState {
            t: 0,
            states,
            classes: inst.arm_classes(),
            arm_rngs,
            policy_rng: aux_rng(seed, POLICY_STREAM),
        }
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn policy_rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.policy_rng
    }

    pub(crate) fn parts(&mut self) -> (&[usize], &mut ChaCha8Rng) {
        (&self.states, &mut self.policy_rng)
    }
}

/// Draws an index from a stochastic row with one uniform variate.
pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Moves every arm one step and returns the per-arm rewards.
///
/// Each arm draws its reward and then its successor from its own stream.
pub fn step_system(inst: &WcgInstance, state: &mut SystemState, actions: &[usize]) -> Result<Vec<f64>, EngineError> {
    if actions.len() != state.states.len() {
        return Err(EngineError::ArmCount {
            expected: state.states.len(),
            got: actions.len(),
        });
    }
    let mut rewards = Vec::with_capacity(actions.len());
    for g in 0..actions.len() {
        let cls = &inst.classes[state.classes[g]];
        let (s, a) = (state.states[g], actions[g]);
        if a >= cls.action_count {
            return Err(EngineError::InvalidAction { arm: g, action: a });
        }
        let rng = &mut state.arm_rngs[g];
        rewards.push(cls.law(s, a).sample(cls.r(s, a), rng));
        state.states[g] = sample_row(cls.row(s, a), rng);
    }
    state.t += 1;
    Ok(rewards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn identity_kernel_keeps_states() {
        let mut inst = fixtures::two_state_with(4, 2.0);
        inst.classes[0].kernels = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2];
        let mut st = SystemState::from_states(&inst, vec![0, 1, 1, 0], 5).unwrap();
        step_system(&inst, &mut st, &[0, 1, 0, 1]).unwrap();
        assert_eq!(st.states(), &[0, 1, 1, 0]);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn point_mass_moves_active_arms() {
        let mut inst = fixtures::two_state_with(4, 2.0);
        inst.classes[0].kernels[1] = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        inst.classes[0].kernels[0] = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let mut st = SystemState::from_states(&inst, vec![0; 4], 5).unwrap();
        step_system(&inst, &mut st, &[1, 0, 1, 0]).unwrap();
        assert_eq!(st.states(), &[1, 0, 1, 0]);
    }

    #[test]
    fn invalid_action_is_rejected() {
        let inst = fixtures::two_state_with(2, 1.0);
        let mut st = SystemState::new(&inst, 1);
        assert!(matches!(
            step_system(&inst, &mut st, &[0, 2]),
            Err(EngineError::InvalidAction { arm: 1, action: 2 })
        ));
    }

    #[test]
    fn transition_frequency_in_binomial_band() {
        let inst = fixtures::two_state_with(1, 1.0);
        let p = inst.classes[0].p(0, 1, 1);
        let mut st = SystemState::from_states(&inst, vec![0], 99).unwrap();
        let n = 100_000;
        let mut hits = 0usize;
        for _ in 0..n {
            st.states[0] = 0;
            step_system(&inst, &mut st, &[1]).unwrap();
            hits += st.states[0];
        }
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - n as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn equal_seeds_are_identical() {
        let inst = fixtures::two_state().with_scale(3);
        let run = |seed| {
            let mut st = SystemState::new(&inst, seed);
            let mut all = Vec::new();
            for _ in 0..5 {
                let r = step_system(&inst, &mut st, &vec![1; inst.total_arms()]).unwrap();
                all.extend(r.iter().map(|x| x.to_bits()));
                all.extend(st.states().iter().map(|&s| s as u64));
            }
            all
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }
}
