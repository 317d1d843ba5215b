use rand_chacha::ChaCha8Rng;

use super::{sample_row, EngineError, Policy};
use crate::model::{LocalPolicy, RandomizedPolicy, SaIndex, WcgInstance};

fn check_len(inst: &WcgInstance, states: &[usize]) -> Result<(), EngineError> {
    if states.len() != inst.total_arms() {
        return Err(EngineError::ArmCount {
            expected: inst.total_arms(),
            got: states.len(),
        });
    }
    Ok(())
}

impl Policy for LocalPolicy {
    fn act(
        &mut self,
        inst: &WcgInstance,
        _t: usize,
        states: &[usize],
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, EngineError> {
        check_len(inst, states)?;
        Ok(inst
            .arm_classes()
            .iter()
            .zip(states)
            .map(|(&i, &s)| self.actions[i][s])
            .collect())
    }
}

/// Each arm samples its action independently from α(t).
impl Policy for RandomizedPolicy {
    fn act(
        &mut self,
        inst: &WcgInstance,
        t: usize,
        states: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, EngineError> {
        check_len(inst, states)?;
        let sa = SaIndex::new(inst);
        let alpha = self.at(t);
        Ok(inst
            .arm_classes()
            .iter()
            .zip(states)
            .map(|(&i, &s)| sample_row(&alpha[sa.state_range(i, s)], rng))
            .collect())
    }
}
