use crate::engine::StepRecord;
use crate::model::{SaIndex, WcgInstance};

/// Per-SA-label tallies of one live transition.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionCounts {
    /// Arms that occupied ι at t.
    pub visits: Vec<u32>,
    /// `successors[ι][s']`: arms that moved from ι to s'.
    pub successors: Vec<Vec<u32>>,
    /// Sum of the live rewards collected in ι.
    pub reward_sums: Vec<f64>,
}

impl TransitionCounts {
    pub fn empty(inst: &WcgInstance, sa: &SaIndex) -> Self {
        TransitionCounts {
            visits: vec![0; sa.total()],
            successors: (0..sa.total())
                .map(|k| vec![0; inst.classes[sa.pair(k).0].state_count])
                .collect(),
            reward_sums: vec![0.0; sa.total()],
        }
    }

    pub fn mean_reward(&self, iota: usize) -> Option<f64> {
        (self.visits[iota] > 0).then(|| self.reward_sums[iota] / self.visits[iota] as f64)
    }
}

pub fn collect_counts(inst: &WcgInstance, sa: &SaIndex, step: &StepRecord<'_>) -> TransitionCounts {
    let mut c = TransitionCounts::empty(inst, sa);
    for (g, &i) in inst.arm_classes().iter().enumerate() {
        let iota = sa.label(i, step.states[g], step.actions[g]);
        c.visits[iota] += 1;
        c.successors[iota][step.next_states[g]] += 1;
        c.reward_sums[iota] += step.rewards[g];
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn hand_tally() {
        let inst = fixtures::two_state_with(3, 1.0);
        let sa = SaIndex::new(&inst);
        let rec = StepRecord {
            t: 0,
            states: &[0, 0, 1],
            actions: &[1, 1, 0],
            rewards: &[0.5, 0.25, 1.0],
            next_states: &[1, 0, 1],
        };
        let c = collect_counts(&inst, &sa, &rec);
        assert_eq!(c.visits, vec![0, 2, 1, 0]);
        assert_eq!(c.successors[1], vec![1, 1]);
        assert_eq!(c.successors[2], vec![0, 1]);
        assert_eq!(c.mean_reward(1), Some(0.375));
        assert_eq!(c.mean_reward(0), None);
        for (v, s) in c.visits.iter().zip(&c.successors) {
            assert_eq!(*v, s.iter().sum::<u32>());
        }
    }
}
