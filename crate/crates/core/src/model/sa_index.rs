use super::WcgInstance;

/// Lexicographic labels ι ↔ (class, state, action), plus labels for (class, state).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SaIndex {
    pairs: Vec<(usize, usize, usize)>,
    class_offsets: Vec<usize>,
    action_counts: Vec<usize>,
    state_offsets: Vec<usize>,
    state_of: Vec<usize>,
}

impl SaIndex {
    pub fn new(inst: &WcgInstance) -> Self {
        let mut pairs = Vec::new();
        let mut class_offsets = Vec::new();
        let mut action_counts = Vec::new();
        let mut state_offsets = Vec::new();
        let mut state_of = Vec::new();
        let mut states_seen = 0;
        for (i, cls) in inst.classes.iter().enumerate() {
            class_offsets.push(pairs.len());
            state_offsets.push(states_seen);
            action_counts.push(cls.action_count);
            for s in 0..cls.state_count {
                for a in 0..cls.action_count {
                    pairs.push((i, s, a));
                    state_of.push(states_seen + s);
                }
            }
            states_seen += cls.state_count;
        }
        class_offsets.push(pairs.len());
        state_offsets.push(states_seen);
        SaIndex {
            pairs,
            class_offsets,
            action_counts,
            state_offsets,
            state_of,
        }
    }

    /// 𝓘.
    pub fn total(&self) -> usize {
        self.pairs.len()
    }

    /// Σ_i |S_i|.
    pub fn state_total(&self) -> usize {
        *self.state_offsets.last().unwrap()
    }

    pub fn class_count(&self) -> usize {
        self.action_counts.len()
    }

    #[inline]
    pub fn label(&self, i: usize, s: usize, a: usize) -> usize {
        self.class_offsets[i] + s * self.action_counts[i] + a
    }

    #[inline]
    pub fn pair(&self, iota: usize) -> (usize, usize, usize) {
        self.pairs[iota]
    }

    /// Labels of class `i`.
    pub fn class_range(&self, i: usize) -> std::ops::Range<usize> {
        self.class_offsets[i]..self.class_offsets[i + 1]
    }

    /// Labels sharing class `i` and state `s`, one per action.
    pub fn state_range(&self, i: usize, s: usize) -> std::ops::Range<usize> {
        let start = self.label(i, s, 0);
        start..start + self.action_counts[i]
    }

    /// Label of the (class, state) pair in Σ|S_i| order.
    #[inline]
    pub fn state_label(&self, i: usize, s: usize) -> usize {
        self.state_offsets[i] + s
    }

    /// (class, state) label of SA label ι: the aggregation map 𝒰.
    #[inline]
    pub fn state_of(&self, iota: usize) -> usize {
        self.state_of[iota]
    }

    pub fn class_state_offsets(&self) -> &[usize] {
        &self.state_offsets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn two_state_labels() {
        let inst = fixtures::two_state();
        let sa = SaIndex::new(&inst);
        assert_eq!(sa.total(), 4);
        // (state 1, action 1) is the last of four labels.
        assert_eq!(sa.label(0, 1, 1), 3);
        assert_eq!(sa.pair(2), (0, 1, 0));
    }

    #[test]
    fn mixed_classes_count() {
        let inst = fixtures::mixed_two_class();
        let sa = SaIndex::new(&inst);
        assert_eq!(sa.total(), 10);
        assert_eq!(sa.state_total(), 5);
        assert_eq!(sa.class_range(1), 4..10);
        assert_eq!(sa.state_label(1, 2), 4);
    }

    #[test]
    fn single_pair() {
        let inst = fixtures::single_pair(1.0);
        assert_eq!(SaIndex::new(&inst).total(), 1);
    }

    #[test]
    fn bijection_both_ways() {
        let inst = fixtures::mixed_two_class();
        let sa = SaIndex::new(&inst);
        for iota in 0..sa.total() {
            let (i, s, a) = sa.pair(iota);
            assert_eq!(sa.label(i, s, a), iota);
        }
        for (i, cls) in inst.classes.iter().enumerate() {
            for s in 0..cls.state_count {
                for a in 0..cls.action_count {
                    assert_eq!(sa.pair(sa.label(i, s, a)), (i, s, a));
                }
            }
        }
    }
}
