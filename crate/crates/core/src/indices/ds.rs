use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{policy_value, IndexError};
use crate::model::{check_ergodic, BanditClass};

/// Relative tolerance for treating two averages or two indices as equal.
const TIE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub m: usize,
    pub state: usize,
    /// Label that was downshifted (0-based, ≥ 1).
    pub label: usize,
    pub index: f64,
    /// Per-state labels before this downshift.
    pub labels_before: Vec<usize>,
}

/// Output of the downshift adaptive-greedy computation for one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpIndexTable {
    pub class: usize,
    pub entries: Vec<IndexEntry>,
    /// `nu[s][a]` for a ≥ 1; column 0 is unused and kept at 0.
    pub nu: Vec<Vec<f64>>,
    /// Index sequence is non-decreasing in computation order.
    pub pcl: bool,
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE * (1.0 + a.abs().max(b.abs()))
}

/// Marginal reward over marginal cost of downshifting state `s` from `labels`.
pub fn downshift_ratio(
    cls: &BanditClass,
    labels: &[usize],
    s: usize,
    costs: &[Vec<f64>],
) -> Result<f64, IndexError> {
    let cur = policy_value(cls, labels, costs)?;
    let mut lower = labels.to_vec();
    lower[s] -= 1;
    let next = policy_value(cls, &lower, costs)?;
    Ok(if nearly_equal(cur.omega, next.omega) {
        0.0
    } else {
        (cur.gamma - next.gamma) / (cur.omega - next.omega)
    })
}

/// Starts from every state at its top label and repeatedly downshifts the state with the
/// smallest marginal productivity, recording that ratio as its index.
///
/// `label_costs[a]` is the per-label cost; ties are broken with `tie_rng`.
pub fn ds_adaptive_greedy<R: Rng + ?Sized>(
    cls: &BanditClass,
    class: usize,
    label_costs: &[f64],
    tie_rng: &mut R,
) -> Result<MpIndexTable, IndexError> {
    let (ns, na) = (cls.state_count, cls.action_count);
    let costs = vec![label_costs.to_vec(); ns];
    let mut labels = vec![na - 1; ns];
    let mut nu = vec![vec![0.0; na]; ns];
    let mut entries = Vec::with_capacity(ns * (na - 1));
    let check = |labels: &[usize]| {
        if check_ergodic(cls, labels, ns) {
            Ok(())
        } else {
            Err(IndexError::NotErgodic {
                class,
                labels: labels.to_vec(),
            })
        }
    };
    check(&labels)?;
    for m in 0..ns * (na - 1) {
        let mut candidates = Vec::new();
        for s in (0..ns).filter(|&s| labels[s] >= 1) {
            let mut lower = labels.clone();
            lower[s] -= 1;
            check(&lower)?;
            candidates.push((s, downshift_ratio(cls, &labels, s, &costs)?));
        }
        let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let ties: Vec<&(usize, f64)> = candidates.iter().filter(|c| nearly_equal(c.1, best)).collect();
        let &(s, index) = ties[tie_rng.random_range(0..ties.len())];
        nu[s][labels[s]] = index;
        entries.push(IndexEntry {
            m,
            state: s,
            label: labels[s],
            index,
            labels_before: labels.clone(),
        });
        labels[s] -= 1;
    }
    let pcl = entries
        .windows(2)
        .all(|w| w[1].index >= w[0].index || nearly_equal(w[0].index, w[1].index));
    Ok(MpIndexTable { class, entries, nu, pcl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::qlearn::whittle_bisection;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn single_state_single_ratio() {
        let mut cls = fixtures::chain_class(1);
        cls.action_count = 2;
        cls.kernels = vec![vec![vec![1.0]]; 2];
        cls.mean_rewards = vec![vec![0.2, 0.9]];
        let t = ds_adaptive_greedy(&cls, 0, &[0.0, 2.0], &mut rng()).unwrap();
        assert_eq!(t.entries.len(), 1);
        assert!((t.entries[0].index - 0.35).abs() < 1e-15);
    }

    #[test]
    fn identical_actions_zero_indices() {
        let mut cls = fixtures::two_state_class();
        cls.kernels[1] = cls.kernels[0].clone();
        cls.mean_rewards = vec![vec![0.4, 0.4], vec![0.1, 0.1]];
        let t = ds_adaptive_greedy(&cls, 0, &[0.0, 1.0], &mut rng()).unwrap();
        assert!(t.entries.iter().all(|e| e.index.abs() < 1e-12));
    }

    #[test]
    fn two_state_matches_bisection() {
        let inst = fixtures::two_state();
        let cls = &inst.classes[0];
        let t = ds_adaptive_greedy(cls, 0, &[0.0, 1.0], &mut rng()).unwrap();
        assert!(t.pcl);
        for s in 0..2 {
            let w = whittle_bisection(cls, 0, &inst.constraints, s, 1e-10).unwrap();
            assert!((t.nu[s][1] - w).abs() < 1e-6, "state {s}: {} vs {w}", t.nu[s][1]);
        }
        assert!((t.nu[0][1] - 0.3).abs() < 1e-12);
        assert!((t.nu[1][1] - 0.675).abs() < 1e-12);
    }

    #[test]
    fn downshift_path_is_monotone_and_complete() {
        let inst = fixtures::three_gear();
        let cls = &inst.classes[0];
        let t = ds_adaptive_greedy(cls, 0, &[0.0, 1.0, 2.0], &mut rng()).unwrap();
        assert_eq!(t.entries.len(), cls.state_count * (cls.action_count - 1));
        assert_eq!(t.entries[0].labels_before, vec![2; 3]);
        for w in t.entries.windows(2) {
            assert!(w[1].labels_before.iter().zip(&w[0].labels_before).all(|(a, b)| a <= b));
            let changed = (0..3).filter(|&s| w[1].labels_before[s] != w[0].labels_before[s]).count();
            assert_eq!(changed, 1);
        }
    }

    #[test]
    fn non_ergodic_intermediate_is_reported() {
        let mut cls = fixtures::two_state_class();
        cls.kernels[0][1] = vec![0.0, 1.0];
        let err = ds_adaptive_greedy(&cls, 0, &[0.0, 1.0], &mut rng()).unwrap_err();
        assert!(matches!(err, IndexError::NotErgodic { class: 0, .. }));
    }
}
