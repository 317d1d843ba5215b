use rand::Rng;

use crate::indices::{budget_terms, IndexError, BUDGET_SLACK};
use crate::model::WcgInstance;

/// Randomized exploration under the budget.
///
/// All arms start passive. Candidates (arm, label ≥ 1) are drawn uniformly without
/// replacement; a draw sets the arm's label when the budget survives the replacement, and
/// the first draw that would break the budget ends the loop.
pub fn explore_actions<R: Rng + ?Sized>(inst: &WcgInstance, rng: &mut R) -> Result<Vec<usize>, IndexError> {
    let (costs, budget) = budget_terms(inst)?;
    let classes = inst.arm_classes();
    let mut pool: Vec<(usize, usize)> = classes
        .iter()
        .enumerate()
        .flat_map(|(g, &i)| (1..inst.classes[i].action_count).map(move |a| (g, a)))
        .collect();
    let mut actions = vec![0usize; classes.len()];
    let mut total: f64 = classes.iter().map(|&i| costs[i][0]).sum();
    while !pool.is_empty() {
        let (g, a) = pool.swap_remove(rng.random_range(0..pool.len()));
        let i = classes[g];
        let next = total - costs[i][actions[g]] + costs[i][a];
        if next > budget + BUDGET_SLACK {
            break;
        }
        actions[g] = a;
        total = next;
    }
    Ok(actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{eval_constraints, residuals_feasible};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_budget_is_all_passive() {
        let inst = fixtures::two_state_with(6, 0.0);
        let a = explore_actions(&inst, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, vec![0; 6]);
    }

    #[test]
    fn replays_seeded_draw_sequence() {
        // Three arms, budget of two: two successful draws, then the third breaks.
        let inst = fixtures::two_state_with(3, 2.0);
        let a = explore_actions(&inst, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pool = vec![0usize, 1, 2];
        let first = pool.swap_remove(rng.random_range(0..3));
        let second = pool.swap_remove(rng.random_range(0..2));
        let mut expect = vec![0; 3];
        expect[first] = 1;
        expect[second] = 1;
        assert_eq!(a, expect);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn always_within_budget(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = fixtures::random_instance(&mut rng, 3, 4, 3);
            let a = explore_actions(&inst, &mut rng).unwrap();
            let res = eval_constraints(&inst, &inst.initial_states(), &a).unwrap();
            prop_assert!(residuals_feasible(&inst, &res, 1e-9));
        }
    }
}
