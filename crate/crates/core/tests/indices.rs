use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wcg_core::engine::{run_episode, EpisodeOptions};
use wcg_core::fixtures::{self, random_class, random_instance};
use wcg_core::indices::{budget_terms, ds_adaptive_greedy, mp_assemble_actions, policy_value, stationary_value, MpIndexPolicy};
use wcg_core::model::{eval_constraints, residuals_feasible};

#[test]
fn renewal_values_match_stationary_averages() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let (ns, na) = (rng.random_range(1..=5), rng.random_range(1..=3));
        let cls = random_class(&mut rng, ns, na);
        let actions: Vec<usize> = (0..ns).map(|_| rng.random_range(0..na)).collect();
        let costs = vec![(0..na).map(|a| a as f64).collect::<Vec<_>>(); ns];
        let renewal = policy_value(&cls, &actions, &costs).unwrap();
        let (g, o) = stationary_value(&cls, &actions, &costs).unwrap();
        assert!((renewal.gamma - g).abs() < 1e-9, "{} {g}", renewal.gamma);
        assert!((renewal.omega - o).abs() < 1e-9, "{} {o}", renewal.omega);
    }
}

#[test]
fn downshift_indices_on_the_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for inst in [fixtures::two_state(), fixtures::mixed_two_class(), fixtures::three_gear()] {
        let (costs, _) = budget_terms(&inst).unwrap();
        for (i, cls) in inst.classes.iter().enumerate() {
            let table = ds_adaptive_greedy(cls, i, &costs[i], &mut rng).unwrap();
            assert_eq!(table.entries.len(), cls.state_count * (cls.action_count - 1));
            for e in &table.entries {
                assert_eq!(table.nu[e.state][e.label], e.index);
            }
            if table.pcl {
                assert!(table.entries.windows(2).all(|w| w[0].index <= w[1].index + 1e-12));
            }
        }
    }
}

#[test]
fn assembled_actions_respect_the_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let classes = rng.random_range(1..=3);
        let inst = random_instance(&mut rng, classes, 4, 3).with_scale(rng.random_range(1..=4));
        let states: Vec<usize> = inst
            .arm_classes()
            .iter()
            .map(|&i| rng.random_range(0..inst.classes[i].state_count))
            .collect();
        let nu: Vec<Vec<Vec<f64>>> = inst
            .classes
            .iter()
            .map(|c| (0..c.state_count).map(|_| (0..c.action_count).map(|_| rng.random()).collect()).collect())
            .collect();
        let actions = mp_assemble_actions(&inst, &nu, &states, &mut rng).unwrap();
        let res = eval_constraints(&inst, &states, &actions).unwrap();
        assert!(residuals_feasible(&inst, &res, 1e-9), "{res:?}");
    }
}

#[test]
fn offline_index_policy_runs_within_budget() {
    let inst = fixtures::three_gear().with_scale(6);
    let (mut pol, _) = MpIndexPolicy::from_ds(&inst, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let traj = run_episode(&inst, &mut pol, 30, 8, EpisodeOptions { strict: true }).unwrap();
    assert!(traj.feasible);
}

#[test]
fn whittle_policy_requires_binary_actions() {
    assert!(MpIndexPolicy::from_whittle(&fixtures::two_state(), 1e-10).is_ok());
    assert!(MpIndexPolicy::from_whittle(&fixtures::three_gear(), 1e-10).is_err());
}
