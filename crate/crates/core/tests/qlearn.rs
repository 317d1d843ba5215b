use wcg_core::engine::{run_episode, EpisodeOptions, Watched};
use wcg_core::fixtures;
use wcg_core::lp::Explorer;
use wcg_core::model::LocalPolicy;
use wcg_core::qlearn::{
    solve_q_fixed_point, solve_q_linear, sup_distance, whittle_bisection, LearningProcess, QLearner, QTable,
    RewardSpec, StepSchedule,
};

#[test]
fn fixed_point_agrees_with_direct_solve_on_fixtures() {
    for inst in [fixtures::two_state(), fixtures::mixed_two_class(), fixtures::three_gear()] {
        for cls in &inst.classes {
            for a in 0..cls.action_count {
                let pol = vec![a; cls.state_count];
                let q0 = vec![vec![0.0; cls.action_count]; cls.state_count];
                let fp = solve_q_fixed_point(cls, &pol, &cls.mean_rewards, &cls.kernels, &q0, 1e-12, 100_000).unwrap();
                let direct = solve_q_linear(cls, &pol, &cls.mean_rewards, &cls.kernels).unwrap();
                assert!(sup_distance(&[fp.q], &[direct]) < 1e-9);
            }
        }
    }
}

#[test]
fn learned_q_approaches_truth_along_a_live_run() {
    let inst = fixtures::two_state();
    let cls = &inst.classes[0];
    let secondary = LocalPolicy::constant(&inst, 1);
    let truth = vec![solve_q_linear(cls, secondary.class(0), &cls.mean_rewards, &cls.kernels).unwrap()];
    let mut errors = Vec::new();
    for steps in [200, 5000] {
        let process = LearningProcess::new(&inst, secondary.clone(), RewardSpec::Live);
        let learner = QLearner::new(&inst, QTable::new(vec![process], StepSchedule::Harmonic), 4);
        let mut w = Watched {
            policy: Explorer,
            observer: learner,
        };
        run_episode(&inst, &mut w, steps, 4, EpisodeOptions::default()).unwrap();
        errors.push(sup_distance(&w.observer.table.processes[0].q, &truth));
    }
    assert!(errors[1] < errors[0], "{errors:?}");
    assert!(errors[1] < 0.05, "{errors:?}");
}

#[test]
fn whittle_indices_of_the_two_state_class() {
    let inst = fixtures::two_state();
    let w0 = whittle_bisection(&inst.classes[0], 0, &inst.constraints, 0, 1e-10).unwrap();
    let w1 = whittle_bisection(&inst.classes[0], 0, &inst.constraints, 1, 1e-10).unwrap();
    // The high state pays more for activity, so its index is larger.
    assert!(w1 > w0, "{w0} {w1}");
    assert!(whittle_bisection(&fixtures::three_gear().classes[0], 0, &fixtures::three_gear().constraints, 0, 1e-9).is_err());
}
