//! Reference instances shared by tests, examples and the CLI.

use rand::Rng;

use crate::model::{
    BanditClass, Constraint, ConstraintMode, ConstraintSet, Horizon, RewardLaw, RewardLawSpec, WcgInstance,
};

/// The two-state, two-action class used across the test suite.
///
/// State 0 is the ergodic state. Offline indices are 0.3 (state 0) and 0.675 (state 1).
pub fn two_state_class() -> BanditClass {
    BanditClass {
        state_count: 2,
        action_count: 2,
        kernels: vec![
            vec![vec![0.7, 0.3], vec![0.5, 0.5]],
            vec![vec![0.85, 0.15], vec![0.6, 0.4]],
        ],
        mean_rewards: vec![vec![0.1, 0.5], vec![0.3, 1.0]],
        reward_law: RewardLawSpec::Shared(RewardLaw::Uniform { half_width: 0.1 }),
        ergodic_state: 0,
    }
}

/// Budget constraint (passive cost 0, active cost 1) with `bound` active arms per unit of scale.
pub fn unit_budget(costs: Vec<Vec<Vec<f64>>>, bound: f64) -> ConstraintSet {
    ConstraintSet {
        constraints: vec![Constraint {
            mode: ConstraintMode::Inequality,
            costs,
            bound,
        }],
        budget_label: true,
    }
}

/// Two-state instance with `n0` arms per unit of scale and a budget of `bound` active arms per unit.
pub fn two_state_with(n0: usize, bound: f64) -> WcgInstance {
    WcgInstance {
        classes: vec![two_state_class()],
        base_counts: vec![n0],
        scale: 1,
        constraints: unit_budget(vec![vec![vec![0.0, 1.0]; 2]], bound),
        horizon: Horizon::Finite(20),
        discount: 1.0,
        initial_distribution: None,
    }
}

/// Canonical two-state instance: 100 arms per unit of scale, 30% of them may be active.
pub fn two_state() -> WcgInstance {
    two_state_with(100, 30.0)
}

/// One class with one state and one action paying `reward`.
pub fn single_pair(reward: f64) -> WcgInstance {
    WcgInstance {
        classes: vec![BanditClass {
            state_count: 1,
            action_count: 1,
            kernels: vec![vec![vec![1.0]]],
            mean_rewards: vec![vec![reward]],
            reward_law: RewardLawSpec::default(),
            ergodic_state: 0,
        }],
        base_counts: vec![2],
        scale: 1,
        constraints: ConstraintSet {
            constraints: vec![Constraint {
                mode: ConstraintMode::Equality,
                costs: vec![vec![vec![0.0]]],
                bound: 0.0,
            }],
            budget_label: false,
        },
        horizon: Horizon::Finite(3),
        discount: 1.0,
        initial_distribution: None,
    }
}

/// Single-action class on `n` states whose kernel is identity; callers overwrite it.
pub fn chain_class(n: usize) -> BanditClass {
    BanditClass {
        state_count: n,
        action_count: 1,
        kernels: vec![(0..n).map(|s| (0..n).map(|x| if s == x { 1.0 } else { 0.0 }).collect()).collect()],
        mean_rewards: vec![vec![0.0]; n],
        reward_law: RewardLawSpec::default(),
        ergodic_state: 0,
    }
}

/// Two classes with (2, 3) states and two actions each under a shared budget.
pub fn mixed_two_class() -> WcgInstance {
    let second = BanditClass {
        state_count: 3,
        action_count: 2,
        kernels: vec![
            vec![vec![0.5, 0.3, 0.2], vec![0.3, 0.4, 0.3], vec![0.2, 0.3, 0.5]],
            vec![vec![0.8, 0.1, 0.1], vec![0.6, 0.3, 0.1], vec![0.5, 0.2, 0.3]],
        ],
        mean_rewards: vec![vec![0.0, 0.4], vec![0.2, 0.7], vec![0.5, 1.2]],
        reward_law: RewardLawSpec::Shared(RewardLaw::TruncatedNormal {
            std_dev: 0.1,
            half_width: 0.2,
        }),
        ergodic_state: 0,
    };
    WcgInstance {
        classes: vec![two_state_class(), second],
        base_counts: vec![6, 4],
        scale: 1,
        constraints: unit_budget(vec![vec![vec![0.0, 1.0]; 2], vec![vec![0.0, 1.5]; 3]], 3.0),
        horizon: Horizon::Finite(10),
        discount: 1.0,
        initial_distribution: Some(vec![vec![0.5, 0.5], vec![1.0 / 3.0; 3]]),
    }
}

/// Three states, three gears, label costs (0, 1, 2).
pub fn three_gear() -> WcgInstance {
    let cls = BanditClass {
        state_count: 3,
        action_count: 3,
        kernels: vec![
            vec![vec![0.5, 0.3, 0.2], vec![0.3, 0.4, 0.3], vec![0.2, 0.3, 0.5]],
            vec![vec![0.7, 0.2, 0.1], vec![0.5, 0.3, 0.2], vec![0.4, 0.3, 0.3]],
            vec![vec![0.9, 0.05, 0.05], vec![0.7, 0.2, 0.1], vec![0.6, 0.2, 0.2]],
        ],
        mean_rewards: vec![vec![0.0, 0.3, 0.5], vec![0.2, 0.6, 0.9], vec![0.4, 1.0, 1.5]],
        reward_law: RewardLawSpec::Shared(RewardLaw::Uniform { half_width: 0.05 }),
        ergodic_state: 0,
    };
    WcgInstance {
        classes: vec![cls],
        base_counts: vec![8],
        scale: 1,
        constraints: unit_budget(vec![vec![vec![0.0, 1.0, 2.0]; 3]], 6.0),
        horizon: Horizon::Finite(10),
        discount: 1.0,
        initial_distribution: None,
    }
}

/// Stochastic row with every entry at least `floor / n`.
pub fn random_row<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| floor / n as f64 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|v| v / total).collect();
    // Push rounding error into the largest entry so the row sums to 1 within 1e-15.
    let err = 1.0 - row.iter().sum::<f64>();
    let k = (0..n).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
    row[k] += err;
    row
}

/// Random full-support class with rewards in [0, 1).
pub fn random_class<R: Rng + ?Sized>(rng: &mut R, states: usize, actions: usize) -> BanditClass {
    BanditClass {
        state_count: states,
        action_count: actions,
        kernels: (0..actions)
            .map(|_| (0..states).map(|_| random_row(rng, states, 0.5)).collect())
            .collect(),
        mean_rewards: (0..states)
            .map(|_| (0..actions).map(|_| rng.random::<f64>()).collect())
            .collect(),
        reward_law: RewardLawSpec::Shared(RewardLaw::Uniform { half_width: 0.05 }),
        ergodic_state: 0,
    }
}

/// Random budget-constrained instance with up to `max_states` states and `max_actions` gears per class.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    classes: usize,
    max_states: usize,
    max_actions: usize,
) -> WcgInstance {
    let mut cls = Vec::new();
    let mut costs = Vec::new();
    let mut base = Vec::new();
    for _ in 0..classes {
        let ns = rng.random_range(1..=max_states);
        let na = rng.random_range(1..=max_actions);
        let c = random_class(rng, ns, na);
        let step = 0.5 + rng.random::<f64>();
        costs.push(vec![(0..na).map(|a| a as f64 * step).collect::<Vec<f64>>(); ns]);
        cls.push(c);
        base.push(rng.random_range(1..=6));
    }
    let total: usize = base.iter().sum();
    let bound = rng.random::<f64>() * total as f64;
    let initial = cls
        .iter()
        .map(|c| {
            let mut d = vec![0.0; c.state_count];
            d[rng.random_range(0..c.state_count)] = 1.0;
            d
        })
        .collect();
    WcgInstance {
        classes: cls,
        base_counts: base,
        scale: 1,
        constraints: unit_budget(costs, bound),
        horizon: Horizon::Finite(6),
        discount: 1.0,
        initial_distribution: Some(initial),
    }
}
