use super::EngineError;
use crate::model::{RandomizedPolicy, SaIndex, WcgInstance};

/// Fraction of all arms in each (class, state) label.
pub fn state_marginal(inst: &WcgInstance, sa: &SaIndex, states: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; sa.state_total()];
    let n = states.len() as f64;
    for (&i, &s) in inst.arm_classes().iter().zip(states) {
        out[sa.state_label(i, s)] += 1.0 / n;
    }
    out
}

/// Splits a state marginal into SA occupancy by action probabilities.
pub fn split_by_policy(sa: &SaIndex, marginal: &[f64], alpha: &[f64]) -> Vec<f64> {
    (0..sa.total()).map(|k| marginal[sa.state_of(k)] * alpha[k]).collect()
}

/// Mean-field trajectory z(0), …, z(epochs − 1) under a randomized policy.
pub fn expected_occupancy(
    inst: &WcgInstance,
    sa: &SaIndex,
    policy: &RandomizedPolicy,
    z0: &[f64],
    epochs: usize,
) -> Result<Vec<Vec<f64>>, EngineError> {
    policy.check(sa).map_err(EngineError::BadPolicy)?;
    let total: f64 = z0.iter().sum();
    if z0.len() != sa.total() || (total - 1.0).abs() > 1e-9 {
        return Err(EngineError::BadInitial(total));
    }
    let mut out = Vec::with_capacity(epochs);
    if epochs == 0 {
        return Ok(out);
    }
    out.push(z0.to_vec());
    for t in 1..epochs {
        let prev = out.last().unwrap();
        let mut marginal = vec![0.0; sa.state_total()];
        for (k, &mass) in prev.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let (i, s, a) = sa.pair(k);
            let cls = &inst.classes[i];
            for (next, &p) in cls.row(s, a).iter().enumerate() {
                marginal[sa.state_label(i, next)] += mass * p;
            }
        }
        out.push(split_by_policy(sa, &marginal, policy.at(t)));
    }
    Ok(out)
}

pub fn deviation_linf(a: &[f64], b: &[f64]) -> f64 {
    crate::linalg::max_abs_diff(a, b)
}

pub fn deviation_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_episode, EpisodeOptions};
    use crate::fixtures;

    #[test]
    fn identity_kernels_hold_still() {
        let mut inst = fixtures::two_state();
        inst.classes[0].kernels = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2];
        let sa = SaIndex::new(&inst);
        let pol = RandomizedPolicy::stationary(vec![0.6, 0.4, 0.2, 0.8]);
        let z0 = split_by_policy(&sa, &[0.3, 0.7], pol.at(0));
        let z = expected_occupancy(&inst, &sa, &pol, &z0, 5).unwrap();
        for zt in &z {
            assert!(deviation_linf(zt, &z0) < 1e-15);
        }
    }

    #[test]
    fn passive_policy_stays_on_passive_labels() {
        let inst = fixtures::two_state();
        let sa = SaIndex::new(&inst);
        let pol = RandomizedPolicy::stationary(vec![1.0, 0.0, 1.0, 0.0]);
        let z0 = split_by_policy(&sa, &[1.0, 0.0], pol.at(0));
        for zt in expected_occupancy(&inst, &sa, &pol, &z0, 6).unwrap() {
            assert_eq!(zt[1], 0.0);
            assert_eq!(zt[3], 0.0);
            assert!((zt.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unnormalized_alpha() {
        let inst = fixtures::two_state();
        let sa = SaIndex::new(&inst);
        let pol = RandomizedPolicy::stationary(vec![0.5, 0.6, 0.5, 0.5]);
        assert!(expected_occupancy(&inst, &sa, &pol, &[1.0, 0.0, 0.0, 0.0], 3).is_err());
    }

    #[test]
    fn matches_monte_carlo_mean() {
        let inst = fixtures::two_state().with_scale(4);
        let sa = SaIndex::new(&inst);
        let pol = RandomizedPolicy::stationary(vec![0.6, 0.4, 0.3, 0.7]);
        let z0 = split_by_policy(&sa, &[1.0, 0.0], pol.at(0));
        let z = expected_occupancy(&inst, &sa, &pol, &z0, 4).unwrap();
        let reps = 5_000;
        let mut mean = vec![vec![0.0; 4]; 4];
        for seed in 0..reps {
            let mut p = pol.clone();
            let traj = run_episode(&inst, &mut p, 4, seed, EpisodeOptions::default()).unwrap();
            for (t, m) in mean.iter_mut().enumerate() {
                for (k, v) in traj.occupancy_fractions(t).iter().enumerate() {
                    m[k] += v / reps as f64;
                }
            }
        }
        for t in 0..4 {
            assert!(deviation_linf(&mean[t], &z[t]) < 0.01, "t={t}: {:?} vs {:?}", mean[t], z[t]);
        }
    }
}
