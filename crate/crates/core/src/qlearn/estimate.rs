use super::{solve_q_fixed_point, QError, QTable, TransitionCounts};
use crate::model::{SaIndex, WcgInstance};

/// Empirical kernels and mean rewards gathered from the live trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatedModel {
    /// `kernels[i][a][s][s']`; rows never updated stay at zero.
    pub kernels: Vec<Vec<Vec<Vec<f64>>>>,
    /// Estimated live mean rewards `[i][s][a]`.
    pub rewards: Vec<Vec<Vec<f64>>>,
    /// Per-ι threshold on Z_ι(t) for accepting a step's counts.
    pub thresholds: Vec<f64>,
    /// Per-ι epoch of the last accepted update.
    pub last_update: Vec<Option<usize>>,
    /// Number of steps observed when every ι had been covered; estimates freeze there.
    pub stop_time: Option<usize>,
    /// Pool all accepted counts instead of overwriting with the latest step.
    pub running_average: bool,
    pooled: Vec<(u64, Vec<u64>, f64)>,
}

impl EstimatedModel {
    pub fn new(inst: &WcgInstance, sa: &SaIndex, thresholds: Vec<f64>) -> Self {
        assert_eq!(thresholds.len(), sa.total());
        EstimatedModel {
            kernels: inst
                .classes
                .iter()
                .map(|c| vec![vec![vec![0.0; c.state_count]; c.state_count]; c.action_count])
                .collect(),
            rewards: inst
                .classes
                .iter()
                .map(|c| vec![vec![0.0; c.action_count]; c.state_count])
                .collect(),
            thresholds,
            last_update: vec![None; sa.total()],
            stop_time: None,
            running_average: false,
            pooled: (0..sa.total())
                .map(|k| (0, vec![0; inst.classes[sa.pair(k).0].state_count], 0.0))
                .collect(),
        }
    }

    /// ε̄_ι = 0.5 / (h·ΣN⁰·𝓘): a single arm in ι clears it.
    pub fn default_thresholds(inst: &WcgInstance, sa: &SaIndex) -> Vec<f64> {
        let eps = 0.5 / (inst.total_arms() as f64 * sa.total() as f64);
        vec![eps; sa.total()]
    }

    pub fn is_estimated(&self, iota: usize) -> bool {
        self.last_update[iota].is_some()
    }

    pub fn covered(&self) -> usize {
        self.last_update.iter().filter(|u| u.is_some()).count()
    }

    /// Folds in one step observed at epoch `t` with SA occupancy `z`.
    pub fn update(&mut self, sa: &SaIndex, counts: &TransitionCounts, z: &[f64], t: usize) {
        if self.stop_time.is_some() {
            return;
        }
        for iota in 0..sa.total() {
            let n = counts.visits[iota];
            if z[iota] <= self.thresholds[iota] || n == 0 {
                continue;
            }
            let (i, s, a) = sa.pair(iota);
            let (visits, succ, rsum) = if self.running_average {
                let pool = &mut self.pooled[iota];
                pool.0 += n as u64;
                for (p, &c) in pool.1.iter_mut().zip(&counts.successors[iota]) {
                    *p += c as u64;
                }
                pool.2 += counts.reward_sums[iota];
                (pool.0 as f64, pool.1.iter().map(|&c| c as f64).collect::<Vec<_>>(), pool.2)
            } else {
                (
                    n as f64,
                    counts.successors[iota].iter().map(|&c| c as f64).collect(),
                    counts.reward_sums[iota],
                )
            };
            self.kernels[i][a][s] = succ.iter().map(|c| c / visits).collect();
            self.rewards[i][s][a] = rsum / visits;
            self.last_update[iota] = Some(t);
        }
        if self.last_update.iter().all(|u| u.is_some()) {
            self.stop_time = Some(t + 1);
        }
    }

    /// Largest entrywise kernel error against the instance.
    pub fn kernel_error(&self, inst: &WcgInstance) -> f64 {
        let mut worst: f64 = 0.0;
        for (est, cls) in self.kernels.iter().zip(&inst.classes) {
            for (ea, ta) in est.iter().zip(&cls.kernels) {
                for (er, tr) in ea.iter().zip(ta) {
                    worst = worst.max(crate::linalg::max_abs_diff(er, tr));
                }
            }
        }
        worst
    }

    /// Replaces every process's table by the fixed point of the estimated operator.
    ///
    /// Processes with sampled rewards use their declared means.
    pub fn jump_start(&self, inst: &WcgInstance, table: &mut QTable, tol: f64, max_iter: usize) -> Result<(), QError> {
        if let Some(iota) = self.last_update.iter().position(|u| u.is_none()) {
            return Err(QError::Unestimated(iota));
        }
        for p in &mut table.processes {
            for (i, cls) in inst.classes.iter().enumerate() {
                let rewards = p.reward.mean_matrix(inst, i, &self.rewards[i]);
                let fp = solve_q_fixed_point(
                    cls,
                    &p.secondary.actions[i],
                    &rewards,
                    &self.kernels[i],
                    &p.q[i],
                    tol,
                    max_iter,
                )?;
                p.q[i] = fp.q;
            }
        }
        Ok(())
    }
}
