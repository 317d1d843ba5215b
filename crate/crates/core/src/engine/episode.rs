use std::io::Write;

use super::{step_system, EngineError, Policy, StepRecord, SystemState};
use crate::model::{eval_constraints, occupancy_from_state, residuals_feasible, SaIndex, WcgInstance};

#[derive(Clone, Copy, Debug, Default)]
pub struct EpisodeOptions {
    /// Abort when the policy returns actions that violate a constraint.
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepSummary {
    pub t: usize,
    /// Arm counts per SA label.
    pub occupancy: Vec<u32>,
    pub residuals: Vec<f64>,
    /// Σ over arms of the rewards sampled at this step.
    pub reward: f64,
    /// `action_counts[i][a]`.
    pub action_counts: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub total_arms: u32,
    pub scale: usize,
    pub steps: Vec<StepSummary>,
    /// Arm counts per (class, state) label; one more entry than `steps`.
    pub state_counts: Vec<Vec<u32>>,
    /// Σ_k β^{k+1} R(k) over the recorded steps.
    pub cumulative_reward: f64,
    pub feasible: bool,
}

impl Trajectory {
    /// (1/h)·Γ.
    pub fn normalized_reward(&self) -> f64 {
        self.cumulative_reward / self.scale as f64
    }

    pub fn occupancy_fractions(&self, k: usize) -> Vec<f64> {
        let n = self.total_arms as f64;
        self.steps[k].occupancy.iter().map(|&c| c as f64 / n).collect()
    }
}

fn state_counts(inst: &WcgInstance, sa: &SaIndex, st: &SystemState) -> Vec<u32> {
    let mut counts = vec![0u32; sa.state_total()];
    for (&i, &s) in st.classes().iter().zip(st.states()) {
        counts[sa.state_label(i, s)] += 1;
    }
    debug_assert_eq!(counts.iter().sum::<u32>() as usize, inst.total_arms());
    counts
}

/// Runs `horizon` decision epochs from a fresh state seeded by `seed`.
pub fn run_episode(
    inst: &WcgInstance,
    policy: &mut dyn Policy,
    horizon: usize,
    seed: u64,
    opts: EpisodeOptions,
) -> Result<Trajectory, EngineError> {
    let mut st = SystemState::new(inst, seed);
    run_from(inst, &mut st, policy, horizon, opts)
}

/// Runs `horizon` decision epochs continuing from `st`.
pub fn run_from(
    inst: &WcgInstance,
    st: &mut SystemState,
    policy: &mut dyn Policy,
    horizon: usize,
    opts: EpisodeOptions,
) -> Result<Trajectory, EngineError> {
    let sa = SaIndex::new(inst);
    let mut traj = Trajectory {
        total_arms: inst.total_arms() as u32,
        scale: inst.scale,
        steps: Vec::with_capacity(horizon),
        state_counts: vec![state_counts(inst, &sa, st)],
        cumulative_reward: 0.0,
        feasible: true,
    };
    let mut weight = 1.0;
    for _ in 0..horizon {
        let t = st.t;
        let actions = {
            let (states, rng) = st.parts();
            policy.act(inst, t, states, rng)?
        };
        let residuals = eval_constraints(inst, st.states(), &actions)?;
        let ok = residuals_feasible(inst, &residuals, 1e-9);
        if !ok && opts.strict {
            return Err(EngineError::Infeasible { t, residuals });
        }
        traj.feasible &= ok;
        let occ = occupancy_from_state(inst, &sa, st.states(), &actions)?;
        let mut action_counts: Vec<Vec<u32>> = inst.classes.iter().map(|c| vec![0; c.action_count]).collect();
        for (&i, &a) in st.classes().iter().zip(&actions) {
            action_counts[i][a] += 1;
        }
        let before = st.states().to_vec();
        let rewards = step_system(inst, st, &actions)?;
        let total: f64 = rewards.iter().sum();
        weight *= inst.discount;
        traj.cumulative_reward += weight * total;
        policy.observe(
            inst,
            &StepRecord {
                t,
                states: &before,
                actions: &actions,
                rewards: &rewards,
                next_states: st.states(),
            },
        );
        traj.steps.push(StepSummary {
            t,
            occupancy: occ.counts,
            residuals,
            reward: total,
            action_counts,
        });
        traj.state_counts.push(state_counts(inst, &sa, st));
    }
    Ok(traj)
}

/// Writes `(replication, t, z_ι…, residual_ℓ…, reward)` rows.
pub fn write_trajectories_csv<W: Write>(out: W, runs: &[(usize, &Trajectory)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some((_, first)) = runs.first() else {
        return Ok(());
    };
    let labels = first.steps.first().map_or(0, |s| s.occupancy.len());
    let constraints = first.steps.first().map_or(0, |s| s.residuals.len());
    let mut header = vec!["replication".to_string(), "t".to_string()];
    header.extend((0..labels).map(|k| format!("z_{k}")));
    header.extend((0..constraints).map(|l| format!("residual_{l}")));
    header.push("reward".into());
    w.write_record(&header)?;
    for (rep, traj) in runs {
        for (k, step) in traj.steps.iter().enumerate() {
            let mut row = vec![rep.to_string(), step.t.to_string()];
            row.extend(traj.occupancy_fractions(k).iter().map(|z| z.to_string()));
            row.extend(step.residuals.iter().map(|r| r.to_string()));
            row.push(step.reward.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
