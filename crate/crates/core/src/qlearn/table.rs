use std::io::Write;

use rand_chacha::ChaCha8Rng;

use super::{collect_counts, StepSchedule, TransitionCounts};
use crate::engine::{rng::aux_rng, rng::LEARNING_STREAM, Observer, StepRecord};
use crate::model::{LocalPolicy, RewardLaw, SaIndex, WcgInstance};

/// Where a learning process gets its one-step rewards from.
#[derive(Clone, Debug, PartialEq)]
pub enum RewardSpec {
    /// The rewards the live system actually paid.
    Live,
    /// The cost f_{i,ℓ}(s, a) of the visited pair under constraint ℓ.
    Cost { constraint: usize },
    Constant(f64),
    /// Fresh draws around `means[i][s][a]` from the learning stream.
    Sampled { means: Vec<Vec<Vec<f64>>>, law: RewardLaw },
}

impl RewardSpec {
    /// Mean reward matrix `[s][a]` of class `i`, with live rewards taken from `live`.
    pub fn mean_matrix(&self, inst: &WcgInstance, i: usize, live: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let cls = &inst.classes[i];
        match self {
            RewardSpec::Live => live.to_vec(),
            RewardSpec::Cost { constraint } => inst.constraints.constraints[*constraint].costs[i].clone(),
            RewardSpec::Constant(c) => vec![vec![*c; cls.action_count]; cls.state_count],
            RewardSpec::Sampled { means, .. } => means[i].clone(),
        }
    }
}

/// One Q-factor learning process riding on the live trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct LearningProcess {
    /// `q[i][s][a]`.
    pub q: Vec<Vec<Vec<f64>>>,
    pub secondary: LocalPolicy,
    pub reward: RewardSpec,
}

impl LearningProcess {
    pub fn new(inst: &WcgInstance, secondary: LocalPolicy, reward: RewardSpec) -> Self {
        let q = inst
            .classes
            .iter()
            .map(|c| vec![vec![0.0; c.action_count]; c.state_count])
            .collect();
        LearningProcess { q, secondary, reward }
    }

    /// One step of the empirical update; returns the largest entry change.
    ///
    /// Target for a visited pair: mean one-step reward plus the empirical average of
    /// Q(s', φ̄(s')) over successors s' ≠ s₀. Unvisited pairs are left untouched.
    pub fn update(
        &mut self,
        inst: &WcgInstance,
        sa: &SaIndex,
        counts: &TransitionCounts,
        eta: f64,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let old = self.q.clone();
        let mut delta: f64 = 0.0;
        for iota in 0..sa.total() {
            let n = counts.visits[iota];
            if n == 0 {
                continue;
            }
            let (i, s, a) = sa.pair(iota);
            let cls = &inst.classes[i];
            let nf = n as f64;
            let reward = match &self.reward {
                RewardSpec::Live => counts.reward_sums[iota] / nf,
                RewardSpec::Cost { constraint } => inst.constraints.constraints[*constraint].costs[i][s][a],
                RewardSpec::Constant(c) => *c,
                RewardSpec::Sampled { means, law } => {
                    (0..n).map(|_| law.sample(means[i][s][a], rng)).sum::<f64>() / nf
                }
            };
            let cont: f64 = counts.successors[iota]
                .iter()
                .enumerate()
                .filter(|&(next, &c)| next != cls.ergodic_state && c > 0)
                .map(|(next, &c)| c as f64 * old[i][next][self.secondary.actions[i][next]])
                .sum::<f64>()
                / nf;
            let updated = (1.0 - eta) * old[i][s][a] + eta * (reward + cont);
            delta = delta.max((updated - old[i][s][a]).abs());
            self.q[i][s][a] = updated;
        }
        delta
    }
}

/// K learning processes sharing one step counter and step-size schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    pub processes: Vec<LearningProcess>,
    pub t: usize,
    pub schedule: StepSchedule,
}

impl QTable {
    pub fn new(processes: Vec<LearningProcess>, schedule: StepSchedule) -> Self {
        QTable { processes, t: 0, schedule }
    }

    /// Updates every process from one step's tallies and advances t.
    /// Returns the largest entry change over all processes.
    pub fn q_update(&mut self, inst: &WcgInstance, sa: &SaIndex, counts: &TransitionCounts, rng: &mut ChaCha8Rng) -> f64 {
        let eta = self.schedule.eta(self.t);
        let delta = self
            .processes
            .iter_mut()
            .map(|p| p.update(inst, sa, counts, eta, rng))
            .fold(0.0, f64::max);
        self.t += 1;
        delta
    }

    pub fn trace_rows(&self, oracle: Option<&[Vec<Vec<Vec<f64>>>]>) -> Vec<QTraceRow> {
        let mut rows = Vec::new();
        for (k, p) in self.processes.iter().enumerate() {
            let err = oracle.map(|o| sup_distance(&p.q, &o[k]));
            for (i, qi) in p.q.iter().enumerate() {
                for (s, qs) in qi.iter().enumerate() {
                    for (a, &q) in qs.iter().enumerate() {
                        rows.push(QTraceRow { t: self.t, k, i, s, a, q, error: err });
                    }
                }
            }
        }
        rows
    }
}

/// Sup distance between two `[i][s][a]` arrays.
pub fn sup_distance(a: &[Vec<Vec<f64>>], b: &[Vec<Vec<f64>>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y))
        .flat_map(|(x, y)| x.iter().zip(y))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QTraceRow {
    pub t: usize,
    pub k: usize,
    pub i: usize,
    pub s: usize,
    pub a: usize,
    pub q: f64,
    pub error: Option<f64>,
}

pub fn write_q_trace_csv<W: Write>(out: W, rows: &[QTraceRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "k", "i", "s", "a", "q", "error"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.k.to_string(),
            r.i.to_string(),
            r.s.to_string(),
            r.a.to_string(),
            r.q.to_string(),
            r.error.map_or(String::new(), |e| e.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Attaches a [`QTable`] to a live run as a passive observer.
pub struct QLearner {
    pub table: QTable,
    sa: SaIndex,
    rng: ChaCha8Rng,
    /// Largest entry change of the most recent update.
    pub last_delta: f64,
}

impl QLearner {
    pub fn new(inst: &WcgInstance, table: QTable, seed: u64) -> Self {
        QLearner {
            table,
            sa: SaIndex::new(inst),
            rng: aux_rng(seed, LEARNING_STREAM),
            last_delta: 0.0,
        }
    }
}

impl Observer for QLearner {
    fn observe(&mut self, inst: &WcgInstance, step: &StepRecord<'_>) {
        let counts = collect_counts(inst, &self.sa, step);
        self.last_delta = self.table.q_update(inst, &self.sa, &counts, &mut self.rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::SeedableRng;

    fn one_process(reward: RewardSpec) -> (WcgInstance, SaIndex, QTable) {
        let inst = fixtures::two_state_with(4, 2.0);
        let sa = SaIndex::new(&inst);
        let p = LearningProcess::new(&inst, LocalPolicy::constant(&inst, 0), reward);
        (inst, sa, QTable::new(vec![p], StepSchedule::Harmonic))
    }

    #[test]
    fn no_visits_leaves_table_unchanged() {
        let (inst, sa, mut qt) = one_process(RewardSpec::Live);
        qt.processes[0].q[0] = vec![vec![0.3, -1.2], vec![7.0, 0.1]];
        let before = qt.processes[0].q.clone();
        let counts = TransitionCounts::empty(&inst, &sa);
        let d = qt.q_update(&inst, &sa, &counts, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(d, 0.0);
        assert_eq!(qt.processes[0].q, before);
    }

    #[test]
    fn successors_at_anchor_give_pure_reward() {
        let (inst, sa, mut qt) = one_process(RewardSpec::Constant(0.7));
        qt.processes[0].q[0] = vec![vec![5.0, 5.0], vec![5.0, 5.0]];
        let mut counts = TransitionCounts::empty(&inst, &sa);
        counts.visits[3] = 4;
        counts.successors[3] = vec![4, 0];
        qt.q_update(&inst, &sa, &counts, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(qt.processes[0].q[0][1][1], 0.7);
        assert_eq!(qt.processes[0].q[0][0][0], 5.0);
    }

    #[test]
    fn unvisited_entries_bit_identical() {
        let (inst, sa, mut qt) = one_process(RewardSpec::Live);
        qt.processes[0].q[0] = vec![vec![0.1 + 0.2, 1.0 / 3.0], vec![1e-300, -0.0]];
        let mut counts = TransitionCounts::empty(&inst, &sa);
        counts.visits[0] = 2;
        counts.successors[0] = vec![1, 1];
        counts.reward_sums[0] = 0.4;
        qt.q_update(&inst, &sa, &counts, &mut ChaCha8Rng::seed_from_u64(0));
        let q = &qt.processes[0].q[0];
        assert_eq!(q[0][1].to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(q[1][0].to_bits(), 1e-300f64.to_bits());
        assert_eq!(q[1][1].to_bits(), (-0.0f64).to_bits());
        // η_0 = 1: 0.2 + ½·Q(1, φ̄(1)).
        assert!((q[0][0] - (0.2 + 0.5e-300)).abs() < 1e-15);
    }

    #[test]
    fn cost_rewards_follow_visited_action() {
        let (inst, sa, mut qt) = one_process(RewardSpec::Cost { constraint: 0 });
        let mut counts = TransitionCounts::empty(&inst, &sa);
        counts.visits[1] = 1;
        counts.successors[1] = vec![1, 0];
        qt.q_update(&inst, &sa, &counts, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(qt.processes[0].q[0][0][1], 1.0);
    }

    #[test]
    fn trace_csv_has_error_column() {
        let (_, _, qt) = one_process(RewardSpec::Live);
        let oracle = vec![vec![vec![vec![0.5; 2]; 2]]];
        let rows = qt.trace_rows(Some(&oracle));
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_q_trace_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,k,i,s,a,q,error\n0,0,0,0,0,0,0.5"));
    }
}
