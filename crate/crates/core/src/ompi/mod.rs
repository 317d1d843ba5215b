//! Online MP index (OMPI) policy: exploration mixed with index actions, while 6J
//! coordinated learning processes estimate the indices from the live trajectory.

mod explore;

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use explore::explore_actions;

use crate::engine::rng::{aux_rng, LEARNING_STREAM};
use crate::engine::{EngineError, Policy, StepRecord};
use crate::indices::{mp_assemble_actions, IndexError};
use crate::model::{LocalPolicy, SaIndex, WcgInstance};
use crate::qlearn::{collect_counts, EstimatedModel, LearningProcess, QError, QTable, RewardSpec, StepSchedule};

/// Which return-cycle quantity a learning process tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    /// Reward.
    V = 0,
    /// Constraint cost.
    U = 1,
    /// Return time.
    L = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OmpiConfig {
    /// Stop-rule precision on the per-step Q change.
    pub epsilon: f64,
    /// Exploration probability decays linearly to `explore_floor` over this many steps.
    pub explore_horizon: usize,
    pub explore_floor: f64,
    pub schedule: StepSchedule,
    /// Jump-start the tables from the estimated model.
    pub stimulate: bool,
    /// Coverage thresholds ε̄; `None` uses the default.
    pub thresholds: Option<Vec<f64>>,
    pub vi_tol: f64,
    pub vi_max_iter: usize,
    /// Initial index estimates `[i][s][a]`; zeros when `None`.
    pub initial_indices: Option<Vec<Vec<Vec<f64>>>>,
    pub record_trace: bool,
}

impl Default for OmpiConfig {
    fn default() -> Self {
        OmpiConfig {
            epsilon: 1e-3,
            explore_horizon: 100,
            explore_floor: 0.05,
            schedule: StepSchedule::Harmonic,
            stimulate: true,
            thresholds: None,
            vi_tol: 1e-10,
            vi_max_iter: 1_000_000,
            initial_indices: None,
            record_trace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NuTraceRow {
    pub t: usize,
    pub i: usize,
    pub s: usize,
    pub label: usize,
    pub nu: f64,
    pub m: usize,
}

pub fn write_nu_trace_csv<W: Write>(out: W, rows: &[NuTraceRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "i", "s", "label", "nu", "m"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.i.to_string(),
            r.s.to_string(),
            r.label.to_string(),
            r.nu.to_string(),
            r.m.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Complete OMPI state; also the primary policy.
#[derive(Clone, Debug)]
pub struct OmpiState {
    pub config: OmpiConfig,
    /// Estimated indices `nu_hat[i][s][a]`.
    pub nu_hat: Vec<Vec<Vec<f64>>>,
    /// Current label vector of every class.
    pub labels: Vec<Vec<usize>>,
    pub m: usize,
    /// Slots per class: max_i |S_i|.
    pub j_slots: usize,
    pub table: QTable,
    pub estimate: EstimatedModel,
    /// The tables have been jump-started (or stimulation is off).
    pub primed: bool,
    pub stopped: bool,
    /// Epoch after which indices froze.
    pub stop_time: Option<usize>,
    /// Largest Q change of the most recent learning step.
    pub last_delta: f64,
    pub trace: Vec<NuTraceRow>,
    /// Last value-iteration failure, if any.
    pub failure: Option<QError>,
    sa: SaIndex,
    anchors: Vec<usize>,
    rng: ChaCha8Rng,
}

impl OmpiState {
    pub fn new(inst: &WcgInstance, config: OmpiConfig, seed: u64) -> Result<Self, IndexError> {
        crate::indices::budget_terms(inst)?;
        let sa = SaIndex::new(inst);
        let j_slots = inst.classes.iter().map(|c| c.state_count).max().unwrap_or(0);
        let labels: Vec<Vec<usize>> = inst.classes.iter().map(|c| vec![c.action_count - 1; c.state_count]).collect();
        let nu_hat = config.initial_indices.clone().unwrap_or_else(|| {
            inst.classes
                .iter()
                .map(|c| vec![vec![0.0; c.action_count]; c.state_count])
                .collect()
        });
        let thresholds = config
            .thresholds
            .clone()
            .unwrap_or_else(|| EstimatedModel::default_thresholds(inst, &sa));
        let mut processes = Vec::with_capacity(6 * j_slots);
        for xi in [Quantity::V, Quantity::U, Quantity::L] {
            for j in 0..j_slots {
                for varsigma in 0..2 {
                    let reward = match xi {
                        Quantity::V => RewardSpec::Live,
                        Quantity::U => RewardSpec::Cost { constraint: 0 },
                        Quantity::L => RewardSpec::Constant(1.0),
                    };
                    processes.push(LearningProcess::new(inst, secondary(&labels, j, varsigma), reward));
                }
            }
        }
        let mut all_passive = labels.iter().all(|l| l.iter().all(|&a| a == 0));
        all_passive |= inst.classes.is_empty();
        Ok(OmpiState {
            primed: !config.stimulate,
            table: QTable::new(processes, config.schedule),
            estimate: EstimatedModel::new(inst, &sa, thresholds),
            config,
            nu_hat,
            labels,
            m: 0,
            j_slots,
            stopped: all_passive,
            stop_time: all_passive.then_some(0),
            last_delta: f64::INFINITY,
            trace: Vec::new(),
            failure: None,
            sa,
            anchors: inst.classes.iter().map(|c| c.ergodic_state).collect(),
            rng: aux_rng(seed, LEARNING_STREAM),
        })
    }

    /// Table position of (Ξ, j, ς).
    pub fn process_index(&self, xi: Quantity, j: usize, varsigma: usize) -> usize {
        ((xi as usize * self.j_slots) + j) * 2 + varsigma
    }

    /// Probability of the exploration branch at epoch `t`.
    pub fn explore_probability(&self, t: usize) -> f64 {
        if self.stopped {
            return 0.0;
        }
        let ramp = 1.0 - t as f64 / self.config.explore_horizon.max(1) as f64;
        ramp.max(self.config.explore_floor)
    }

    /// Exploration with probability [`Self::explore_probability`], index actions otherwise.
    pub fn primary_action(
        &self,
        inst: &WcgInstance,
        t: usize,
        states: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, IndexError> {
        let p = self.explore_probability(t);
        if p > 0.0 && rng.random::<f64>() < p {
            explore_actions(inst, rng)
        } else {
            mp_assemble_actions(inst, &self.nu_hat, states, rng)
        }
    }

    /// Updates the 6J tables and the model estimate from one live step.
    /// Returns the largest Q change, or ∞ on the step that jump-starts the tables.
    pub fn learn_step(&mut self, inst: &WcgInstance, step: &StepRecord<'_>) -> Result<f64, QError> {
        let counts = collect_counts(inst, &self.sa, step);
        let mut delta = self.table.q_update(inst, &self.sa, &counts, &mut self.rng);
        if self.config.stimulate && self.estimate.stop_time.is_none() {
            let n = step.states.len() as f64;
            let z: Vec<f64> = counts.visits.iter().map(|&v| v as f64 / n).collect();
            self.estimate.update(&self.sa, &counts, &z, step.t);
            if self.estimate.stop_time.is_some() {
                self.reseed(inst)?;
                self.primed = true;
                delta = f64::INFINITY;
            }
        }
        self.last_delta = delta;
        Ok(delta)
    }

    fn reseed(&mut self, inst: &WcgInstance) -> Result<(), QError> {
        self.estimate
            .jump_start(inst, &mut self.table, self.config.vi_tol, self.config.vi_max_iter)
    }

    /// Ratio-of-ratios index estimate for every class and every state still above passive.
    pub fn index_update(&mut self, t: usize) {
        let mut updates = Vec::new();
        for (i, labels) in self.labels.iter().enumerate() {
            let s0 = self.anchors[i];
            for (j, &label) in labels.iter().enumerate() {
                if label == 0 {
                    continue;
                }
                let ratio = |xi: Quantity, varsigma: usize| {
                    let k = ((xi as usize * self.j_slots) + j) * 2 + varsigma;
                    let p = &self.table.processes[k];
                    let a = p.secondary.actions[i][s0];
                    p.q[i][s0][a]
                };
                let l0 = ratio(Quantity::L, 0);
                let l1 = ratio(Quantity::L, 1);
                if !(l0 > 0.0 && l1 > 0.0) {
                    continue;
                }
                let (g0, g1) = (ratio(Quantity::V, 0) / l0, ratio(Quantity::V, 1) / l1);
                let (o0, o1) = (ratio(Quantity::U, 0) / l0, ratio(Quantity::U, 1) / l1);
                let nu = if o0 != o1 { (g0 - g1) / (o0 - o1) } else { 0.0 };
                updates.push(NuTraceRow { t, i, s: j, label, nu, m: self.m });
            }
        }
        for u in &updates {
            self.nu_hat[u.i][u.s][u.label] = u.nu;
        }
        if self.config.record_trace {
            self.trace.extend(updates);
        }
    }

    /// Advances the downshift position when every table moved less than ε.
    /// Returns whether an advance happened.
    pub fn stop_check(&mut self, inst: &WcgInstance, t: usize, delta: f64) -> Result<bool, QError> {
        if self.stopped || !self.primed || !(delta < self.config.epsilon) {
            return Ok(false);
        }
        for (i, labels) in self.labels.iter_mut().enumerate() {
            let eligible: Vec<usize> = (0..labels.len()).filter(|&s| labels[s] >= 1).collect();
            if eligible.is_empty() {
                continue;
            }
            let value = |s: usize| self.nu_hat[i][s][labels[s]];
            let best = eligible.iter().map(|&s| value(s)).fold(f64::INFINITY, f64::min);
            let ties: Vec<usize> = eligible.iter().copied().filter(|&s| value(s) == best).collect();
            let s_star = ties[self.rng.random_range(0..ties.len())];
            labels[s_star] -= 1;
        }
        self.m += 1;
        if self.labels.iter().all(|l| l.iter().all(|&a| a == 0)) {
            self.stopped = true;
            self.stop_time = Some(t + 1);
            return Ok(true);
        }
        let j_slots = self.j_slots;
        for (k, p) in self.table.processes.iter_mut().enumerate() {
            let j = (k / 2) % j_slots;
            p.secondary = secondary(&self.labels, j, k % 2);
        }
        if self.config.stimulate {
            self.reseed(inst)?;
        }
        Ok(true)
    }

    /// Frozen-or-current index table as a ranking of (i, s, label) by ν descending.
    pub fn ranking(&self) -> Vec<(usize, usize, usize)> {
        ranking(&self.nu_hat)
    }
}

impl Policy for OmpiState {
    fn act(
        &mut self,
        inst: &WcgInstance,
        t: usize,
        states: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, EngineError> {
        self.primary_action(inst, t, states, rng)
            .map_err(|e| EngineError::Policy(e.to_string()))
    }

    /// Learning, index update and stop rule, in that order.
    ///
    /// A failed jump start (estimated kernel misses s₀) leaves the tables learning from
    /// the trajectory alone and records the error.
    fn observe(&mut self, inst: &WcgInstance, step: &StepRecord<'_>) {
        if self.stopped {
            return;
        }
        let delta = match self.learn_step(inst, step) {
            Ok(d) => d,
            Err(e) => {
                self.failure = Some(e);
                self.primed = true;
                f64::INFINITY
            }
        };
        self.index_update(step.t);
        if let Err(e) = self.stop_check(inst, step.t, delta) {
            self.failure = Some(e);
        }
    }
}

/// Sorts all (i, s, label ≥ 1) entries by index, highest first; ties keep label order.
pub fn ranking(nu: &[Vec<Vec<f64>>]) -> Vec<(usize, usize, usize)> {
    let mut keys: Vec<(usize, usize, usize)> = nu
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            c.iter()
                .enumerate()
                .flat_map(move |(s, row)| (1..row.len()).map(move |a| (i, s, a)))
        })
        .collect();
    keys.sort_by(|x, y| nu[y.0][y.1][y.2].total_cmp(&nu[x.0][x.1][x.2]));
    keys
}

/// φ̄^ς for slot `j`: the current labels, with state `j` downshifted once when ς = 1.
fn secondary(labels: &[Vec<usize>], j: usize, varsigma: usize) -> LocalPolicy {
    let mut actions = labels.to_vec();
    if varsigma == 1 {
        for l in actions.iter_mut() {
            if j < l.len() && l[j] >= 1 {
                l[j] -= 1;
            }
        }
    }
    LocalPolicy { actions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_episode, run_from, EpisodeOptions, SystemState};
    use crate::fixtures;
    use crate::indices::downshift_ratio;
    use crate::qlearn::solve_q_fixed_point;
    use rand::SeedableRng;

    fn quiet() -> OmpiConfig {
        OmpiConfig {
            stimulate: false,
            ..OmpiConfig::default()
        }
    }

    #[test]
    fn table_layout_has_six_j_processes() {
        let inst = fixtures::mixed_two_class();
        let st = OmpiState::new(&inst, quiet(), 0).unwrap();
        assert_eq!(st.j_slots, 3);
        assert_eq!(st.table.processes.len(), 18);
        let k = st.process_index(Quantity::U, 2, 1);
        assert_eq!(st.table.processes[k].reward, RewardSpec::Cost { constraint: 0 });
        // Slot 2 only exists in the second class; the first keeps its labels.
        assert_eq!(st.table.processes[k].secondary.actions, vec![vec![1, 1], vec![1, 1, 0]]);
    }

    #[test]
    fn exploit_branch_is_pure_index_policy() {
        let inst = fixtures::two_state_with(6, 2.0);
        let mut cfg = quiet();
        cfg.explore_horizon = 1;
        cfg.explore_floor = 0.0;
        cfg.initial_indices = Some(vec![vec![vec![0.0, 0.1], vec![0.0, 0.9]]]);
        let st = OmpiState::new(&inst, cfg, 0).unwrap();
        let states = [0, 1, 1, 0, 1, 0];
        let a = st.primary_action(&inst, 5, &states, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = mp_assemble_actions(&inst, &st.nu_hat, &states, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn explore_branch_with_zero_budget_is_passive() {
        let inst = fixtures::two_state_with(6, 0.0);
        let st = OmpiState::new(&inst, quiet(), 0).unwrap();
        assert_eq!(st.explore_probability(0), 1.0);
        let a = st.primary_action(&inst, 0, &[0; 6], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, vec![0; 6]);
    }

    #[test]
    fn return_time_table_sees_one_step_cycles() {
        let inst = fixtures::two_state_with(4, 4.0);
        let mut st = OmpiState::new(&inst, quiet(), 0).unwrap();
        let rec = StepRecord {
            t: 0,
            states: &[0, 1, 0, 1],
            actions: &[0, 0, 1, 1],
            rewards: &[0.0; 4],
            next_states: &[0, 0, 0, 0],
        };
        st.learn_step(&inst, &rec).unwrap();
        for j in 0..2 {
            for v in 0..2 {
                let p = &st.table.processes[st.process_index(Quantity::L, j, v)];
                assert_eq!(p.q[0], vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
                let p = &st.table.processes[st.process_index(Quantity::V, j, v)];
                assert_eq!(p.q[0], vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
            }
        }
    }

    /// Loads every table with the exact fixed point of its own policy and reward.
    fn preload(inst: &WcgInstance, st: &mut OmpiState) {
        let cls = &inst.classes[0];
        for p in &mut st.table.processes {
            let r = p.reward.mean_matrix(inst, 0, &cls.mean_rewards);
            let zero = vec![vec![0.0; 2]; 2];
            p.q[0] = solve_q_fixed_point(cls, &p.secondary.actions[0], &r, &cls.kernels, &zero, 1e-14, 100_000)
                .unwrap()
                .q;
        }
    }

    #[test]
    fn exact_preload_reproduces_offline_ratios() {
        let inst = fixtures::two_state();
        let mut st = OmpiState::new(&inst, quiet(), 0).unwrap();
        preload(&inst, &mut st);
        st.index_update(0);
        let costs = vec![vec![0.0, 1.0]; 2];
        for s in 0..2 {
            let exact = downshift_ratio(&inst.classes[0], &[1, 1], s, &costs).unwrap();
            assert!((st.nu_hat[0][s][1] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn passive_labels_are_skipped() {
        let inst = fixtures::two_state();
        let mut st = OmpiState::new(&inst, quiet(), 0).unwrap();
        st.labels[0] = vec![1, 0];
        for k in 0..st.table.processes.len() {
            st.table.processes[k].secondary = secondary(&st.labels, (k / 2) % 2, k % 2);
        }
        preload(&inst, &mut st);
        st.nu_hat[0][1][1] = 42.0;
        st.index_update(0);
        assert_eq!(st.nu_hat[0][1][1], 42.0);
        assert_ne!(st.nu_hat[0][0][1], 0.0);
    }

    #[test]
    fn infinite_precision_advances_every_step() {
        let inst = fixtures::two_state();
        let mut cfg = quiet();
        cfg.epsilon = f64::INFINITY;
        let mut st = OmpiState::new(&inst, cfg, 0).unwrap();
        run_episode(&inst, &mut st, 2, 5, EpisodeOptions::default()).unwrap();
        assert!(st.stopped);
        assert_eq!(st.m, 2);
        assert_eq!(st.stop_time, Some(2));
        assert_eq!(st.explore_probability(3), 0.0);
    }

    #[test]
    fn zero_precision_never_advances() {
        let inst = fixtures::two_state();
        let mut cfg = quiet();
        cfg.epsilon = 0.0;
        let mut st = OmpiState::new(&inst, cfg, 0).unwrap();
        run_episode(&inst, &mut st, 30, 5, EpisodeOptions::default()).unwrap();
        assert_eq!(st.m, 0);
        assert!(!st.stopped);
    }

    struct Recorder<P> {
        inner: P,
        actions: Vec<Vec<usize>>,
    }

    impl<P: Policy> Policy for Recorder<P> {
        fn act(
            &mut self,
            inst: &WcgInstance,
            t: usize,
            states: &[usize],
            rng: &mut ChaCha8Rng,
        ) -> Result<Vec<usize>, EngineError> {
            let a = self.inner.act(inst, t, states, rng)?;
            self.actions.push(a.clone());
            Ok(a)
        }

        fn observe(&mut self, inst: &WcgInstance, step: &StepRecord<'_>) {
            self.inner.observe(inst, step)
        }
    }

    struct Replay(Vec<Vec<usize>>);

    impl Policy for Replay {
        fn act(&mut self, _: &WcgInstance, t: usize, _: &[usize], _: &mut ChaCha8Rng) -> Result<Vec<usize>, EngineError> {
            Ok(self.0[t].clone())
        }
    }

    #[test]
    fn learning_never_touches_the_dynamics() {
        let inst = fixtures::two_state().with_scale(2);
        let mut rec = Recorder {
            inner: OmpiState::new(&inst, OmpiConfig::default(), 7).unwrap(),
            actions: Vec::new(),
        };
        let mut a = SystemState::new(&inst, 21);
        let ta = run_from(&inst, &mut a, &mut rec, 40, EpisodeOptions { strict: true }).unwrap();
        let mut b = SystemState::new(&inst, 21);
        let tb = run_from(&inst, &mut b, &mut Replay(rec.actions), 40, EpisodeOptions::default()).unwrap();
        assert_eq!(ta.state_counts, tb.state_counts);
        assert_eq!(ta.cumulative_reward.to_bits(), tb.cumulative_reward.to_bits());
    }

    #[test]
    fn frozen_policy_is_deterministic() {
        let inst = fixtures::two_state();
        let mut cfg = quiet();
        cfg.epsilon = f64::INFINITY;
        let mut st = OmpiState::new(&inst, cfg, 0).unwrap();
        run_episode(&inst, &mut st, 3, 1, EpisodeOptions::default()).unwrap();
        let states = inst.initial_states();
        let a = st.primary_action(&inst, 10, &states, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = st.primary_action(&inst, 99, &states, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_rows_export() {
        let inst = fixtures::two_state();
        let mut cfg = quiet();
        cfg.record_trace = true;
        let mut st = OmpiState::new(&inst, cfg, 0).unwrap();
        run_episode(&inst, &mut st, 3, 1, EpisodeOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_nu_trace_csv(&mut buf, &st.trace).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,i,s,label,nu,m\n"));
    }

    #[test]
    fn ranking_orders_by_index() {
        let nu = vec![vec![vec![0.0, 0.3], vec![0.0, 0.675]]];
        assert_eq!(ranking(&nu), vec![(0, 1, 1), (0, 0, 1)]);
    }
}
