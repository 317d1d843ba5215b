use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frame::{MetricFrame, MetricRecord};
use super::scenario::{Grid, Metric, Outputs, PolicySpec, ReferenceSpec, Scenario, ScenarioPlan, SeedGrid};
use super::{HarnessError, VERSION};
use crate::engine::{
    deviation_linf, expected_occupancy, run_episode, split_by_policy, state_marginal, EngineError, EpisodeOptions,
    Observer, Policy, StepRecord, Trajectory, Watched,
};
use crate::indices::MpIndexPolicy;
use crate::lp::{build_lp_from_states, oalp_run, policy_from_x, solve_lp, AlpPolicy, CoverageObserver, OalpConfig};
use crate::model::{RandomizedPolicy, SaIndex, WcgInstance};
use crate::ompi::{ranking, OmpiConfig, OmpiState};
use crate::qlearn::{solve_q_linear, sup_distance, LearningProcess, QLearner, QTable, RewardSpec, StepSchedule};

/// Reference replications draw seeds from here up, clear of ordinary grid seeds.
const REFERENCE_SEED_BASE: u64 = 1 << 40;

/// The concrete policy driving one replicate.
enum Live {
    Local(crate::model::LocalPolicy),
    Randomized(RandomizedPolicy),
    Index(MpIndexPolicy),
    Ompi(Box<OmpiState>),
    Alp(AlpPolicy),
}

impl Policy for Live {
    fn act(
        &mut self,
        inst: &WcgInstance,
        t: usize,
        states: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, EngineError> {
        match self {
            Live::Local(p) => p.act(inst, t, states, rng),
            Live::Randomized(p) => p.act(inst, t, states, rng),
            Live::Index(p) => p.act(inst, t, states, rng),
            Live::Ompi(p) => p.act(inst, t, states, rng),
            Live::Alp(p) => p.act(inst, t, states, rng),
        }
    }

    fn observe(&mut self, inst: &WcgInstance, step: &StepRecord<'_>) {
        if let Live::Ompi(p) = self {
            p.observe(inst, step);
        }
    }
}

#[derive(Default)]
struct Probes {
    coverage: Option<CoverageObserver>,
    learner: Option<QLearner>,
}

impl Observer for Probes {
    fn observe(&mut self, inst: &WcgInstance, step: &StepRecord<'_>) {
        if let Some(c) = &mut self.coverage {
            c.observe(inst, step);
        }
        if let Some(l) = &mut self.learner {
            l.observe(inst, step);
        }
    }
}

/// Occupancy LP from the instance's initial state.
#[derive(Clone, Debug)]
struct LpPlan {
    bound: f64,
    alpha: RandomizedPolicy,
}

/// Everything shared across the cells of a sweep.
#[derive(Default)]
struct Shared {
    lp: BTreeMap<(usize, usize), LpPlan>,
    /// Simulated mean trajectory per horizon.
    reference: BTreeMap<usize, Vec<Vec<f64>>>,
    index: Option<MpIndexPolicy>,
    offline_ranking: Option<Vec<(usize, usize, usize)>>,
    q_star: Option<Vec<Vec<Vec<f64>>>>,
}

fn solve_initial_lp(inst: &WcgInstance, horizon: usize) -> Result<LpPlan, HarnessError> {
    let lp = build_lp_from_states(inst, &inst.initial_states(), horizon)?;
    let sol = solve_lp(&lp.problem)?;
    if !sol.is_optimal() {
        return Err(HarnessError::Solver(format!("initial LP at T={horizon} is {:?}", sol.status)));
    }
    Ok(LpPlan {
        bound: sol.objective,
        alpha: policy_from_x(&lp, &sol, &SaIndex::new(inst)),
    })
}

fn ompi_config(spec: &PolicySpec) -> OmpiConfig {
    match *spec {
        PolicySpec::Ompi {
            epsilon,
            explore_horizon,
            explore_floor,
            stimulate,
        } => OmpiConfig {
            epsilon,
            explore_horizon,
            explore_floor,
            stimulate,
            ..OmpiConfig::default()
        },
        _ => OmpiConfig::default(),
    }
}

fn make_policy(
    plan: &ScenarioPlan,
    shared: &Shared,
    inst: &WcgInstance,
    lp: Option<&LpPlan>,
    seed: u64,
) -> Result<Live, HarnessError> {
    Ok(match &plan.scenario.policy {
        PolicySpec::Local { actions } => Live::Local(crate::model::LocalPolicy { actions: actions.clone() }),
        PolicySpec::Randomized { alpha } => Live::Randomized(match alpha {
            Some(a) => RandomizedPolicy::stationary(a.clone()),
            None => RandomizedPolicy::uniform(&SaIndex::new(inst), inst),
        }),
        PolicySpec::MpOffline {} | PolicySpec::Whittle { .. } => {
            Live::Index(shared.index.clone().expect("index table prepared"))
        }
        PolicySpec::Ompi { .. } => Live::Ompi(Box::new(OmpiState::new(inst, ompi_config(&plan.scenario.policy), seed)?)),
        PolicySpec::Alp {} => Live::Alp(AlpPolicy::new(inst, lp.expect("LP prepared").alpha.clone(), 0)),
        PolicySpec::Oalp { .. } => unreachable!("OALP cells run separately"),
    })
}

/// Closed-form mean trajectory of a randomized policy from the given initial states.
fn mean_field(inst: &WcgInstance, alpha: &RandomizedPolicy, states: &[usize], epochs: usize) -> Result<Vec<Vec<f64>>, HarnessError> {
    let sa = SaIndex::new(inst);
    let z0 = split_by_policy(&sa, &state_marginal(inst, &sa, states), alpha.at(0));
    Ok(expected_occupancy(inst, &sa, alpha, &z0, epochs)?)
}

/// Mean SA occupancy over `reference.replications` runs at h_ref.
fn simulated_reference(
    plan: &ScenarioPlan,
    shared: &Shared,
    reference: &ReferenceSpec,
    max_h: usize,
    horizon: usize,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let inst = plan.instance.with_scale(reference.factor * max_h);
    let runs: Vec<Trajectory> = (0..reference.replications as u64)
        .into_par_iter()
        .map(|r| {
            let seed = plan.engine_seed(REFERENCE_SEED_BASE + r);
            let mut live = make_policy(plan, shared, &inst, None, seed)?;
            Ok(run_episode(&inst, &mut live, horizon + 1, seed, EpisodeOptions::default())?)
        })
        .collect::<Result<_, HarnessError>>()?;
    let n = runs.len() as f64;
    let mut mean = vec![vec![0.0; SaIndex::new(&inst).total()]; horizon + 1];
    for tr in &runs {
        for (k, row) in mean.iter_mut().enumerate() {
            for (m, f) in row.iter_mut().zip(tr.occupancy_fractions(k)) {
                *m += f / n;
            }
        }
    }
    Ok(mean)
}

/// Precomputes what the cells over `hs × horizons` need; the reference runs at
/// factor · `max_h`.
fn prepare(plan: &ScenarioPlan, hs: &[usize], horizons: &[usize], max_h: usize) -> Result<Shared, HarnessError> {
    let sc = &plan.scenario;
    let inst = &plan.instance;
    let mut shared = Shared::default();
    let wants = |m: Metric| sc.metrics.contains(&m);
    let needs_lp = matches!(sc.policy, PolicySpec::Alp {})
        || (!matches!(sc.policy, PolicySpec::Oalp { .. }) && (wants(Metric::LpBound) || wants(Metric::LpGap)));
    if needs_lp {
        for &h in hs {
            for &t in horizons {
                shared.lp.insert((h, t), solve_initial_lp(&inst.with_scale(h), t)?);
            }
        }
    }
    match &sc.policy {
        PolicySpec::MpOffline {} => {
            shared.index = Some(MpIndexPolicy::from_ds(inst, &mut ChaCha8Rng::seed_from_u64(0))?.0);
        }
        PolicySpec::Whittle { tol } => shared.index = Some(MpIndexPolicy::from_whittle(inst, *tol)?),
        PolicySpec::Ompi { .. } if wants(Metric::RankingAgreement) => {
            let (offline, _) = MpIndexPolicy::from_ds(inst, &mut ChaCha8Rng::seed_from_u64(0))?;
            shared.offline_ranking = Some(ranking(&offline.nu));
        }
        _ => {}
    }
    if wants(Metric::QError) {
        let pol = plan.q_secondary();
        let q = inst
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| solve_q_linear(c, pol.class(i), &c.mean_rewards, &c.kernels))
            .collect::<Result<Vec<_>, _>>()?;
        shared.q_star = Some(q);
    }
    if !sc.policy.has_mean_field() && (wants(Metric::Deviation) || wants(Metric::DeviationPath)) {
        for &t in horizons {
            let z = simulated_reference(plan, &shared, &sc.reference, max_h, t)?;
            shared.reference.insert(t, z);
        }
    }
    Ok(shared)
}

/// Metrics and trajectory of one replicate.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub h: usize,
    pub horizon: usize,
    pub seed: u64,
    /// `(metric, t, value)` in the scenario's metric order.
    pub values: Vec<(&'static str, Option<usize>, f64)>,
    pub trajectory: Trajectory,
}

fn deviations(traj: &Trajectory, z: &[Vec<f64>]) -> Vec<f64> {
    (0..traj.steps.len())
        .map(|k| deviation_linf(&traj.occupancy_fractions(k), &z[k]))
        .collect()
}

fn push_deviation(devs: &[f64], out: &mut Vec<(&'static str, Option<usize>, f64)>, m: Metric) {
    match m {
        Metric::Deviation => out.push((m.name(), None, devs.iter().copied().fold(0.0, f64::max))),
        Metric::DeviationPath => out.extend(devs.iter().enumerate().map(|(k, &d)| (m.name(), Some(k), d))),
        _ => {}
    }
}

fn run_oalp_cell(plan: &ScenarioPlan, h: usize, horizon: usize, seed: u64) -> Result<CellResult, HarnessError> {
    let PolicySpec::Oalp { eps, max_explore, model } = plan.scenario.policy else {
        unreachable!()
    };
    let inst = plan.instance.with_scale(h);
    let config = OalpConfig {
        eps,
        horizon,
        max_explore,
        model,
        ..OalpConfig::default()
    };
    let run = oalp_run(&inst, &config, plan.engine_seed(seed))?;
    let r = &run.report;
    let metrics = &plan.scenario.metrics;
    let mut values = Vec::new();
    for &m in metrics {
        match m {
            Metric::Deviation | Metric::DeviationPath => {
                let z = mean_field(&inst, &run.policy.alpha, run.phase2_start.states(), horizon + 1)?;
                push_deviation(&deviations(&run.phase2, &z), &mut values, m);
            }
            Metric::Reward => values.push((m.name(), None, r.realized)),
            Metric::LpBound => values.push((m.name(), None, r.true_bound)),
            Metric::LpGap => values.push((m.name(), None, r.gap)),
            Metric::KernelError => values.push((m.name(), None, r.kernel_error)),
            Metric::StopTime => values.push((m.name(), None, r.stop_time as f64)),
            Metric::Feasible => values.push((m.name(), None, f64::from(u8::from(run.phase2.feasible)))),
            Metric::QError | Metric::RankingAgreement => unreachable!("rejected by scenario checks"),
        }
    }
    Ok(CellResult {
        h,
        horizon,
        seed,
        values,
        trajectory: run.phase2,
    })
}

fn run_cell(plan: &ScenarioPlan, shared: &Shared, h: usize, horizon: usize, seed: u64) -> Result<CellResult, HarnessError> {
    if matches!(plan.scenario.policy, PolicySpec::Oalp { .. }) {
        return run_oalp_cell(plan, h, horizon, seed);
    }
    let metrics = &plan.scenario.metrics;
    let wants = |m: Metric| metrics.contains(&m);
    let inst = plan.instance.with_scale(h);
    let engine_seed = plan.engine_seed(seed);
    let lp = shared.lp.get(&(h, horizon));
    let mut live = make_policy(plan, shared, &inst, lp, engine_seed)?;
    let mut probes = Probes {
        coverage: wants(Metric::KernelError).then(|| CoverageObserver::new(&inst)),
        learner: wants(Metric::QError).then(|| {
            let process = LearningProcess::new(&inst, plan.q_secondary(), RewardSpec::Live);
            QLearner::new(&inst, QTable::new(vec![process], StepSchedule::Harmonic), engine_seed)
        }),
    };
    let traj = run_episode(
        &inst,
        &mut Watched {
            policy: &mut live,
            observer: &mut probes,
        },
        horizon + 1,
        engine_seed,
        EpisodeOptions::default(),
    )?;
    let reward = traj.normalized_reward();
    let mut values = Vec::new();
    for &m in metrics {
        match m {
            Metric::Deviation | Metric::DeviationPath => {
                let z = match &live {
                    Live::Local(p) => mean_field(&inst, &p.to_randomized(&SaIndex::new(&inst)), &inst.initial_states(), horizon + 1)?,
                    Live::Randomized(p) => mean_field(&inst, p, &inst.initial_states(), horizon + 1)?,
                    Live::Alp(p) => mean_field(&inst, &p.alpha, &inst.initial_states(), horizon + 1)?,
                    Live::Index(_) | Live::Ompi(_) => shared.reference[&horizon].clone(),
                };
                push_deviation(&deviations(&traj, &z), &mut values, m);
            }
            Metric::Reward => values.push((m.name(), None, reward)),
            Metric::LpBound => values.push((m.name(), None, lp.expect("LP prepared").bound)),
            Metric::LpGap => {
                let bound = lp.expect("LP prepared").bound;
                values.push((m.name(), None, (bound - reward) / bound));
            }
            Metric::KernelError => {
                let est = &probes.coverage.as_ref().expect("probe attached").estimate;
                values.push((m.name(), None, est.kernel_error(&inst)));
            }
            Metric::QError => {
                let q = &probes.learner.as_ref().expect("probe attached").table.processes[0].q;
                values.push((m.name(), None, sup_distance(q, shared.q_star.as_ref().expect("Q* prepared"))));
            }
            Metric::RankingAgreement => {
                let Live::Ompi(st) = &live else { unreachable!() };
                let same = Some(st.ranking()) == shared.offline_ranking;
                values.push((m.name(), None, f64::from(u8::from(same))));
            }
            Metric::StopTime => {
                let Live::Ompi(st) = &live else { unreachable!() };
                values.push((m.name(), None, st.stop_time.map_or(f64::NAN, |t| t as f64)));
            }
            Metric::Feasible => values.push((m.name(), None, f64::from(u8::from(traj.feasible)))),
        }
    }
    Ok(CellResult {
        h,
        horizon,
        seed,
        values,
        trajectory: traj,
    })
}

impl ScenarioPlan {
    /// Every (h, T, seed) cell of the grid in that nesting order.
    pub fn cells(&self) -> Vec<(usize, usize, u64)> {
        let g = &self.scenario.grid;
        let seeds = self.seeds();
        let mut out = Vec::new();
        for &h in &g.h {
            for &t in &g.horizon {
                out.extend(seeds.iter().map(|&s| (h, t, s)));
            }
        }
        out
    }

    /// Runs the whole sweep on the current rayon pool; results come back in cell order.
    pub fn run_cells(&self) -> Result<Vec<CellResult>, HarnessError> {
        let g = &self.scenario.grid;
        let shared = prepare(self, &g.h, &g.horizon, self.max_h())?;
        self.cells()
            .into_par_iter()
            .map(|(h, t, s)| run_cell(self, &shared, h, t, s))
            .collect()
    }

    /// One replicate.
    pub fn run_one(&self, h: usize, horizon: usize, seed: u64) -> Result<CellResult, HarnessError> {
        // The reference for history-dependent policies still scales with the full grid.
        let shared = prepare(self, &[h], &[horizon], self.max_h().max(h))?;
        run_cell(self, &shared, h, horizon, seed)
    }

    fn max_h(&self) -> usize {
        self.scenario.grid.h.iter().copied().max().unwrap_or(1)
    }

    pub fn frame(&self, cells: &[CellResult]) -> MetricFrame {
        let records = cells
            .iter()
            .flat_map(|c| {
                c.values.iter().map(move |&(metric, t, value)| MetricRecord {
                    scenario: self.scenario.name.clone(),
                    hash: self.hash.clone(),
                    version: VERSION.to_string(),
                    h: c.h,
                    horizon: c.horizon,
                    seed: c.seed,
                    t,
                    metric: metric.to_string(),
                    value,
                })
            })
            .collect();
        MetricFrame::from_records(records)
    }

    pub fn run(&self) -> Result<MetricFrame, HarnessError> {
        Ok(self.frame(&self.run_cells()?))
    }
}

/// Loads and runs a scenario file.
pub fn run_scenario(path: &std::path::Path) -> Result<MetricFrame, HarnessError> {
    ScenarioPlan::load(path)?.run()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceRow {
    pub h: usize,
    pub runs: usize,
    pub exceedances: usize,
    pub rate: f64,
    pub mean_max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub eps: f64,
    pub horizon: usize,
    pub rows: Vec<ExceedanceRow>,
    /// Least-squares slope of ln(rate) against h over rows with a positive rate; needs two.
    pub log_slope: Option<f64>,
}

/// Estimates P{max_t ‖Z − z‖∞ > eps} at each h.
pub fn run_convergence_study(
    inst: &WcgInstance,
    policy: &PolicySpec,
    hs: &[usize],
    horizon: usize,
    eps: f64,
    seeds: &[u64],
) -> Result<ConvergenceStudy, HarnessError> {
    let scenario = Scenario {
        name: "convergence".into(),
        instance: super::scenario::InstanceRef::Inline(Box::new(inst.clone())),
        policy: policy.clone(),
        grid: Grid {
            h: hs.to_vec(),
            horizon: vec![horizon],
            seeds: SeedGrid::List(seeds.to_vec()),
        },
        metrics: vec![Metric::Deviation],
        master_seed: 0,
        q_secondary: None,
        reference: ReferenceSpec::default(),
        outputs: Outputs::default(),
    };
    let frame = ScenarioPlan::from_parts(scenario, inst.clone())?.run()?;
    let rows: Vec<ExceedanceRow> = hs
        .iter()
        .map(|&h| {
            let v = frame.values(h, horizon, Metric::Deviation.name());
            let exceedances = v.iter().filter(|&&d| d > eps).count();
            ExceedanceRow {
                h,
                runs: v.len(),
                exceedances,
                rate: exceedances as f64 / v.len() as f64,
                mean_max_deviation: v.iter().sum::<f64>() / v.len() as f64,
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.rate > 0.0).map(|r| (r.h as f64, r.rate.ln())).collect();
    let log_slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(ConvergenceStudy {
        eps,
        horizon,
        rows,
        log_slope,
    })
}
