use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::lp::ModelSource;
use crate::model::{validate_instance, LocalPolicy, RandomizedPolicy, SaIndex, WcgInstance};

/// Where the instance comes from: `{"path": "..."}` (relative to the scenario file) or
/// `{"inline": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceRef {
    Path(PathBuf),
    Inline(Box<WcgInstance>),
}

fn default_whittle_tol() -> f64 {
    1e-9
}

fn default_ompi_epsilon() -> f64 {
    1e-3
}

fn default_explore_horizon() -> usize {
    100
}

fn default_explore_floor() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

fn default_oalp_eps() -> f64 {
    crate::lp::DEFAULT_EPS
}

fn default_max_explore() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    /// Fixed action per (class, state).
    Local { actions: Vec<Vec<usize>> },
    /// Stationary action probabilities per SA label; uniform when omitted.
    Randomized {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<Vec<f64>>,
    },
    /// Offline MP indices from the downshift computation.
    MpOffline {},
    Whittle {
        #[serde(default = "default_whittle_tol")]
        tol: f64,
    },
    Ompi {
        #[serde(default = "default_ompi_epsilon")]
        epsilon: f64,
        #[serde(default = "default_explore_horizon")]
        explore_horizon: usize,
        #[serde(default = "default_explore_floor")]
        explore_floor: f64,
        #[serde(default = "default_true")]
        stimulate: bool,
    },
    /// ALP rounding of the occupancy LP solved from the initial state.
    Alp {},
    Oalp {
        #[serde(default = "default_oalp_eps")]
        eps: f64,
        #[serde(default = "default_max_explore")]
        max_explore: usize,
        #[serde(default)]
        model: ModelSource,
    },
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Local { .. } => "local",
            PolicySpec::Randomized { .. } => "randomized",
            PolicySpec::MpOffline {} => "mp-offline",
            PolicySpec::Whittle { .. } => "whittle",
            PolicySpec::Ompi { .. } => "ompi",
            PolicySpec::Alp {} => "alp",
            PolicySpec::Oalp { .. } => "oalp",
        }
    }

    /// The mean-field limit has a closed form (expected occupancy under a randomized policy).
    pub fn has_mean_field(&self) -> bool {
        matches!(
            self,
            PolicySpec::Local { .. } | PolicySpec::Randomized { .. } | PolicySpec::Alp {} | PolicySpec::Oalp { .. }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// max_t ‖Z(t) − z(t)‖∞.
    Deviation,
    /// ‖Z(t) − z(t)‖∞ at every t.
    DeviationPath,
    /// (1/h)·Γ.
    Reward,
    /// Optimum of the occupancy LP from the same start.
    LpBound,
    /// (LP optimum − reward) / LP optimum.
    LpGap,
    /// Largest entrywise error of the kernel estimate gathered along the run.
    KernelError,
    /// ‖Q̂ − Q*‖∞ of a Q-learning process riding on the run.
    QError,
    /// 1 when OMPI's ranking equals the offline one, else 0.
    RankingAgreement,
    /// OMPI index freeze or OALP exploration length; NaN when it never happened.
    StopTime,
    /// 1 when every step respected the constraints, else 0.
    Feasible,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Deviation => "deviation",
            Metric::DeviationPath => "deviation_path",
            Metric::Reward => "reward",
            Metric::LpBound => "lp_bound",
            Metric::LpGap => "lp_gap",
            Metric::KernelError => "kernel_error",
            Metric::QError => "q_error",
            Metric::RankingAgreement => "ranking_agreement",
            Metric::StopTime => "stop_time",
            Metric::Feasible => "feasible",
        }
    }
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Deviation, Metric::Reward, Metric::LpGap]
}

/// Seeds as an explicit list or a `{"start", "count"}` range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedGrid {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl SeedGrid {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedGrid::List(v) => v.clone(),
            SeedGrid::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    /// Magnitude dimensions.
    pub h: Vec<usize>,
    /// Last decision epoch T; runs simulate T + 1 steps.
    pub horizon: Vec<usize>,
    pub seeds: SeedGrid,
}

fn default_factor() -> usize {
    10
}

fn default_replications() -> usize {
    200
}

/// High-h simulation standing in for the mean-field limit of history-dependent policies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// h_ref = factor · max h.
    #[serde(default = "default_factor")]
    pub factor: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec {
            factor: default_factor(),
            replications: default_replications(),
        }
    }
}

fn default_records() -> PathBuf {
    "metrics.csv".into()
}

fn default_aggregates() -> PathBuf {
    "aggregates.json".into()
}

/// File names, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_records")]
    pub records: PathBuf,
    #[serde(default = "default_aggregates")]
    pub aggregates: PathBuf,
    /// Per-step trajectory CSV of every replicate, when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<PathBuf>,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            records: default_records(),
            aggregates: default_aggregates(),
            trajectories: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub instance: InstanceRef,
    pub policy: PolicySpec,
    pub grid: Grid,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    /// Added to every grid seed; the CLI's `--seed` overrides it.
    #[serde(default)]
    pub master_seed: u64,
    /// Secondary policy of the Q-learning probe; all-passive when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_secondary: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub outputs: Outputs,
}

/// A parsed, validated scenario with its instance resolved.
#[derive(Clone, Debug)]
pub struct ScenarioPlan {
    pub scenario: Scenario,
    pub instance: WcgInstance,
    /// First 16 hex digits of SHA-256 over the resolved scenario.
    pub hash: String,
}

/// Line of the first occurrence of `keys[n]` after `keys[..n]`, 1-based.
fn locate(text: &str, keys: &[&str]) -> Option<usize> {
    let mut at = 0;
    for key in keys {
        at += text[at..].find(&format!("\"{key}\""))?;
        at += key.len() + 2;
    }
    Some(text[..at].lines().count().max(1))
}

fn invalid(text: &str, keys: &[&str], message: impl Into<String>) -> HarnessError {
    HarnessError::Invalid {
        field: keys.join("."),
        line: locate(text, keys),
        message: message.into(),
    }
}

fn parse_error(source: &str, e: serde_json::Error) -> HarnessError {
    HarnessError::Parse {
        file: source.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Reads an instance file and checks it.
pub fn load_instance(path: &Path) -> Result<WcgInstance, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let inst = WcgInstance::from_json_str(&text).map_err(|e| parse_error(&path.display().to_string(), e))?;
    let report = validate_instance(&inst);
    if !report.is_ok() {
        return Err(HarnessError::Instance(report));
    }
    Ok(inst)
}

impl ScenarioPlan {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Parses scenario JSON; instance paths resolve against `base_dir`.
    pub fn parse(text: &str, source: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| parse_error(source, e))?;
        let instance = match &scenario.instance {
            InstanceRef::Inline(inst) => {
                let report = validate_instance(inst);
                if !report.is_ok() {
                    return Err(HarnessError::Instance(report));
                }
                (**inst).clone()
            }
            InstanceRef::Path(p) => load_instance(&base_dir.join(p))?,
        };
        check(text, &scenario, &instance)?;
        Ok(Self::resolved(scenario, instance))
    }

    /// Builds a plan from in-memory parts, with the same checks as [`ScenarioPlan::parse`].
    pub fn from_parts(mut scenario: Scenario, instance: WcgInstance) -> Result<Self, HarnessError> {
        let report = validate_instance(&instance);
        if !report.is_ok() {
            return Err(HarnessError::Instance(report));
        }
        scenario.instance = InstanceRef::Inline(Box::new(instance.clone()));
        check("", &scenario, &instance)?;
        Ok(Self::resolved(scenario, instance))
    }

    fn resolved(mut scenario: Scenario, instance: WcgInstance) -> Self {
        scenario.instance = InstanceRef::Inline(Box::new(instance.clone()));
        let hash = scenario_hash(&scenario);
        ScenarioPlan { scenario, instance, hash }
    }

    /// Replaces the master seed and rehashes.
    pub fn with_master_seed(mut self, seed: u64) -> Self {
        self.scenario.master_seed = seed;
        self.hash = scenario_hash(&self.scenario);
        self
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.scenario.grid.seeds.seeds()
    }

    /// Engine seed of grid seed `seed`.
    pub fn engine_seed(&self, seed: u64) -> u64 {
        seed.wrapping_add(self.scenario.master_seed)
    }

    pub fn q_secondary(&self) -> LocalPolicy {
        match &self.scenario.q_secondary {
            Some(actions) => LocalPolicy { actions: actions.clone() },
            None => LocalPolicy::constant(&self.instance, 0),
        }
    }
}

pub fn scenario_hash(scenario: &Scenario) -> String {
    let bytes = serde_json::to_vec(scenario).expect("scenario serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn check(text: &str, sc: &Scenario, inst: &WcgInstance) -> Result<(), HarnessError> {
    let grid = &sc.grid;
    if grid.h.is_empty() {
        return Err(invalid(text, &["grid", "h"], "grid must not be empty"));
    }
    if grid.h.contains(&0) {
        return Err(invalid(text, &["grid", "h"], "h must be at least 1"));
    }
    if grid.horizon.is_empty() {
        return Err(invalid(text, &["grid", "horizon"], "grid must not be empty"));
    }
    if grid.seeds.seeds().is_empty() {
        return Err(invalid(text, &["grid", "seeds"], "grid must not be empty"));
    }
    if sc.metrics.is_empty() {
        return Err(invalid(text, &["metrics"], "select at least one metric"));
    }
    if sc.reference.factor == 0 || sc.reference.replications == 0 {
        return Err(invalid(text, &["reference"], "factor and replications must be positive"));
    }
    let sa = SaIndex::new(inst);
    match &sc.policy {
        PolicySpec::Local { actions } => LocalPolicy { actions: actions.clone() }
            .check(inst)
            .map_err(|m| invalid(text, &["policy", "actions"], m))?,
        PolicySpec::Randomized { alpha: Some(alpha) } => RandomizedPolicy::stationary(alpha.clone())
            .check(&sa)
            .map_err(|m| invalid(text, &["policy", "alpha"], m))?,
        PolicySpec::Ompi { epsilon, explore_floor, .. } if !(*epsilon >= 0.0 && (0.0..=1.0).contains(explore_floor)) => {
            return Err(invalid(text, &["policy"], "need epsilon ≥ 0 and explore_floor in [0, 1]"));
        }
        PolicySpec::Oalp { eps, .. } if !(*eps >= 0.0) => {
            return Err(invalid(text, &["policy", "eps"], "eps must be non-negative"));
        }
        _ => {}
    }
    for m in &sc.metrics {
        let ok = match m {
            Metric::QError => !matches!(sc.policy, PolicySpec::Oalp { .. }),
            Metric::RankingAgreement => matches!(sc.policy, PolicySpec::Ompi { .. }),
            Metric::StopTime => matches!(sc.policy, PolicySpec::Ompi { .. } | PolicySpec::Oalp { .. }),
            _ => true,
        };
        if !ok {
            return Err(invalid(
                text,
                &["metrics"],
                format!("{} is not available for policy {}", m.name(), sc.policy.name()),
            ));
        }
    }
    if let Some(actions) = &sc.q_secondary {
        LocalPolicy { actions: actions.clone() }
            .check(inst)
            .map_err(|m| invalid(text, &["q_secondary"], m))?;
    }
    Ok(())
}
