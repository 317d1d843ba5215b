use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Sampling law of a random reward around its mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardLaw {
    Deterministic,
    /// Uniform on `[mean - half_width, mean + half_width]`.
    Uniform { half_width: f64 },
    /// Normal with `std_dev`, conditioned on `|R - mean| <= half_width`.
    TruncatedNormal { std_dev: f64, half_width: f64 },
}

impl RewardLaw {
    pub fn sample<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> f64 {
        match *self {
            RewardLaw::Deterministic => mean,
            RewardLaw::Uniform { half_width } => {
                if half_width == 0.0 {
                    mean
                } else {
                    mean + half_width * (2.0 * rng.random::<f64>() - 1.0)
                }
            }
            RewardLaw::TruncatedNormal {
                std_dev,
                half_width,
            } => {
                let normal = Normal::new(0.0, std_dev).expect("validated std_dev");
                loop {
                    let x = normal.sample(rng);
                    if x.abs() <= half_width {
                        return mean + x;
                    }
                }
            }
        }
    }

    /// Largest possible |R − mean|.
    pub fn spread(&self) -> f64 {
        match *self {
            RewardLaw::Deterministic => 0.0,
            RewardLaw::Uniform { half_width } => half_width,
            RewardLaw::TruncatedNormal { half_width, .. } => half_width,
        }
    }

    pub(crate) fn problems(&self) -> Option<String> {
        match *self {
            RewardLaw::Deterministic => None,
            RewardLaw::Uniform { half_width } => {
                (!(half_width.is_finite() && half_width >= 0.0)).then(|| "half_width must be finite and >= 0".into())
            }
            RewardLaw::TruncatedNormal {
                std_dev,
                half_width,
            } => {
                if !(std_dev.is_finite() && std_dev > 0.0) {
                    Some("std_dev must be finite and > 0".into())
                } else if !(half_width.is_finite() && half_width > 0.0) {
                    Some("half_width must be finite and > 0".into())
                } else {
                    None
                }
            }
        }
    }
}

/// One law for every SA pair of a class, or a full `[state][action]` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardLawSpec {
    Shared(RewardLaw),
    PerPair(Vec<Vec<RewardLaw>>),
}

impl Default for RewardLawSpec {
    fn default() -> Self {
        RewardLawSpec::Shared(RewardLaw::Deterministic)
    }
}

impl RewardLawSpec {
    pub fn law(&self, s: usize, a: usize) -> &RewardLaw {
        match self {
            RewardLawSpec::Shared(law) => law,
            RewardLawSpec::PerPair(table) => &table[s][a],
        }
    }
}

/// A gang of stochastically identical arms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditClass {
    pub state_count: usize,
    pub action_count: usize,
    /// `kernels[a][s][s']`.
    pub kernels: Vec<Vec<Vec<f64>>>,
    /// `mean_rewards[s][a]`.
    pub mean_rewards: Vec<Vec<f64>>,
    #[serde(default)]
    pub reward_law: RewardLawSpec,
    pub ergodic_state: usize,
}

impl BanditClass {
    #[inline]
    pub fn p(&self, s: usize, a: usize, next: usize) -> f64 {
        self.kernels[a][s][next]
    }

    #[inline]
    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.mean_rewards[s][a]
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        &self.kernels[a][s]
    }

    pub fn law(&self, s: usize, a: usize) -> &RewardLaw {
        self.reward_law.law(s, a)
    }

    /// R_max: a bound on every |R| this class can emit.
    pub fn reward_bound(&self) -> f64 {
        let mut bound: f64 = 0.0;
        for s in 0..self.state_count {
            for a in 0..self.action_count {
                bound = bound.max(self.r(s, a).abs() + self.law(s, a).spread());
            }
        }
        bound
    }

    /// Kernel of the chain induced by a deterministic action per state.
    pub fn policy_kernel(&self, actions: &[usize]) -> Vec<Vec<f64>> {
        (0..self.state_count)
            .map(|s| self.kernels[actions[s]][s].clone())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Σ f − h·bound = 0.
    Equality,
    /// Σ f − h·bound ≤ 0.
    Inequality,
}

/// One weakly coupling constraint: Σ_{i,n} f_i(s_{i,n}, a_{i,n}) (= or ≤) h·bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub mode: ConstraintMode,
    /// `costs[i][s][a]`.
    pub costs: Vec<Vec<Vec<f64>>>,
    /// Right-hand side per unit of scale; the live system uses `h * bound`.
    #[serde(default)]
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    /// Marks a single budget constraint whose costs depend on the action label only
    /// and increase strictly with it.
    #[serde(default)]
    pub budget_label: bool,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Per-label costs f_i(·) of class `i` under the budget form.
    pub fn label_costs(&self, i: usize) -> Option<Vec<f64>> {
        if !self.budget_label || self.constraints.len() != 1 {
            return None;
        }
        self.constraints[0].costs.get(i).and_then(|m| m.first().cloned())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(usize),
    Unbounded,
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon::Unbounded
    }
}

fn default_discount() -> f64 {
    1.0
}

fn default_scale() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WcgInstance {
    pub classes: Vec<BanditClass>,
    pub base_counts: Vec<usize>,
    #[serde(default = "default_scale")]
    pub scale: usize,
    #[serde(default)]
    pub constraints: ConstraintSet,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default = "default_discount")]
    pub discount: f64,
    /// Per-class initial state distribution; arms are placed by largest remainder.
    /// Defaults to every arm in its class's ergodic state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_distribution: Option<Vec<Vec<f64>>>,
}

impl WcgInstance {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// N_i = h·N_i⁰.
    pub fn arm_count(&self, i: usize) -> usize {
        self.scale * self.base_counts[i]
    }

    pub fn total_arms(&self) -> usize {
        (0..self.classes.len()).map(|i| self.arm_count(i)).sum()
    }

    pub fn total_base(&self) -> usize {
        self.base_counts.iter().sum()
    }

    /// First global arm index of each class, plus the total at the end.
    pub fn arm_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.classes.len() + 1);
        let mut acc = 0;
        out.push(0);
        for i in 0..self.classes.len() {
            acc += self.arm_count(i);
            out.push(acc);
        }
        out
    }

    /// Class of every global arm index.
    pub fn arm_classes(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.total_arms());
        for i in 0..self.classes.len() {
            out.extend(std::iter::repeat_n(i, self.arm_count(i)));
        }
        out
    }

    pub fn with_scale(&self, h: usize) -> WcgInstance {
        WcgInstance {
            scale: h,
            ..self.clone()
        }
    }

    pub fn reward_bound(&self) -> f64 {
        self.classes
            .iter()
            .map(BanditClass::reward_bound)
            .fold(0.0, f64::max)
    }

    /// Initial state of every arm.
    pub fn initial_states(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.total_arms());
        for (i, cls) in self.classes.iter().enumerate() {
            let n = self.arm_count(i);
            match self.initial_distribution.as_ref().and_then(|d| d.get(i)) {
                Some(dist) => {
                    let counts = largest_remainder(dist, n);
                    for (s, &c) in counts.iter().enumerate() {
                        out.extend(std::iter::repeat_n(s, c));
                    }
                }
                None => out.extend(std::iter::repeat_n(cls.ergodic_state, n)),
            }
        }
        out
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }
}

/// Integer counts summing to `n` that track `weights · n`, ties to the lower index.
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return vec![0; weights.len()];
    }
    let targets: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = targets.iter().map(|t| t.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = targets[a] - targets[a].floor();
        let fb = targets[b] - targets[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn largest_remainder_sums_to_n() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 4), vec![2, 2]);
        assert_eq!(largest_remainder(&[0.34, 0.33, 0.33], 10), vec![4, 3, 3]);
        assert_eq!(largest_remainder(&[1.0, 0.0], 7), vec![7, 0]);
    }

    #[test]
    fn reward_samples_stay_in_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let laws = [
            RewardLaw::Uniform { half_width: 0.2 },
            RewardLaw::TruncatedNormal {
                std_dev: 0.3,
                half_width: 0.25,
            },
        ];
        for law in laws {
            let mut sum = 0.0;
            for _ in 0..20_000 {
                let x = law.sample(1.0, &mut rng);
                assert!((x - 1.0).abs() <= law.spread() + 1e-15);
                sum += x;
            }
            assert!((sum / 20_000.0 - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn law_spec_parses_both_shapes() {
        let shared: RewardLawSpec = serde_json::from_str(r#"{"kind":"uniform","half_width":0.1}"#).unwrap();
        assert_eq!(*shared.law(3, 1), RewardLaw::Uniform { half_width: 0.1 });
        let table: RewardLawSpec =
            serde_json::from_str(r#"[[{"kind":"deterministic"},{"kind":"uniform","half_width":0.5}]]"#).unwrap();
        assert_eq!(table.law(0, 1).spread(), 0.5);
    }
}
