//! The finite-horizon occupancy LP of the relaxed problem.

use serde::{Deserialize, Serialize};

use super::problem::{LpProblem, LpRow, RowKind};
use super::simplex::LpSolution;
use super::LpError;
use crate::model::{ConstraintMode, RandomizedPolicy, SaIndex, WcgInstance};

/// Kernels `[i][a][s][s']` and mean rewards `[i][s][a]` the LP is built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelData {
    pub kernels: Vec<Vec<Vec<Vec<f64>>>>,
    pub rewards: Vec<Vec<Vec<f64>>>,
}

impl ModelData {
    pub fn from_instance(inst: &WcgInstance) -> Self {
        ModelData {
            kernels: inst.classes.iter().map(|c| c.kernels.clone()).collect(),
            rewards: inst.classes.iter().map(|c| c.mean_rewards.clone()).collect(),
        }
    }

    pub fn p(&self, sa: &SaIndex, iota: usize, next: usize) -> f64 {
        let (i, s, a) = sa.pair(iota);
        self.kernels[i][a][s][next]
    }

    pub fn r(&self, sa: &SaIndex, iota: usize) -> f64 {
        let (i, s, a) = sa.pair(iota);
        self.rewards[i][s][a]
    }
}

/// How the LP is anchored at t = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// x₀ over SA labels; the t = 0 split across actions is fixed.
    Occupancy(Vec<f64>),
    /// Per-(class, state) marginals, each class summing to 1; the t = 0 split is free.
    States(Vec<f64>),
}

/// The flow matrices: 𝒫 holds p(ι, i', s'), Ĩ marks the state of each SA label.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMatrices {
    /// 𝓘 × Σ|S_i|.
    pub transition: Vec<Vec<f64>>,
    /// 𝓘 × Σ|S_i| with entries in {0, 1}.
    pub indicator: Vec<Vec<u8>>,
}

impl FlowMatrices {
    pub fn new(sa: &SaIndex, model: &ModelData) -> Self {
        let offsets = sa.class_state_offsets();
        let mut transition = vec![vec![0.0; sa.state_total()]; sa.total()];
        let mut indicator = vec![vec![0u8; sa.state_total()]; sa.total()];
        for iota in 0..sa.total() {
            let (i, s, a) = sa.pair(iota);
            for (next, &p) in model.kernels[i][a][s].iter().enumerate() {
                transition[iota][offsets[i] + next] = p;
            }
            indicator[iota][sa.state_of(iota)] = 1;
        }
        FlowMatrices { transition, indicator }
    }
}

/// Diagonal maps 𝒳, 𝒵 between SA occupancy z and LP marginals x, and the aggregation 𝒰.
#[derive(Clone, Debug, PartialEq)]
pub struct ConversionMaps {
    /// Diagonal of 𝒳: ΣN⁰ / N⁰_{i_ι}.
    pub x_per_z: Vec<f64>,
    /// (class, state) label of each SA label; the sparsity pattern of 𝒰.
    pub state_of: Vec<usize>,
    /// ΣN⁰ / N⁰_i per (class, state) label.
    state_scale: Vec<f64>,
}

impl ConversionMaps {
    pub fn new(inst: &WcgInstance, sa: &SaIndex) -> Self {
        let total = inst.total_base() as f64;
        let x_per_z = (0..sa.total())
            .map(|k| total / inst.base_counts[sa.pair(k).0] as f64)
            .collect();
        let mut state_scale = vec![0.0; sa.state_total()];
        for (i, cls) in inst.classes.iter().enumerate() {
            for s in 0..cls.state_count {
                state_scale[sa.state_label(i, s)] = total / inst.base_counts[i] as f64;
            }
        }
        ConversionMaps {
            x_per_z,
            state_of: (0..sa.total()).map(|k| sa.state_of(k)).collect(),
            state_scale,
        }
    }

    /// x = 𝒳 z.
    pub fn to_x(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.x_per_z).map(|(v, m)| v * m).collect()
    }

    /// z = 𝒵 x.
    pub fn to_z(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.x_per_z).map(|(v, m)| v / m).collect()
    }

    /// Υ = 𝒰 z: SA occupancy summed over actions.
    pub fn upsilon(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_scale.len()];
        for (k, v) in z.iter().enumerate() {
            out[self.state_of[k]] += v;
        }
        out
    }

    /// Per-class state marginals from the fraction of all arms in each (class, state).
    pub fn class_marginals(&self, upsilon: &[f64]) -> Vec<f64> {
        upsilon.iter().zip(&self.state_scale).map(|(v, m)| v * m).collect()
    }
}

/// An occupancy LP together with the bookkeeping needed to read its solution.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyLp {
    pub problem: LpProblem,
    /// Last epoch T; variables cover t = 0, …, T.
    pub horizon: usize,
    pub sa_total: usize,
    pub initial: InitialCondition,
    pub flow: FlowMatrices,
}

impl OccupancyLp {
    pub fn var(&self, iota: usize, t: usize) -> usize {
        t * self.sa_total + iota
    }

    /// x*_t from a solution, with round-off below zero clipped.
    pub fn x_at(&self, sol: &LpSolution, t: usize) -> Vec<f64> {
        (0..self.sa_total).map(|k| sol.x[self.var(k, t)].max(0.0)).collect()
    }
}

fn check_initial(inst: &WcgInstance, sa: &SaIndex, init: &InitialCondition) -> Result<(), LpError> {
    let (values, per_state) = match init {
        InitialCondition::Occupancy(x) => (x, false),
        InitialCondition::States(m) => (m, true),
    };
    let want = if per_state { sa.state_total() } else { sa.total() };
    if values.len() != want {
        return Err(LpError::BadInitial(format!("{} entries, expected {want}", values.len())));
    }
    if let Some(k) = values.iter().position(|v| !(0.0..=1.0 + 1e-12).contains(v)) {
        return Err(LpError::BadInitial(format!("entry {k} = {} outside [0, 1]", values[k])));
    }
    for i in 0..inst.class_count() {
        let sum: f64 = if per_state {
            (0..inst.classes[i].state_count).map(|s| values[sa.state_label(i, s)]).sum()
        } else {
            sa.class_range(i).map(|k| values[k]).sum()
        };
        if (sum - 1.0).abs() > 1e-9 {
            return Err(LpError::BadInitial(format!("class {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// Occupancy LP under the instance's own model.
pub fn build_lp(inst: &WcgInstance, init: &InitialCondition, horizon: usize) -> Result<OccupancyLp, LpError> {
    build_lp_with(inst, &ModelData::from_instance(inst), init, horizon)
}

/// Occupancy LP anchored at the per-class state marginals of a concrete arm configuration.
pub fn build_lp_from_states(inst: &WcgInstance, states: &[usize], horizon: usize) -> Result<OccupancyLp, LpError> {
    build_lp(inst, &states_condition(inst, states), horizon)
}

/// Per-class state marginals of an arm configuration.
pub fn states_condition(inst: &WcgInstance, states: &[usize]) -> InitialCondition {
    let sa = SaIndex::new(inst);
    let mut counts = vec![0usize; sa.state_total()];
    let mut size = vec![0usize; sa.state_total()];
    for (&i, &s) in inst.arm_classes().iter().zip(states) {
        counts[sa.state_label(i, s)] += 1;
    }
    for (i, cls) in inst.classes.iter().enumerate() {
        for s in 0..cls.state_count {
            size[sa.state_label(i, s)] = inst.arm_count(i);
        }
    }
    // Divide once so full classes give exactly 1.
    InitialCondition::States(counts.iter().zip(&size).map(|(&c, &n)| c as f64 / n as f64).collect())
}

/// Occupancy LP for arbitrary kernels and mean rewards.
///
/// Objective Σ_t β^{t+1} Σ_ι N⁰ r x_{ι,t}, matching how episodes weight rewards; rows are
/// flow (per state label and t < T), class normalization (per class and t), coupling
/// (per constraint and t) and, for [`InitialCondition::States`], the t = 0 marginals.
pub fn build_lp_with(
    inst: &WcgInstance,
    model: &ModelData,
    init: &InitialCondition,
    horizon: usize,
) -> Result<OccupancyLp, LpError> {
    let sa = SaIndex::new(inst);
    check_initial(inst, &sa, init)?;
    let flow = FlowMatrices::new(&sa, model);
    let n_sa = sa.total();
    let epochs = horizon + 1;
    let var = |iota: usize, t: usize| t * n_sa + iota;
    let mut p = LpProblem::new(n_sa * epochs);
    p.upper = vec![1.0; n_sa * epochs];
    let mut weight = 1.0;
    for t in 0..epochs {
        weight *= inst.discount;
        for iota in 0..n_sa {
            let (i, s, a) = sa.pair(iota);
            p.objective[var(iota, t)] = weight * inst.base_counts[i] as f64 * model.r(&sa, iota);
            p.names[var(iota, t)] = format!("x_{i}_{s}_{a}_{t}");
        }
    }

    for t in 0..horizon {
        for i in 0..inst.class_count() {
            for next in 0..inst.classes[i].state_count {
                let col = sa.state_label(i, next);
                let mut coeffs: Vec<(usize, f64)> = sa
                    .class_range(i)
                    .filter(|&k| flow.transition[k][col] != 0.0)
                    .map(|k| (var(k, t), flow.transition[k][col]))
                    .collect();
                coeffs.extend(sa.state_range(i, next).map(|k| (var(k, t + 1), -1.0)));
                p.rows.push(LpRow {
                    coeffs,
                    kind: RowKind::Eq,
                    rhs: 0.0,
                    name: format!("flow_{i}_{next}_{t}"),
                });
            }
        }
    }
    for t in 0..epochs {
        for i in 0..inst.class_count() {
            p.rows.push(LpRow {
                coeffs: sa.class_range(i).map(|k| (var(k, t), 1.0)).collect(),
                kind: RowKind::Eq,
                rhs: 1.0,
                name: format!("norm_{i}_{t}"),
            });
        }
    }
    for t in 0..epochs {
        for (l, c) in inst.constraints.constraints.iter().enumerate() {
            let coeffs = (0..n_sa)
                .filter_map(|k| {
                    let (i, s, a) = sa.pair(k);
                    let f = inst.base_counts[i] as f64 * c.costs[i][s][a];
                    (f != 0.0).then_some((var(k, t), f))
                })
                .collect();
            p.rows.push(LpRow {
                coeffs,
                kind: match c.mode {
                    ConstraintMode::Equality => RowKind::Eq,
                    ConstraintMode::Inequality => RowKind::Le,
                },
                rhs: c.bound,
                name: format!("couple_{l}_{t}"),
            });
        }
    }
    match init {
        InitialCondition::Occupancy(x0) => {
            for (k, &v) in x0.iter().enumerate() {
                p.lower[var(k, 0)] = v;
                p.upper[var(k, 0)] = v;
            }
        }
        InitialCondition::States(m) => {
            for (g, &v) in m.iter().enumerate() {
                p.rows.push(LpRow {
                    coeffs: (0..n_sa).filter(|&k| sa.state_of(k) == g).map(|k| (var(k, 0), 1.0)).collect(),
                    kind: RowKind::Eq,
                    rhs: v,
                    name: format!("init_{g}"),
                });
            }
        }
    }
    Ok(OccupancyLp {
        problem: p,
        horizon,
        sa_total: n_sa,
        initial: init.clone(),
        flow,
    })
}

/// α*_ι(t) = x*_{ι,t} / Σ_{same (i,s)} x*; states without mass get the uniform split.
pub fn policy_from_x(lp: &OccupancyLp, sol: &LpSolution, sa: &SaIndex) -> RandomizedPolicy {
    let alpha = (0..=lp.horizon)
        .map(|t| {
            let x = lp.x_at(sol, t);
            let mut alpha = vec![0.0; sa.total()];
            for g in 0..sa.state_total() {
                let labels: Vec<usize> = (0..sa.total()).filter(|&k| sa.state_of(k) == g).collect();
                let mass: f64 = labels.iter().map(|&k| x[k]).sum();
                for &k in &labels {
                    alpha[k] = if mass > 0.0 { x[k] / mass } else { 1.0 / labels.len() as f64 };
                }
            }
            alpha
        })
        .collect();
    RandomizedPolicy { alpha }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::expected_occupancy;
    use crate::fixtures;
    use crate::lp::{solve_lp, solve_lp_exact, LpStatus};

    #[test]
    fn single_pair_objective_is_forced() {
        let inst = fixtures::single_pair(0.7);
        let init = InitialCondition::Occupancy(vec![1.0]);
        for t in [0, 1, 4] {
            let lp = build_lp(&inst, &init, t).unwrap();
            let sol = solve_lp_exact(&lp.problem).unwrap();
            assert!(sol.x.iter().all(|&v| v == 1.0));
            assert!((sol.objective - (t + 1) as f64 * 2.0 * 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn two_state_tallies() {
        let inst = fixtures::two_state();
        let lp = build_lp(&inst, &InitialCondition::Occupancy(vec![0.7, 0.3, 0.0, 0.0]), 2).unwrap();
        // 𝓘(T+1) variables; Σ|S|·T + I(T+1) + L(T+1) rows.
        assert_eq!(lp.problem.var_count(), 4 * 3);
        assert_eq!(lp.problem.row_count(), 2 * 2 + 3 + 3);
        assert_eq!(lp.flow.transition.len(), 4);
        assert!(lp.flow.indicator.iter().flatten().all(|&v| v <= 1));
        let states = build_lp(&inst, &InitialCondition::States(vec![1.0, 0.0]), 2).unwrap();
        assert_eq!(states.problem.row_count(), 10 + 2);
    }

    #[test]
    fn two_state_matrix_by_hand() {
        let inst = fixtures::two_state();
        let lp = build_lp(&inst, &InitialCondition::Occupancy(vec![1.0, 0.0, 0.0, 0.0]), 1).unwrap();
        // Columns: x_{(0,0),0}, x_{(0,1),0}, x_{(1,0),0}, x_{(1,1),0}, then the same at t = 1.
        let want = vec![
            vec![0.7, 0.85, 0.5, 0.6, -1.0, -1.0, 0.0, 0.0],
            vec![0.3, 0.15, 0.5, 0.4, 0.0, 0.0, -1.0, -1.0],
            vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
            vec![0.0, 100.0, 0.0, 100.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 100.0, 0.0, 100.0],
        ];
        assert_eq!(lp.problem.dense_rows(), want);
        let kinds: Vec<RowKind> = lp.problem.rows.iter().map(|r| r.kind).collect();
        use RowKind::*;
        assert_eq!(kinds, vec![Eq, Eq, Eq, Eq, Le, Le]);
        let rhs: Vec<f64> = lp.problem.rows.iter().map(|r| r.rhs).collect();
        assert_eq!(rhs, vec![0.0, 0.0, 1.0, 1.0, 30.0, 30.0]);
        assert_eq!(
            lp.problem.objective,
            vec![10.0, 50.0, 30.0, 100.0, 10.0, 50.0, 30.0, 100.0]
        );
        assert_eq!(&lp.problem.lower[..4], &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(&lp.problem.upper[..4], &[1.0, 0.0, 0.0, 0.0]);
    }

    /// Enumerates every t = 1 split: the budget leaves x_{(s,1),1} on a segment, so the
    /// optimum sits at one of finitely many breakpoints.
    #[test]
    fn two_state_t1_matches_vertex_enumeration() {
        let inst = fixtures::two_state();
        let lp = build_lp(&inst, &InitialCondition::States(vec![1.0, 0.0]), 1).unwrap();
        let sol = solve_lp_exact(&lp.problem).unwrap();
        let c = &inst.classes[0];
        let r = |s: usize, a: usize| 100.0 * c.r(s, a);
        let mut best = f64::NEG_INFINITY;
        // t = 0: all mass in state 0, active share u0 ∈ {0, 0.3}.
        for u0 in [0.0, 0.3] {
            let m1 = (1.0 - u0) * 0.3 + u0 * 0.15;
            let m0 = 1.0 - m1;
            let reward0 = (1.0 - u0) * r(0, 0) + u0 * r(0, 1);
            // t = 1: a0 + a1 ≤ 0.3 with a_s ≤ m_s; vertices of the polytope.
            let mut cands = vec![(0.0, 0.0), (m0.min(0.3), 0.0), (0.0, m1.min(0.3))];
            cands.push((m0.min(0.3 - m1.min(0.3)), m1.min(0.3)));
            cands.push((m0.min(0.3), (0.3 - m0.min(0.3)).min(m1)));
            for (a0, a1) in cands {
                let v = reward0 + (m0 - a0) * r(0, 0) + a0 * r(0, 1) + (m1 - a1) * r(1, 0) + a1 * r(1, 1);
                best = best.max(v);
            }
        }
        assert!((sol.objective - best).abs() < 1e-9, "{} vs {best}", sol.objective);
    }

    #[test]
    fn equality_with_positive_active_cost_kills_activity() {
        let mut inst = fixtures::two_state();
        inst.constraints.constraints[0].mode = ConstraintMode::Equality;
        inst.constraints.constraints[0].bound = 0.0;
        let lp = build_lp(&inst, &InitialCondition::States(vec![0.5, 0.5]), 3).unwrap();
        let sol = solve_lp(&lp.problem).unwrap();
        for t in 0..=3 {
            let x = lp.x_at(&sol, t);
            assert!(x[1].abs() < 1e-12 && x[3].abs() < 1e-12);
        }
    }

    #[test]
    fn states_mode_is_exactly_feasible() {
        // Marginals summed arm by arm used to land at 1 + 7e-16, which exact arithmetic rejects.
        let inst = fixtures::two_state();
        let InitialCondition::States(m) = states_condition(&inst, &inst.initial_states()) else {
            unreachable!()
        };
        assert_eq!(m, vec![1.0, 0.0]);
        let lp = build_lp_from_states(&inst, &inst.initial_states(), 3).unwrap();
        let exact = solve_lp_exact(&lp.problem).unwrap();
        let float = solve_lp(&lp.problem).unwrap();
        assert_eq!(exact.status, LpStatus::Optimal);
        assert!((exact.objective - float.objective).abs() < 1e-9);
    }

    #[test]
    fn rejects_inconsistent_initial() {
        let inst = fixtures::two_state();
        let bad = build_lp(&inst, &InitialCondition::Occupancy(vec![0.5, 0.2, 0.0, 0.0]), 2);
        assert!(matches!(bad, Err(LpError::BadInitial(_))));
        let short = build_lp(&inst, &InitialCondition::States(vec![1.0]), 2);
        assert!(matches!(short, Err(LpError::BadInitial(_))));
    }

    #[test]
    fn policy_point_mass_and_uniform_branch() {
        let inst = fixtures::two_state();
        let sa = SaIndex::new(&inst);
        let lp = build_lp(&inst, &InitialCondition::States(vec![1.0, 0.0]), 0).unwrap();
        let sol = solve_lp(&lp.problem).unwrap();
        let pol = policy_from_x(&lp, &sol, &sa);
        // State 1 is empty at t = 0.
        assert_eq!(&pol.at(0)[2..], &[0.5, 0.5]);
        assert!((pol.at(0)[0] + pol.at(0)[1] - 1.0).abs() < 1e-12);
        let x = LpSolution {
            x: vec![1.0, 0.0, 0.0, 0.0],
            ..sol
        };
        let pm = policy_from_x(&lp, &x, &sa);
        assert!(pm.at(0).iter().all(|&a| a == 0.0 || a == 1.0 || a == 0.5));
    }

    #[test]
    fn policy_round_trip_through_forward_pass() {
        for inst in [fixtures::two_state(), fixtures::mixed_two_class(), fixtures::three_gear()] {
            let sa = SaIndex::new(&inst);
            let lp = build_lp_from_states(&inst, &inst.initial_states(), 6).unwrap();
            let sol = solve_lp(&lp.problem).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!(lp.problem.max_violation(&sol.x) < 1e-8);
            let pol = policy_from_x(&lp, &sol, &sa);
            pol.check(&sa).unwrap();
            let maps = ConversionMaps::new(&inst, &sa);
            let z0 = maps.to_z(&lp.x_at(&sol, 0));
            let z = expected_occupancy(&inst, &sa, &pol, &z0, 7).unwrap();
            for (t, zt) in z.iter().enumerate() {
                let x = maps.to_x(zt);
                let d = crate::linalg::max_abs_diff(&x, &lp.x_at(&sol, t));
                assert!(d < 1e-8, "t={t}: {d}");
            }
        }
    }

    #[test]
    fn conversion_maps_invert() {
        let inst = fixtures::mixed_two_class();
        let sa = SaIndex::new(&inst);
        let maps = ConversionMaps::new(&inst, &sa);
        let z: Vec<f64> = (0..sa.total()).map(|k| (k + 1) as f64 / 100.0).collect();
        let back = maps.to_z(&maps.to_x(&z));
        assert!(crate::linalg::max_abs_diff(&back, &z) < 1e-15);
        let up = maps.upsilon(&z);
        assert_eq!(up.len(), sa.state_total());
        assert!((up.iter().sum::<f64>() - z.iter().sum::<f64>()).abs() < 1e-15);
    }
}
