//! The robust (ε, x₀)-LP: the occupancy LP optimized jointly over kernels and rewards
//! inside ε/𝓘 boxes around an estimate.
//!
//! Rewards enter only the objective with non-negative weights, so r̄ sits at the top of its
//! box. The kernel enters the flow rows bilinearly. For a fixed kernel the problem is an
//! ordinary occupancy LP; the search climbs over kernels with Frank–Wolfe steps priced by
//! the flow duals, starts from the estimate, an optional warm start and the kernel read off
//! a time-varying relaxation, and enumerates box corners when there are few. The relaxation,
//! which lets the kernel change with t, is exact in the product variables and certifies an
//! upper bound.

use serde::{Deserialize, Serialize};

use super::occupancy::{build_lp_with, InitialCondition, ModelData, OccupancyLp};
use super::problem::{LpProblem, LpRow, RowKind};
use super::simplex::{solve_lp, LpSolution};
use super::LpError;
use crate::model::{SaIndex, WcgInstance};

/// Kernels `[i][a][s][s']`.
pub type Kernels = Vec<Vec<Vec<Vec<f64>>>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsLpConfig {
    /// Frank–Wolfe rounds per start.
    pub max_rounds: usize,
    /// Enumerate every box corner when their number is at most this.
    pub corner_limit: usize,
    /// Minimum objective gain for a step to count.
    pub improve_tol: f64,
}

impl Default for EpsLpConfig {
    fn default() -> Self {
        EpsLpConfig {
            max_rounds: 30,
            corner_limit: 4096,
            improve_tol: 1e-10,
        }
    }
}

/// Default robustness radius for OALP.
pub const DEFAULT_EPS: f64 = 0.01;

/// Problem data of an (ε, x₀)-LP.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsLp {
    inst: WcgInstance,
    sa: SaIndex,
    pub estimate: ModelData,
    pub eps: f64,
    pub initial: InitialCondition,
    pub horizon: usize,
    /// Per-ι kernel boxes over the class's states.
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    /// r̂ + ε/𝓘.
    pub rewards: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsLpSolution {
    pub lp: OccupancyLp,
    pub solution: LpSolution,
    pub kernels: Kernels,
    pub rewards: Vec<Vec<Vec<f64>>>,
    /// Best objective found with a single kernel.
    pub objective: f64,
    /// Optimum of the time-varying relaxation; never below `objective`.
    pub upper_bound: f64,
    pub lp_solves: usize,
    pub corners: usize,
}

/// Checks the estimate and sets up the boxes.
pub fn build_eps_lp(
    inst: &WcgInstance,
    estimate: &ModelData,
    eps: f64,
    initial: &InitialCondition,
    horizon: usize,
) -> Result<EpsLp, LpError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(LpError::Shape(format!("ε must be finite and non-negative, got {eps}")));
    }
    let sa = SaIndex::new(inst);
    let delta = eps / sa.total() as f64;
    let mut lower = Vec::with_capacity(sa.total());
    let mut upper = Vec::with_capacity(sa.total());
    for iota in 0..sa.total() {
        let (i, s, a) = sa.pair(iota);
        let row = &estimate.kernels[i][a][s];
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
            return Err(LpError::Unestimated(iota));
        }
        lower.push(row.iter().map(|&p| (p - delta).max(0.0)).collect());
        upper.push(row.iter().map(|&p| (p + delta).min(1.0)).collect());
    }
    let rewards = estimate
        .rewards
        .iter()
        .map(|m| m.iter().map(|row| row.iter().map(|r| r + delta).collect()).collect())
        .collect();
    // Validates the initial condition.
    build_lp_with(inst, estimate, initial, horizon)?;
    Ok(EpsLp {
        inst: inst.clone(),
        sa,
        estimate: estimate.clone(),
        eps,
        initial: initial.clone(),
        horizon,
        lower,
        upper,
        rewards,
    })
}

/// Vertex of {Σp = 1, lo ≤ p ≤ hi} maximizing g·p.
fn greedy_vertex(lo: &[f64], hi: &[f64], g: &[f64]) -> Vec<f64> {
    let mut p = lo.to_vec();
    let mut left = 1.0 - lo.iter().sum::<f64>();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
    for k in order {
        let add = (hi[k] - lo[k]).min(left).max(0.0);
        p[k] += add;
        left -= add;
    }
    p
}

/// All vertices of {Σp = 1, lo ≤ p ≤ hi}.
fn box_vertices(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let n = lo.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    if n > 12 {
        return out;
    }
    for free in 0..n {
        for mask in 0u32..(1 << (n - 1)) {
            let mut p = vec![0.0; n];
            let mut bit = 0;
            for k in (0..n).filter(|&k| k != free) {
                p[k] = if mask >> bit & 1 == 1 { hi[k] } else { lo[k] };
                bit += 1;
            }
            let rest = 1.0 - p.iter().sum::<f64>();
            if rest >= lo[free] - 1e-12 && rest <= hi[free] + 1e-12 {
                p[free] = rest.clamp(lo[free], hi[free]);
                if !out.iter().any(|q| crate::linalg::max_abs_diff(q, &p) < 1e-12) {
                    out.push(p);
                }
            }
        }
    }
    out
}

struct Evaluated {
    lp: OccupancyLp,
    solution: LpSolution,
    kernels: Kernels,
}

impl Evaluated {
    fn objective(&self) -> f64 {
        if self.solution.is_optimal() {
            self.solution.objective
        } else {
            f64::NEG_INFINITY
        }
    }
}

impl EpsLp {
    pub fn delta(&self) -> f64 {
        self.eps / self.sa.total() as f64
    }

    fn row<'a>(&self, kernels: &'a Kernels, iota: usize) -> &'a Vec<f64> {
        let (i, s, a) = self.sa.pair(iota);
        &kernels[i][a][s]
    }

    fn set_row(&self, kernels: &mut Kernels, iota: usize, row: Vec<f64>) {
        let (i, s, a) = self.sa.pair(iota);
        kernels[i][a][s] = row;
    }

    pub fn in_box(&self, kernels: &Kernels) -> bool {
        (0..self.sa.total()).all(|k| {
            let row = self.row(kernels, k);
            (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
                && row
                    .iter()
                    .zip(self.lower[k].iter().zip(&self.upper[k]))
                    .all(|(&p, (&lo, &hi))| p >= lo - 1e-12 && p <= hi + 1e-12)
        })
    }

    /// Occupancy LP with kernel `kernels` and the optimistic rewards.
    pub fn nominal(&self, kernels: &Kernels) -> Result<OccupancyLp, LpError> {
        let model = ModelData {
            kernels: kernels.clone(),
            rewards: self.rewards.clone(),
        };
        build_lp_with(&self.inst, &model, &self.initial, self.horizon)
    }

    fn evaluate(&self, kernels: Kernels) -> Result<Evaluated, LpError> {
        let lp = self.nominal(&kernels)?;
        let solution = solve_lp(&lp.problem)?;
        Ok(Evaluated { lp, solution, kernels })
    }

    /// ∂(optimum)/∂P̄(ι, s') from the flow duals.
    fn gradient(&self, ev: &Evaluated) -> Vec<Vec<f64>> {
        let states = self.sa.state_total();
        (0..self.sa.total())
            .map(|iota| {
                let (i, _, _) = self.sa.pair(iota);
                (0..self.inst.classes[i].state_count)
                    .map(|next| {
                        let label = self.sa.state_label(i, next);
                        -(0..self.horizon)
                            .map(|t| ev.solution.duals[t * states + label] * ev.solution.x[ev.lp.var(iota, t)])
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }

    /// The relaxation with product variables w_{ι,t,s'} = x_{ι,t}·P̄_t(ι, s').
    ///
    /// Returns the problem and the index of the first w variable.
    pub fn relaxation(&self) -> Result<(LpProblem, usize), LpError> {
        let base = self.nominal(&self.estimate.kernels)?;
        let flow_rows = self.sa.state_total() * self.horizon;
        let mut p = base.problem.clone();
        p.rows.drain(..flow_rows);
        let first_w = p.var_count();
        let mut w_index = vec![vec![Vec::new(); self.horizon]; self.sa.total()];
        for (iota, slots) in w_index.iter_mut().enumerate() {
            let (i, s, a) = self.sa.pair(iota);
            for (t, slot) in slots.iter_mut().enumerate() {
                for next in 0..self.inst.classes[i].state_count {
                    slot.push(p.var_count());
                    p.objective.push(0.0);
                    p.lower.push(0.0);
                    p.upper.push(1.0);
                    p.names.push(format!("w_{i}_{s}_{a}_{t}_{next}"));
                }
            }
        }
        for t in 0..self.horizon {
            for i in 0..self.inst.class_count() {
                for next in 0..self.inst.classes[i].state_count {
                    let mut coeffs: Vec<(usize, f64)> =
                        self.sa.class_range(i).map(|k| (w_index[k][t][next], 1.0)).collect();
                    coeffs.extend(self.sa.state_range(i, next).map(|k| (base.var(k, t + 1), -1.0)));
                    p.rows.push(LpRow {
                        coeffs,
                        kind: RowKind::Eq,
                        rhs: 0.0,
                        name: format!("flow_{i}_{next}_{t}"),
                    });
                }
            }
            for iota in 0..self.sa.total() {
                let x = base.var(iota, t);
                let mut coeffs: Vec<(usize, f64)> = w_index[iota][t].iter().map(|&w| (w, 1.0)).collect();
                coeffs.push((x, -1.0));
                p.rows.push(LpRow {
                    coeffs,
                    kind: RowKind::Eq,
                    rhs: 0.0,
                    name: format!("split_{iota}_{t}"),
                });
                for (next, &w) in w_index[iota][t].iter().enumerate() {
                    let (lo, hi) = (self.lower[iota][next], self.upper[iota][next]);
                    p.rows.push(LpRow {
                        coeffs: vec![(w, 1.0), (x, -hi)],
                        kind: RowKind::Le,
                        rhs: 0.0,
                        name: format!("box_hi_{iota}_{t}_{next}"),
                    });
                    if lo > 0.0 {
                        p.rows.push(LpRow {
                            coeffs: vec![(w, 1.0), (x, -lo)],
                            kind: RowKind::Ge,
                            rhs: 0.0,
                            name: format!("box_lo_{iota}_{t}_{next}"),
                        });
                    }
                }
            }
        }
        Ok((p, first_w))
    }

    /// Best single-kernel optimum found by the search, with the relaxation bound.
    pub fn solve(&self, config: &EpsLpConfig, warm: Option<&Kernels>) -> Result<EpsLpSolution, LpError> {
        let mut solves = 0;
        let mut best = self.evaluate(self.estimate.kernels.clone())?;
        solves += 1;
        if self.eps == 0.0 {
            let objective = best.objective();
            return Ok(self.finish(best, objective, solves, 0));
        }

        let (relax, first_w) = self.relaxation()?;
        let relaxed = solve_lp(&relax)?;
        solves += 1;
        let upper_bound = if relaxed.is_optimal() { relaxed.objective } else { f64::NEG_INFINITY };

        let mut starts: Vec<Kernels> = Vec::new();
        if let Some(w) = warm.filter(|w| self.in_box(w)) {
            starts.push(w.clone());
        }
        if relaxed.is_optimal() {
            starts.push(self.relaxed_kernel(&relaxed, first_w));
        }
        for k in starts {
            let ev = self.evaluate(k)?;
            solves += 1;
            if ev.objective() > best.objective() {
                best = ev;
            }
        }

        // Frank–Wolfe ascent with backtracking on the step.
        for _ in 0..config.max_rounds {
            if !best.solution.is_optimal() {
                break;
            }
            let grad = self.gradient(&best);
            let target: Vec<Vec<f64>> = (0..self.sa.total())
                .map(|k| greedy_vertex(&self.lower[k], &self.upper[k], &grad[k]))
                .collect();
            let mut moved = false;
            for step in [1.0, 0.5, 0.25, 0.125, 0.0625] {
                let mut trial = best.kernels.clone();
                for (k, v) in target.iter().enumerate() {
                    let row: Vec<f64> = self.row(&best.kernels, k).iter().zip(v).map(|(p, q)| p + step * (q - p)).collect();
                    self.set_row(&mut trial, k, row);
                }
                let ev = self.evaluate(trial)?;
                solves += 1;
                if ev.objective() > best.objective() + config.improve_tol {
                    best = ev;
                    moved = true;
                    break;
                }
            }
            if !moved {
                break;
            }
        }

        let vertices: Vec<Vec<Vec<f64>>> =
            (0..self.sa.total()).map(|k| box_vertices(&self.lower[k], &self.upper[k])).collect();
        let total = vertices
            .iter()
            .try_fold(1usize, |acc, v| acc.checked_mul(v.len().max(1)))
            .unwrap_or(usize::MAX);
        let mut corners = 0;
        if total <= config.corner_limit && vertices.iter().all(|v| !v.is_empty()) {
            let mut digit = vec![0usize; vertices.len()];
            loop {
                let mut k = self.estimate.kernels.clone();
                for (iota, &d) in digit.iter().enumerate() {
                    self.set_row(&mut k, iota, vertices[iota][d].clone());
                }
                let ev = self.evaluate(k)?;
                solves += 1;
                corners += 1;
                if ev.objective() > best.objective() + config.improve_tol {
                    best = ev;
                }
                let mut pos = 0;
                while pos < digit.len() {
                    digit[pos] += 1;
                    if digit[pos] < vertices[pos].len() {
                        break;
                    }
                    digit[pos] = 0;
                    pos += 1;
                }
                if pos == digit.len() {
                    break;
                }
            }
        }
        let objective = best.objective();
        Ok(self.finish(best, upper_bound.max(objective), solves, corners))
    }

    fn finish(&self, ev: Evaluated, upper_bound: f64, lp_solves: usize, corners: usize) -> EpsLpSolution {
        EpsLpSolution {
            objective: ev.objective(),
            lp: ev.lp,
            solution: ev.solution,
            kernels: ev.kernels,
            rewards: self.rewards.clone(),
            upper_bound,
            lp_solves,
            corners,
        }
    }

    /// Time-averaged kernel Σ_t w / Σ_t x of a relaxation solution.
    fn relaxed_kernel(&self, sol: &LpSolution, first_w: usize) -> Kernels {
        let mut k = self.estimate.kernels.clone();
        let mut w = first_w;
        for iota in 0..self.sa.total() {
            let (i, _, _) = self.sa.pair(iota);
            let n = self.inst.classes[i].state_count;
            let mut mass = vec![0.0; n];
            let mut x = 0.0;
            for t in 0..self.horizon {
                x += sol.x[t * self.sa.total() + iota].max(0.0);
                for m in mass.iter_mut() {
                    *m += sol.x[w].max(0.0);
                    w += 1;
                }
            }
            if x > 1e-12 {
                let row: Vec<f64> = mass.iter().map(|m| m / x).collect();
                let clipped: Vec<f64> = row
                    .iter()
                    .zip(self.lower[iota].iter().zip(&self.upper[iota]))
                    .map(|(&p, (&lo, &hi))| p.clamp(lo, hi))
                    .collect();
                // Clipping can leave a tiny mass defect; a greedy vertex that prefers the
                // clipped entries puts the row back on the simplex.
                let fixed = if (clipped.iter().sum::<f64>() - 1.0).abs() <= 1e-12 {
                    clipped
                } else {
                    greedy_vertex(&self.lower[iota], &self.upper[iota], &clipped)
                };
                self.set_row(&mut k, iota, fixed);
            }
        }
        k
    }
}

/// Solves for every ε in ascending order, warm-starting each from the previous kernel.
///
/// Each box contains the previous one, so the optima never decrease along the path.
pub fn solve_eps_path(
    inst: &WcgInstance,
    estimate: &ModelData,
    eps: &[f64],
    initial: &InitialCondition,
    horizon: usize,
    config: &EpsLpConfig,
) -> Result<Vec<(f64, EpsLpSolution)>, LpError> {
    let mut order: Vec<f64> = eps.to_vec();
    order.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, EpsLpSolution)> = Vec::with_capacity(order.len());
    for e in order {
        let problem = build_eps_lp(inst, estimate, e, initial, horizon)?;
        let warm = out.last().map(|(_, s)| s.kernels.clone());
        let sol = problem.solve(config, warm.as_ref())?;
        out.push((e, sol));
    }
    Ok(out)
}
