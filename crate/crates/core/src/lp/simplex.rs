//! Dense two-phase primal simplex over a generic ordered field.
//!
//! Every row gets an artificial column, so the artificial block of the final tableau is
//! B⁻¹ and the row duals fall out of its reduced costs.

use std::fmt::Debug;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::problem::{LpProblem, RowKind};
use super::LpError;

/// Arithmetic the tableau needs. `positive`/`negative` apply the field's tolerance.
pub trait Field: Clone + Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn over(&self, o: &Self) -> Self;
    fn positive(&self) -> bool;
    fn negative(&self) -> bool;
    /// Exact comparison, used by the ratio test.
    fn less(&self, o: &Self) -> bool;
    fn is_exact_zero(&self) -> bool;
    /// Drops round-off; identity for exact fields.
    fn clean(self) -> Self {
        self
    }
    fn is_zero(&self) -> bool {
        !self.positive() && !self.negative()
    }
    /// Slack the ratio test grants each right-hand side; zero for exact fields.
    fn feasibility_tol() -> Self {
        Self::zero()
    }
    /// Right-hand-side shift for row `r` in shifting round `round` when a degenerate run is
    /// broken by perturbation. `None` makes the solver fall back to Bland's rule.
    fn shift(_r: usize, _round: usize) -> Option<Self> {
        None
    }
}

/// Pivot and feasibility tolerance of the floating path.
pub const PIVOT_TOL: f64 = 1e-9;

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn over(&self, o: &Self) -> Self {
        self / o
    }
    fn positive(&self) -> bool {
        *self > PIVOT_TOL
    }
    fn negative(&self) -> bool {
        *self < -PIVOT_TOL
    }
    fn less(&self, o: &Self) -> bool {
        self < o
    }
    fn is_exact_zero(&self) -> bool {
        *self == 0.0
    }
    fn feasibility_tol() -> Self {
        PIVOT_TOL
    }
    fn shift(r: usize, round: usize) -> Option<Self> {
        // Distinct per row so that shifted levels do not tie again.
        let k = (r as u64).wrapping_mul(2_654_435_761).wrapping_add(round as u64 * 40_503) % 1000;
        Some(1e-7 * (1.0 + k as f64 / 1000.0))
    }
    fn clean(self) -> Self {
        if self.abs() < 1e-13 {
            0.0
        } else {
            self
        }
    }
}

/// Reads a finite f64 through its shortest decimal form, so 0.7 becomes 7/10.
pub fn decimal_rational(v: f64) -> BigRational {
    assert!(v.is_finite(), "LP data must be finite, got {v}");
    let text = format!("{v}");
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits = BigInt::from_str(&format!("{int}{frac}")).expect("decimal digits");
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(digits, denom);
    if neg {
        -r
    } else {
        r
    }
}

impl Field for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn from_f64(v: f64) -> Self {
        decimal_rational(v)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn over(&self, o: &Self) -> Self {
        self / o
    }
    fn positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn less(&self, o: &Self) -> bool {
        self < o
    }
    fn is_exact_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values; empty unless optimal.
    pub x: Vec<f64>,
    /// Objective value; −∞ when infeasible, +∞ when unbounded.
    pub objective: f64,
    /// Original variables that are basic at the optimum.
    pub basis: Vec<usize>,
    /// One dual per original row; empty unless optimal.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    fn status_only(status: LpStatus, pivots: usize) -> Self {
        LpSolution {
            status,
            x: Vec::new(),
            objective: if status == LpStatus::Infeasible {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            },
            basis: Vec::new(),
            duals: Vec::new(),
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Floating-point solve with tolerance [`PIVOT_TOL`].
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_in::<f64>(problem)
}

/// Exact solve in rational arithmetic.
pub fn solve_lp_exact(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_in::<BigRational>(problem)
}

/// How an original variable is recovered from standard-form columns.
struct VarMap<F> {
    shift: F,
    cols: Vec<(usize, bool)>,
}

struct Tableau<F> {
    rows: Vec<Vec<F>>,
    obj: Vec<F>,
    basis: Vec<usize>,
    /// First artificial column; artificials never re-enter.
    art: usize,
    pivots: usize,
    bland: bool,
    degenerate_run: usize,
    /// Right-hand side of the initial tableau, for undoing shifts.
    base_rhs: Vec<F>,
    shifted: bool,
    shift_rounds: usize,
}

const DEGENERATE_SWITCH: usize = 50;
const MAX_SHIFT_ROUNDS: usize = 20;

impl<F: Field> Tableau<F> {
    fn rhs(&self) -> usize {
        self.obj.len() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        let row: Vec<F> = self.rows[r].iter().map(|v| v.over(&p).clean()).collect();
        for (k, other) in self.rows.iter_mut().enumerate() {
            if k == r || other[c].is_exact_zero() {
                continue;
            }
            let f = other[c].clone();
            for (v, w) in other.iter_mut().zip(&row) {
                if !w.is_exact_zero() {
                    *v = v.minus(&f.times(w)).clean();
                }
            }
        }
        if !self.obj[c].is_exact_zero() {
            let f = self.obj[c].clone();
            for (v, w) in self.obj.iter_mut().zip(&row) {
                if !w.is_exact_zero() {
                    *v = v.minus(&f.times(w)).clean();
                }
            }
        }
        self.rows[r] = row;
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn entering(&self) -> Option<usize> {
        let cand = (0..self.art).filter(|&j| self.obj[j].positive());
        if self.bland {
            return cand.min();
        }
        let mut best: Option<usize> = None;
        for j in cand {
            if best.is_none_or(|b| self.obj[b].less(&self.obj[j])) {
                best = Some(j);
            }
        }
        best
    }

    /// Harris two-pass ratio test. Pass one bounds the step with every right-hand side
    /// relaxed by the feasibility tolerance; pass two picks, among rows within that bound,
    /// the smallest basic index under Bland's rule and the largest pivot element otherwise.
    /// Round-off negatives on the right-hand side count as zero.
    fn leaving(&self, c: usize) -> Option<usize> {
        let rhs = self.rhs();
        let tol = F::feasibility_tol();
        let level = |row: &Vec<F>| if row[rhs].positive() { row[rhs].clone() } else { F::zero() };
        let eligible: Vec<usize> = (0..self.rows.len()).filter(|&r| self.rows[r][c].positive()).collect();
        let bound = eligible
            .iter()
            .map(|&r| level(&self.rows[r]).plus(&tol).over(&self.rows[r][c]))
            .reduce(|a, b| if b.less(&a) { b } else { a })?;
        let within = eligible
            .into_iter()
            .filter(|&r| !bound.less(&level(&self.rows[r]).over(&self.rows[r][c])));
        if self.bland {
            within.min_by_key(|&r| self.basis[r])
        } else {
            within.reduce(|b, r| if self.rows[b][c].less(&self.rows[r][c]) { r } else { b })
        }
    }

    /// Runs pivots until optimal (`Ok(true)`) or unbounded (`Ok(false)`).
    ///
    /// A long degenerate run is broken by shifting zero-level right-hand sides when the
    /// field supports it and by Bland's rule otherwise.
    fn optimize(&mut self, limit: usize) -> Result<bool, LpError> {
        loop {
            let Some(c) = self.entering() else {
                return Ok(true);
            };
            let Some(r) = self.leaving(c) else {
                return Ok(false);
            };
            if self.pivots >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            let rhs = self.rhs();
            if self.rows[r][rhs].is_zero() {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_SWITCH && !self.bland {
                    self.degenerate_run = 0;
                    if self.shift_rounds < MAX_SHIFT_ROUNDS && self.shift_degenerate() {
                        continue;
                    }
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(r, c);
        }
    }

    fn shift_degenerate(&mut self) -> bool {
        let rhs = self.rhs();
        let round = self.shift_rounds;
        for (r, row) in self.rows.iter_mut().enumerate() {
            if row[rhs].positive() {
                continue;
            }
            let Some(d) = F::shift(r, round) else {
                return false;
            };
            let level = if row[rhs].negative() { F::zero() } else { row[rhs].clone() };
            row[rhs] = level.plus(&d);
        }
        self.shifted = true;
        self.shift_rounds += 1;
        true
    }

    /// Recomputes the right-hand side as B⁻¹·b from the artificial block, dropping shifts.
    fn unshift(&mut self) {
        if !self.shifted {
            return;
        }
        let (rhs, art) = (self.rhs(), self.art);
        for row in self.rows.iter_mut() {
            let mut v = F::zero();
            for (k, b) in self.base_rhs.iter().enumerate() {
                if !row[art + k].is_exact_zero() && !b.is_exact_zero() {
                    v = v.plus(&row[art + k].times(b));
                }
            }
            row[rhs] = v.clean();
        }
        self.shifted = false;
    }

    /// Dual simplex pivots from a dual-feasible basis until the right-hand side is
    /// non-negative. `Ok(false)` means no such basis exists.
    fn dual_repair(&mut self, limit: usize) -> Result<bool, LpError> {
        let rhs = self.rhs();
        loop {
            let worst = (0..self.rows.len())
                .filter(|&r| self.rows[r][rhs].negative())
                .reduce(|a, b| if self.rows[b][rhs].less(&self.rows[a][rhs]) { b } else { a });
            let Some(r) = worst else {
                return Ok(true);
            };
            if self.pivots >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            // Reduced costs are ≤ 0 at a maximum; keep them so. Harris two-pass again: bound
            // the dual step with slack, then take the largest pivot within the bound.
            let tol = F::feasibility_tol();
            let slack = |j: usize| if self.obj[j].negative() { F::zero().minus(&self.obj[j]) } else { F::zero() };
            let size = |j: usize| F::zero().minus(&self.rows[r][j]);
            let eligible: Vec<usize> = (0..self.art).filter(|&j| self.rows[r][j].negative()).collect();
            let bound = eligible
                .iter()
                .map(|&j| slack(j).plus(&tol).over(&size(j)))
                .reduce(|a, b| if b.less(&a) { b } else { a });
            let entering = bound.and_then(|bound| {
                eligible
                    .into_iter()
                    .filter(|&j| !bound.less(&slack(j).over(&size(j))))
                    .reduce(|a, b| if size(a).less(&size(b)) { b } else { a })
            });
            let Some(c) = entering else {
                return Ok(false);
            };
            self.pivot(r, c);
        }
    }

    /// Optimizes, then removes any shifts and restores primal feasibility.
    ///
    /// `Ok(None)` means unbounded and `Ok(Some(false))` means the unshifted problem has no
    /// feasible basis.
    fn solve_phase(&mut self, costs: &[F], limit: usize) -> Result<Option<bool>, LpError> {
        self.price(costs);
        loop {
            if !self.optimize(limit)? {
                return Ok(None);
            }
            if !self.shifted {
                return Ok(Some(true));
            }
            self.unshift();
            self.price(costs);
            let before = self.pivots;
            if !self.dual_repair(limit)? {
                return Ok(Some(false));
            }
            self.bland = false;
            self.degenerate_run = 0;
            if self.pivots == before && self.entering().is_none() {
                return Ok(Some(true));
            }
        }
    }

    fn price(&mut self, costs: &[F]) {
        let rhs = self.rhs();
        for j in 0..=rhs {
            let mut d = if j < costs.len() { costs[j].clone() } else { F::zero() };
            for (r, row) in self.rows.iter().enumerate() {
                let cb = costs.get(self.basis[r]).cloned().unwrap_or_else(F::zero);
                if !cb.is_exact_zero() && !row[j].is_exact_zero() {
                    d = d.minus(&cb.times(&row[j]));
                }
            }
            self.obj[j] = d.clean();
        }
    }
}

fn solve_in<F: Field>(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.check()?;
    let n = problem.var_count();

    let mut maps: Vec<VarMap<F>> = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut bound_rows: Vec<(usize, F)> = Vec::new();
    for j in 0..n {
        let (l, u) = (problem.lower[j], problem.upper[j]);
        let map = if l.is_finite() && u.is_finite() && l == u {
            VarMap { shift: F::from_f64(l), cols: vec![] }
        } else if l.is_finite() {
            ncols += 1;
            if u.is_finite() {
                bound_rows.push((ncols - 1, F::from_f64(u).minus(&F::from_f64(l))));
            }
            VarMap { shift: F::from_f64(l), cols: vec![(ncols - 1, true)] }
        } else if u.is_finite() {
            ncols += 1;
            VarMap { shift: F::from_f64(u), cols: vec![(ncols - 1, false)] }
        } else {
            ncols += 2;
            VarMap { shift: F::zero(), cols: vec![(ncols - 2, true), (ncols - 1, false)] }
        };
        maps.push(map);
    }
    let structural = ncols;

    // Standard-form rows: (coefficients over structural columns, kind, rhs).
    let mut rows: Vec<(Vec<(usize, F)>, RowKind, F)> = Vec::new();
    for row in &problem.rows {
        let mut coeffs = Vec::new();
        let mut rhs = F::from_f64(row.rhs);
        for &(j, a) in &row.coeffs {
            let a = F::from_f64(a);
            rhs = rhs.minus(&a.times(&maps[j].shift));
            for &(col, plus) in &maps[j].cols {
                coeffs.push((col, if plus { a.clone() } else { F::zero().minus(&a) }));
            }
        }
        rows.push((coeffs, row.kind, rhs));
    }
    for (col, width) in bound_rows {
        rows.push((vec![(col, F::one())], RowKind::Le, width));
    }
    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.1 != RowKind::Eq).count();
    let art = structural + slack_count;
    let width = art + m + 1;

    let mut flipped = vec![false; m];
    let mut table: Vec<Vec<F>> = Vec::with_capacity(m);
    let mut slack = structural;
    for (r, (coeffs, kind, rhs)) in rows.into_iter().enumerate() {
        let mut line = vec![F::zero(); width];
        for (col, a) in coeffs {
            line[col] = line[col].plus(&a);
        }
        match kind {
            RowKind::Le => {
                line[slack] = F::one();
                slack += 1;
            }
            RowKind::Ge => {
                line[slack] = F::zero().minus(&F::one());
                slack += 1;
            }
            RowKind::Eq => {}
        }
        line[width - 1] = rhs;
        if line[width - 1].less(&F::zero()) {
            for v in line.iter_mut() {
                *v = F::zero().minus(v);
            }
            flipped[r] = true;
        }
        line[art + r] = F::one();
        table.push(line);
    }

    let mut tab = Tableau {
        obj: vec![F::zero(); width],
        rows: table,
        basis: (art..art + m).collect(),
        art,
        pivots: 0,
        bland: false,
        degenerate_run: 0,
        base_rhs: Vec::new(),
        shifted: false,
        shift_rounds: 0,
    };
    tab.base_rhs = tab.rows.iter().map(|row| row[width - 1].clone()).collect();
    let limit = 200 * (m + width);

    // Phase 1: maximize −Σ artificials.
    let mut phase1 = vec![F::zero(); art + m];
    for c in phase1.iter_mut().skip(art) {
        *c = F::zero().minus(&F::one());
    }
    let phase1_ok = tab.solve_phase(&phase1, limit)? == Some(true);
    if !phase1_ok || tab.obj[width - 1].positive() {
        return Ok(LpSolution::status_only(LpStatus::Infeasible, tab.pivots));
    }
    // Drive zero-level artificials out of the basis where some real column can replace them.
    for r in 0..m {
        if tab.basis[r] < art {
            continue;
        }
        if let Some(c) = (0..art).find(|&c| !tab.rows[r][c].is_zero()) {
            tab.pivot(r, c);
        }
    }

    // Phase 2.
    let mut costs = vec![F::zero(); art + m];
    for (j, map) in maps.iter().enumerate() {
        let c = F::from_f64(problem.objective[j]);
        for &(col, plus) in &map.cols {
            costs[col] = if plus { c.clone() } else { F::zero().minus(&c) };
        }
    }
    tab.bland = false;
    tab.degenerate_run = 0;
    match tab.solve_phase(&costs, limit)? {
        None => return Ok(LpSolution::status_only(LpStatus::Unbounded, tab.pivots)),
        Some(false) => return Ok(LpSolution::status_only(LpStatus::Infeasible, tab.pivots)),
        Some(true) => {}
    }

    let mut value = vec![F::zero(); art];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < art {
            value[b] = tab.rows[r][width - 1].clone();
        }
    }
    let mut x = Vec::with_capacity(n);
    let mut objective = F::zero();
    for (j, map) in maps.iter().enumerate() {
        let mut v = map.shift.clone();
        for &(col, plus) in &map.cols {
            v = if plus { v.plus(&value[col]) } else { v.minus(&value[col]) };
        }
        objective = objective.plus(&F::from_f64(problem.objective[j]).times(&v));
        x.push(v.to_f64());
    }
    let basic: Vec<bool> = {
        let mut b = vec![false; art + m];
        for &c in &tab.basis {
            b[c] = true;
        }
        b
    };
    let basis = (0..n).filter(|&j| maps[j].cols.iter().any(|&(c, _)| basic[c])).collect();
    let duals = (0..problem.rows.len())
        .map(|r| {
            let y = -tab.obj[art + r].to_f64();
            if flipped[r] {
                -y
            } else {
                y
            }
        })
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective: objective.to_f64(),
        basis,
        duals,
        pivots: tab.pivots,
    })
}
