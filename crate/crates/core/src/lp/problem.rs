use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::LpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Eq,
    Le,
    Ge,
}

impl RowKind {
    fn symbol(self) -> &'static str {
        match self {
            RowKind::Eq => "=",
            RowKind::Le => "<=",
            RowKind::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    /// Sparse `(variable, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
    pub name: String,
}

/// max c·x subject to rows and lower ≤ x ≤ upper.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub names: Vec<String>,
}

impl LpProblem {
    /// `n` non-negative variables, zero objective, no rows.
    pub fn new(n: usize) -> Self {
        LpProblem {
            objective: vec![0.0; n],
            rows: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            names: (0..n).map(|j| format!("v{j}")).collect(),
        }
    }

    pub fn var_count(&self) -> usize {
        self.objective.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.var_count();
        if self.lower.len() != n || self.upper.len() != n || self.names.len() != n {
            return Err(LpError::Shape(format!(
                "{n} objective entries, {} lower, {} upper, {} names",
                self.lower.len(),
                self.upper.len(),
                self.names.len()
            )));
        }
        if let Some(j) = (0..n).find(|&j| self.lower[j] > self.upper[j] || self.lower[j].is_nan() || self.upper[j].is_nan()) {
            return Err(LpError::Shape(format!("variable {j}: bounds [{}, {}]", self.lower[j], self.upper[j])));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::Shape(format!("objective entry {j} is not finite")));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::Shape(format!("row {r}: rhs {}", row.rhs)));
            }
            if let Some(&(j, a)) = row.coeffs.iter().find(|(j, a)| *j >= n || !a.is_finite()) {
                return Err(LpError::Shape(format!("row {r}: bad entry ({j}, {a})")));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.kind {
                RowKind::Eq => (lhs - row.rhs).abs(),
                RowKind::Le => lhs - row.rhs,
                RowKind::Ge => row.rhs - lhs,
            };
            worst = worst.max(v);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Dense copy of the constraint matrix, one row per constraint.
    pub fn dense_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut line = vec![0.0; self.var_count()];
                for &(j, a) in &row.coeffs {
                    line[j] += a;
                }
                line
            })
            .collect()
    }

    /// Fixed-format text in the spirit of the CPLEX LP format.
    pub fn to_text(&self) -> String {
        fn terms(out: &mut String, coeffs: &[(usize, f64)], names: &[String]) {
            if coeffs.is_empty() {
                out.push_str(" 0");
            }
            for &(j, a) in coeffs {
                let _ = write!(out, " {:+} {}", a, names[j]);
            }
        }
        let mut out = String::from("MAXIMIZE\n obj:");
        let obj: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, &c)| (j, c))
            .collect();
        terms(&mut out, &obj, &self.names);
        out.push_str("\nSUBJECT TO\n");
        for row in &self.rows {
            let _ = write!(out, " {}:", row.name);
            terms(&mut out, &row.coeffs, &self.names);
            let _ = writeln!(out, " {} {}", row.kind.symbol(), row.rhs);
        }
        out.push_str("BOUNDS\n");
        for j in 0..self.var_count() {
            let (l, u) = (self.lower[j], self.upper[j]);
            let name = &self.names[j];
            let _ = match (l.is_finite(), u.is_finite()) {
                _ if l == u => writeln!(out, " {name} = {l}"),
                (true, true) => writeln!(out, " {l} <= {name} <= {u}"),
                (true, false) => writeln!(out, " {name} >= {l}"),
                (false, true) => writeln!(out, " -inf <= {name} <= {u}"),
                (false, false) => writeln!(out, " {name} free"),
            };
        }
        out.push_str("END\n");
        out
    }
}
