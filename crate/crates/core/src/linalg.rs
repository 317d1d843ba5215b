//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Solves `a · x = b`. Returns `None` for singular or numerically useless systems.
pub(crate) fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    if a.len() != n {
        return None;
    }
    let m = DMatrix::from_fn(n, n, |r, c| a[r][c]);
    let rhs = DVector::from_column_slice(b);
    let x = m.lu().solve(&rhs)?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x.iter().copied().collect())
    } else {
        None
    }
}

/// Stationary distribution of a row-stochastic matrix with a single recurrent class.
pub(crate) fn stationary(p: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = p.len();
    // (Pᵀ − I) π = 0 with the last equation replaced by Σπ = 1.
    let mut a = vec![vec![0.0; n]; n];
    for r in 0..n {
        for c in 0..n {
            a[r][c] = p[c][r] - if r == c { 1.0 } else { 0.0 };
        }
    }
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    solve_dense(&a, &b)
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_dense(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn singular_is_none() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(solve_dense(&a, &[1.0, 2.0]).is_none());
    }

    #[test]
    fn stationary_two_state() {
        // π = (b, a) / (a + b) for flip rates a (0→1) and b (1→0).
        let p = vec![vec![0.7, 0.3], vec![0.5, 0.5]];
        let pi = stationary(&p).unwrap();
        assert!((pi[0] - 0.5 / 0.8).abs() < 1e-12);
    }
}
