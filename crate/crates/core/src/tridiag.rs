//! Tridiagonal solves.

use crate::error::{Error, Result};

/// Pivots smaller than this fraction of the row scale are treated as a
/// breakdown of the elimination.
const PIVOT_FLOOR: f64 = 1e-14;

/// Solves `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]` by the
/// Thomas algorithm. `sub[0]` and `sup[n-1]` are ignored.
pub fn solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(Error::Domain("tridiagonal bands have mismatched lengths".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut worst: f64 = f64::INFINITY;
    for i in 0..n {
        let lower = if i > 0 { sub[i] } else { 0.0 };
        let upper = if i + 1 < n { sup[i] } else { 0.0 };
        let prev_c = if i > 0 { c[i - 1] } else { 0.0 };
        let prev_d = if i > 0 { d[i - 1] } else { 0.0 };
        let pivot = diag[i] - lower * prev_c;
        let scale = diag[i].abs() + lower.abs() + upper.abs();
        let ratio = pivot.abs() / scale.max(f64::MIN_POSITIVE);
        worst = worst.min(ratio);
        if !(ratio > PIVOT_FLOOR) || !pivot.is_finite() {
            return Err(Error::Singular { condition: 1.0 / ratio });
        }
        c[i] = upper / pivot;
        d[i] = (rhs[i] - lower * prev_d) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { condition: 1.0 / worst });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_laplacian() {
        let n = 50;
        let sub = vec![-1.0; n];
        let sup = vec![-1.0; n];
        let diag = vec![2.0; n];
        let x0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let l = if i > 0 { x0[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x0[i + 1] } else { 0.0 };
                2.0 * x0[i] - l - r
            })
            .collect();
        let x = solve(&sub, &diag, &sup, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn singular_is_reported() {
        let r = solve(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(Error::Singular { .. })));
    }
}
