//! Gauss-Legendre quadrature and small least-squares helpers.

use std::sync::OnceLock;

const GL_POINTS: usize = 24;

/// Nodes and weights on `[-1, 1]`, computed once by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let m = GL_POINTS;
        let mut rule = Vec::with_capacity(m);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        rule
    })
}

/// Integral of `f` over `[a, b]` with a single 24-point Gauss-Legendre panel.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    gauss_legendre().iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Composite Gauss-Legendre with `panels` equal panels.
pub fn integrate_composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let step = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * step;
            integrate(&f, lo, lo + step)
        })
        .sum()
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let s: f64 = gauss_legendre().iter().map(|p| p.1).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn integrates_polynomials_and_exponentials() {
        let v = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0);
        assert!((v - (256.0 / 8.0 - 8.0)).abs() < 1e-12);
        let e = integrate(f64::exp, 0.0, 1.0);
        assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        let c = integrate_composite(f64::exp, 0.0, 10.0, 10);
        assert!(((c - (10f64.exp() - 1.0)) / c).abs() < 1e-14);
    }

    #[test]
    fn recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (s, i) = fit_line(&x, &y).unwrap();
        assert!((s - 2.5).abs() < 1e-14 && (i + 1.0).abs() < 1e-14);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
    }
}
