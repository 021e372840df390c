//! The Cao steady-soliton family in the U(n)-invariant reduction.
//!
//! A radial Kähler form is `u ω_FS + u_t ω_cyl` with `u = Φ_t`. The family
//! member `φ_a` is defined implicitly by
//! `F(φ) e^φ = e^{nt}/n + F(a) e^a`, equivalently
//! `∫_a^φ s^{n-1} e^s ds = e^{nt}/n`. All root solves are carried out on the
//! excess `η = φ - a` in logarithmic form, which keeps `η` resolved long after
//! `a + η` rounds to `a`.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::{fit_line, integrate, integrate_composite};

/// Relative tolerance on the excess `φ - a`.
pub const ROOT_TOL: f64 = 1e-13;
/// Newton/bisection iteration cap per node.
pub const ROOT_MAX_ITER: usize = 100;
/// Above this value of `n t` the defining equation is evaluated in log form.
pub const LOG_FORM_THRESHOLD: f64 = 600.0;
/// Beyond this value of `|n t|` the double-precision excess is meaningless.
const NT_LIMIT: f64 = 1e12;

/// `F(s) = Σ_{r=0}^{n-1} (-1)^{n-r-1} (n-1)!/r! s^r`, the polynomial with
/// `d/ds [F(s) e^s] = s^{n-1} e^s`.
pub fn f_poly(n: u32, s: f64) -> f64 {
    let n = n.max(1) as usize;
    // coefficient of s^r is c_r = (-1)^{n-1-r} (n-1)!/r!; c_{n-1} = 1 and
    // c_{r-1} = -r c_r, so Horner runs from the top.
    let mut coeff = 1.0;
    let mut acc = 0.0;
    let mut coeffs = vec![0.0; n];
    for r in (0..n).rev() {
        coeffs[r] = coeff;
        coeff *= -(r as f64);
    }
    for c in coeffs.iter().rev() {
        acc = acc * s + c;
    }
    acc
}

/// `log ∫_a^{a+η} s^{n-1} e^s ds` for `η > 0`, without cancellation.
pub fn log_excess_integral(n: u32, a: f64, eta: f64) -> f64 {
    let nf = n as f64;
    let m = n as i32 - 1;
    let phi = a + eta;
    if eta <= 8.0 {
        if a == 0.0 {
            // η^n ∫_0^1 x^{n-1} e^{ηx} dx
            let panels = eta.ceil().max(1.0) as usize;
            let k = integrate_composite(|x| x.powi(m) * (eta * x).exp(), 0.0, 1.0, panels);
            nf * eta.ln() + k.ln()
        } else {
            // e^a η ∫_0^1 (a + ηx)^{n-1} e^{ηx} dx
            let panels = eta.ceil().max(1.0) as usize;
            let k = integrate_composite(|x| (a + eta * x).powi(m) * (eta * x).exp(), 0.0, 1.0, panels);
            a + eta.ln() + k.ln()
        }
    } else if phi <= LOG_FORM_THRESHOLD {
        (f_poly(n, phi) * phi.exp() - f_poly(n, a) * a.exp()).ln()
    } else {
        phi + (f_poly(n, phi) - f_poly(n, a) * (a - phi).exp()).ln()
    }
}

/// `d/dη log ∫_a^{a+η} s^{n-1} e^s ds`.
fn dlog_excess_integral(n: u32, a: f64, eta: f64, log_h: f64) -> f64 {
    let phi = a + eta;
    ((n as f64 - 1.0) * phi.ln() + phi - log_h).exp()
}

/// Solves the defining equation for the excess `η = φ_a(t) - a > 0`.
pub fn solve_excess(n: u32, a: f64, t: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("a = {a} must be a finite nonnegative number")));
    }
    let nf = n as f64;
    let nt = nf * t;
    if !nt.is_finite() || nt.abs() > NT_LIMIT {
        return Err(Error::Overflow { t, nt });
    }
    if a == 0.0 && t < FIXED_POINT_BELOW {
        return cao_excess_fixed_point(n, t);
    }
    let target = nt - nf.ln();
    let rho = |y: f64| log_excess_integral(n, a, y.exp()) - target;

    // initial guess in y = log η
    let guess = if t > 1.0 {
        let (phi, _) = asymptote_pos_unchecked(n, t);
        (phi - a).max(1e-3)
    } else if a == 0.0 {
        t.exp()
    } else {
        (a.powf(1.0 - nf) * (-a).exp() * nt.exp() / nf).min(1.0)
    };
    let mut y = guess.ln();
    let mut r = rho(y);

    // bracket expansion
    let (mut lo, mut hi);
    if r < 0.0 {
        lo = y;
        let mut step = 1.0;
        loop {
            let cand = y + step;
            if rho(cand) >= 0.0 {
                hi = cand;
                break;
            }
            lo = cand;
            step *= 2.0;
            if step > 1e4 {
                return Err(Error::RootNotConverged { t, iterations: 0 });
            }
        }
    } else {
        hi = y;
        let mut step = 1.0;
        loop {
            let cand = y - step;
            if rho(cand) <= 0.0 {
                lo = cand;
                break;
            }
            hi = cand;
            step *= 2.0;
            if step > 1e5 {
                return Err(Error::RootNotConverged { t, iterations: 0 });
            }
        }
    }
    if y < lo || y > hi {
        y = 0.5 * (lo + hi);
        r = rho(y);
    }

    for _ in 0..ROOT_MAX_ITER {
        if r == 0.0 {
            return Ok(y.exp());
        }
        if r < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let eta = y.exp();
        let log_h = r + target;
        let slope = dlog_excess_integral(n, a, eta, log_h) * eta;
        let newton = y - r / slope;
        if (r / slope).abs() < 1e-3 * ROOT_TOL {
            return Ok(y.exp());
        }
        let bisect = !(newton >= lo && newton <= hi) || !newton.is_finite();
        let next = if bisect { 0.5 * (lo + hi) } else { newton };
        let dy = next - y;
        y = next;
        r = rho(y);
        // a Newton step below the tolerance leaves an error of order dy²
        if (!bisect && dy.abs() < ROOT_TOL) || (hi - lo).abs() < 1e-15 {
            return Ok(y.exp());
        }
    }
    Err(Error::RootNotConverged { t, iterations: ROOT_MAX_ITER })
}

/// `φ_t` from the soliton equation `φ^{n-1} φ_t e^φ = e^{nt}`.
pub fn phi_t_algebraic(n: u32, a: f64, t: f64, phi: f64) -> f64 {
    let nf = n as f64;
    if phi - a >= F_FORM_ABOVE {
        // n (F(φ) - F(a) e^{a-φ}) / φ^{n-1}: no exponential of a large
        // argument, so φ's rounding does not leak into φ_t
        nf * (f_poly(n, phi) - f_poly(n, a) * (a - phi).exp()) / phi.powi(n as i32 - 1)
    } else if t < 0.0 {
        // (e^t/φ)^{n-1} e^t e^{-φ} keeps full relative accuracy for t ≪ 0
        let e = t.exp();
        (e / phi).powi(n as i32 - 1) * e * (-phi).exp()
    } else {
        (nf * t - phi - (nf - 1.0) * phi.ln()).exp()
    }
}

/// Excess above which [`phi_t_algebraic`] works from `F`.
const F_FORM_ABOVE: f64 = 16.0;

/// Below this `t` the Cao excess is found by a fixed point in `φ e^{-t}`.
const FIXED_POINT_BELOW: f64 = -2.0;

/// `log(n K(s))`, `K(s) = ∫_0^1 x^{n-1} e^{sx} dx`, accurate as `s → 0`.
fn log_nk(n: u32, s: f64) -> f64 {
    let nf = n as f64;
    let m = n as i32 - 1;
    (nf * integrate(|x| x.powi(m) * (s * x).exp_m1(), 0.0, 1.0)).ln_1p()
}

/// `φ_0 = e^t v` with `v = (n K(φ_0))^{-1/n}`. The map contracts with rate
/// `O(e^t)`, and `φ_0` comes out with full relative accuracy where the log
/// form would lose `|t|` ulps.
fn cao_excess_fixed_point(n: u32, t: f64) -> Result<f64> {
    let nf = n as f64;
    let e = t.exp();
    let mut v = 1.0;
    for _ in 0..ROOT_MAX_ITER {
        let next = (-log_nk(n, e * v) / nf).exp();
        if (next - v).abs() <= 4.0 * f64::EPSILON * next {
            return Ok(e * next);
        }
        v = next;
    }
    Err(Error::RootNotConverged { t, iterations: ROOT_MAX_ITER })
}

/// The Cao soliton relative to the flat cone at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeDeviation {
    pub phi: f64,
    /// `Φ_0 - e^t`.
    pub gap: f64,
    /// `φ_0 e^{-t} - 1`.
    pub rel: f64,
    /// `∂_t φ_0 e^{-t} - 1`.
    pub rel_t: f64,
}

/// Below this `φ_0` the deviation from the cone is computed without
/// cancellation.
const CONE_SERIES_BELOW: f64 = 8.0;

/// Cao soliton minus the cone `e^t`, each part to full relative accuracy
/// near the tip. With `s = φ_0` as variable, `e^t = s (n K(s))^{1/n}` and
/// `Φ_0 - e^t = -∫_0^{φ_0} e^{s - L} expm1(L/n) ds`, `L = log(n K(s))`.
pub fn cao_cone_deviation(n: u32, t: f64) -> Result<ConeDeviation> {
    let nf = n as f64;
    let (pot, phi) = cao_potential(n, t)?;
    if phi > CONE_SERIES_BELOW {
        let e = t.exp();
        let phi_t = phi_t_algebraic(n, 0.0, t, phi);
        return Ok(ConeDeviation { phi, gap: pot - e, rel: phi / e - 1.0, rel_t: phi_t / e - 1.0 });
    }
    let l = log_nk(n, phi);
    let panels = (phi.ceil() as usize).max(1);
    let gap = -integrate_composite(
        |s| {
            let l = log_nk(n, s);
            (s - l).exp() * (l / nf).exp_m1()
        },
        0.0,
        phi,
        panels,
    );
    Ok(ConeDeviation { phi, gap, rel: (-l / nf).exp_m1(), rel_t: ((nf - 1.0) / nf * l - phi).exp_m1() })
}

/// A Kähler form in the radial reduction, `ω = u ω_FS + u_t ω_cyl`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMetric {
    grid: Grid,
    u: Vec<f64>,
    u_t: Vec<f64>,
}

impl RadialMetric {
    pub fn new(grid: Grid, u: Vec<f64>, u_t: Vec<f64>) -> Result<Self> {
        if u.len() != grid.len() || u_t.len() != grid.len() {
            return Err(Error::Domain("profile length does not match grid".into()));
        }
        for (i, (&a, &b)) in u.iter().zip(&u_t).enumerate() {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::Invariant {
                    node: i,
                    t: grid.nodes()[i],
                    what: format!("u = {a}, u_t = {b} must both be positive"),
                });
            }
        }
        Ok(Self { grid, u, u_t })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn u(&self) -> &[f64] {
        &self.u
    }
    pub fn u_t(&self) -> &[f64] {
        &self.u_t
    }
}

/// A sampled member `φ_a` of the Cao family.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonProfile {
    n: u32,
    a: f64,
    grid: Grid,
    excess: Vec<f64>,
    phi: Vec<f64>,
    phi_t: Vec<f64>,
}

impl SolitonProfile {
    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
    pub fn phi_t(&self) -> &[f64] {
        &self.phi_t
    }
    /// `φ - a` at every node, resolved independently of the size of `a`.
    pub fn excess(&self) -> &[f64] {
        &self.excess
    }

    pub fn metric(&self) -> RadialMetric {
        RadialMetric { grid: self.grid.clone(), u: self.phi.clone(), u_t: self.phi_t.clone() }
    }

    /// Checks `φ > a`, `0 < φ_t < n` and strict monotonicity node by node.
    /// `φ_t = n` is accepted: the gap is `O(e^{-nt})` and rounds away at large t.
    pub fn check_invariants(&self) -> Result<()> {
        let nf = self.n as f64;
        let t = self.grid.nodes();
        for i in 0..self.grid.len() {
            if !(self.excess[i] > 0.0) {
                return Err(Error::Invariant { node: i, t: t[i], what: "φ <= a".into() });
            }
            if !(self.phi_t[i] > 0.0 && self.phi_t[i] <= nf) {
                return Err(Error::Invariant {
                    node: i,
                    t: t[i],
                    what: format!("φ_t = {} outside (0, n]", self.phi_t[i]),
                });
            }
            if i > 0 && !(self.excess[i] > self.excess[i - 1]) {
                return Err(Error::Invariant { node: i, t: t[i], what: "φ not increasing".into() });
            }
        }
        Ok(())
    }
}

/// Samples `φ_a` on `grid`; `a = 0` is the Cao soliton on ℂⁿ, `a > 0` the
/// family member on O(-n).
pub fn solve_profile(n: u32, a: f64, grid: &Grid) -> Result<SolitonProfile> {
    let mut excess = Vec::with_capacity(grid.len());
    let mut phi = Vec::with_capacity(grid.len());
    let mut phi_t = Vec::with_capacity(grid.len());
    for &t in grid.nodes() {
        let eta = solve_excess(n, a, t)?;
        let p = a + eta;
        excess.push(eta);
        phi.push(p);
        phi_t.push(phi_t_algebraic(n, a, t, p));
    }
    Ok(SolitonProfile { n, a, grid: grid.clone(), excess, phi, phi_t })
}

/// Single-point evaluation `(φ_a(t), φ_t)`.
pub fn phi_at(n: u32, a: f64, t: f64) -> Result<(f64, f64)> {
    let p = a + solve_excess(n, a, t)?;
    Ok((p, phi_t_algebraic(n, a, t, p)))
}

/// Two-term expansion of `φ_a` as `t → -∞`.
pub fn asymptote_neg(n: u32, a: f64, t: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("a = {a} must be nonnegative")));
    }
    let nf = n as f64;
    Ok(if a == 0.0 {
        t.exp() - (2.0 * t).exp() / (nf + 1.0)
    } else {
        a + a.powf(1.0 - nf) * (-a).exp() * (nf * t).exp() / nf
    })
}

fn asymptote_pos_unchecked(n: u32, t: f64) -> (f64, f64) {
    let nf = n as f64;
    (nf * t - (nf - 1.0) * t.ln() - nf * nf.ln(), nf - (nf - 1.0) / t)
}

/// Leading behaviour `(φ, φ_t)` as `t → +∞`.
pub fn asymptote_pos(n: u32, t: f64) -> Result<(f64, f64)> {
    if !(t > 1.0) {
        return Err(Error::Domain(format!("t = {t} must exceed 1")));
    }
    Ok(asymptote_pos_unchecked(n, t))
}

/// Samples used by the exponent fits.
const FIT_POINTS: usize = 25;

fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::DegenerateFit("correction vanished below double precision".into()));
    }
    fit_line(xs, ys).map(|(s, _)| s).ok_or_else(|| Error::DegenerateFit("collinear samples".into()))
}

fn window(lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty fit window [{lo}, {hi}]")));
    }
    Ok((0..FIT_POINTS).map(|i| lo + (hi - lo) * i as f64 / (FIT_POINTS - 1) as f64).collect())
}

/// Slope in `t` of `log |φ_a - φ_a(-∞)|` over `[lo, hi]`, with `φ_0(-∞)`
/// replaced by the cone `e^t`: 2 for `a = 0`, `n` for `a > 0`.
pub fn neg_correction_exponent(n: u32, a: f64, lo: f64, hi: f64) -> Result<f64> {
    let ts = window(lo, hi)?;
    let mut ys = Vec::with_capacity(ts.len());
    for &t in &ts {
        let eta = solve_excess(n, a, t)?;
        ys.push(if a == 0.0 { (eta - t.exp()).abs().ln() } else { eta.ln() });
    }
    fit_slope(&ts, &ys)
}

/// Slope in `t` of `log |φ_0 - asymptote_neg|` over `[lo, hi]`; the
/// two-term expansion leaves an `O(e^{3t})` remainder.
pub fn neg_remainder_exponent(n: u32, lo: f64, hi: f64) -> Result<f64> {
    let ts = window(lo, hi)?;
    let mut ys = Vec::with_capacity(ts.len());
    for &t in &ts {
        let phi = solve_excess(n, 0.0, t)?;
        ys.push((phi - asymptote_neg(n, 0.0, t)?).abs().ln());
    }
    fit_slope(&ts, &ys)
}

/// Slope in `log t` of `log |φ_0 - asymptote_pos|` over `t ∈ [lo, hi]`,
/// sampled evenly in `log t`; close to -1 for the `log t / t` correction.
pub fn pos_correction_exponent(n: u32, lo: f64, hi: f64) -> Result<f64> {
    if !(lo > 1.0) {
        return Err(Error::Domain(format!("fit window must start above t = 1, got {lo}")));
    }
    let xs = window(lo.ln(), hi.ln())?;
    let mut ys = Vec::with_capacity(xs.len());
    for &x in &xs {
        let t = x.exp();
        let phi = solve_excess(n, 0.0, t)?;
        ys.push((phi - asymptote_pos(n, t)?.0).abs().ln());
    }
    fit_slope(&xs, &ys)
}

/// `S = log(u^{n-1} u_t) - n t + u`; identically zero exactly on
/// normalized steady solitons.
pub fn soliton_residual(m: &RadialMetric, n: u32) -> Result<Vec<f64>> {
    let nf = n as f64;
    m.grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (u, ut) = (m.u[i], m.u_t[i]);
            if !(u > 0.0 && ut > 0.0) {
                return Err(Error::Invariant { node: i, t, what: "non-positive metric".into() });
            }
            Ok((nf - 1.0) * u.ln() + ut.ln() - nf * t + u)
        })
        .collect()
}

/// `∫_{t_min}^t φ^{n-1} φ_t dt` by the composite trapezoid rule on the grid.
pub fn ball_volume(p: &SolitonProfile, t: f64) -> Result<f64> {
    let g = &p.grid;
    if !g.contains(t) {
        return Err(Error::Domain(format!("t = {t} outside [{}, {}]", g.t_min(), g.t_max())));
    }
    let m = p.n as i32 - 1;
    let integrand = |i: usize| p.phi[i].powi(m) * p.phi_t[i];
    let h = g.h();
    let k = (((t - g.t_min()) / h).floor() as usize).min(g.len() - 1);
    let mut acc = 0.0;
    for i in 0..k {
        acc += 0.5 * h * (integrand(i) + integrand(i + 1));
    }
    let rem = t - g.nodes()[k];
    if rem > 0.0 && k + 1 < g.len() {
        let f0 = integrand(k);
        let f1 = integrand(k + 1);
        let fr = f0 + (f1 - f0) * rem / h;
        acc += 0.5 * rem * (f0 + fr);
    }
    Ok(acc)
}

/// Kähler potential `Φ_0(t) = ∫_{-∞}^t φ_0` of the Cao soliton, normalized
/// to vanish at the origin, together with `φ_0(t)`.
///
/// Uses the substitution `s = φ_0`, under which
/// `Φ_0 = ∫_0^{φ_0(t)} e^s / (n K(s)) ds` with `K(s) = ∫_0^1 x^{n-1} e^{sx} dx`.
pub fn cao_potential(n: u32, t: f64) -> Result<(f64, f64)> {
    let (phi, _) = phi_at(n, 0.0, t)?;
    let nf = n as f64;
    let m = n as i32 - 1;
    let integrand = |s: f64| {
        if s <= 8.0 {
            let k = integrate(|x| x.powi(m) * (s * x).exp(), 0.0, 1.0);
            s.exp() / (nf * k)
        } else {
            // s^n e^s / (n G(s)) with G evaluated in log form
            (nf * s.ln() + s - nf.ln() - log_excess_integral(n, 0.0, s)).exp()
        }
    };
    let panels = (phi.ceil() as usize).max(1);
    Ok((integrate_composite(integrand, 0.0, phi, panels), phi))
}
