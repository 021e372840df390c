//! The ALE Ricci-flat bubble.
//!
//! For `G = ℤ_n` the Ricci-flat ALE metric on O(-n) is Calabi's, with
//! `u = Φ_t = (1 + e^{nt})^{1/n}` in the bubble coordinate `t = 2 log R`.
//! Its potential expands at infinity as `Φ = R² + A R^{2-2n} + ...`.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::integrate_composite;

/// Below this value of `t` the Calabi potential is integrated back from
/// `t = 1` instead of summed as a series.
const SERIES_FROM: f64 = 1.0;

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `(u, u_t)` of the Calabi metric at `t`.
pub fn calabi_u(n: u32, t: f64) -> (f64, f64) {
    let nf = n as f64;
    let sp = softplus(nf * t);
    ((sp / nf).exp(), (nf * t + (1.0 / nf - 1.0) * sp).exp())
}

/// Scaled Calabi metric `(ε² u, ε² u_t)` at `τ = t - 2 log ε` together with
/// `(ε² u e^{-t} - 1, ε² u_t e^{-t} - 1)`, all evaluated from `E = e^t/ε²`
/// so the relative accuracy does not depend on `|t|`.
pub fn calabi_u_scaled(n: u32, t: f64, eps: f64) -> ((f64, f64), (f64, f64)) {
    let nf = n as f64;
    let big = (0.5 * t).exp() / eps;
    let e = t.exp();
    if big >= 1.0 {
        // e^t (1 + E^{-n})^{1/n}, e^t (1 + E^{-n})^{1/n - 1}
        let l = big.powi(-2 * n as i32).ln_1p();
        let (r1, r2) = ((l / nf).exp_m1(), ((1.0 / nf - 1.0) * l).exp_m1());
        ((e + e * r1, e + e * r2), (r1, r2))
    } else {
        // ε² (1 + E^n)^{1/n}, ε² E^n (1 + E^n)^{1/n - 1}
        let en = big.powi(2 * n as i32);
        let l = en.ln_1p();
        let e2 = eps * eps;
        let (u, ut) = (e2 * (l / nf).exp(), e2 * en * ((1.0 / nf - 1.0) * l).exp());
        ((u, ut), (u / e - 1.0, ut / e - 1.0))
    }
}

/// `u - e^t` for the Calabi metric, without cancellation.
pub fn calabi_cone_gap(n: u32, t: f64) -> f64 {
    let nf = n as f64;
    if t > 0.0 {
        t.exp() * ((-nf * t).exp().ln_1p() / nf).exp_m1()
    } else {
        calabi_u(n, t).0 - t.exp()
    }
}

/// `Φ_Cal(t) - e^t`, normalized so that it vanishes at `t = +∞`.
pub fn calabi_potential_gap(n: u32, t: f64) -> f64 {
    let nf = n as f64;
    if t >= SERIES_FROM {
        // e^t Σ_{k≥1} binom(1/n, k) e^{-nkt} / (1 - nk)
        let x = (-nf * t).exp();
        let mut binom = 1.0;
        let mut xk = 1.0;
        let mut acc = 0.0;
        for k in 1..200 {
            let kf = k as f64;
            binom *= (1.0 / nf - (kf - 1.0)) / kf;
            xk *= x;
            let term = binom * xk / (1.0 - nf * kf);
            acc += term;
            if term.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        t.exp() * acc
    } else {
        // Φ(t) - e^t = Φ(1) - e - ∫_t^1 (u - e^s) ds
        let panels = ((SERIES_FROM - t).ceil() as usize).max(1);
        let tail = integrate_composite(|s| calabi_cone_gap(n, s), t, SERIES_FROM, panels);
        calabi_potential_gap(n, SERIES_FROM) - tail
    }
}

/// The Calabi potential `Φ_Cal(t)`, normalized at `+∞`.
pub fn calabi_potential(n: u32, t: f64) -> f64 {
    t.exp() + calabi_potential_gap(n, t)
}

/// Leading ALE coefficient `A` of the Calabi potential.
pub fn ale_coefficient(n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("ALE coefficient needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(-1.0 / (nf * (nf - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AleKind {
    /// The exact Ricci-flat Calabi metric.
    Calabi,
    /// The truncated expansion `Φ = R² + A R^{2-2n}`; not Ricci-flat.
    Generic,
}

/// A sampled ALE profile with its potential.
#[derive(Debug, Clone, PartialEq)]
pub struct AleProfile {
    n: u32,
    kind: AleKind,
    grid: Grid,
    u: Vec<f64>,
    u_t: Vec<f64>,
    gap: Vec<f64>,
    coefficient: f64,
    tail_constant: f64,
    cumulative: Vec<f64>,
}

/// Samples the Calabi metric on `grid`.
pub fn calabi_profile(n: u32, grid: &Grid) -> Result<AleProfile> {
    let coefficient = ale_coefficient(n)?;
    let (u, u_t) = grid.nodes().iter().map(|&t| calabi_u(n, t)).unzip();
    let gap = grid.nodes().iter().map(|&t| calabi_cone_gap(n, t)).collect();
    Ok(AleProfile::build(n, AleKind::Calabi, grid, u, u_t, gap, coefficient, |t| calabi_potential_gap(n, t)))
}

/// Samples `Φ = e^t + A e^{(1-n)t}`; fails where this is not a Kähler
/// potential (`u_t <= 0` for small `t`).
pub fn generic_profile(n: u32, grid: &Grid) -> Result<AleProfile> {
    let coefficient = ale_coefficient(n)?;
    let nf = n as f64;
    let mut u = Vec::with_capacity(grid.len());
    let mut u_t = Vec::with_capacity(grid.len());
    let mut gap = Vec::with_capacity(grid.len());
    for (i, &t) in grid.nodes().iter().enumerate() {
        let tail = coefficient * ((1.0 - nf) * t).exp();
        let ui = t.exp() + (1.0 - nf) * tail;
        let uti = t.exp() + (1.0 - nf) * (1.0 - nf) * tail;
        if !(ui > 0.0 && uti > 0.0) {
            return Err(Error::Invariant {
                node: i,
                t,
                what: format!("truncated ALE expansion is not positive (u = {ui}, u_t = {uti})"),
            });
        }
        u.push(ui);
        u_t.push(uti);
        gap.push((1.0 - nf) * tail);
    }
    Ok(AleProfile::build(n, AleKind::Generic, grid, u, u_t, gap, coefficient, |t| coefficient * ((1.0 - nf) * t).exp()))
}

impl AleProfile {
    fn build(
        n: u32,
        kind: AleKind,
        grid: &Grid,
        u: Vec<f64>,
        u_t: Vec<f64>,
        gap: Vec<f64>,
        coefficient: f64,
        exact_gap: impl Fn(f64) -> f64,
    ) -> Self {
        // the cone part e^t is integrated exactly, Simpson sees only u - e^t
        let cumulative = simpson_cumulative(&gap, grid.h());
        let last = grid.len() - 1;
        let tail_constant = exact_gap(grid.t_max()) - cumulative[last];
        Self { n, kind, grid: grid.clone(), u, u_t, gap, coefficient, tail_constant, cumulative }
    }

    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn kind(&self) -> AleKind {
        self.kind
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
    /// The coefficient `A` in `Φ = R² + A R^{2-2n} + ...`.
    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }
    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }
    pub fn is_ricci_flat(&self) -> bool {
        self.kind == AleKind::Calabi
    }

    /// Largest relative deviation of `u^{n-1} u_t` from `e^{nt}`.
    pub fn ricci_flat_defect(&self) -> f64 {
        let nf = self.n as f64;
        self.grid
            .nodes()
            .iter()
            .zip(self.u.iter().zip(&self.u_t))
            .map(|(&t, (&u, &ut))| ((nf - 1.0) * u.ln() + ut.ln() - nf * t).exp_m1().abs())
            .fold(0.0, f64::max)
    }
}

/// Cumulative integral of equally spaced samples: Simpson on node pairs and
/// a third-order single-panel rule on the odd nodes.
fn simpson_cumulative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for k in (2..n).step_by(2) {
        out[k] = out[k - 2] + h / 3.0 * (f[k - 2] + 4.0 * f[k - 1] + f[k]);
    }
    for k in (1..n).step_by(2) {
        out[k] = if k + 1 < n {
            out[k - 1] + h / 12.0 * (5.0 * f[k - 1] + 8.0 * f[k] - f[k + 1])
        } else {
            out[k - 1] + h / 12.0 * (-f[k - 2] + 8.0 * f[k - 1] + 5.0 * f[k])
        };
    }
    out
}

/// `Φ⁻(t) = e^t + ∫(u - e^t) + C`: composite Simpson on the samples of
/// `u - e^t` plus the tail constant `C`. Off-node values integrate the cubic
/// Hermite interpolant of `(u - e^t, u_t - e^t)`.
pub fn ale_potential(p: &AleProfile, t: f64) -> Result<f64> {
    Ok(t.exp() + ale_potential_gap(p, t)?)
}

/// `Φ⁻(t) - e^t`, evaluated without the cone part.
pub fn ale_potential_gap(p: &AleProfile, t: f64) -> Result<f64> {
    let g = &p.grid;
    if !g.contains(t) {
        return Err(Error::Domain(format!("t = {t} outside [{}, {}]", g.t_min(), g.t_max())));
    }
    let h = g.h();
    let k = (((t - g.t_min()) / h).floor() as usize).min(g.len() - 1);
    let mut value = p.cumulative[k] + p.tail_constant;
    let s = t - g.nodes()[k];
    if s > 0.0 && k + 1 < g.len() {
        let th = s / h;
        let (th2, th3, th4) = (th * th, th * th * th, th * th * th * th);
        let i00 = th4 / 2.0 - th3 + th;
        let i10 = th4 / 4.0 - 2.0 * th3 / 3.0 + th2 / 2.0;
        let i01 = -th4 / 2.0 + th3;
        let i11 = th4 / 4.0 - th3 / 3.0;
        let (t0, t1) = (g.nodes()[k].exp(), g.nodes()[k + 1].exp());
        let (f0, f1) = (p.gap[k], p.gap[k + 1]);
        let (d0, d1) = (p.u_t[k] - t0, p.u_t[k + 1] - t1);
        value += h * (f0 * i00 + h * d0 * i10 + f1 * i01 + h * d1 * i11);
    }
    Ok(value)
}

/// The moment map `μ⁻ = -¼ X Φ⁻ = u` per node.
pub fn moment_map(p: &AleProfile) -> Vec<f64> {
    p.u.clone()
}
