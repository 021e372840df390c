//! The drift Laplacian `¼(Δ - κX)` on radial functions.
//!
//! On `ω = u ω_FS + u_t ω_cyl` with `X = -4∂_t` it reads
//! `¼(Δ - κX)ψ = ψ_tt / u_t + ((n-1)/u + κ) ψ_t`. The discretization uses
//! centered differences, written in terms of the increments
//! `s_i = ψ_{i+1} - ψ_i`. Near the zero section `1/u_t` is enormous, and the
//! increment form keeps the tiny `ψ_t` there resolved.

use crate::error::{Error, Result};
use crate::glue::{build_glued, glue_grid, GluedData, WeightSpec};
use crate::grid::Grid;
use crate::radial_soliton::SolitonProfile;
use crate::rng::{random_bumps, sample_bumps, seeded, SeededRng};
use crate::tridiag;

/// Relative residual accepted from a linear solve.
pub const SOLVE_TOL: f64 = 1e-10;

/// Left boundary condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeftBc {
    /// `ψ_t(t_min) = 0`, standing in for smoothness at the zero section.
    Regularity,
    Dirichlet(f64),
}

/// `ψ ↦ a ψ_tt + b ψ_t` with boundary conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftOperator {
    grid: Grid,
    coeff_a: Vec<f64>,
    coeff_b: Vec<f64>,
    kappa: Option<Vec<f64>>,
    bc_left: LeftBc,
    bc_right: f64,
}

/// Assembles `¼(Δ - κX)` on the metric `(u, u_t)`.
pub fn assemble(
    n: u32,
    u: &[f64],
    u_t: &[f64],
    kappa: &[f64],
    grid: &Grid,
    bc_left: LeftBc,
    bc_right: f64,
) -> Result<DriftOperator> {
    let len = grid.len();
    if u.len() != len || u_t.len() != len || kappa.len() != len {
        return Err(Error::Domain("coefficient length does not match grid".into()));
    }
    let nf = n as f64;
    let mut a = Vec::with_capacity(len);
    let mut b = Vec::with_capacity(len);
    for i in 0..len {
        if !(u[i] > 0.0 && u_t[i] > 0.0) {
            return Err(Error::Invariant {
                node: i,
                t: grid.nodes()[i],
                what: format!("u = {}, u_t = {} must be positive", u[i], u_t[i]),
            });
        }
        a.push(1.0 / u_t[i]);
        b.push((nf - 1.0) / u[i] + kappa[i]);
    }
    let mut op = DriftOperator::from_coefficients(grid, a, b, bc_left, bc_right)?;
    op.kappa = Some(kappa.to_vec());
    Ok(op)
}

impl DriftOperator {
    /// Operator with explicit coefficients of `ψ_tt` and `ψ_t`.
    pub fn from_coefficients(
        grid: &Grid,
        coeff_a: Vec<f64>,
        coeff_b: Vec<f64>,
        bc_left: LeftBc,
        bc_right: f64,
    ) -> Result<Self> {
        if coeff_a.len() != grid.len() || coeff_b.len() != grid.len() {
            return Err(Error::Domain("coefficient length does not match grid".into()));
        }
        for (i, (&a, &b)) in coeff_a.iter().zip(&coeff_b).enumerate() {
            if !(a > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::Invariant {
                    node: i,
                    t: grid.nodes()[i],
                    what: format!("operator is not elliptic (a = {a}, b = {b})"),
                });
            }
        }
        Ok(Self { grid: grid.clone(), coeff_a, coeff_b, kappa: None, bc_left, bc_right })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn coeff_a(&self) -> &[f64] {
        &self.coeff_a
    }
    pub fn coeff_b(&self) -> &[f64] {
        &self.coeff_b
    }
    pub fn kappa(&self) -> Option<&[f64]> {
        self.kappa.as_deref()
    }
    pub fn bc_left(&self) -> LeftBc {
        self.bc_left
    }
    pub fn bc_right(&self) -> f64 {
        self.bc_right
    }

    /// `p_i s_i - m_i s_{i-1} = h (Lψ)_i` with the weights below.
    fn row_weights(&self, i: usize) -> (f64, f64) {
        let h = self.grid.h();
        let (a, b) = (self.coeff_a[i], self.coeff_b[i]);
        (a / h + 0.5 * b, a / h - 0.5 * b)
    }

    /// `Lψ` at the interior nodes; the two boundary entries are 0.
    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        self.apply_increments(&increments(psi))
    }

    /// `Lψ` from the increments of `ψ`; the two boundary entries are 0.
    pub fn apply_increments(&self, s: &[f64]) -> Vec<f64> {
        let len = self.grid.len();
        let h = self.grid.h();
        let mut out = vec![0.0; len];
        for i in 1..len - 1 {
            let (p, m) = self.row_weights(i);
            out[i] = (p * s[i] - m * s[i - 1]) / h;
        }
        out
    }
}

/// `s_i = ψ_{i+1} - ψ_i`.
pub fn increments(psi: &[f64]) -> Vec<f64> {
    psi.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Values from increments with `ψ` at the last node fixed.
pub fn from_increments(s: &[f64], last: f64) -> Vec<f64> {
    let mut psi = vec![0.0; s.len() + 1];
    psi[s.len()] = last;
    for i in (0..s.len()).rev() {
        psi[i] = psi[i + 1] - s[i];
    }
    psi
}

/// Centered `(ψ_t, ψ_tt)` from increments, one-sided at the two ends.
pub fn derivatives_from_increments(s: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let m = s.len();
    let len = m + 1;
    let mut d1 = vec![0.0; len];
    let mut d2 = vec![0.0; len];
    for i in 1..m {
        d1[i] = (s[i - 1] + s[i]) / (2.0 * h);
        d2[i] = (s[i] - s[i - 1]) / (h * h);
    }
    if m >= 2 {
        d1[0] = (3.0 * s[0] - s[1]) / (2.0 * h);
        d1[m] = (3.0 * s[m - 1] - s[m - 2]) / (2.0 * h);
        d2[0] = d2[1];
        d2[m] = d2[m - 1];
    }
    (d1, d2)
}

/// A solved boundary-value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub psi: Vec<f64>,
    /// Increments `ψ_{i+1} - ψ_i` as produced by the solver.
    pub incr: Vec<f64>,
}

impl Solution {
    pub fn derivatives(&self, h: f64) -> (Vec<f64>, Vec<f64>) {
        derivatives_from_increments(&self.incr, h)
    }
}

/// Solves `Lψ = g` at the interior nodes with the operator's boundary
/// conditions. The boundary entries of `g` are ignored.
pub fn solve(l: &DriftOperator, g: &[f64]) -> Result<Solution> {
    let len = l.grid.len();
    if g.len() != len {
        return Err(Error::Domain("right-hand side length does not match grid".into()));
    }
    let h = l.grid.h();
    let sol = match l.bc_left {
        LeftBc::Regularity => {
            // 3 s_0 - s_1 = 0 and row 1 fix s_0, s_1; rows 2.. march forward
            let mut s = vec![0.0; len - 1];
            let (p1, m1) = l.row_weights(1);
            let pivot = 3.0 * p1 - m1;
            if !(pivot.abs() > 0.0) {
                return Err(Error::Singular { condition: f64::INFINITY });
            }
            s[0] = h * g[1] / pivot;
            s[1] = 3.0 * s[0];
            let mut growth: f64 = 1.0;
            for i in 2..len - 1 {
                let (p, m) = l.row_weights(i);
                growth = growth.max((m / p).abs());
                s[i] = (h * g[i] + m * s[i - 1]) / p;
            }
            if growth > 1.0 + 1e-12 {
                return Err(Error::Singular { condition: growth });
            }
            Solution { psi: from_increments(&s, l.bc_right), incr: s }
        }
        LeftBc::Dirichlet(alpha) => {
            let mut sub = vec![0.0; len];
            let mut diag = vec![1.0; len];
            let mut sup = vec![0.0; len];
            let mut rhs = g.to_vec();
            rhs[0] = alpha;
            rhs[len - 1] = l.bc_right;
            for i in 1..len - 1 {
                let (p, m) = l.row_weights(i);
                sub[i] = m / h;
                diag[i] = -(p + m) / h;
                sup[i] = p / h;
            }
            // scale rows to unit diagonal so the boundary rows are comparable
            for i in 1..len - 1 {
                let d = diag[i].abs();
                sub[i] /= d;
                diag[i] /= d;
                sup[i] /= d;
                rhs[i] /= d;
            }
            let psi = tridiag::solve(&sub, &diag, &sup, &rhs)?;
            Solution { incr: increments(&psi), psi }
        }
    };
    // The march reproduces its own increments, so the plain residual is
    // checked. After a Thomas solve the increments are differences of the
    // values, and the check is on the row-wise backward error instead.
    let lpsi = l.apply_increments(&sol.incr);
    let gmax = g[1..len - 1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rmax: f64 = 0.0;
    let mut backward: f64 = 0.0;
    for i in 1..len - 1 {
        let r = (lpsi[i] - g[i]).abs();
        rmax = rmax.max(r);
        let (p, m) = l.row_weights(i);
        let size = sol.psi[i - 1].abs().max(sol.psi[i].abs()).max(sol.psi[i + 1].abs());
        let scale = g[i].abs() + 2.0 * (p.abs() + m.abs()) / h * size;
        if scale > 0.0 {
            backward = backward.max(r / scale);
        }
    }
    let ok = match l.bc_left {
        LeftBc::Regularity => rmax <= SOLVE_TOL * gmax,
        LeftBc::Dirichlet(_) => backward <= SOLVE_TOL,
    };
    if !ok {
        return Err(Error::Singular { condition: backward / f64::EPSILON });
    }
    Ok(sol)
}

/// Residual of the barrier identity
/// `(Δ - X) e^{-δφ} = -4δ(n - δφ_t) e^{-δφ}` on a Cao-family profile.
pub fn barrier_check(p: &SolitonProfile, delta: f64) -> Result<f64> {
    let n = p.n();
    let len = p.grid().len();
    let phi = p.phi();
    let ex = p.excess();
    let ones = vec![1.0; len];
    let l = assemble(n, phi, p.phi_t(), &ones, p.grid(), LeftBc::Regularity, 0.0)?;
    let s: Vec<f64> = (0..len - 1).map(|i| (-delta * phi[i]).exp() * (-delta * (ex[i + 1] - ex[i])).exp_m1()).collect();
    let lv = l.apply_increments(&s);
    let nf = n as f64;
    Ok((1..len - 1)
        .map(|i| {
            let target = -4.0 * delta * (nf - delta * p.phi_t()[i]) * (-delta * phi[i]).exp();
            (4.0 * lv[i] - target).abs()
        })
        .fold(0.0, f64::max))
}

/// How derivatives are measured inside a [`WeightedNorm`].
#[derive(Debug, Clone, PartialEq)]
pub enum NormGeometry {
    /// Plain divided differences in `t`.
    Plain,
    /// Gradient and Hessian lengths in the radial metric `(u, u_t)`:
    /// `|∇f| = 2|f_t|/√u_t`, Hessian eigenvalues `2f_t/u` and
    /// `4f_tt/u_t - 2f_t/u`.
    Metric { u: Vec<f64>, u_t: Vec<f64> },
}

/// Discrete weighted sup-norm `Σ_{i≤order} sup σ^i w |∇^i f|`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNorm {
    pub weight: Vec<f64>,
    pub sigma: Vec<f64>,
    pub order: usize,
    pub geometry: NormGeometry,
}

impl WeightedNorm {
    pub fn new(weight: Vec<f64>, sigma: Vec<f64>, order: usize, geometry: NormGeometry) -> Result<Self> {
        if order > 2 {
            return Err(Error::Domain(format!("order {order} exceeds 2")));
        }
        if weight.len() != sigma.len() {
            return Err(Error::Domain("weight and sigma lengths differ".into()));
        }
        if sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Domain("sigma must be positive".into()));
        }
        Ok(Self { weight, sigma, order, geometry })
    }

    /// Order-0 norm with weight `w`.
    pub fn sup(weight: Vec<f64>) -> Self {
        let sigma = vec![1.0; weight.len()];
        Self { weight, sigma, order: 0, geometry: NormGeometry::Plain }
    }

    /// Order-2 norm in the metric of the glued data with weight `w_{ε,γ,δ}`.
    pub fn glued(gd: &GluedData, weight: Vec<f64>) -> Self {
        Self {
            weight,
            sigma: gd.sigma().to_vec(),
            order: 2,
            geometry: NormGeometry::Metric { u: gd.u().to_vec(), u_t: gd.u_t().to_vec() },
        }
    }
}

/// Norm of `f` with centered divided differences.
pub fn weighted_norm(f: &[f64], wn: &WeightedNorm, h: f64) -> f64 {
    let (d1, d2) = derivatives_from_increments(&increments(f), h);
    weighted_norm_derivs(f, &d1, &d2, wn)
}

/// Norm from given values and `t`-derivatives.
pub fn weighted_norm_derivs(f: &[f64], d1: &[f64], d2: &[f64], wn: &WeightedNorm) -> f64 {
    let mut sups = [0.0f64; 3];
    for i in 0..f.len() {
        let w = wn.weight[i];
        let s = wn.sigma[i];
        sups[0] = sups[0].max(w * f[i].abs());
        if wn.order == 0 {
            continue;
        }
        let (g1, g2) = match &wn.geometry {
            NormGeometry::Plain => (d1[i].abs(), d2[i].abs()),
            NormGeometry::Metric { u, u_t } => {
                let tang = 2.0 * d1[i] / u[i];
                let rad = 4.0 * d2[i] / u_t[i] - tang;
                (2.0 * d1[i].abs() / u_t[i].sqrt(), tang.abs().max(rad.abs()))
            }
        };
        sups[1] = sups[1].max(s * w * g1);
        if wn.order >= 2 {
            sups[2] = sups[2].max(s * s * w * g2);
        }
    }
    sups[..=wn.order].iter().sum()
}

/// Result of one maximum-principle test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPrincipleOutcome {
    /// `sup w |ψ|`.
    pub lhs: f64,
    /// `max(boundary term, sup w |(Δ-X)ψ| / (4δ(1-δ)n))`.
    pub bound: f64,
}

impl MaxPrincipleOutcome {
    pub fn slack(&self) -> f64 {
        self.bound - self.lhs
    }
    /// `(lhs - bound)/bound`, positive on a violation.
    pub fn relative_violation(&self) -> f64 {
        (self.lhs - self.bound) / self.bound
    }
}

/// Solves `¼(Δ - X)ψ = g` on a Cao-family profile and compares with the
/// barrier bound using `w = e^{δφ}`.
pub fn max_principle_check(
    p: &SolitonProfile,
    delta: f64,
    g: &[f64],
    bc_left: LeftBc,
    bc_right: f64,
) -> Result<MaxPrincipleOutcome> {
    let n = p.n();
    let len = p.grid().len();
    let ones = vec![1.0; len];
    let l = assemble(n, p.phi(), p.phi_t(), &ones, p.grid(), bc_left, bc_right)?;
    let sol = solve(&l, g)?;
    let w: Vec<f64> = p.phi().iter().map(|&v| (delta * v).exp()).collect();
    let lhs = (0..len).map(|i| w[i] * sol.psi[i].abs()).fold(0.0, f64::max);
    let mut boundary = w[len - 1] * bc_right.abs();
    if let LeftBc::Dirichlet(alpha) = bc_left {
        boundary = boundary.max(w[0] * alpha.abs());
    }
    let nf = n as f64;
    let forcing =
        (1..len - 1).map(|i| w[i] * (4.0 * g[i]).abs()).fold(0.0, f64::max) / (4.0 * delta * (1.0 - delta) * nf);
    Ok(MaxPrincipleOutcome { lhs, bound: boundary.max(forcing) })
}

/// Linearized operator on the glued data, `κ = e^{f_ε}` or `κ = 1`.
pub fn glued_operator(gd: &GluedData, kappa_one: bool) -> Result<DriftOperator> {
    let kappa: Vec<f64> = if kappa_one { vec![1.0; gd.f().len()] } else { gd.f().iter().map(|f| f.exp()).collect() };
    assemble(gd.n(), gd.u(), gd.u_t(), &kappa, gd.grid(), LeftBc::Regularity, 0.0)
}

/// Right-hand sides for the inverse-norm estimate: `±w^{-1}`, its
/// restrictions to the regions of the construction, and `w^{-1}` times
/// random bump sums. At least 32 probes are returned.
pub fn probe_set(gd: &GluedData, w_hi: &[f64], rng: &mut SeededRng, random: usize) -> Vec<Vec<f64>> {
    let t = gd.grid().nodes();
    let h = gd.grid().h();
    let base: Vec<f64> = w_hi.iter().map(|w| 1.0 / w).collect();
    let masked = |keep: &dyn Fn(usize) -> bool| -> Vec<f64> {
        (0..base.len()).map(|i| if keep(i) { base[i] } else { 0.0 }).collect()
    };
    let (core, far) = (gd.core_end(), gd.far_start());
    let bubble_edge = 2.0 * gd.eps().ln() + 2.0 * 2f64.ln();
    let mut probes = vec![
        base.clone(),
        base.iter().map(|v| -v).collect(),
        masked(&|i| t[i] < 0.0),
        masked(&|i| t[i] >= 0.0),
        masked(&|i| i < core),
        masked(&|i| i >= core && i < far),
        masked(&|i| i >= far),
        masked(&|i| t[i] <= bubble_edge),
    ];
    let lo = t[0];
    let hi = *t.last().unwrap();
    let count = random.max(32 - probes.len());
    for _ in 0..count {
        let bumps = random_bumps(rng, lo, hi, 4.0 * h, 4.0);
        let vals = sample_bumps(&bumps, t);
        let peak = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        probes.push(vals.iter().zip(&base).map(|(v, b)| v / peak * b).collect());
    }
    probes
}

/// `max ‖ψ‖_{2,w} / ‖g‖_{0,w_hi}` over the probes.
pub fn inverse_norm_estimate(
    gd: &GluedData,
    l: &DriftOperator,
    w: &[f64],
    w_hi: &[f64],
    probes: &[Vec<f64>],
) -> Result<f64> {
    let h = gd.grid().h();
    let len = gd.grid().len();
    let psi_norm = WeightedNorm::glued(gd, w.to_vec());
    let mut best: f64 = 0.0;
    for g in probes {
        let gn = (1..len - 1).map(|i| w_hi[i] * g[i].abs()).fold(0.0, f64::max);
        if gn == 0.0 {
            continue;
        }
        let sol = solve(l, g)?;
        let (d1, d2) = sol.derivatives(h);
        let pn = weighted_norm_derivs(&sol.psi, &d1, &d2, &psi_norm);
        best = best.max(pn / gn);
    }
    Ok(best)
}

/// `max ‖Lψ‖_{0,w_hi} / ‖ψ‖_{2,w}` over `ψ = w^{-1}` times random bump sums
/// vanishing at the far end.
pub fn forward_norm_estimate(
    gd: &GluedData,
    l: &DriftOperator,
    w: &[f64],
    w_hi: &[f64],
    rng: &mut SeededRng,
    samples: usize,
) -> f64 {
    let t = gd.grid().nodes();
    let h = gd.grid().h();
    let len = t.len();
    let psi_norm = WeightedNorm::glued(gd, w.to_vec());
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let bumps = random_bumps(rng, t[0], t[len - 1] - 4.0, 4.0 * h, 4.0);
        let mut psi: Vec<f64> = sample_bumps(&bumps, t).iter().zip(w).map(|(v, w)| v / w).collect();
        psi[len - 1] = 0.0;
        let s = increments(&psi);
        let (d1, d2) = derivatives_from_increments(&s, h);
        let pn = weighted_norm_derivs(&psi, &d1, &d2, &psi_norm);
        let lpsi = l.apply_increments(&s);
        let gn = (1..len - 1).map(|i| w_hi[i] * lpsi[i].abs()).fold(0.0, f64::max);
        if pn > 0.0 {
            best = best.max(gn / pn);
        }
    }
    best
}

/// One point of the inverse-norm sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct InversePoint {
    pub eps: f64,
    /// Estimate for `¼(Δ_ε - e^{f_ε} X)`.
    pub estimate: f64,
    /// Estimate for `¼(Δ_ε - X)`.
    pub estimate_kappa_one: f64,
    /// Forward norm of `¼(Δ_ε - e^{f_ε} X)`.
    pub forward: f64,
    pub failed: Option<String>,
}

/// Inverse-norm estimate at one ε.
pub fn inverse_norm_point(n: u32, spec: WeightSpec, eps: f64, h: f64, seed: u64) -> InversePoint {
    let run = || -> Result<InversePoint> {
        let grid = glue_grid(n, eps, spec.delta(), h)?;
        let gd = build_glued(n, eps, &grid, spec)?;
        let mut rng = seeded(seed);
        let probes = probe_set(&gd, gd.weights_hi(), &mut rng, 24);
        let l = glued_operator(&gd, false)?;
        let l1 = glued_operator(&gd, true)?;
        let estimate = inverse_norm_estimate(&gd, &l, gd.weights(), gd.weights_hi(), &probes)?;
        let estimate_kappa_one = inverse_norm_estimate(&gd, &l1, gd.weights(), gd.weights_hi(), &probes)?;
        let forward = forward_norm_estimate(&gd, &l, gd.weights(), gd.weights_hi(), &mut rng, 32);
        Ok(InversePoint { eps, estimate, estimate_kappa_one, forward, failed: None })
    };
    run().unwrap_or_else(|e| InversePoint {
        eps,
        estimate: f64::NAN,
        estimate_kappa_one: f64::NAN,
        forward: f64::NAN,
        failed: Some(e.to_string()),
    })
}

/// Inverse-norm estimates along an ε sweep. Failures are recorded per point.
pub fn inverse_norm_sweep(n: u32, spec: WeightSpec, eps_list: &[f64], h: f64, seed: u64) -> Vec<InversePoint> {
    eps_list.iter().map(|&eps| inverse_norm_point(n, spec, eps, h, seed)).collect()
}

/// Contrast run at the critical exponent: weight 1 on `t < 0` for `ψ` and
/// `max(r, ε)²` for the right-hand side.
pub fn critical_contrast(n: u32, delta: f64, eps: f64, h: f64, seed: u64) -> Result<f64> {
    let spec = WeightSpec::new(n.max(2), 1.0, delta)?;
    let grid = glue_grid(n, eps, delta, h)?;
    let gd = build_glued(n, eps, &grid, spec)?;
    let w = gd.weight_with(0.0, delta);
    let w_hi = gd.weight_with(2.0, delta);
    let mut rng = seeded(seed);
    let probes = probe_set(&gd, &w_hi, &mut rng, 24);
    let l = glued_operator(&gd, false)?;
    inverse_norm_estimate(&gd, &l, &w, &w_hi, &probes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DEFAULT_H;
    use crate::radial_soliton::solve_profile;
    use crate::rng::uniform_in;

    fn cao(n: u32, lo: f64, hi: f64, h: f64) -> SolitonProfile {
        solve_profile(n, 0.0, &Grid::new(lo, hi, h).unwrap()).unwrap()
    }

    fn op(p: &SolitonProfile, left: LeftBc) -> DriftOperator {
        let ones = vec![1.0; p.grid().len()];
        assemble(p.n(), p.phi(), p.phi_t(), &ones, p.grid(), left, 0.0).unwrap()
    }

    #[test]
    fn constants_are_annihilated_and_linear_is_exact() {
        let p = cao(2, -5.0, 10.0, DEFAULT_H);
        let l = op(&p, LeftBc::Regularity);
        let c = vec![3.5; p.grid().len()];
        assert!(l.apply(&c).iter().all(|&v| v == 0.0));
        let lin: Vec<f64> = p.grid().nodes().to_vec();
        let out = l.apply(&lin);
        for i in 1..out.len() - 1 {
            let exact = 1.0 / p.phi()[i] + 1.0;
            assert!((out[i] - exact).abs() < 1e-9 * exact, "{} vs {exact}", out[i]);
        }
    }

    #[test]
    fn consistency_is_second_order() {
        let err = |h: f64| {
            let p = cao(2, -3.0, 3.0, h);
            let l = op(&p, LeftBc::Regularity);
            let t = p.grid().nodes();
            let psi: Vec<f64> = t.iter().map(|&x| (-x * x).exp()).collect();
            let out = l.apply(&psi);
            (1..t.len() - 1)
                .map(|i| {
                    let x = t[i];
                    let g = (-x * x).exp();
                    let d1 = -2.0 * x * g;
                    let d2 = (4.0 * x * x - 2.0) * g;
                    let exact = d2 / p.phi_t()[i] + (1.0 / p.phi()[i] + 1.0) * d1;
                    (out[i] - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(1.0 / 32.0) / err(1.0 / 64.0);
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn round_trip_recovers_known_solution() {
        let p = cao(2, -10.0, 20.0, DEFAULT_H);
        let t = p.grid().nodes();
        // ψ_t vanishes at the left end, ψ at the right end
        let psi0: Vec<f64> = t.iter().map(|&x| (-(x - 2.0) * (x - 2.0) / 4.0).exp()).collect();
        let mut l = op(&p, LeftBc::Regularity);
        l.bc_right = psi0[t.len() - 1];
        let g = l.apply(&psi0);
        let sol = solve(&l, &g).unwrap();
        let err = sol.psi.iter().zip(&psi0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // the discrete regularity row differs from ψ0's own ψ_t(-10) ~ 1e-19
        assert!(err < 1e-9, "err {err}");
        let ld = op(&p, LeftBc::Dirichlet(psi0[0]));
        let mut ld = ld;
        ld.bc_right = psi0[t.len() - 1];
        let sol = solve(&ld, &g).unwrap();
        let err = sol.psi.iter().zip(&psi0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn nonnegative_forcing_gives_nonpositive_solution() {
        let p = cao(2, -8.0, 20.0, 1.0 / 64.0);
        let mut rng = seeded(11);
        for left in [LeftBc::Dirichlet(0.0), LeftBc::Regularity] {
            let l = op(&p, left);
            for _ in 0..16 {
                let g: Vec<f64> = (0..p.grid().len()).map(|_| uniform_in(&mut rng, 0.0, 1.0)).collect();
                let sol = solve(&l, &g).unwrap();
                assert!(sol.psi.iter().all(|&v| v <= 1e-14), "{left:?}");
            }
        }
    }

    #[test]
    fn barrier_identity_second_order() {
        for n in [2u32, 3] {
            for delta in [0.25, 0.5, 0.75] {
                let r1 = barrier_check(&cao(n, -10.0, 20.0, 1.0 / 64.0), delta).unwrap();
                let r2 = barrier_check(&cao(n, -10.0, 20.0, 1.0 / 128.0), delta).unwrap();
                assert!(r2 < 1e-4, "n={n} δ={delta}: {r2}");
                let ratio = r1 / r2;
                assert!((ratio - 4.0).abs() < 0.8, "n={n} δ={delta}: ratio {ratio}");
            }
        }
    }

    #[test]
    fn barrier_limit_at_infinity() {
        // e^{δφ}(Δ - X)e^{-δφ} = -4δ(n - δφ_t) → -4δ(1-δ)n
        let p = cao(2, 100.0, 400.0, 1.0 / 16.0);
        let delta = 0.5;
        let last = p.grid().len() - 2;
        let ratio = -4.0 * delta * (2.0 - delta * p.phi_t()[last]);
        assert!((ratio + 4.0 * delta * (1.0 - delta) * 2.0).abs() < 0.01);
    }

    #[test]
    fn barrier_residual_linear_in_small_delta() {
        let p = cao(2, -10.0, 20.0, 1.0 / 64.0);
        let a = barrier_check(&p, 1e-3).unwrap();
        let b = barrier_check(&p, 2e-3).unwrap();
        assert!((b / a - 2.0).abs() < 0.01, "{}", b / a);
    }

    #[test]
    fn norm_trivia() {
        let len = 20;
        let ones = vec![1.0; len];
        let wn = WeightedNorm::sup(ones.clone());
        assert_eq!(weighted_norm(&ones, &wn, 0.1), 1.0);
        let p = cao(2, 0.0, 5.0, 1.0 / 8.0);
        let w: Vec<f64> = p.phi().iter().map(|&x| (0.5 * x).exp()).collect();
        let f: Vec<f64> = p.phi().iter().map(|&x| (-0.5 * x).exp()).collect();
        let v = weighted_norm(&f, &WeightedNorm::sup(w.clone()), 1.0 / 8.0);
        assert!((v - 1.0).abs() < 1e-15);
        let wn2 = WeightedNorm::new(w.clone(), vec![0.25; w.len()], 2, NormGeometry::Plain).unwrap();
        let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        let wn3 = WeightedNorm::new(w2, vec![0.25; w.len()], 2, NormGeometry::Plain).unwrap();
        let a = weighted_norm(&f, &wn2, 1.0 / 8.0);
        let b = weighted_norm(&f, &wn3, 1.0 / 8.0);
        assert!((b - 2.0 * a).abs() < 1e-14 * b);
        assert!(WeightedNorm::new(vec![1.0], vec![1.0], 3, NormGeometry::Plain).is_err());
    }

    #[test]
    fn metric_norm_of_r_squared_on_flat_space() {
        // |∇ r²| = 2r and both Hessian eigenvalues of r² equal 2
        let g = Grid::new(-4.0, 0.0, 1.0 / 64.0).unwrap();
        let e: Vec<f64> = g.nodes().iter().map(|t| t.exp()).collect();
        let ones = vec![1.0; e.len()];
        let wn =
            WeightedNorm::new(ones.clone(), ones, 2, NormGeometry::Metric { u: e.clone(), u_t: e.clone() }).unwrap();
        let d = e.clone();
        let v = weighted_norm_derivs(&e, &d, &d, &wn);
        assert!((v - (1.0 + 2.0 + 2.0)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn weighted_maximum_principle() {
        let p = cao(2, -10.0, 30.0, 1.0 / 32.0);
        let delta = 0.5;
        let mut rng = seeded(5);
        let t = p.grid().nodes().to_vec();
        for k in 0..8 {
            let bumps = random_bumps(&mut rng, -10.0, 30.0, 0.125, 4.0);
            let g: Vec<f64> =
                sample_bumps(&bumps, &t).iter().zip(p.phi()).map(|(v, &x)| v * (-delta * x).exp()).collect();
            let right = if k % 2 == 0 { 0.0 } else { uniform_in(&mut rng, -1.0, 1.0) * 1e-6 };
            let out = max_principle_check(&p, delta, &g, LeftBc::Regularity, right).unwrap();
            assert!(out.relative_violation() < 1e-9, "{out:?}");
        }
    }

    #[test]
    fn increments_round_trip() {
        let v = vec![1.0, 4.0, 2.0, -3.0];
        let s = increments(&v);
        assert_eq!(from_increments(&s, -3.0), v);
    }
}
