//! The nonlinear stage: the radial Monge-Ampère operator
//! `T_ε(Ψ) = (ω_ε + i∂∂̄Ψ)ⁿ/ω_εⁿ - e^{¼XΨ + f_ε}`, its linearization, the
//! quantitative inverse-function certificate and the Newton solve.
//!
//! The unknown is carried as the increments of `Ψ` on the grid. The discrete
//! problem is `T_ε = 0` at interior nodes, `Ψ_t = 0` at the left end and
//! `Ψ = 0` at the right end.

use crate::drift_operator::{
    derivatives_from_increments, from_increments, increments, solve, weighted_norm_derivs, DriftOperator, LeftBc,
    WeightedNorm, SOLVE_TOL,
};
use crate::error::{Error, Result};
use crate::glue::{GluedData, WeightSpec};
use crate::radial_soliton::{solve_profile, RadialMetric};
use crate::rng::{random_bumps, sample_bumps, uniform_in, Bump, SeededRng};

/// Newton iteration cap.
pub const MAX_NEWTON_ITER: usize = 30;
/// Smallest damping factor tried by the line search.
pub const MIN_DAMPING: f64 = 1.0 / 64.0;
/// Resampling budget when a random perturbation leaves the Kähler cone.
const MAX_RESAMPLE: usize = 50;

/// `log(1 + x) - x`, accurate for small `x`.
fn log1p_minus_x(x: f64) -> f64 {
    if x.abs() < 0.05 {
        // -Σ_{k≥2} (-x)^k / k ... written as Σ (-1)^{k+1} x^k / k from k = 2
        let mut term = x * x;
        let mut acc = 0.0;
        for k in 2..40 {
            let v = term / k as f64;
            acc += if k % 2 == 0 { -v } else { v };
            term *= x;
            if v.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        acc
    } else {
        x.ln_1p() - x
    }
}

/// `e^x - 1 - x`, accurate for small `x`.
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.05 {
        let mut term = x * x / 2.0;
        let mut acc = 0.0;
        for k in 3..40 {
            acc += term;
            term *= x / k as f64;
            if term.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        acc
    } else {
        x.exp_m1() - x
    }
}

/// `(Ψ_t/u, Ψ_tt/u_t)` per node, failing outside the Kähler cone.
fn relative_parts(gd: &GluedData, psi_t: &[f64], psi_tt: &[f64]) -> Result<Vec<(f64, f64)>> {
    let t = gd.grid().nodes();
    let mut out = Vec::with_capacity(t.len());
    let mut worst: Option<(usize, f64)> = None;
    for i in 0..t.len() {
        let x = psi_t[i] / gd.u()[i];
        let y = psi_tt[i] / gd.u_t()[i];
        let m = x.min(y);
        if !(m > -1.0) && worst.map_or(true, |(_, w)| m < w) {
            worst = Some((i, m));
        }
        out.push((x, y));
    }
    match worst {
        Some((i, _)) => Err(Error::LeftKahlerCone { node: i, t: t[i] }),
        None => Ok(out),
    }
}

/// `T_ε(Ψ)` per node, from `Ψ_t` and `Ψ_tt`.
pub fn monge_ampere(gd: &GluedData, psi_t: &[f64], psi_tt: &[f64]) -> Result<Vec<f64>> {
    let nf = gd.n() as f64;
    let parts = relative_parts(gd, psi_t, psi_tt)?;
    Ok(parts
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let a = (nf - 1.0) * x.ln_1p() + y.ln_1p();
            a.exp_m1() - (gd.f()[i] - psi_t[i]).exp_m1()
        })
        .collect())
}

/// Coefficients `(of ψ_tt, of ψ_t)` of the linearization of `T_ε` at `Ψ`.
pub fn linearize(gd: &GluedData, psi_t: &[f64], psi_tt: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nf = gd.n() as f64;
    let parts = relative_parts(gd, psi_t, psi_tt)?;
    let mut a = Vec::with_capacity(parts.len());
    let mut b = Vec::with_capacity(parts.len());
    for (i, &(x, y)) in parts.iter().enumerate() {
        let (u, ut) = (gd.u()[i], gd.u_t()[i]);
        a.push((1.0 + x).powf(nf - 1.0) / ut);
        b.push((nf - 1.0) * (1.0 + y) * (1.0 + x).powf(nf - 2.0) / u + (gd.f()[i] - psi_t[i]).exp());
    }
    Ok((a, b))
}

/// The linearization at `Ψ` as a drift operator with the solve's boundary
/// conditions.
pub fn linear_operator(gd: &GluedData, psi_t: &[f64], psi_tt: &[f64]) -> Result<DriftOperator> {
    let (a, b) = linearize(gd, psi_t, psi_tt)?;
    DriftOperator::from_coefficients(gd.grid(), a, b, LeftBc::Regularity, 0.0)
}

/// `Q(Ψ) = T(Ψ) - T(0) - L_0 Ψ` per node, summed term by term so that the
/// linear parts cancel exactly.
pub fn quadratic_remainder(gd: &GluedData, psi_t: &[f64], psi_tt: &[f64]) -> Result<Vec<f64>> {
    let nf = gd.n() as f64;
    let parts = relative_parts(gd, psi_t, psi_tt)?;
    Ok(parts
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let a = (nf - 1.0) * x.ln_1p() + y.ln_1p();
            let a_lin_gap = (nf - 1.0) * log1p_minus_x(x) + log1p_minus_x(y);
            expm1_minus_x(a) + a_lin_gap - gd.f()[i].exp() * expm1_minus_x(-psi_t[i])
        })
        .collect())
}

/// A perturbation `Ψ` carried through its increments.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub incr: Vec<f64>,
}

impl Perturbation {
    pub fn zero(len: usize) -> Self {
        Self { incr: vec![0.0; len - 1] }
    }
    pub fn psi(&self) -> Vec<f64> {
        from_increments(&self.incr, 0.0)
    }
    /// Interior `(Ψ_t, Ψ_tt)`; the boundary entries are zero.
    pub fn interior_derivatives(&self, h: f64) -> (Vec<f64>, Vec<f64>) {
        let (mut d1, mut d2) = derivatives_from_increments(&self.incr, h);
        let last = d1.len() - 1;
        for v in [&mut d1, &mut d2] {
            v[0] = 0.0;
            v[last] = 0.0;
        }
        (d1, d2)
    }
    /// Weighted order-2 norm in the glued metric.
    pub fn norm(&self, gd: &GluedData, wn: &WeightedNorm) -> f64 {
        let (d1, d2) = derivatives_from_increments(&self.incr, gd.grid().h());
        weighted_norm_derivs(&self.psi(), &d1, &d2, wn)
    }
}

/// Interior residual `T_ε(Ψ)` with zero boundary entries.
pub fn interior_residual(gd: &GluedData, psi: &Perturbation) -> Result<Vec<f64>> {
    let (d1, d2) = psi.interior_derivatives(gd.grid().h());
    let mut r = monge_ampere(gd, &d1, &d2)?;
    let last = r.len() - 1;
    r[0] = 0.0;
    r[last] = 0.0;
    Ok(r)
}

fn sup_weighted(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(a, w)| w * a.abs()).fold(0.0, f64::max)
}

/// Radius of the ball in which `|Ψ_t|/u` and `|Ψ_tt|/u_t` stay below ½:
/// `min σ² w_{ε,γ,δ}`.
pub fn validity_radius(gd: &GluedData) -> f64 {
    gd.sigma().iter().zip(gd.weights()).map(|(s, w)| s * s * w).fold(f64::INFINITY, f64::min)
}

/// Where random perturbations are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleRegion {
    Everywhere,
    /// Only where the glued metric is the Cao soliton.
    CaoOnly,
}

/// A random `Ψ = w^{-1} Σ bumps` with `Ψ_t(t_min) = 0` to discrete order,
/// scaled to weighted norm `target`.
pub fn random_perturbation(gd: &GluedData, region: SampleRegion, target: f64, rng: &mut SeededRng) -> Perturbation {
    let t = gd.grid().nodes();
    let h = gd.grid().h();
    let len = t.len();
    let lo = match region {
        SampleRegion::Everywhere => t[0] + 1.0,
        SampleRegion::CaoOnly => t[gd.far_start().min(len - 1)] + 2.0,
    };
    let hi = t[len - 1] - 2.0;
    let bumps: Vec<Bump> = random_bumps(rng, lo, hi, 4.0 * h, 2.0);
    let mut psi: Vec<f64> = sample_bumps(&bumps, t).iter().zip(gd.weights()).map(|(v, w)| v / w).collect();
    if region == SampleRegion::CaoOnly {
        // bumps may spill a little below the Cao region
        let start = gd.far_start().min(len - 1);
        for v in psi.iter_mut().take(start) {
            *v = 0.0;
        }
    }
    let mut incr = increments(&psi);
    incr[0] = incr[1] / 3.0;
    let mut p = Perturbation { incr };
    let wn = WeightedNorm::glued(gd, gd.weights().to_vec());
    let nrm = p.norm(gd, &wn);
    if nrm > 0.0 {
        let k = target / nrm;
        p.incr.iter_mut().for_each(|v| *v *= k);
    }
    p
}

/// Empirical quadratic constant
/// `max ‖Q(Ψ) - Q(Ψ')‖ / (‖Ψ - Ψ'‖ (‖Ψ‖ + ‖Ψ'‖))` over random pairs in the
/// ball of the given weighted radius.
pub fn quadratic_bound(
    gd: &GluedData,
    spec: WeightSpec,
    samples: usize,
    radius: f64,
    region: SampleRegion,
    rng: &mut SeededRng,
) -> Result<f64> {
    let h = gd.grid().h();
    let wn = WeightedNorm::glued(gd, gd.weights().to_vec());
    let w_hi = gd.weight_with(spec.gamma() + 2.0, spec.delta());
    let draw = |rng: &mut SeededRng| -> Result<(Perturbation, Vec<f64>)> {
        for _ in 0..MAX_RESAMPLE {
            let r = radius * uniform_in(rng, 0.05, 1.0);
            let p = random_perturbation(gd, region, r, rng);
            let (d1, d2) = p.interior_derivatives(h);
            match quadratic_remainder(gd, &d1, &d2) {
                Ok(q) => return Ok((p, q)),
                Err(Error::LeftKahlerCone { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Sampling(format!("no admissible perturbation after {MAX_RESAMPLE} draws")))
    };
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let (p, qp) = draw(rng)?;
        let (p2, qp2) = draw(rng)?;
        let diff = Perturbation { incr: p.incr.iter().zip(&p2.incr).map(|(a, b)| a - b).collect() };
        let dn = diff.norm(gd, &wn);
        let sum = p.norm(gd, &wn) + p2.norm(gd, &wn);
        if dn == 0.0 || sum == 0.0 {
            continue;
        }
        let len = qp.len();
        let dq: Vec<f64> = (0..len).map(|i| if i == 0 || i == len - 1 { 0.0 } else { qp[i] - qp2[i] }).collect();
        best = best.max(sup_weighted(&dq, &w_hi) / (dn * sum));
    }
    Ok(best)
}

/// The constants of the quantitative inverse function theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IftCertificate {
    pub c: f64,
    pub q: f64,
    pub t0_norm: f64,
    pub r0: f64,
    pub certified_radius: f64,
    pub condition_met: bool,
}

/// `‖T(0)‖ < (1/(2c)) min(r0, 1/(2qc))` certifies a unique zero in the ball
/// of radius `min(r0, 1/(2qc))`.
pub fn ift_certificate(c: f64, q: f64, t0_norm: f64, r0: f64) -> IftCertificate {
    let certified_radius = r0.min(1.0 / (2.0 * q * c));
    IftCertificate { c, q, t0_norm, r0, certified_radius, condition_met: t0_norm < certified_radius / (2.0 * c) }
}

/// One Newton iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonStep {
    /// Weighted residual before the step.
    pub residual: f64,
    /// Weighted norm of the accepted step.
    pub step: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: Vec<NewtonStep>,
    pub final_residual: f64,
    pub converged: bool,
    pub solution: Perturbation,
    pub psi_t: Vec<f64>,
    pub psi_tt: Vec<f64>,
}

impl NewtonReport {
    /// Residuals before each step and after the last one.
    pub fn residuals(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.iterations.iter().map(|s| s.residual).collect();
        r.push(self.final_residual);
        r
    }

    /// `max r_{k+1} / r_k²` over the steps taken once the residual is below
    /// `1e-4` of its initial value (or over the last step if it never is),
    /// ignoring steps that land on the floor `floor`.
    pub fn quadratic_constant(&self, floor: f64) -> Option<f64> {
        let r = self.residuals();
        let r0 = r[0];
        let mut best: Option<f64> = None;
        for k in 0..r.len().saturating_sub(1) {
            let late = r[k] < 1e-4 * r0 || k + 2 == r.len();
            if late && r[k + 1] > floor && r[k] > 0.0 {
                let c = r[k + 1] / (r[k] * r[k]);
                best = Some(best.map_or(c, |b: f64| b.max(c)));
            }
        }
        best
    }
}

/// Damped Newton from `Ψ = 0`.
pub fn newton_solve(gd: &GluedData, spec: WeightSpec, tol: f64) -> NewtonReport {
    newton_solve_from(gd, spec, tol, Perturbation::zero(gd.grid().len()))
}

/// Damped Newton from a given start. Backtracks by halves on the weighted
/// residual down to [`MIN_DAMPING`].
pub fn newton_solve_from(gd: &GluedData, spec: WeightSpec, tol: f64, start: Perturbation) -> NewtonReport {
    let h = gd.grid().h();
    let w_hi = gd.weight_with(spec.gamma() + 2.0, spec.delta());
    let wn = WeightedNorm::glued(gd, gd.weights().to_vec());
    let mut state = start;
    let mut iterations = Vec::new();
    let mut converged = false;
    let residual_of = |p: &Perturbation| interior_residual(gd, p).map(|r| (sup_weighted(&r, &w_hi), r));
    let (mut res, mut r) = match residual_of(&state) {
        Ok(v) => v,
        Err(_) => (f64::INFINITY, Vec::new()),
    };
    if res.is_finite() {
        for _ in 0..MAX_NEWTON_ITER {
            if res < tol {
                converged = true;
                break;
            }
            let (d1, d2) = state.interior_derivatives(h);
            let step = linear_operator(gd, &d1, &d2).and_then(|l| {
                let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
                solve(&l, &rhs)
            });
            let Ok(step) = step else { break };
            let mut lambda = 1.0;
            let mut accepted = None;
            while lambda >= MIN_DAMPING {
                let trial =
                    Perturbation { incr: state.incr.iter().zip(&step.incr).map(|(a, b)| a + lambda * b).collect() };
                if let Ok((tres, tr)) = residual_of(&trial) {
                    if tres < res {
                        accepted = Some((trial, tres, tr));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            let Some((trial, tres, tr)) = accepted else { break };
            let step_norm = lambda * Perturbation { incr: step.incr.clone() }.norm(gd, &wn);
            iterations.push(NewtonStep { residual: res, step: step_norm, damping: lambda });
            state = trial;
            res = tres;
            r = tr;
        }
        if res < tol {
            converged = true;
        }
    }
    let (psi_t, psi_tt) = derivatives_from_increments(&state.incr, h);
    NewtonReport { iterations, final_residual: res, converged, solution: state, psi_t, psi_tt }
}

/// The converged metric `v = u_ε + Ψ_t`, `v_t = ∂_t u_ε + Ψ_tt`.
pub fn converged_metric(gd: &GluedData, report: &NewtonReport) -> Result<RadialMetric> {
    let v = gd.u().iter().zip(&report.psi_t).map(|(a, b)| a + b).collect();
    let vt = gd.u_t().iter().zip(&report.psi_tt).map(|(a, b)| a + b).collect();
    RadialMetric::new(gd.grid().clone(), v, vt)
}

/// `sup |v - φ_{ε²}|` against the exact family member on the same grid.
pub fn family_compare(gd: &GluedData, report: &NewtonReport) -> Result<f64> {
    if !report.converged {
        return Err(Error::NotConverged);
    }
    let m = converged_metric(gd, report)?;
    let eps2 = gd.eps() * gd.eps();
    let exact = solve_profile(gd.n(), eps2, gd.grid())?;
    Ok(m.u().iter().zip(exact.phi()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Newton from `starts` random points in the ball of radius `radius`;
/// returns the largest sup-distance in `Ψ_t` to the solve from `Ψ = 0`.
pub fn multi_start_spread(
    gd: &GluedData,
    spec: WeightSpec,
    tol: f64,
    starts: usize,
    radius: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    let base = newton_solve(gd, spec, tol);
    if !base.converged {
        return Err(Error::NotConverged);
    }
    let mut spread: f64 = 0.0;
    for _ in 0..starts {
        let start = random_perturbation(gd, SampleRegion::Everywhere, radius * uniform_in(rng, 0.1, 1.0), rng);
        let rep = newton_solve_from(gd, spec, tol, start);
        if !rep.converged {
            return Err(Error::NotConverged);
        }
        let len = base.psi_t.len();
        let d = (1..len - 1).map(|i| (rep.psi_t[i] - base.psi_t[i]).abs()).fold(0.0, f64::max);
        spread = spread.max(d);
    }
    Ok(spread)
}

/// Largest value over random `ψ` of
/// `log((u+ψ_t)^{n-1}(u_t+ψ_tt)/(u^{n-1}u_t)) - [(n-1)ψ_t/u + ψ_tt/u_t]`,
/// which concavity of the logarithm keeps `<= 0`.
pub fn convexity_check(m: &RadialMetric, n: u32, samples: usize, rng: &mut SeededRng) -> Result<f64> {
    convexity_check_scaled(m, n, samples, None, rng)
}

/// As [`convexity_check`] with every sample scaled so that
/// `max(|ψ_t|/u, |ψ_tt|/u_t)` equals `scale` (random in `(0, 0.9)` if `None`).
pub fn convexity_check_scaled(
    m: &RadialMetric,
    n: u32,
    samples: usize,
    scale: Option<f64>,
    rng: &mut SeededRng,
) -> Result<f64> {
    let nf = n as f64;
    let t = m.grid().nodes();
    let h = m.grid().h();
    let (lo, hi) = (t[0], t[t.len() - 1]);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let bumps = random_bumps(rng, lo, hi, 4.0 * h, 2.0);
        let derivs: Vec<(f64, f64)> = t
            .iter()
            .map(|&x| {
                bumps.iter().fold((0.0, 0.0), |acc, b| {
                    let (_, d1, d2) = b.eval(x);
                    (acc.0 + d1, acc.1 + d2)
                })
            })
            .collect();
        let peak = derivs
            .iter()
            .enumerate()
            .map(|(i, &(d1, d2))| (d1 / m.u()[i]).abs().max((d2 / m.u_t()[i]).abs()))
            .fold(0.0, f64::max);
        if peak == 0.0 {
            continue;
        }
        let target = scale.unwrap_or_else(|| uniform_in(rng, 0.01, 0.9));
        let k = target / peak;
        for (i, &(d1, d2)) in derivs.iter().enumerate() {
            let x = k * d1 / m.u()[i];
            let y = k * d2 / m.u_t()[i];
            if !(x > -1.0 && y > -1.0) {
                return Err(Error::LeftKahlerCone { node: i, t: t[i] });
            }
            worst = worst.max((nf - 1.0) * log1p_minus_x(x) + log1p_minus_x(y));
        }
    }
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

/// Measured certificate at one ε.
#[derive(Debug, Clone, PartialEq)]
pub struct IftPoint {
    pub eps: f64,
    pub certificate: IftCertificate,
}

/// The certificate from measured constants at one ε: `c` from the probe
/// inverse norm, `q` from the quadratic bound in the validity ball,
/// `‖T(0)‖` from the error norm, `r0` from [`validity_radius`].
pub fn measured_certificate(
    gd: &GluedData,
    spec: WeightSpec,
    c: f64,
    samples: usize,
    rng: &mut SeededRng,
) -> Result<IftCertificate> {
    let r0 = validity_radius(gd);
    let q = quadratic_bound(gd, spec, samples, r0, SampleRegion::Everywhere, rng)?;
    let t0 = crate::glue::error_norm(gd, spec);
    Ok(ift_certificate(c, q, t0, r0))
}

/// Largest sweep ε below which every sweep point meets the condition.
pub fn eps_star(points: &[IftPoint]) -> Option<f64> {
    let mut sorted: Vec<&IftPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let mut star = None;
    for p in sorted {
        if p.certificate.condition_met {
            star = Some(p.eps);
        } else {
            break;
        }
    }
    star
}

/// Residual floor used when fitting the quadratic constant.
pub fn residual_floor() -> f64 {
    1e2 * SOLVE_TOL * f64::EPSILON
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift_operator::glued_operator;
    use crate::glue::{build_glued, glue_grid};
    use crate::grid::{Grid, DEFAULT_H};
    use crate::radial_soliton::soliton_residual;
    use crate::rng::seeded;

    fn spec() -> WeightSpec {
        WeightSpec::new(2, 1.0, 0.5).unwrap()
    }

    fn glued(eps: f64, h: f64) -> GluedData {
        let g = glue_grid(2, eps, 0.5, h).unwrap();
        build_glued(2, eps, &g, spec()).unwrap()
    }

    #[test]
    fn series_helpers() {
        for x in [-0.04, -1e-6, 1e-9, 0.03, 0.2, -0.4] {
            let a = log1p_minus_x(x);
            let b = expm1_minus_x(x);
            assert!((a - (x.ln_1p() - x)).abs() < 1e-15 * x.abs().max(1e-3));
            assert!((b - (x.exp_m1() - x)).abs() < 1e-15 * x.abs().max(1e-3));
        }
        assert!(log1p_minus_x(1e-9) < 0.0 && expm1_minus_x(1e-9) > 0.0);
    }

    #[test]
    fn zero_perturbation_gives_error_term() {
        let gd = glued(1e-2, DEFAULT_H);
        let len = gd.grid().len();
        let z = vec![0.0; len];
        let t = monge_ampere(&gd, &z, &z).unwrap();
        for i in 0..len {
            assert_eq!(t[i], -gd.f()[i].exp_m1());
            if i >= gd.far_start() {
                assert_eq!(t[i], 0.0);
            }
        }
    }

    #[test]
    fn linearization_at_zero_is_the_drift_operator() {
        let gd = glued(1e-2, DEFAULT_H);
        let len = gd.grid().len();
        let z = vec![0.0; len];
        let (a, b) = linearize(&gd, &z, &z).unwrap();
        let l = glued_operator(&gd, false).unwrap();
        for i in 0..len {
            assert!((a[i] - l.coeff_a()[i]).abs() <= 1e-12 * a[i]);
            assert!((b[i] - l.coeff_b()[i]).abs() <= 1e-12 * b[i]);
            if i >= gd.far_start() {
                assert!((b[i] - (1.0 / gd.u()[i] + 1.0)).abs() < 1e-15 * b[i]);
            }
        }
    }

    #[test]
    fn directional_derivative_matches() {
        let gd = glued(1e-2, DEFAULT_H);
        let h = gd.grid().h();
        let mut rng = seeded(3);
        let r0 = validity_radius(&gd);
        let base = random_perturbation(&gd, SampleRegion::Everywhere, 0.3 * r0, &mut rng);
        let dir = random_perturbation(&gd, SampleRegion::Everywhere, 0.3 * r0, &mut rng);
        let (b1, b2) = base.interior_derivatives(h);
        let (d1, d2) = dir.interior_derivatives(h);
        let t0 = monge_ampere(&gd, &b1, &b2).unwrap();
        let (a, b) = linearize(&gd, &b1, &b2).unwrap();
        let lin: Vec<f64> = (0..a.len()).map(|i| a[i] * d2[i] + b[i] * d1[i]).collect();
        let scale = lin.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut errs = Vec::new();
        for s in [1e-3, 1e-4, 1e-5] {
            let p1: Vec<f64> = (0..a.len()).map(|i| b1[i] + s * d1[i]).collect();
            let p2: Vec<f64> = (0..a.len()).map(|i| b2[i] + s * d2[i]).collect();
            let t1 = monge_ampere(&gd, &p1, &p2).unwrap();
            let e = (0..a.len()).map(|i| ((t1[i] - t0[i]) / s - lin[i]).abs()).fold(0.0, f64::max);
            errs.push(e / scale);
        }
        assert!(errs[0] < 1e-2, "{errs:?}");
        assert!((errs[0] / errs[1] - 10.0).abs() < 2.0, "{errs:?}");
    }

    #[test]
    fn exact_family_member_is_annihilated() {
        for n in [2u32, 3] {
            let sp = WeightSpec::new(n, 1.0, 0.5).unwrap();
            for eps in [1e-2, 1e-3] {
                let g = glue_grid(n, eps, 0.5, DEFAULT_H).unwrap();
                let gd = build_glued(n, eps, &g, sp).unwrap();
                let exact = solve_profile(n, eps * eps, gd.grid()).unwrap();
                // Ψ_t = φ_{ε²} - u_ε, Ψ_tt from the exact φ_t
                let psi_t: Vec<f64> = exact.phi().iter().zip(gd.u()).map(|(a, b)| a - b).collect();
                let psi_tt: Vec<f64> = exact.phi_t().iter().zip(gd.u_t()).map(|(a, b)| a - b).collect();
                let t = monge_ampere(&gd, &psi_t, &psi_tt).unwrap();
                let worst = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(worst < 1e-10, "n={n} eps={eps}: {worst}");
            }
        }
    }

    #[test]
    fn quadratic_remainder_vanishes_at_zero_and_is_quadratic() {
        let gd = glued(1e-2, DEFAULT_H);
        let h = gd.grid().h();
        let len = gd.grid().len();
        let z = vec![0.0; len];
        assert!(quadratic_remainder(&gd, &z, &z).unwrap().iter().all(|&v| v == 0.0));
        let mut rng = seeded(9);
        let r0 = validity_radius(&gd);
        let p = random_perturbation(&gd, SampleRegion::Everywhere, 0.5 * r0, &mut rng);
        let (d1, d2) = p.interior_derivatives(h);
        let q1 = quadratic_remainder(&gd, &d1, &d2).unwrap();
        let half1: Vec<f64> = d1.iter().map(|v| 0.5 * v).collect();
        let half2: Vec<f64> = d2.iter().map(|v| 0.5 * v).collect();
        let q2 = quadratic_remainder(&gd, &half1, &half2).unwrap();
        let m1 = q1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let m2 = q2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((m1 / m2 - 4.0).abs() < 0.6, "{}", m1 / m2);
    }

    #[test]
    fn certificate_arithmetic() {
        let c = ift_certificate(1.0, 1.0, 0.1, 1.0);
        assert_eq!(c.certified_radius, 0.5);
        assert!(c.condition_met);
        assert!(!ift_certificate(1.0, 1.0, 0.3, 1.0).condition_met);
    }

    #[test]
    fn newton_converges_and_matches_family() {
        let gd = glued(1e-2, DEFAULT_H);
        let rep = newton_solve(&gd, spec(), 1e-10);
        assert!(rep.converged, "{:?}", rep.iterations);
        assert!(rep.final_residual < 1e-10);
        let err = family_compare(&gd, &rep).unwrap();
        assert!(err <= 5.0 * DEFAULT_H * DEFAULT_H, "{err}");
        // soliton residual of v is flat and the class is preserved
        let m = converged_metric(&gd, &rep).unwrap();
        let s = soliton_residual(&m, 2).unwrap();
        let len = s.len();
        let (lo, hi) = s[1..len - 1].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi - lo <= 1e-8, "{}", hi - lo);
        assert!((m.u()[0] - gd.u()[0]).abs() < 1e-10);
    }

    #[test]
    fn gauge_invariance() {
        let gd = glued(1e-2, 1.0 / 64.0);
        let mut rng = seeded(21);
        let p = random_perturbation(&gd, SampleRegion::Everywhere, 0.1 * validity_radius(&gd), &mut rng);
        // a constant shift leaves every increment unchanged
        let shifted: Vec<f64> = p.psi().iter().map(|v| v + 7.0).collect();
        let q = Perturbation { incr: increments(&shifted) };
        let a = interior_residual(&gd, &p).unwrap();
        let b = interior_residual(&gd, &q).unwrap();
        let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-6 * scale, "{worst} vs {scale}");
    }

    #[test]
    fn convexity_inequality() {
        let g = Grid::new(-10.0, 20.0, DEFAULT_H).unwrap();
        let m = solve_profile(2, 0.0, &g).unwrap().metric();
        let mut rng = seeded(17);
        assert!(convexity_check(&m, 2, 100, &mut rng).unwrap() <= 1e-12);
        let a = convexity_check_scaled(&m, 2, 1, Some(0.02), &mut seeded(4)).unwrap();
        let b = convexity_check_scaled(&m, 2, 1, Some(0.01), &mut seeded(4)).unwrap();
        // the largest gap is the least negative one, so compare magnitudes of
        // the most negative instead through a single sample at fixed shape
        assert!(a <= 0.0 && b <= 0.0);
    }
}
