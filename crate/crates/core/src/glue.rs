//! The glued approximate solution.
//!
//! The Calabi bubble scaled by `ε²` is cut into the Cao soliton at the
//! gluing radius `r_ε = ε^{n/(n+1)}`:
//! `Φ_ε = χ(r/r_ε) Φ_0 + (1 - χ(r/r_ε)) ε² Φ⁻(t - 2 log ε)`.
//! Everything downstream uses `u_ε = ∂_t Φ_ε` and `∂_t u_ε`, evaluated from
//! the exact potentials and the analytic derivatives of the cutoff.

use crate::ale_model::{calabi_potential_gap, calabi_u_scaled};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::fit_line;
use crate::radial_soliton::{cao_cone_deviation, phi_t_algebraic, solve_excess};

/// Depth of the bubble window below `t = 2 log ε`.
pub const BUBBLE_DEPTH: f64 = 8.0;
/// Grid end points are snapped to multiples of this, so halving `h` nests.
pub const GRID_ALIGN: f64 = 0.125;
/// Margin for the far end: `δ φ_0(t_max) >= ln(FAR_MARGIN / FAR_TOL)`.
pub const FAR_MARGIN: f64 = 1e8;
pub const FAR_TOL: f64 = 1e-10;

/// Weight exponents: `r^γ` at the cone point, `e^{δ φ_0}` at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    gamma: f64,
    delta: f64,
}

impl WeightSpec {
    /// Requires `0 < γ < 2n - 2` and `0 < δ < 1`.
    pub fn new(n: u32, gamma: f64, delta: f64) -> Result<Self> {
        let top = 2.0 * n as f64 - 2.0;
        if !(gamma > 0.0 && gamma < top) {
            return Err(Error::Domain(format!("gamma = {gamma} must lie in (0, {top})")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("delta = {delta} must lie in (0, 1)")));
        }
        Ok(Self { gamma, delta })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `χ(x)` and its first two derivatives in `x`.
pub fn cutoff_profile(x: f64) -> (f64, f64, f64) {
    if x <= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 2.0 {
        return (1.0, 0.0, 0.0);
    }
    // χ = E(x-1) / (E(x-1) + E(2-x)) = logistic(1/(2-x) - 1/(x-1))
    let (p, q) = (x - 1.0, 2.0 - x);
    let z = 1.0 / q - 1.0 / p;
    let dz = 1.0 / (q * q) + 1.0 / (p * p);
    let ddz = 2.0 / (q * q * q) - 2.0 / (p * p * p);
    let chi = logistic(z);
    let e = (-z.abs()).exp();
    let s = e / ((1.0 + e) * (1.0 + e));
    (chi, s * dz, s * ((1.0 - 2.0 * chi) * dz * dz + ddz))
}

/// The cutoff `χ(r/λ)`: 0 for `r <= λ`, 1 for `r >= 2λ`.
pub fn cutoff(r: f64, lambda: f64) -> f64 {
    cutoff_profile(r / lambda).0
}

/// Gluing radius `ε^{n/(n+1)}`.
pub fn r_eps(n: u32, eps: f64) -> f64 {
    let nf = n as f64;
    eps.powf(nf / (nf + 1.0))
}

/// The far-field model glued outside `2 r_ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outer {
    /// The Cao soliton `φ_0`.
    Cao,
    /// Flat ℂⁿ, `Φ = r²`.
    Flat,
}

/// The model glued inside `r_ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bubble {
    /// Calabi's metric scaled by `ε²`.
    Calabi,
    /// Flat ℂⁿ, `ε² Φ⁻(t - 2 log ε) = r²`.
    Flat,
    /// Nothing glued: the outer model everywhere.
    Absent,
}

/// First and second `t`-derivatives of a potential, with the potential
/// minus `e^t` and the relative deviations `d1 e^{-t} - 1`, `d2 e^{-t} - 1`
/// computed without cancellation.
struct Jet {
    gap: f64,
    d1: f64,
    d2: f64,
    rel1: f64,
    rel2: f64,
}

/// Glued profile on a log-radius grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GluedData {
    n: u32,
    eps: f64,
    r_eps: f64,
    outer: Outer,
    bubble: Bubble,
    spec: WeightSpec,
    grid: Grid,
    cao_phi: Vec<f64>,
    u: Vec<f64>,
    u_t: Vec<f64>,
    mu: Vec<f64>,
    f: Vec<f64>,
    weights: Vec<f64>,
    weights_hi: Vec<f64>,
    sigma: Vec<f64>,
    transition: Vec<(usize, f64)>,
    core_end: usize,
    far_start: usize,
}

/// The default grid for a gluing experiment: from `2 log ε - 8` to the first
/// point where the far weight `e^{δ φ_0}` passes `1e8 / 1e-10`.
pub fn glue_grid(n: u32, eps: f64, delta: f64, h: f64) -> Result<Grid> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps = {eps} must lie in (0, 1)")));
    }
    let t_min = 2.0 * eps.ln() - BUBBLE_DEPTH;
    let t_max = far_end(n, delta)?;
    Grid::aligned(t_min, t_max, h, GRID_ALIGN)
}

/// Smallest multiple of the grid alignment with `δ φ_0(t) >= ln(1e18)`.
pub fn far_end(n: u32, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta = {delta} must be positive")));
    }
    let target = (FAR_MARGIN / FAR_TOL).ln() / delta;
    let mut t = 0.0;
    loop {
        if solve_excess(n, 0.0, t)? >= target {
            return Ok(t);
        }
        t += GRID_ALIGN;
    }
}

fn outer_jet(n: u32, outer: Outer, t: f64) -> Result<(Jet, f64)> {
    match outer {
        Outer::Cao => {
            let d = cao_cone_deviation(n, t)?;
            let phi_t = phi_t_algebraic(n, 0.0, t, d.phi);
            let jet = Jet { gap: d.gap, d1: d.phi, d2: phi_t, rel1: d.rel, rel2: d.rel_t };
            Ok((jet, t.exp() + d.gap))
        }
        Outer::Flat => {
            let e = t.exp();
            Ok((Jet { gap: 0.0, d1: e, d2: e, rel1: 0.0, rel2: 0.0 }, e))
        }
    }
}

fn bubble_jet(n: u32, bubble: Bubble, eps: f64, t: f64) -> Jet {
    let e2 = eps * eps;
    match bubble {
        Bubble::Calabi => {
            let tau = t - 2.0 * eps.ln();
            let ((u, ut), (rel1, rel2)) = calabi_u_scaled(n, t, eps);
            Jet { gap: e2 * calabi_potential_gap(n, tau), d1: u, d2: ut, rel1, rel2 }
        }
        Bubble::Flat | Bubble::Absent => {
            let e = t.exp();
            Jet { gap: 0.0, d1: e, d2: e, rel1: 0.0, rel2: 0.0 }
        }
    }
}

/// `f = -log(u^{n-1} u_t) + n t - u`, arranged so that the `O(1)` parts
/// cancel before the logarithms are taken.
fn error_term(n: u32, t: f64, u: f64, ut: f64) -> f64 {
    let e = (-t).exp();
    error_term_rel(n, u, u * e - 1.0, ut * e - 1.0)
}

/// As [`error_term`] from `u` and the relative deviations
/// `α = u e^{-t} - 1`, `β = u_t e^{-t} - 1`.
fn error_term_rel(n: u32, u: f64, alpha: f64, beta: f64) -> f64 {
    let nf = n as f64;
    -((nf - 1.0) * alpha.ln_1p() + beta.ln_1p()) - u
}

/// Glued weight `max(r, ε)^γ` for `t < 0` and `e^{δ φ_0}` for `t >= 0`.
pub fn glued_weight(eps: f64, gamma: f64, delta: f64, t: f64, phi0: f64) -> f64 {
    if t < 0.0 {
        // max(r, ε)^γ = exp(γ max(t/2, log ε))
        (gamma * (0.5 * t).max(eps.ln())).exp()
    } else {
        (delta * phi0).exp()
    }
}

/// Injectivity scale `¼ min(max(r, ε), 1)`.
pub fn glued_sigma(eps: f64, t: f64) -> f64 {
    0.25 * (0.5 * t).max(eps.ln()).min(0.0).exp()
}

/// Builds the glued data with the Cao soliton outside and the Calabi bubble
/// inside.
pub fn build_glued(n: u32, eps: f64, grid: &Grid, spec: WeightSpec) -> Result<GluedData> {
    build_glued_with(n, eps, grid, spec, Outer::Cao, Bubble::Calabi)
}

/// Builds the glued data for an arbitrary pair of models.
pub fn build_glued_with(
    n: u32,
    eps: f64,
    grid: &Grid,
    spec: WeightSpec,
    outer: Outer,
    bubble: Bubble,
) -> Result<GluedData> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps = {eps} must lie in (0, 1)")));
    }
    let need = 2.0 * eps.ln() - BUBBLE_DEPTH;
    if grid.t_min() > need + 1e-12 {
        return Err(Error::Domain(format!(
            "grid starts at {} but must reach 2 log eps - {BUBBLE_DEPTH} = {need}",
            grid.t_min()
        )));
    }
    let re = r_eps(n, eps);
    if bubble != Bubble::Absent && grid.t_max() < 2.0 * (2.0 * re).ln() {
        return Err(Error::Domain("grid ends inside the gluing region".into()));
    }
    let len = grid.len();
    let mut cao_phi = Vec::with_capacity(len);
    let mut u = Vec::with_capacity(len);
    let mut u_t = Vec::with_capacity(len);
    let mut f = Vec::with_capacity(len);
    let mut transition = Vec::new();
    let mut core_end = 0;
    let mut far_start = len;
    for (i, &t) in grid.nodes().iter().enumerate() {
        let phi0 = solve_excess(n, 0.0, t)?;
        cao_phi.push(phi0);
        let x = if bubble == Bubble::Absent { f64::INFINITY } else { (0.5 * t).exp() / re };
        if x <= 1.0 {
            core_end = i + 1;
        } else if x >= 2.0 && far_start == len {
            far_start = i;
        }
        let (ui, uti, fi) = if x >= 2.0 {
            match outer {
                Outer::Cao => {
                    let pt = phi_t_algebraic(n, 0.0, t, phi0);
                    (phi0, pt, 0.0)
                }
                Outer::Flat => {
                    let e = t.exp();
                    (e, e, error_term(n, t, e, e))
                }
            }
        } else if x <= 1.0 {
            let b = bubble_jet(n, bubble, eps, t);
            let fi = match bubble {
                // Ricci-flat: log(u^{n-1} u_t) = n t exactly
                Bubble::Calabi => -b.d1,
                _ => error_term(n, t, b.d1, b.d2),
            };
            (b.d1, b.d2, fi)
        } else {
            let (o, _) = outer_jet(n, outer, t)?;
            let b = bubble_jet(n, bubble, eps, t);
            let (chi, dchi, ddchi) = cutoff_profile(x);
            let chi_t = 0.5 * x * dchi;
            let chi_tt = 0.25 * x * x * ddchi + 0.25 * x * dchi;
            let gap = o.gap - b.gap;
            let ui = chi * o.d1 + (1.0 - chi) * b.d1 + chi_t * gap;
            let uti = chi * o.d2 + (1.0 - chi) * b.d2 + 2.0 * chi_t * (o.d1 - b.d1) + chi_tt * gap;
            // the same combination relative to the cone
            let g = gap * (-t).exp();
            let alpha = chi * o.rel1 + (1.0 - chi) * b.rel1 + chi_t * g;
            let beta = chi * o.rel2 + (1.0 - chi) * b.rel2 + 2.0 * chi_t * (o.rel1 - b.rel1) + chi_tt * g;
            transition.push((i, chi * o.gap + (1.0 - chi) * b.gap));
            (ui, uti, error_term_rel(n, ui, alpha, beta))
        };
        u.push(ui);
        u_t.push(uti);
        f.push(fi);
    }
    // positivity, reported at the worst node
    let mut worst: Option<(usize, f64)> = None;
    for i in 0..len {
        let m = u[i].min(u_t[i]);
        if !(m > 0.0) && worst.map_or(true, |(_, w)| m < w) {
            worst = Some((i, m));
        }
    }
    if let Some((i, _)) = worst {
        return Err(Error::EpsilonTooLarge { node: i, t: grid.nodes()[i], u: u[i], u_t: u_t[i] });
    }
    let nodes = grid.nodes();
    let weights = (0..len).map(|i| glued_weight(eps, spec.gamma, spec.delta, nodes[i], cao_phi[i])).collect();
    let weights_hi = (0..len).map(|i| glued_weight(eps, spec.gamma + 2.0, spec.delta, nodes[i], cao_phi[i])).collect();
    let sigma = nodes.iter().map(|&t| glued_sigma(eps, t)).collect();
    Ok(GluedData {
        n,
        eps,
        r_eps: re,
        outer,
        bubble,
        spec,
        grid: grid.clone(),
        cao_phi,
        mu: u.clone(),
        u,
        u_t,
        f,
        weights,
        weights_hi,
        sigma,
        transition,
        core_end,
        far_start,
    })
}

impl GluedData {
    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn r_eps(&self) -> f64 {
        self.r_eps
    }
    pub fn outer(&self) -> Outer {
        self.outer
    }
    pub fn bubble(&self) -> Bubble {
        self.bubble
    }
    pub fn spec(&self) -> WeightSpec {
        self.spec
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
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    pub fn f(&self) -> &[f64] {
        &self.f
    }
    /// `φ_0` at every node.
    pub fn cao_phi(&self) -> &[f64] {
        &self.cao_phi
    }
    /// `w_{ε,γ,δ}` per node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// `w_{ε,γ+2,δ}` per node.
    pub fn weights_hi(&self) -> &[f64] {
        &self.weights_hi
    }
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
    /// Glued weight with arbitrary exponents.
    pub fn weight_with(&self, gamma: f64, delta: f64) -> Vec<f64> {
        self.grid.nodes().iter().zip(&self.cao_phi).map(|(&t, &p)| glued_weight(self.eps, gamma, delta, t, p)).collect()
    }
    /// Number of leading nodes with `r <= r_ε`.
    pub fn core_end(&self) -> usize {
        self.core_end
    }
    /// First node with `r >= 2 r_ε`.
    pub fn far_start(&self) -> usize {
        self.far_start
    }
    /// `(node, Φ_ε - r²)` on the transition region.
    pub fn transition(&self) -> &[(usize, f64)] {
        &self.transition
    }
}

/// Suprema over `r_ε <= r <= 2 r_ε` of `r_ε^{k-4} |∂_r^k (Φ_ε - r²)|`,
/// `k = 0, 1, 2`.
pub fn transition_estimates(gd: &GluedData) -> (f64, f64, f64) {
    let re = gd.r_eps;
    let mut s = (0.0f64, 0.0f64, 0.0f64);
    for &(i, gap) in &gd.transition {
        let t = gd.grid.nodes()[i];
        let e = t.exp();
        let r = (0.5 * t).exp();
        let g1 = gd.u[i] - e;
        let g2 = gd.u_t[i] - e;
        let dr = 2.0 * g1 / r;
        let drr = (4.0 * g2 - 2.0 * g1) / (r * r);
        s.0 = s.0.max(gap.abs() / re.powi(4));
        s.1 = s.1.max(dr.abs() / re.powi(3));
        s.2 = s.2.max(drr.abs() / re.powi(2));
    }
    s
}

/// `sup w_{ε,γ+2,δ} |1 - e^{f_ε}|`.
pub fn error_norm(gd: &GluedData, spec: WeightSpec) -> f64 {
    let w = gd.weight_with(spec.gamma + 2.0, spec.delta);
    gd.f.iter().zip(&w).map(|(f, w)| w * f.exp_m1().abs()).fold(0.0, f64::max)
}

/// The error norms along an ε sweep and their log-log slope.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingScan {
    /// `(ε, r_ε, error norm)` per sweep point.
    pub points: Vec<(f64, f64, f64)>,
    pub fitted_exponent: f64,
    pub expected: f64,
}

/// Expected slope `(4 + γ) n / (n + 1)`.
pub fn expected_error_exponent(n: u32, gamma: f64) -> f64 {
    let nf = n as f64;
    (4.0 + gamma) * nf / (nf + 1.0)
}

/// Fits `log error_norm` against `log ε`.
pub fn fit_error_scaling(n: u32, spec: WeightSpec, points: &[(f64, f64, f64)]) -> Result<ScalingScan> {
    let usable: Vec<_> = points.iter().filter(|p| p.2 > 0.0 && p.2.is_finite()).collect();
    if usable.len() < 4 {
        return Err(Error::DegenerateFit(format!("{} usable points, need 4", usable.len())));
    }
    let lo = usable.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = usable.iter().map(|p| p.0).fold(0.0, f64::max);
    if hi / lo < 100.0 * (1.0 - 1e-9) {
        return Err(Error::DegenerateFit("sweep spans less than two decades".into()));
    }
    let xs: Vec<f64> = usable.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.2.ln()).collect();
    let (slope, _) = fit_line(&xs, &ys).ok_or_else(|| Error::DegenerateFit("collinear".into()))?;
    Ok(ScalingScan {
        points: points.to_vec(),
        fitted_exponent: slope,
        expected: expected_error_exponent(n, spec.gamma),
    })
}

/// Builds the glued data at every ε and fits the error scaling.
pub fn error_scaling_scan(n: u32, spec: WeightSpec, eps_list: &[f64], h: f64) -> Result<ScalingScan> {
    let mut points = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        points.push(error_scaling_point(n, spec, eps, h)?);
    }
    fit_error_scaling(n, spec, &points)
}

/// `(ε, r_ε, error norm)` at one sweep point.
pub fn error_scaling_point(n: u32, spec: WeightSpec, eps: f64, h: f64) -> Result<(f64, f64, f64)> {
    let grid = glue_grid(n, eps, spec.delta, h)?;
    let gd = build_glued(n, eps, &grid, spec)?;
    Ok((eps, gd.r_eps, error_norm(&gd, spec)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DEFAULT_H;

    fn spec() -> WeightSpec {
        WeightSpec::new(2, 1.0, 0.5).unwrap()
    }

    #[test]
    fn weight_spec_bounds() {
        assert!(WeightSpec::new(2, 0.0, 0.5).is_err());
        assert!(WeightSpec::new(2, 2.0, 0.5).is_err());
        assert!(WeightSpec::new(2, 1.0, 1.0).is_err());
        assert!(WeightSpec::new(1, 0.5, 0.5).is_err());
        assert!(WeightSpec::new(3, 3.5, 0.1).is_ok());
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(cutoff(0.5, 1.0), 0.0);
        assert_eq!(cutoff(3.0, 1.0), 1.0);
        assert!((cutoff(1.5, 1.0) - 0.5).abs() < 1e-16);
        assert!((cutoff(0.15, 0.1) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=1000 {
            let c = cutoff(1.0 + i as f64 / 1000.0, 1.0);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn cutoff_derivatives_match_differences() {
        let h = 1e-6;
        for x in [1.1, 1.3, 1.5, 1.77, 1.95] {
            let (_, d1, d2) = cutoff_profile(x);
            let fd1 = (cutoff_profile(x + h).0 - cutoff_profile(x - h).0) / (2.0 * h);
            let fd2 = (cutoff_profile(x + h).1 - cutoff_profile(x - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-7 * d1.abs().max(1.0));
            assert!((d2 - fd2).abs() < 1e-6 * d2.abs().max(1.0));
        }
    }

    #[test]
    fn gluing_radius() {
        assert!((r_eps(2, 1e-3) - 1e-2).abs() < 1e-16);
        assert!((r_eps(1, 0.04) - 0.2).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let eps = 10f64.powi(-k);
            let r = r_eps(2, eps);
            assert!(r < prev && r / eps > 1.0);
            prev = r;
        }
    }

    fn glued(eps: f64) -> GluedData {
        let g = glue_grid(2, eps, 0.5, DEFAULT_H).unwrap();
        build_glued(2, eps, &g, spec()).unwrap()
    }

    #[test]
    fn regions_match_their_models() {
        let eps = 1e-3;
        let gd = glued(eps);
        let t = gd.grid().nodes();
        for i in 0..gd.core_end() {
            let tau = t[i] - 2.0 * eps.ln();
            let exact = eps * eps * (1.0 + (2.0 * tau).exp()).sqrt();
            assert!((gd.u()[i] - exact).abs() <= 1e-15 * exact);
            assert!((gd.f()[i] + gd.u()[i]).abs() < 1e-18);
        }
        for i in gd.far_start()..t.len() {
            assert_eq!(gd.f()[i], 0.0);
            assert_eq!(gd.u()[i], gd.cao_phi()[i]);
        }
        assert_eq!(gd.mu(), gd.u());
        assert!(gd.core_end() < gd.far_start());
    }

    #[test]
    fn weight_branches_meet() {
        let eps = 1e-3;
        let re = r_eps(2, eps);
        let t = 2.0 * re.ln();
        let cone = re.powf(1.0);
        let w = glued_weight(eps, 1.0, 0.5, t, 0.0);
        assert!((w - cone).abs() < 1e-12 * cone);
        let t2 = 2.0 * (2.0 * re).ln();
        let w2 = glued_weight(eps, 1.0, 0.5, t2, 0.0);
        assert!((w2 - 2.0 * re).abs() < 1e-12 * w2);
        // at the bubble scale the weight bottoms out at ε^γ
        assert!((glued_weight(eps, 1.0, 0.5, 2.0 * eps.ln() - 3.0, 0.0) - eps).abs() < 1e-18);
    }

    #[test]
    fn transition_estimates_bounded_and_nonzero() {
        let mut sups = Vec::new();
        for eps in [1e-2, 1e-3, 1e-4] {
            sups.push(transition_estimates(&glued(eps)));
        }
        for k in 0..3 {
            let vals: Vec<f64> = sups.iter().map(|s| [s.0, s.1, s.2][k]).collect();
            let hi = vals.iter().cloned().fold(0.0, f64::max);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(lo > 0.0 && hi / lo < 3.0, "k={k}: {vals:?}");
        }
    }

    #[test]
    fn flat_models_give_zero_estimates() {
        let eps = 1e-3;
        let g = glue_grid(2, eps, 0.5, DEFAULT_H).unwrap();
        let gd = build_glued_with(2, eps, &g, spec(), Outer::Flat, Bubble::Flat).unwrap();
        let (a, b, c) = transition_estimates(&gd);
        assert!(a < 1e-9 && b < 1e-9 && c < 1e-9, "{a} {b} {c}");
    }

    #[test]
    fn nothing_glued_has_no_error() {
        let eps = 1e-3;
        let g = glue_grid(2, eps, 0.5, DEFAULT_H).unwrap();
        let gd = build_glued_with(2, eps, &g, spec(), Outer::Cao, Bubble::Absent).unwrap();
        assert_eq!(error_norm(&gd, spec()), 0.0);
    }

    #[test]
    fn error_norm_decreases_with_eps() {
        let a = error_norm(&glued(1e-2), spec());
        let b = error_norm(&glued(1e-3), spec());
        assert!(a.is_finite() && b > 0.0 && b < a);
    }

    #[test]
    fn kahler_margin_approaches_cao() {
        // on a window inside the transition of the largest ε
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let gd = glued(eps);
            let t = gd.grid().nodes();
            let dev = (0..t.len())
                .filter(|&i| t[i] >= -6.0 && t[i] <= -5.0)
                .map(|i| {
                    let cao = phi_t_algebraic(2, 0.0, t[i], gd.cao_phi()[i]);
                    assert!(gd.u_t()[i] > 0.0);
                    (gd.u_t()[i] - cao).abs() / cao
                })
                .fold(0.0, f64::max);
            assert!(dev < prev || dev == 0.0, "eps={eps}: {dev}");
            prev = dev;
        }
    }

    #[test]
    fn coverage_is_checked() {
        let g = Grid::new(-10.0, 40.0, DEFAULT_H).unwrap();
        assert!(matches!(build_glued(2, 1e-3, &g, spec()), Err(Error::Domain(_))));
    }

    #[test]
    fn large_eps_is_rejected_or_positive() {
        // the construction either stays positive or names the failing node
        for eps in [0.3, 0.5, 0.9] {
            let g = glue_grid(2, eps, 0.5, DEFAULT_H).unwrap();
            match build_glued(2, eps, &g, spec()) {
                Ok(gd) => assert!(gd.u_t().iter().all(|&v| v > 0.0)),
                Err(e) => assert!(matches!(e, Error::EpsilonTooLarge { .. })),
            }
        }
    }

    #[test]
    fn scan_needs_enough_points() {
        let s = spec();
        let pts = vec![(1e-2, 0.0, 1.0), (1e-3, 0.0, 0.1), (1e-4, 0.0, 0.01)];
        assert!(matches!(fit_error_scaling(2, s, &pts), Err(Error::DegenerateFit(_))));
    }
}
