//! One function per command. Each returns a [`RunRecord`] with the numeric
//! outputs, its pass/fail assertions and the tables to write.

use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use solitonforge::ale_model::{ale_potential_gap, calabi_cone_gap, calabi_profile};
use solitonforge::drift_operator::{inverse_norm_point, InversePoint};
use solitonforge::glue::{
    build_glued, error_norm, error_scaling_point, expected_error_exponent, fit_error_scaling, glue_grid,
    transition_estimates,
};
use solitonforge::quadrature::fit_line;
use solitonforge::radial_soliton::{
    f_poly, neg_correction_exponent, neg_remainder_exponent, pos_correction_exponent, soliton_residual, solve_profile,
};
use solitonforge::rng::seeded;
use solitonforge::soliton_newton::{
    converged_metric, family_compare, measured_certificate, newton_solve, IftCertificate, NewtonReport,
};
use solitonforge::{Error, Grid, Result};

use crate::config::{Command, ExperimentConfig};
use crate::criteria;
use crate::record::{num, nums, RunRecord, Table};

/// Runs `config` on the global rayon pool.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    match config.command {
        Command::Cao => cao(config),
        Command::Ale => ale(config),
        Command::Glue => glue(config),
        Command::ErrorScan => error_scan(config),
        Command::InvertScan => invert_scan(config),
        Command::Newton => newton(config),
        Command::VerifyAll => criteria::verify_all(config),
    }
}

/// Runs `config` with sweep points spread over at most `jobs` threads.
pub fn run_with_jobs(config: &ExperimentConfig, jobs: usize) -> Result<RunRecord> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| run(config))
}

/// Order-preserving parallel map over sweep points.
pub(crate) fn sweep<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

fn timed<R>(record: &mut RunRecord, stage: &str, f: impl FnOnce() -> R) -> R {
    let start = Instant::now();
    let out = f();
    record.timings.insert(stage.into(), start.elapsed().as_secs_f64());
    out
}

/// `max |F(φ)e^φ - e^{nt}/n - F(a)e^a| / (e^{nt}/n + 1)` over the nodes.
pub fn defining_equation_defect(n: u32, a: f64, t: &[f64], phi: &[f64]) -> f64 {
    let nf = n as f64;
    let base = f_poly(n, a) * a.exp();
    t.iter()
        .zip(phi)
        .map(|(&t, &p)| {
            let lhs = f_poly(n, p) * p.exp();
            let rhs = (nf * t).exp() / nf;
            ((lhs - rhs - base) / (rhs + 1.0)).abs()
        })
        .fold(0.0, f64::max)
}

fn cao(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let mut rec = RunRecord::new(cfg);
    let (n, a) = (cfg.n, cfg.a);
    let grid = Grid::new(cfg.t_min, cfg.t_max, cfg.h)?;
    let p = timed(&mut rec, "profile", || solve_profile(n, a, &grid))?;
    p.check_invariants()?;
    let res = soliton_residual(&p.metric(), n)?;
    let t = grid.nodes();
    let defect = defining_equation_defect(n, a, t, p.phi());
    let rmax = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rlo = res.iter().cloned().fold(f64::INFINITY, f64::min);
    let rhi = res.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    rec.output("nodes", grid.len());
    rec.output("defining_equation_defect", num(defect));
    rec.output("residual_max", num(rmax));
    rec.output("residual_spread", num(rhi - rlo));
    rec.assert("defining_equation_below_1e-12", defect < 1e-12);
    rec.assert("residual_constant_to_1e-11", rhi - rlo < 1e-11);

    let mut asym = Map::new();
    let neg = neg_correction_exponent(n, a, -14.0, -8.0)?;
    let neg_expected = if a == 0.0 { 2.0 } else { n as f64 };
    asym.insert("neg_correction_exponent".into(), num(neg));
    asym.insert("neg_correction_expected".into(), num(neg_expected));
    rec.assert("neg_correction_within_15pct", ((neg - neg_expected) / neg_expected).abs() < 0.15);
    if a == 0.0 {
        asym.insert("neg_remainder_exponent".into(), num(neg_remainder_exponent(n, -14.0, -8.0)?));
        if n >= 2 {
            let pos = pos_correction_exponent(n, 50.0, 400.0)?;
            asym.insert("pos_correction_exponent".into(), num(pos));
            rec.assert("pos_correction_within_15pct", (pos + 1.0).abs() < 0.15);
        }
    }
    rec.output("asymptotics", Value::Object(asym));
    if n == 1 && a == 0.0 {
        // the cigar: φ_t = 1/(1 + e^{-t})
        let err = t.iter().zip(p.phi_t()).map(|(&t, &pt)| (pt - 1.0 / (1.0 + (-t).exp())).abs()).fold(0.0, f64::max);
        rec.output("cigar_phi_t_error", num(err));
        rec.assert("cigar_phi_t_to_1e-12", err < 1e-12);
    }
    rec.tables.push(Table::profile("profile", t, p.phi(), p.phi_t(), &res));
    Ok(rec)
}

fn ale(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let mut rec = RunRecord::new(cfg);
    let n = cfg.n;
    let nf = n as f64;
    let grid = Grid::new(cfg.t_min, cfg.t_max, cfg.h)?;
    let p = timed(&mut rec, "profile", || calabi_profile(n, &grid))?;
    let t = grid.nodes();
    let flat_defect: Vec<f64> =
        (0..t.len()).map(|i| (nf - 1.0) * p.u()[i].ln() + p.u_t()[i].ln() - nf * t[i]).collect();
    // A from the potential on R ∈ [10, 100] within the grid
    let lo = 2.0 * 10f64.ln();
    let hi = (2.0 * 100f64.ln()).min(grid.t_max());
    let mut fitted = Vec::new();
    for &s in t.iter().filter(|&&s| s >= lo && s <= hi) {
        fitted.push(ale_potential_gap(&p, s)? * ((nf - 1.0) * s).exp());
    }
    let coefficient_error = fitted.iter().map(|v| (v - p.coefficient()).abs()).fold(0.0, f64::max);
    let xs: Vec<f64> = (0..=10).map(|i| (1.0 + 0.1 * i as f64) * 10f64.ln()).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| calabi_cone_gap(n, 2.0 * x).abs().ln()).collect();
    let (gap_exponent, _) = fit_line(&xs, &ys).ok_or_else(|| Error::DegenerateFit("cone gap".into()))?;
    rec.output("coefficient", num(p.coefficient()));
    rec.output("fitted_coefficient_max_error", num(coefficient_error));
    rec.output("fitted_points", fitted.len());
    rec.output("ricci_flat_defect", num(p.ricci_flat_defect()));
    rec.output("cone_gap_exponent_in_r", num(gap_exponent));
    rec.output("cone_gap_exponent_expected", num(2.0 - 2.0 * nf));
    rec.output("tail_constant", num(p.tail_constant()));
    rec.assert("ricci_flat_to_1e-12", p.ricci_flat_defect() < 1e-12);
    rec.assert("coefficient_fit_to_1e-4", !fitted.is_empty() && coefficient_error < 1e-4);
    rec.tables.push(Table::profile("profile", t, p.u(), p.u_t(), &flat_defect));
    Ok(rec)
}

fn glue(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let mut rec = RunRecord::new(cfg);
    let spec = cfg.weight_spec().map_err(|e| Error::Domain(e.to_string()))?;
    let grid = glue_grid(cfg.n, cfg.eps, cfg.delta, cfg.h)?;
    let gd = timed(&mut rec, "glue", || build_glued(cfg.n, cfg.eps, &grid, spec))?;
    let (k0, k1, k2) = transition_estimates(&gd);
    let t = grid.nodes();
    let margin = gd.u_t().iter().fold(f64::INFINITY, |m, &v| m.min(v));
    rec.output("eps", num(cfg.eps));
    rec.output("r_eps", num(gd.r_eps()));
    rec.output("nodes", grid.len());
    rec.output("t_min", num(grid.t_min()));
    rec.output("t_max", num(grid.t_max()));
    rec.output("core_end_t", num(t[gd.core_end().saturating_sub(1)]));
    rec.output("far_start_t", num(t[gd.far_start().min(t.len() - 1)]));
    rec.output(
        "transition_estimates",
        json!({ "gap_over_r_eps4": num(k0), "dr_over_r_eps3": num(k1), "drr_over_r_eps2": num(k2) }),
    );
    rec.output("error_norm", num(error_norm(&gd, spec)));
    rec.output("expected_exponent", num(expected_error_exponent(cfg.n, cfg.gamma)));
    rec.output("min_u_t", num(margin));
    rec.assert("kahler", margin > 0.0);
    rec.tables.push(Table::profile("profile", t, gd.u(), gd.u_t(), gd.f()));
    Ok(rec)
}

fn error_scan(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let mut rec = RunRecord::new(cfg);
    let spec = cfg.weight_spec().map_err(|e| Error::Domain(e.to_string()))?;
    let points = timed(&mut rec, "sweep", || sweep(&cfg.eps_list, |&eps| error_scaling_point(cfg.n, spec, eps, cfg.h)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let scan = fit_error_scaling(cfg.n, spec, &points)?;
    let rel = ((scan.fitted_exponent - scan.expected) / scan.expected).abs();
    rec.output("fitted_exponent", num(scan.fitted_exponent));
    rec.output("expected", num(scan.expected));
    rec.output("relative_error", num(rel));
    rec.output("pass", rel < 0.1);
    rec.assert("exponent_within_10pct", rel < 0.1);
    rec.tables.push(Table::sweep("sweep", &points));
    Ok(rec)
}

fn inverse_point_json(p: &InversePoint) -> Value {
    json!({
        "eps": num(p.eps),
        "estimate": num(p.estimate),
        "estimate_kappa_one": num(p.estimate_kappa_one),
        "forward": num(p.forward),
        "failed": p.failed,
    })
}

/// Relative gap between the two inverse estimates.
pub fn kappa_gap(p: &InversePoint) -> f64 {
    (p.estimate - p.estimate_kappa_one).abs() / p.estimate
}

fn invert_scan(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let mut rec = RunRecord::new(cfg);
    let spec = cfg.weight_spec().map_err(|e| Error::Domain(e.to_string()))?;
    let points =
        timed(&mut rec, "sweep", || sweep(&cfg.eps_list, |&eps| inverse_norm_point(cfg.n, spec, eps, cfg.h, cfg.seed)));
    let ok: Vec<&InversePoint> = points.iter().filter(|p| p.failed.is_none()).collect();
    let hi = ok.iter().map(|p| p.estimate).fold(0.0, f64::max);
    let lo = ok.iter().map(|p| p.estimate).fold(f64::INFINITY, f64::min);
    let ratio = if ok.is_empty() { f64::NAN } else { hi / lo };
    let gaps: Vec<f64> = points.iter().map(kappa_gap).collect();
    rec.output("points", Value::Array(points.iter().map(inverse_point_json).collect()));
    rec.output("max_over_min", num(ratio));
    rec.output("kappa_gap", nums(&gaps));
    rec.assert("all_points_solved", ok.len() == points.len());
    rec.assert("uniform_within_factor_2", ratio < 2.0);
    let rows: Vec<(f64, f64, f64)> =
        points.iter().map(|p| (p.eps, solitonforge::glue::r_eps(cfg.n, p.eps), p.estimate)).collect();
    rec.tables.push(Table::sweep("sweep", &rows));
    Ok(rec)
}

pub(crate) fn certificate_json(c: &IftCertificate) -> Value {
    json!({
        "c": num(c.c),
        "q": num(c.q),
        "t0_norm": num(c.t0_norm),
        "r0": num(c.r0),
        "certified_radius": num(c.certified_radius),
        "condition_met": c.condition_met,
    })
}

pub(crate) fn history_json(r: &NewtonReport) -> Value {
    Value::Array(
        r.iterations
            .iter()
            .map(|s| json!({ "residual": num(s.residual), "step": num(s.step), "damping": num(s.damping) }))
            .collect(),
    )
}

fn newton(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let mut rec = RunRecord::new(cfg);
    let spec = cfg.weight_spec().map_err(|e| Error::Domain(e.to_string()))?;
    let grid = glue_grid(cfg.n, cfg.eps, cfg.delta, cfg.h)?;
    let gd = build_glued(cfg.n, cfg.eps, &grid, spec)?;
    let inv = inverse_norm_point(cfg.n, spec, cfg.eps, cfg.h, cfg.seed);
    if let Some(e) = &inv.failed {
        return Err(Error::Domain(format!("inverse-norm estimate failed: {e}")));
    }
    let mut rng = seeded(cfg.seed);
    let cert = timed(&mut rec, "certificate", || measured_certificate(&gd, spec, inv.estimate, cfg.samples, &mut rng))?;
    let report = timed(&mut rec, "newton", || newton_solve(&gd, spec, cfg.newton_tol));
    if !report.converged {
        return Err(Error::NotConverged);
    }
    let sup_error = family_compare(&gd, &report)?;
    let m = converged_metric(&gd, &report)?;
    let res = soliton_residual(&m, cfg.n)?;
    rec.output("ift_certificate", certificate_json(&cert));
    rec.output("newton_history", history_json(&report));
    rec.output("final_residual", num(report.final_residual));
    rec.output("converged", report.converged);
    rec.output("family_compare", json!({ "sup_error": num(sup_error), "bound_5h2": num(5.0 * cfg.h * cfg.h) }));
    rec.assert("newton_converged", report.converged && report.final_residual < cfg.newton_tol);
    rec.assert("family_within_5h2", sup_error <= 5.0 * cfg.h * cfg.h);
    rec.tables.push(Table::profile("profile", grid.nodes(), m.u(), m.u_t(), &res));
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigFile;

    fn config(cmd: Command, file: ConfigFile) -> ExperimentConfig {
        ExperimentConfig::resolve(cmd, file).unwrap()
    }

    #[test]
    fn cigar_profile() {
        let cfg = config(
            Command::Cao,
            ConfigFile { n: Some(1), t_min: Some(-10.0), t_max: Some(10.0), ..Default::default() },
        );
        let rec = run(&cfg).unwrap();
        assert!(rec.all_pass(), "{:?}", rec.assertions);
        assert!(rec.outputs["cigar_phi_t_error"].as_f64().unwrap() < 1e-12);
        assert_eq!(rec.tables[0].header, vec!["t", "phi", "phi_t", "residual"]);
        assert_eq!(rec.tables[0].rows.len(), 20 * 128 + 1);
    }

    #[test]
    fn error_scan_example() {
        let cfg = config(Command::ErrorScan, ConfigFile::default());
        let rec = run(&cfg).unwrap();
        let fit = rec.outputs["fitted_exponent"].as_f64().unwrap();
        assert!((fit - 10.0 / 3.0).abs() < 0.05, "{fit}");
        assert_eq!(rec.outputs["pass"], Value::Bool(true));
        assert_eq!(rec.tables[0].header, vec!["eps", "r_eps", "value"]);
        assert_eq!(rec.tables[0].rows.len(), 5);
    }

    #[test]
    fn sweep_failure_is_numerical() {
        // one decade is too narrow to fit a slope
        let cfg = config(
            Command::ErrorScan,
            ConfigFile { eps_list: Some(vec![1e-2, 5e-3, 2e-3, 1e-3]), ..Default::default() },
        );
        assert!(matches!(run(&cfg), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn jobs_do_not_change_results() {
        let cfg = config(Command::InvertScan, ConfigFile { eps_list: Some(vec![1e-2, 1e-3]), ..Default::default() });
        let a = run_with_jobs(&cfg, 1).unwrap();
        let b = run_with_jobs(&cfg, 3).unwrap();
        assert_eq!(a.files(), b.files());
    }

    #[test]
    fn defect_of_exact_cigar_is_tiny() {
        let t: Vec<f64> = (-20..=20).map(|i| i as f64).collect();
        let phi: Vec<f64> = t.iter().map(|t: &f64| t.exp().ln_1p()).collect();
        assert!(defining_equation_defect(1, 0.0, &t, &phi) < 4e-14);
    }
}
