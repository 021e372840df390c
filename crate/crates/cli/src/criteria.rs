//! The acceptance suite. Each criterion returns a [`CriterionOutcome`]
//! whose numeric verdict is deterministic; wall-clock budgets are checked
//! separately because timings never reach the output files.

use std::time::Instant;

use serde_json::{json, Map, Value};
use solitonforge::drift_operator::{barrier_check, inverse_norm_point, max_principle_check, LeftBc};
use solitonforge::glue::{build_glued, error_scaling_scan, glue_grid, WeightSpec};
use solitonforge::radial_soliton::{neg_correction_exponent, pos_correction_exponent, soliton_residual, solve_profile};
use solitonforge::rng::{random_bumps, sample_bumps, seeded, uniform_in};
use solitonforge::soliton_newton::{
    converged_metric, convexity_check, eps_star, family_compare, measured_certificate, multi_start_spread,
    newton_solve, residual_floor, validity_radius, IftPoint,
};
use solitonforge::{Grid, Result};

use crate::commands::{certificate_json, defining_equation_defect, kappa_gap, sweep};
use crate::config::{ConfigFile, ExperimentConfig, DEFAULT_EPS_LIST};
use crate::record::{num, nums, RunRecord};
use crate::Command;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    /// Verdict on the numbers alone.
    pub pass: bool,
    /// Wall-clock budget, `None` when the criterion has none.
    pub within_budget: Option<bool>,
    pub seconds: f64,
    pub detail: Map<String, Value>,
}

impl CriterionOutcome {
    fn new(id: u32, name: &'static str) -> Self {
        CriterionOutcome { id, name, pass: true, within_budget: None, seconds: 0.0, detail: Map::new() }
    }

    fn check(&mut self, ok: bool) {
        self.pass &= ok;
    }

    fn put(&mut self, key: &str, v: impl Into<Value>) {
        self.detail.insert(key.into(), v.into());
    }

    fn budget(&mut self, ok: bool) {
        self.within_budget = Some(self.within_budget.unwrap_or(true) && ok);
    }

    /// Numbers and budget both hold.
    pub fn passed(&self) -> bool {
        self.pass && self.within_budget.unwrap_or(true)
    }

    pub fn key(&self) -> String {
        format!("c{:02}_{}", self.id, self.name)
    }

    /// Failure recorded as a red criterion rather than an aborted suite.
    fn errored(id: u32, name: &'static str, e: solitonforge::Error) -> Self {
        let mut c = Self::new(id, name);
        c.pass = false;
        c.put("error", e.to_string());
        c
    }
}

fn timed(id: u32, name: &'static str, f: impl FnOnce(&mut CriterionOutcome) -> Result<()>) -> CriterionOutcome {
    let start = Instant::now();
    let mut c = CriterionOutcome::new(id, name);
    let out = f(&mut c);
    let seconds = start.elapsed().as_secs_f64();
    match out {
        Ok(()) => {
            c.seconds = seconds;
            c
        }
        Err(e) => {
            let mut c = CriterionOutcome::errored(id, name, e);
            c.seconds = seconds;
            c
        }
    }
}

const FAMILY_CASES: [(u32, f64); 6] = [(1, 0.0), (1, 0.25), (2, 0.0), (2, 0.25), (3, 0.0), (3, 0.25)];

pub fn cao_family(h: f64) -> CriterionOutcome {
    timed(1, "cao_family", |c| {
        let grid = Grid::new(-20.0, 40.0, h)?;
        let mut cases = Vec::new();
        for (n, a) in FAMILY_CASES {
            let start = Instant::now();
            let p = solve_profile(n, a, &grid)?;
            let defect = defining_equation_defect(n, a, grid.nodes(), p.phi());
            let s = soliton_residual(&p.metric(), n)?;
            let spread =
                s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - s.iter().cloned().fold(f64::INFINITY, f64::min);
            c.budget(start.elapsed().as_secs_f64() < 1.0);
            c.check(defect < 1e-12 && spread < 1e-11);
            cases.push(json!({ "n": n, "a": a, "defect": num(defect), "residual_spread": num(spread) }));
        }
        c.put("cases", cases);
        Ok(())
    })
}

pub fn asymptotics() -> CriterionOutcome {
    timed(2, "asymptotics", |c| {
        let mut cases = Vec::new();
        for n in [1u32, 2, 3] {
            let neg = neg_correction_exponent(n, 0.0, -14.0, -8.0)?;
            c.check(((neg - 2.0) / 2.0).abs() < 0.15);
            let mut case = json!({ "n": n, "neg_exponent": num(neg) });
            if n >= 2 {
                let pos = pos_correction_exponent(n, 50.0, 400.0)?;
                c.check((pos + 1.0).abs() < 0.15);
                case["pos_exponent"] = num(pos);
            }
            cases.push(case);
        }
        c.put("cases", cases);
        Ok(())
    })
}

const BARRIER_CASES: [(u32, f64); 6] = [(2, 0.25), (2, 0.5), (2, 0.75), (3, 0.25), (3, 0.5), (3, 0.75)];

pub fn barrier(h: f64) -> CriterionOutcome {
    timed(3, "barrier_identity", |c| {
        let mut cases = Vec::new();
        for (n, delta) in BARRIER_CASES {
            let coarse = solve_profile(n, 0.0, &Grid::new(-10.0, 20.0, 2.0 * h)?)?;
            let fine = solve_profile(n, 0.0, &Grid::new(-10.0, 20.0, h)?)?;
            let r1 = barrier_check(&coarse, delta)?;
            let r2 = barrier_check(&fine, delta)?;
            let ratio = r1 / r2;
            c.check(r2 < 1e-4 && (ratio - 4.0).abs() <= 0.8);
            cases.push(json!({ "n": n, "delta": delta, "residual": num(r2), "refinement": num(ratio) }));
        }
        c.put("cases", cases);
        Ok(())
    })
}

pub fn max_principle(h: f64, seed: u64) -> CriterionOutcome {
    timed(4, "maximum_principle", |c| {
        let mut rng = seeded(seed);
        let mut cases = Vec::new();
        let mut violations = 0usize;
        for (n, delta) in BARRIER_CASES {
            let p = solve_profile(n, 0.0, &Grid::new(0.0, 30.0, h)?)?;
            let t = p.grid().nodes().to_vec();
            let mut worst = f64::NEG_INFINITY;
            let mut min_slack = f64::INFINITY;
            for _ in 0..32 {
                let bumps = random_bumps(&mut rng, 0.0, 30.0, 0.125, 4.0);
                let g: Vec<f64> =
                    sample_bumps(&bumps, &t).iter().zip(p.phi()).map(|(v, &x)| v * (-delta * x).exp()).collect();
                // boundary data small enough that the forcing term sets the bound
                let left = 1e-3 * uniform_in(&mut rng, -1.0, 1.0);
                let right = 1e-3 * uniform_in(&mut rng, -1.0, 1.0) * (-delta * p.phi()[t.len() - 1]).exp();
                let out = max_principle_check(&p, delta, &g, LeftBc::Dirichlet(left), right)?;
                let v = out.relative_violation();
                if v > 1e-9 {
                    violations += 1;
                }
                worst = worst.max(v);
                min_slack = min_slack.min(out.slack());
            }
            cases.push(json!({
                "n": n,
                "delta": delta,
                "worst_relative_violation": num(worst),
                "min_slack": num(min_slack),
            }));
        }
        c.check(violations == 0);
        c.put("violations", violations);
        c.put("cases", cases);
        Ok(())
    })
}

pub fn error_scaling(h: f64) -> CriterionOutcome {
    timed(5, "error_scaling", |c| {
        let mut cases = Vec::new();
        for gamma in [0.5, 1.0] {
            let spec = WeightSpec::new(2, gamma, 0.5)?;
            let scan = error_scaling_scan(2, spec, &DEFAULT_EPS_LIST, h)?;
            let rel = ((scan.fitted_exponent - scan.expected) / scan.expected).abs();
            c.check(rel < 0.1);
            cases.push(json!({
                "gamma": gamma,
                "fitted_exponent": num(scan.fitted_exponent),
                "expected": num(scan.expected),
            }));
        }
        c.put("cases", cases);
        Ok(())
    })
    .with_budget(30.0)
}

impl CriterionOutcome {
    fn with_budget(mut self, seconds: f64) -> Self {
        let ok = self.seconds < seconds;
        self.budget(ok);
        self
    }
}

pub fn uniform_invertibility(h: f64, seed: u64) -> CriterionOutcome {
    timed(6, "uniform_invertibility", |c| {
        let spec = WeightSpec::new(2, 1.0, 0.5)?;
        let points = sweep(&DEFAULT_EPS_LIST, |&eps| inverse_norm_point(2, spec, eps, h, seed));
        if let Some(p) = points.iter().find(|p| p.failed.is_some()) {
            c.check(false);
            c.put("error", p.failed.clone());
        }
        let est: Vec<f64> = points.iter().map(|p| p.estimate).collect();
        let hi = est.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = est.iter().cloned().fold(f64::INFINITY, f64::min);
        let gaps: Vec<f64> = points.iter().map(kappa_gap).collect();
        // sweep runs from large to small ε
        let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
        c.check(hi / lo < 2.0);
        c.check(shrinking);
        c.put("estimates", nums(&est));
        c.put("max_over_min", num(hi / lo));
        c.put("kappa_gap", nums(&gaps));
        Ok(())
    })
}

/// Half-decades from 1e-2 to 1e-12.
pub fn ift_sweep() -> Vec<f64> {
    (4..=24).map(|k| 10f64.powf(-(k as f64) / 2.0)).collect()
}

/// Leading sweep points at which the Newton solve itself is run; below
/// them `T(0)` already sits under the tolerance and no step is taken.
pub const NEWTON_POINTS: usize = 3;

/// Measured certificate at one ε.
pub fn ift_point(spec: WeightSpec, eps: f64, h: f64, seed: u64, samples: usize) -> Result<IftPoint> {
    let inv = inverse_norm_point(2, spec, eps, h, seed);
    if let Some(e) = inv.failed {
        return Err(solitonforge::Error::Domain(e));
    }
    let grid = glue_grid(2, eps, spec.delta(), h)?;
    let gd = build_glued(2, eps, &grid, spec)?;
    let mut rng = seeded(seed);
    let certificate = measured_certificate(&gd, spec, inv.estimate, samples, &mut rng)?;
    Ok(IftPoint { eps, certificate })
}

pub fn certified_newton(h: f64, seed: u64, samples: usize) -> CriterionOutcome {
    timed(7, "certified_newton", |c| {
        let spec = WeightSpec::new(2, 1.0, 0.5)?;
        let eps_list = ift_sweep();
        let points =
            sweep(&eps_list, |&eps| ift_point(spec, eps, h, seed, samples)).into_iter().collect::<Result<Vec<_>>>()?;
        let star = eps_star(&points);
        c.check(star.map_or(false, |s| s > 1e-3));
        c.put("eps_star", star.map_or(Value::Null, num));
        c.put(
            "sweep",
            points
                .iter()
                .map(|p| {
                    let k = &p.certificate;
                    json!({
                        "eps": num(p.eps),
                        "certificate": certificate_json(k),
                        "condition_ratio": num(2.0 * k.c * k.t0_norm / k.certified_radius),
                    })
                })
                .collect::<Vec<_>>(),
        );
        let mut solves = Vec::new();
        for point in &points[..NEWTON_POINTS] {
            let eps = point.eps;
            let grid = glue_grid(2, eps, 0.5, h)?;
            let gd = build_glued(2, eps, &grid, spec)?;
            let report = newton_solve(&gd, spec, 1e-10);
            let cert = &point.certificate;
            let k = report.quadratic_constant(residual_floor());
            let bound = cert.q * cert.c * cert.c;
            let quadratic = k.map_or(false, |k| k <= bound);
            c.check(report.converged && report.final_residual < 1e-10 && quadratic);
            solves.push(json!({
                "eps": num(eps),
                "residuals": nums(&report.residuals()),
                "quadratic_constant": k.map_or(Value::Null, num),
                "qc2": num(bound),
                "converged": report.converged,
            }));
        }
        c.put("newton", solves);
        Ok(())
    })
}

pub fn family_match(h: f64) -> CriterionOutcome {
    timed(8, "family_match", |c| {
        let spec = WeightSpec::new(2, 1.0, 0.5)?;
        let mut cases = Vec::new();
        for eps in [1e-2, 3e-3] {
            let mut errs = Vec::new();
            for hh in [h, h / 2.0] {
                let start = Instant::now();
                let grid = glue_grid(2, eps, 0.5, hh)?;
                let gd = build_glued(2, eps, &grid, spec)?;
                let report = newton_solve(&gd, spec, 1e-10);
                let err = family_compare(&gd, &report)?;
                c.budget(start.elapsed().as_secs_f64() < 60.0);
                c.check(err <= 5.0 * hh * hh);
                errs.push(err);
            }
            let ratio = errs[0] / errs[1];
            // halving the error at least, as h²-convergence gives about 4
            c.check(ratio >= 2.0);
            cases.push(json!({ "eps": num(eps), "sup_error": nums(&errs), "refinement": num(ratio) }));
        }
        c.put("bound_5h2", num(5.0 * h * h));
        c.put("cases", cases);
        Ok(())
    })
}

pub fn uniqueness(h: f64, seed: u64) -> CriterionOutcome {
    timed(9, "uniqueness", |c| {
        let spec = WeightSpec::new(2, 1.0, 0.5)?;
        let eps = 1e-2;
        let grid = glue_grid(2, eps, 0.5, h)?;
        let gd = build_glued(2, eps, &grid, spec)?;
        let mut rng = seeded(seed);
        // inside the validity ball, which contains the certified one
        let radius = 0.5 * validity_radius(&gd);
        let starts = 5;
        let spread = multi_start_spread(&gd, spec, 1e-10, starts, radius, &mut rng)?;
        let report = newton_solve(&gd, spec, 1e-10);
        let m = converged_metric(&gd, &report)?;
        let violation = convexity_check(&m, 2, 500, &mut rng)?;
        c.check(spread <= 1e-8 && violation <= 1e-10);
        c.put("starts", starts);
        c.put("start_radius", num(radius));
        c.put("spread", num(spread));
        c.put("convexity_max", num(violation));
        Ok(())
    })
}

/// Seeded commands run twice in process; the full check, verify-all run
/// twice, lives in the acceptance harness.
pub fn determinism(cfg: &ExperimentConfig) -> CriterionOutcome {
    timed(10, "determinism", |c| {
        let mut same = true;
        let mut checked = Vec::new();
        for cmd in [Command::InvertScan, Command::Newton] {
            let file = ConfigFile {
                seed: Some(cfg.seed),
                h: Some(cfg.h),
                eps: Some(1e-2),
                eps_list: Some(vec![1e-2, 1e-3]),
                ..Default::default()
            };
            let run_cfg =
                ExperimentConfig::resolve(cmd, file).map_err(|e| solitonforge::Error::Domain(e.to_string()))?;
            let a = crate::run(&run_cfg)?.files();
            let b = crate::run(&run_cfg)?.files();
            same &= a == b;
            checked.push(cmd.name());
        }
        c.check(same);
        c.put("commands", checked);
        Ok(())
    })
}

pub fn all(cfg: &ExperimentConfig) -> Vec<CriterionOutcome> {
    let (h, seed) = (cfg.h, cfg.seed);
    vec![
        cao_family(h),
        asymptotics(),
        barrier(h),
        max_principle(h, seed),
        error_scaling(h),
        uniform_invertibility(h, seed),
        certified_newton(h, seed, cfg.samples),
        family_match(h),
        uniqueness(h, seed),
        determinism(cfg),
    ]
}

pub fn record(cfg: &ExperimentConfig, outcomes: &[CriterionOutcome]) -> RunRecord {
    let mut rec = RunRecord::new(cfg);
    let mut criteria = Map::new();
    for o in outcomes {
        let mut d = o.detail.clone();
        d.insert("pass".into(), o.pass.into());
        criteria.insert(o.key(), Value::Object(d));
        rec.assert(&o.key(), o.pass);
        rec.timings.insert(o.key(), o.seconds);
    }
    rec.output("criteria", Value::Object(criteria));
    rec
}

pub fn verify_all(cfg: &ExperimentConfig) -> Result<RunRecord> {
    Ok(record(cfg, &all(cfg)))
}
