//! Browser bindings: each call runs one computation and returns a JSON
//! string for the page to plot.

use serde_json::{json, Value};
use solitonforge::drift_operator::inverse_norm_point;
use solitonforge::glue::{build_glued, error_norm, glue_grid, WeightSpec};
use solitonforge::radial_soliton::{soliton_residual, solve_profile};
use solitonforge::rng::seeded;
use solitonforge::soliton_newton::{family_compare, measured_certificate, newton_solve};
use solitonforge::Grid;
use wasm_bindgen::prelude::*;

/// Plots get at most this many points per curve.
const MAX_POINTS: usize = 1500;

fn thin(v: &[f64]) -> Vec<f64> {
    let step = v.len().div_ceil(MAX_POINTS).max(1);
    v.iter().step_by(step).copied().collect()
}

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn finite(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// Cao family member `φ_a` on `[t_min, t_max]`.
pub fn cao_profile_json(n: u32, a: f64, t_min: f64, t_max: f64, h: f64) -> Result<String, String> {
    let grid = Grid::new(t_min, t_max, h).map_err(|e| e.to_string())?;
    let p = solve_profile(n, a, &grid).map_err(|e| e.to_string())?;
    let s = soliton_residual(&p.metric(), n).map_err(|e| e.to_string())?;
    let spread = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(json!({
        "t": thin(grid.nodes()),
        "phi": thin(p.phi()),
        "phi_t": thin(p.phi_t()),
        "residual_spread": finite(spread),
    })
    .to_string())
}

/// Glued potential for the ALE bubble of size ε.
pub fn glued_profile_json(n: u32, eps: f64, gamma: f64, delta: f64) -> Result<String, String> {
    let spec = WeightSpec::new(n, gamma, delta).map_err(|e| e.to_string())?;
    let grid = glue_grid(n, eps, delta, 1.0 / 64.0).map_err(|e| e.to_string())?;
    let gd = build_glued(n, eps, &grid, spec).map_err(|e| e.to_string())?;
    Ok(json!({
        "t": thin(grid.nodes()),
        "u_t": thin(gd.u_t()),
        "f": thin(gd.f()),
        "r_eps": finite(gd.r_eps()),
        "error_norm": finite(error_norm(&gd, spec)),
    })
    .to_string())
}

/// Newton solve for `n = 2`, γ = 1, δ = ½ at one ε, with its certificate.
pub fn newton_summary_json(eps: f64, seed: u64) -> Result<String, String> {
    let spec = WeightSpec::new(2, 1.0, 0.5).map_err(|e| e.to_string())?;
    let h = 1.0 / 64.0;
    let grid = glue_grid(2, eps, 0.5, h).map_err(|e| e.to_string())?;
    let gd = build_glued(2, eps, &grid, spec).map_err(|e| e.to_string())?;
    let inv = inverse_norm_point(2, spec, eps, h, seed);
    if let Some(e) = inv.failed {
        return Err(e);
    }
    let mut rng = seeded(seed);
    let cert = measured_certificate(&gd, spec, inv.estimate, 16, &mut rng).map_err(|e| e.to_string())?;
    let report = newton_solve(&gd, spec, 1e-10);
    let sup = family_compare(&gd, &report).map_err(|e| e.to_string())?;
    let residuals: Vec<Value> = report.residuals().into_iter().map(finite).collect();
    Ok(json!({
        "residuals": residuals,
        "sup_error": finite(sup),
        "c": finite(cert.c),
        "q": finite(cert.q),
        "t0_norm": finite(cert.t0_norm),
        "certified_radius": finite(cert.certified_radius),
        "condition_met": cert.condition_met,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn cao_profile(n: u32, a: f64, t_min: f64, t_max: f64, h: f64) -> Result<String, JsValue> {
    cao_profile_json(n, a, t_min, t_max, h).map_err(err)
}

#[wasm_bindgen]
pub fn glued_profile(n: u32, eps: f64, gamma: f64, delta: f64) -> Result<String, JsValue> {
    glued_profile_json(n, eps, gamma, delta).map_err(err)
}

#[wasm_bindgen]
pub fn newton_summary(eps: f64, seed: u32) -> Result<String, JsValue> {
    newton_summary_json(eps, seed as u64).map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cigar_json() {
        let v: Value = serde_json::from_str(&cao_profile_json(1, 0.0, -10.0, 10.0, 1.0 / 128.0).unwrap()).unwrap();
        let t = v["t"].as_array().unwrap();
        assert!(t.len() <= MAX_POINTS);
        let (t0, pt0) = (t[0].as_f64().unwrap(), v["phi_t"][0].as_f64().unwrap());
        assert!((pt0 - 1.0 / (1.0 + (-t0).exp())).abs() < 1e-12);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(glued_profile_json(2, 1e-2, 3.0, 0.5).is_err());
        assert!(cao_profile_json(2, 0.0, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn newton_converges() {
        let v: Value = serde_json::from_str(&newton_summary_json(1e-2, 42).unwrap()).unwrap();
        let r = v["residuals"].as_array().unwrap();
        assert!(r.last().unwrap().as_f64().unwrap() < 1e-10);
        assert!(v["sup_error"].as_f64().unwrap() < 5.0 / 64.0 / 64.0);
    }
}
