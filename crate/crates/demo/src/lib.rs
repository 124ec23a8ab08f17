//! WebAssembly bindings for the browser demo. Every entry point returns a
//! JSON string; failures come back as `{"error": "..."}`.

use erm_bounds::bisample::{erm_revenue_enclosure, erm_revenue_mc};
use erm_bounds::curve::{validate_curve, RevenueCurve};
use erm_bounds::gridsearch::{three_piece_curve, ThreePieceParams};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_SAMPLES: u64 = 20_000_000;

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn curve(knots: &[f64], values: &[f64]) -> Result<RevenueCurve, String> {
    validate_curve(knots.to_vec(), values.to_vec()).map_err(|e| e.to_string())
}

fn enclosure_json(c: &RevenueCurve, tol: f64) -> Value {
    let e = erm_revenue_enclosure(c, tol);
    let peak = c.max_value();
    json!({
        "lower": e.lower,
        "upper": e.upper,
        "width": e.width(),
        "converged": e.converged,
        "peak": peak,
        "argmax": c.argmax(),
        "ratio": if peak > 0.0 { json!([e.lower / peak, e.upper / peak]) } else { Value::Null },
    })
}

/// Certified enclosure of the ERM revenue for a piecewise-linear curve.
#[wasm_bindgen]
pub fn enclosure(knots: &[f64], values: &[f64], tol: f64) -> String {
    respond((|| {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(format!("tolerance must be positive, got {tol}"));
        }
        Ok(enclosure_json(&curve(knots, values)?, tol))
    })())
}

/// Seeded Monte Carlo estimate of the same quantity.
#[wasm_bindgen]
pub fn monte_carlo(knots: &[f64], values: &[f64], samples: u32, seed: u32) -> String {
    respond((|| {
        let samples = u64::from(samples).min(MAX_SAMPLES);
        let est = erm_revenue_mc(&curve(knots, values)?, samples, u64::from(seed)).map_err(|e| e.to_string())?;
        Ok(json!({ "estimate": est.estimate, "stderr": est.stderr, "samples": samples, "seed": seed }))
    })())
}

/// Least concave curve through `(0,0)`, `(q_opt,1)`, `(q2,r2)`, `(1,r3)`
/// together with its revenue enclosure.
#[wasm_bindgen]
pub fn three_piece(q_opt: f64, q2: f64, r2: f64, r3: f64, tol: f64) -> String {
    respond((|| {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(format!("tolerance must be positive, got {tol}"));
        }
        let c = three_piece_curve(&ThreePieceParams { q_opt, q2, r2, r3 }).map_err(|e| e.to_string())?;
        let mut v = enclosure_json(&c.curve, tol);
        v["knots"] = json!(c.curve.knots());
        v["values"] = json!(c.curve.values());
        v["degenerate"] = json!(c.degenerate);
        Ok(v)
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn affine_enclosure() {
        let v = parse(enclosure(&[0.0, 1.0], &[1.0, 0.0], 1e-6));
        assert!(v["lower"].as_f64().unwrap() <= 2.0 / 3.0 && 2.0 / 3.0 <= v["upper"].as_f64().unwrap());
        assert_eq!(v["converged"], true);
    }

    #[test]
    fn errors_are_reported() {
        assert!(parse(enclosure(&[0.0, 1.0], &[1.0, 0.0], 0.0))["error"].is_string());
        assert!(parse(enclosure(&[0.0, 0.5, 1.0], &[0.5, 0.0, 1.0], 1e-6))["error"].is_string());
        assert!(parse(three_piece(1.5, 0.9, 0.1, 0.0, 1e-6))["error"].is_string());
    }

    #[test]
    fn monte_carlo_inside_enclosure() {
        let v = parse(monte_carlo(&[0.0, 1.0], &[1.0, 0.0], 100_000, 7));
        let (m, s) = (v["estimate"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
        assert!((m - 2.0 / 3.0).abs() <= 5.0 * s);
    }

    #[test]
    fn three_piece_curve_and_value() {
        let v = parse(three_piece(1.0, 1.0, 1.0, 1.0, 1e-6));
        assert_eq!(v["knots"], json!([0.0, 1.0]));
        let r = v["ratio"].as_array().unwrap();
        assert!(r[0].as_f64().unwrap() <= 0.6511 && 0.6510 <= r[1].as_f64().unwrap());
    }
}
