//! Browser bindings: three interactive operations over `ggred-core`, each
//! returning a JSON string for the static page in `www/`.

use ggred_core::euler::euler_characteristic;
use ggred_core::quotient::reduced_curvature_quotient;
use ggred_core::runner::{self, ScenarioConfig};
use ggred_core::scenarios::closed::{ClosedManifold, FlatTorus, RoundSphere, SphereProduct};
use ggred_core::scenarios::hopf::{Hopf, HopfParams};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Reduced curvature of the Hopf quotient at `(u0, u1)`: the ambient
/// formula against the direct quotient computation, in an orthonormal frame.
pub fn hopf_curvature_json(radius: f64, lambda: f64, u0: f64, u1: f64) -> Result<String, String> {
    if !(radius > 0.0) {
        return Err(format!("radius must be positive, got {radius}"));
    }
    let h = Hopf::new(HopfParams::with_lambda(radius, lambda));
    let rc = reduced_curvature_quotient(&h, &[u0, u1]).map_err(|e| e.to_string())?;
    Ok(json!({
        "formula": rc.formula,
        "direct": rc.direct,
        "residual": rc.residual(),
        "sectional": rc.sectional_12(),
        "round_value": 4.0 / (radius * radius),
    })
    .to_string())
}

/// Euler characteristic by quadrature of the curvature integrand.
/// `surface` is `sphere`, `torus` or `sphere_product`.
pub fn euler_json(surface: &str, radius: f64, flux: f64, order: usize) -> Result<String, String> {
    if order == 0 || order > 48 {
        return Err(format!("order must be in 1..=48, got {order}"));
    }
    if !(radius > 0.0) {
        return Err(format!("radius must be positive, got {radius}"));
    }
    let (chi, expected) = match surface {
        "sphere" => {
            let s = RoundSphere::new(radius);
            (euler_characteristic(&s, order), s.euler())
        }
        "torus" => {
            let t = FlatTorus::new(2);
            (euler_characteristic(&t, order), t.euler())
        }
        "sphere_product" => {
            let p = SphereProduct::new(radius, 0.7, flux);
            (euler_characteristic(&p, order.min(12)), p.euler())
        }
        other => return Err(format!("unknown surface `{other}`")),
    };
    let chi = chi.map_err(|e| e.to_string())?;
    Ok(json!({ "chi": chi, "expected": expected, "error": (chi - expected as f64).abs() }).to_string())
}

/// Runs a scenario config (the CLI's JSON format) and returns the report.
pub fn run_json(config: &str) -> Result<String, String> {
    let cfg = ScenarioConfig::from_json(config).map_err(|e| e.to_string())?;
    runner::run(&cfg).map(|r| r.to_json()).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn hopf_curvature(radius: f64, lambda: f64, u0: f64, u1: f64) -> Result<String, JsError> {
    hopf_curvature_json(radius, lambda, u0, u1).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn euler(surface: &str, radius: f64, flux: f64, order: usize) -> Result<String, JsError> {
    euler_json(surface, radius, flux, order).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn run_scenario(config: &str) -> Result<String, JsError> {
    run_json(config).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn scenario_names() -> String {
    serde_json::to_string(&runner::SCENARIOS.iter().map(|s| s.name).collect::<Vec<_>>()).expect("names serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn hopf_round_case() {
        let v = parse(&hopf_curvature_json(1.0, 0.0, 0.7, 0.3).unwrap());
        assert!((v["sectional"].as_f64().unwrap() - 4.0).abs() < 1e-8);
        assert!(v["residual"].as_f64().unwrap() < 1e-6);
        assert!(hopf_curvature_json(1.0, 0.0, 5.0, 0.3).is_err());
    }

    #[test]
    fn euler_values() {
        let v = parse(&euler_json("sphere", 1.0, 0.0, 16).unwrap());
        assert!(v["error"].as_f64().unwrap() < 1e-6);
        assert_eq!(v["expected"], 2);
        assert!(euler_json("klein", 1.0, 0.0, 8).is_err());
    }

    #[test]
    fn scenario_round_trip() {
        let v = parse(&run_json(r#"{"scenario": "flat_torus", "checks": ["euler"]}"#).unwrap());
        assert_eq!(v["status"], "pass");
        assert!(run_json(r#"{"scenario": "hopf", "parameters": {"lamda": 1}}"#).unwrap_err().contains("lamda"));
    }
}
