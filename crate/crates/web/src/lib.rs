//! Browser bindings: tripod gates around a rectangle loop, the gate
//! commutator, and the spectrum of the tripod Hamiltonian at a chart point.

use std::f64::consts::TAU;

use holoq::biortho::{biorthogonal_eig, pseudo_hermiticity_residual};
use holoq::gaugeholo::{metric_at, HamiltonianFamily, HolonomyOptions, ParamLoop};
use holoq::matrix::ComplexMatrix;
use holoq::tripod::{self, Chart, TripodFamily};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn chart(name: &str) -> Result<Chart, JsError> {
    match name {
        "u1" => Ok(Chart::U1),
        "u2" => Ok(Chart::U2),
        _ => Err(JsError::new(&format!("unknown chart {name:?}"))),
    }
}

fn entries(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    (0..m.nrows())
        .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
        .map(|(r, c)| [m[(r, c)].re, m[(r, c)].im])
        .collect()
}

fn err(e: holoq::error::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Gate for the rectangle (0,0) → (ϑ₀,0) → (ϑ₀,2π) → (0,2π), both from the
/// closed form and from the numerical holonomy, as a JSON string.
#[wasm_bindgen]
pub fn tripod_gate(chart_name: &str, theta0: f64, alpha: f64, delta: f64, segments: usize) -> Result<String, JsError> {
    if !(theta0 > 0.0 && theta0 < std::f64::consts::PI) {
        return Err(JsError::new("theta0 must lie in (0, π)"));
    }
    let path = ParamLoop::rectangle([0.0, 0.0], [theta0, TAU]);
    let opts = HolonomyOptions {
        n_steps: segments.clamp(8, 20_000),
        ..HolonomyOptions::default()
    };
    let report = match chart(chart_name)? {
        Chart::U1 => tripod::gate_u1(&path, alpha, delta, 1.0, &opts),
        Chart::U2 => tripod::gate_u2(&path, alpha, delta, 1.0, &opts),
    }
    .map_err(err)?;
    Ok(json!({
        "beta": report.beta,
        "gate": entries(&report.gate),
        "holonomy": entries(&report.numeric_holonomy),
        "discrepancy": report.discrepancy,
        "pseudo_unitarity_residual": report.pseudo_unitarity_residual,
    })
    .to_string())
}

/// ‖[U₁(β₁), U₂(β₂)]‖_F.
#[wasm_bindgen]
pub fn commutator_norm(beta1: f64, beta2: f64) -> f64 {
    tripod::commutator_norm(beta1, beta2)
}

/// Eigenvalues of H(ϑ, φ) and its pseudo-Hermiticity residual, as JSON.
#[wasm_bindgen]
pub fn spectrum(chart_name: &str, alpha: f64, delta: f64, theta: f64, phi: f64) -> Result<String, JsError> {
    let family = TripodFamily::new(chart(chart_name)?, alpha, delta, 1.0).map_err(err)?;
    let point = [theta, phi];
    let h = family.hamiltonian(&point).map_err(err)?;
    let sys = biorthogonal_eig(&h, None).map_err(err)?;
    let eta = metric_at(&family, &point).map_err(err)?;
    let residual = pseudo_hermiticity_residual(&h, &eta).map_err(err)?;
    let eigenvalues: Vec<[f64; 2]> = sys.eigenvalues().iter().map(|z| [z.re, z.im]).collect();
    Ok(json!({
        "eigenvalues": eigenvalues,
        "pseudo_hermiticity_residual": residual,
        "metric_min_eigenvalue": eta.min_eigenvalue(),
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_json_has_small_discrepancy() {
        let out: serde_json::Value =
            serde_json::from_str(&tripod_gate("u1", std::f64::consts::FRAC_PI_2, 0.6, 1.0, 2000).unwrap()).unwrap();
        assert!((out["beta"].as_f64().unwrap() + std::f64::consts::PI).abs() < 1e-9);
        assert!(out["discrepancy"].as_f64().unwrap() < 1e-6);
    }

    #[test]
    fn spectrum_is_real() {
        let out: serde_json::Value = serde_json::from_str(&spectrum("u2", 0.6, 1.0, 0.8, 2.0).unwrap()).unwrap();
        for ev in out["eigenvalues"].as_array().unwrap() {
            assert!(ev[1].as_f64().unwrap().abs() < 1e-10);
        }
        assert!(out["pseudo_hermiticity_residual"].as_f64().unwrap() < 1e-10);
    }
}
