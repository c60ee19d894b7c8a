//! Browser bindings for the driven-qubit demo. Every export takes plain
//! numbers and returns a JSON string; errors come back as strings.

use num_complex::Complex64;
use serde::Serialize;
use wasm_bindgen::prelude::*;
use workhist::distributions::{
    comparison_report, jarzynski_report, to_json, tpm_distribution, trajectory_distributions, BuildOptions,
    WorkDistribution,
};
use workhist::operator::{from_row_major, thermal_state, DensityMatrix};
use workhist::protocol::{discretize, DiscretizedProtocol, ProtocolSpec};

/// Larger K is refused to keep the page responsive.
pub const MAX_K: usize = 16;

#[derive(Serialize)]
struct Curve {
    w: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    min_weight: f64,
}

impl From<&WorkDistribution> for Curve {
    fn from(d: &WorkDistribution) -> Self {
        let (w, p) = d.support().iter().copied().unzip();
        Curve {
            w,
            p,
            q: d.cumulative().into_iter().map(|x| x.1).collect(),
            min_weight: d.min_weight(),
        }
    }
}

#[derive(Serialize)]
struct Cumulatives {
    histories: Curve,
    measured: Curve,
}

#[derive(Serialize)]
struct ScanPoint {
    beta: f64,
    histories: f64,
    tpm: f64,
    rhs: f64,
}

fn qubit(omega: f64, g: f64, k: usize) -> Result<DiscretizedProtocol, String> {
    if k == 0 || k > MAX_K {
        return Err(format!("K must be between 1 and {MAX_K}"));
    }
    discretize(&ProtocolSpec::qubit_drive_quarter_period(omega, g, k), k).map_err(|e| e.to_string())
}

fn bloch_state(x: f64, y: f64, z: f64) -> Result<DensityMatrix, String> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let m = from_row_major(2, &[c(0.5 + z / 2.0, 0.0), c(x / 2.0, -y / 2.0), c(x / 2.0, y / 2.0), c(0.5 - z / 2.0, 0.0)])
        .map_err(|e| e.to_string())?;
    DensityMatrix::new(m).map_err(|e| e.to_string())
}

pub fn cumulatives_json(omega: f64, g: f64, k: usize, beta: f64) -> Result<String, String> {
    let proto = qubit(omega, g, k)?;
    let rho = thermal_state(proto.initial_hamiltonian(), beta).map_err(|e| e.to_string())?;
    let (p, pm) = trajectory_distributions(&proto, &rho, &BuildOptions::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&Cumulatives { histories: (&p).into(), measured: (&pm).into() }).map_err(|e| e.to_string())
}

pub fn comparison_json(omega: f64, g: f64, k: usize, x: f64, y: f64, z: f64) -> Result<String, String> {
    let proto = qubit(omega, g, k)?;
    let rho = bloch_state(x, y, z)?;
    let report = comparison_report(&proto, &rho, None, &BuildOptions::default()).map_err(|e| e.to_string())?;
    to_json(&report).map_err(|e| e.to_string())
}

pub fn jarzynski_scan_json(omega: f64, g: f64, k: usize, betas: &[f64]) -> Result<String, String> {
    let proto = qubit(omega, g, k)?;
    let opts = BuildOptions::default();
    let mut points = Vec::with_capacity(betas.len());
    for &beta in betas {
        if beta == 0.0 {
            points.push(ScanPoint { beta, histories: 1.0, tpm: 1.0, rhs: 1.0 });
            continue;
        }
        let rho = thermal_state(proto.initial_hamiltonian(), beta).map_err(|e| e.to_string())?;
        let (p, _) = trajectory_distributions(&proto, &rho, &opts).map_err(|e| e.to_string())?;
        let t = tpm_distribution(&proto, &rho, None).map_err(|e| e.to_string())?;
        let r = jarzynski_report(Some(&p), &proto, &rho, beta).map_err(|e| e.to_string())?;
        points.push(ScanPoint { beta, histories: r.lhs, tpm: t.exponential_average(beta), rhs: r.rhs });
    }
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

/// Histories and measured cumulatives for a thermal qubit.
#[wasm_bindgen(js_name = qubitCumulatives)]
pub fn qubit_cumulatives(omega: f64, g: f64, k: usize, beta: f64) -> Result<String, JsValue> {
    cumulatives_json(omega, g, k, beta).map_err(|e| JsValue::from_str(&e))
}

/// Property matrix of all four distributions for a qubit with Bloch vector (x, y, z).
#[wasm_bindgen(js_name = compareQubit)]
pub fn compare_qubit(omega: f64, g: f64, k: usize, x: f64, y: f64, z: f64) -> Result<String, JsValue> {
    comparison_json(omega, g, k, x, y, z).map_err(|e| JsValue::from_str(&e))
}

/// Exponential work averages against the free-energy ratio over a list of beta.
#[wasm_bindgen(js_name = jarzynskiScan)]
pub fn jarzynski_scan(omega: f64, g: f64, k: usize, betas: Vec<f64>) -> Result<String, JsValue> {
    jarzynski_scan_json(omega, g, k, &betas).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulatives_have_sixteen_points() {
        let v: serde_json::Value = serde_json::from_str(&cumulatives_json(1.0, 1.0, 15, 0.1).unwrap()).unwrap();
        assert_eq!(v["histories"]["w"].as_array().unwrap().len(), 16);
        assert!(v["histories"]["min_weight"].as_f64().unwrap() < 0.0);
        assert!(v["measured"]["min_weight"].as_f64().unwrap() >= 0.0);
    }

    #[test]
    fn comparison_reports_four_rows() {
        let v: serde_json::Value = serde_json::from_str(&comparison_json(1.0, 1.0, 4, 0.6, 0.3, 0.5).unwrap()).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn scan_tpm_matches_rhs() {
        let v: serde_json::Value = serde_json::from_str(&jarzynski_scan_json(1.0, 1.0, 6, &[0.0, 0.5, 2.0]).unwrap()).unwrap();
        for p in v.as_array().unwrap() {
            assert!((p["tpm"].as_f64().unwrap() - p["rhs"].as_f64().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_large_k_and_bad_states() {
        assert!(cumulatives_json(1.0, 1.0, 40, 0.1).is_err());
        assert!(comparison_json(1.0, 1.0, 4, 1.0, 1.0, 1.0).is_err());
    }
}
