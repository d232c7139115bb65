//! Browser bindings for three small interactive calculations. Every entry
//! point returns a JSON string so the page needs no generated type glue.

use atomarray::geometry::{apply_disorder, build_2d, DisorderSpec, GaussianBeam};
use atomarray::greens::{
    collective_rate_2d, collective_shift_2d, phase_matched_shift, LatticeParams, DEFAULT_CUTOFF,
};
use atomarray::memory::{
    max_step, optimal_storage_control, simulate_retrieval, simulate_storage, time_reverse_control,
    PulseShape,
};
use atomarray::model1d::InterfaceParams;
use atomarray::scattering::{
    multilayer_effective_solve, reflectivity_spectrum, LayerStack, ScanGrid, SpectrumOptions,
};
use atomarray::C64;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest array side the page may request; a dense solve of `n²` atoms runs per point.
pub const MAX_SIDE: usize = 16;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(js_err)
}

#[derive(Serialize)]
struct Spectrum {
    delta: Vec<f64>,
    reflectivity: Vec<f64>,
    r0: Option<f64>,
    center: Option<f64>,
    inverse_cooperativity: Option<f64>,
    error: Option<String>,
}

/// Reflection spectrum of an `n_side²` array with waist `waist_over_side·L`
/// and Gaussian position disorder of spread `sigma` (wavelengths).
#[wasm_bindgen]
pub fn array_spectrum(
    a: f64,
    n_side: usize,
    waist_over_side: f64,
    sigma: f64,
    seed: u64,
    steps: usize,
) -> Result<String, JsError> {
    if n_side == 0 || n_side > MAX_SIDE {
        return Err(JsError::new(&format!(
            "array side must lie in 1..={MAX_SIDE}"
        )));
    }
    let lat = LatticeParams::planar(a).map_err(js_err)?;
    let ordered = build_2d(&lat, n_side).map_err(js_err)?;
    let arr = apply_disorder(&ordered, &DisorderSpec::normal(sigma, 1, seed), 0).map_err(js_err)?;
    let beam = GaussianBeam::new(waist_over_side * a * n_side as f64).map_err(js_err)?;
    let g0 = collective_rate_2d(&lat);
    let d0 = collective_shift_2d(&lat, DEFAULT_CUTOFF)
        .map_err(js_err)?
        .shift;
    let grid = ScanGrid::around(d0, 5.0 * g0, steps.max(2)).map_err(js_err)?;
    // a failed fit still leaves a spectrum worth plotting
    let (scan, error) = match reflectivity_spectrum(&arr, &beam, &grid, &SpectrumOptions::default())
    {
        Ok(s) => (s, None),
        Err(e) => {
            let opts = SpectrumOptions {
                fit: false,
                ..Default::default()
            };
            (
                reflectivity_spectrum(&arr, &beam, &grid, &opts).map_err(js_err)?,
                Some(e.to_string()),
            )
        }
    };
    to_json(&Spectrum {
        delta: scan.deltas(),
        reflectivity: scan.reflectivities(),
        r0: scan.fit.map(|f| f.r0),
        center: scan.fit.map(|f| f.center),
        inverse_cooperativity: scan.fit.map(|f| f.inverse_cooperativity),
        error,
    })
}

#[derive(Serialize)]
struct Memory {
    bound: f64,
    storage_efficiency: f64,
    retrieval_efficiency: f64,
    time: Vec<f64>,
    input: Vec<f64>,
    control: Vec<f64>,
    spin: Vec<f64>,
}

/// Optimal storage and time-reversed retrieval in the single-mode interface
/// model with cooperativity `c`. Traces are magnitudes, decimated to ~400 points.
#[wasm_bindgen]
pub fn interface_memory(c: f64, area: f64) -> Result<String, JsError> {
    let p = InterfaceParams::from_cooperativity(c, 1.0).map_err(js_err)?;
    let kappa = 0.01 * p.total_width();
    let h = PulseShape::rising_exponential(kappa, area / kappa, 2001).map_err(js_err)?;
    let ctl = optimal_storage_control(&h, &p, 0.0)
        .map_err(js_err)?
        .control;
    let dt = max_step(&p, &ctl);
    let store = simulate_storage(&h, &ctl, &p, 0.0, dt).map_err(js_err)?;
    let back = simulate_retrieval(C64::new(1.0, 0.0), &time_reverse_control(&ctl), &p, 0.0, dt)
        .map_err(js_err)?;
    let stride = (store.times.len() / 400).max(1);
    let pick = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<_>>();
    let time = pick(&store.times);
    to_json(&Memory {
        bound: c / (1.0 + c),
        storage_efficiency: store.efficiency,
        retrieval_efficiency: back.efficiency,
        input: time.iter().map(|t| h.sample(*t).norm()).collect(),
        control: time.iter().map(|t| ctl.sample(*t).norm()).collect(),
        spin: pick(&store.spin.iter().map(|s| s.norm()).collect::<Vec<_>>()),
        time,
    })
}

#[derive(Serialize)]
struct Stack {
    delta: Vec<f64>,
    reflectivity: Vec<f64>,
    shift: f64,
    delta_prime: f64,
    peak: Option<f64>,
    cooperativity: Option<f64>,
}

/// Reflection of `layers` phase-matched lattices spaced `a_z` apart, each
/// with extra loss `loss_over_rate·Γ₀`.
#[wasm_bindgen]
pub fn layer_stack(
    a: f64,
    layers: usize,
    a_z: f64,
    loss_over_rate: f64,
) -> Result<String, JsError> {
    if layers == 0 || layers > 50 {
        return Err(JsError::new("layer count must lie in 1..=50"));
    }
    let lat =
        LatticeParams::new(a, a_z, atomarray::greens::DipoleOrientation::x()).map_err(js_err)?;
    let g0 = collective_rate_2d(&lat);
    let stack = LayerStack::new(lat, layers, 1.0, loss_over_rate * g0).map_err(js_err)?;
    let dp = phase_matched_shift(&lat, layers).map_err(js_err)?;
    let grid = ScanGrid::around(stack.shift + dp, 5.0 * g0 * layers as f64, 401).map_err(js_err)?;
    let scan = multilayer_effective_solve(&stack, &grid).map_err(js_err)?;
    to_json(&Stack {
        delta: scan.deltas(),
        reflectivity: scan.reflectivities(),
        shift: stack.shift,
        delta_prime: dp,
        peak: scan.fit.map(|f| f.center),
        cooperativity: scan.fit.map(|f| f.cooperativity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_reaches_bound() {
        let v: serde_json::Value =
            serde_json::from_str(&interface_memory(10.0, 20.0).unwrap()).unwrap();
        let bound = v["bound"].as_f64().unwrap();
        assert!((v["storage_efficiency"].as_f64().unwrap() - bound).abs() < 0.02 * bound);
        assert_eq!(
            v["time"].as_array().unwrap().len(),
            v["spin"].as_array().unwrap().len()
        );
    }

    #[test]
    fn small_array_spectrum() {
        let v: serde_json::Value =
            serde_json::from_str(&array_spectrum(0.6, 6, 0.25, 0.0, 1, 41).unwrap()).unwrap();
        assert_eq!(v["delta"].as_array().unwrap().len(), 41);
        assert!(v["reflectivity"]
            .as_array()
            .unwrap()
            .iter()
            .all(|r| r.as_f64().unwrap() <= 1.0 + 1e-9));
    }

    #[test]
    fn stack_peaks_near_shifted_resonance() {
        let v: serde_json::Value =
            serde_json::from_str(&layer_stack(0.68, 10, 1.0, 0.05).unwrap()).unwrap();
        let target = v["shift"].as_f64().unwrap() + v["delta_prime"].as_f64().unwrap();
        assert!((v["peak"].as_f64().unwrap() - target).abs() < 0.05);
    }
}
