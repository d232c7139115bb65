//! Reflectivity spectra and resonance extraction.

use serde::{Deserialize, Serialize};

use super::field::{ModeProjector, ProjectionGrid};
use super::fit::{brent_maximize, fit_lorentzian, LorentzianFit};
use super::shifted::{ShiftScratch, ShiftedSolver};
use super::{build_matrix, drive_vector, Direction, InteractionMatrix, RESIDUAL_LIMIT};
use crate::geometry::{ArrayRealization, GaussianBeam};
use crate::{Error, Result, C64, I};

/// Uniform detuning grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl ScanGrid {
    pub fn new(start: f64, stop: f64, steps: usize) -> Result<Self> {
        if !(start < stop) || steps < 2 || !start.is_finite() || !stop.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scan grid needs start < stop and at least 2 steps, got [{start}, {stop}] with {steps}"
            )));
        }
        Ok(Self { start, stop, steps })
    }

    /// `center ± half_width` with `steps` points.
    pub fn around(center: f64, half_width: f64, steps: usize) -> Result<Self> {
        Self::new(center - half_width, center + half_width, steps)
    }

    pub fn points(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|j| self.start + j as f64 * h).collect()
    }
}

/// Minimum number of coarse points for resonance finding.
pub const MIN_COARSE_POINTS: usize = 81;
/// Samples in the Lorentzian fit window.
const FIT_POINTS: usize = 41;
/// Peak power reflectivity below which no resonance is reported.
const MIN_PEAK: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub delta_p: f64,
    pub reflectivity: f64,
    pub transmission: f64,
    /// `1 − R − T`.
    pub loss: f64,
    pub r: C64,
    pub t: C64,
}

impl SpectrumPoint {
    pub fn new(delta_p: f64, r: C64, t: C64) -> Self {
        let reflectivity = r.norm_sqr();
        let transmission = t.norm_sqr();
        Self {
            delta_p,
            reflectivity,
            transmission,
            loss: 1.0 - reflectivity - transmission,
            r,
            t,
        }
    }
}

/// Extracted resonance. `r0` and `center` come from the refined maximum of
/// `|r|`; the Lorentzian fit supplies the widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFit {
    pub r0: f64,
    pub center: f64,
    pub cooperativity: f64,
    pub inverse_cooperativity: f64,
    pub lorentzian: LorentzianFit,
}

impl ResonanceFit {
    fn from_peak(r0: f64, center: f64, lorentzian: LorentzianFit) -> Self {
        Self {
            r0,
            center,
            cooperativity: r0 / (1.0 - r0),
            inverse_cooperativity: (1.0 - r0) / r0,
            lorentzian,
        }
    }

    /// Linewidth `Γ + γ_loss`.
    pub fn linewidth(&self) -> f64 {
        self.lorentzian.total_width
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumScan {
    pub points: Vec<SpectrumPoint>,
    pub fit: Option<ResonanceFit>,
    pub seed: u64,
    pub realization_index: u64,
}

impl SpectrumScan {
    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta_p).collect()
    }

    pub fn reflectivities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.reflectivity).collect()
    }
}

/// Something that returns `(r, t)` at a probe detuning.
pub trait ReflectionModel {
    fn amplitudes(&mut self, delta_p: f64) -> Result<(C64, C64)>;
}

impl<F: FnMut(f64) -> Result<(C64, C64)>> ReflectionModel for F {
    fn amplitudes(&mut self, delta_p: f64) -> Result<(C64, C64)> {
        self(delta_p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub direction: Direction,
    /// Distance of the projection planes from the array centre.
    pub distance: f64,
    /// Defaults to [`ProjectionGrid::for_beam`].
    pub grid: Option<ProjectionGrid>,
    pub fit: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            direction: Direction::Forward,
            distance: 5.0,
            grid: None,
            fit: true,
        }
    }
}

/// Reflection and transmission of one realization at arbitrary detunings,
/// sharing one Hessenberg reduction across all of them.
pub struct ReflectivityProbe {
    matrix: InteractionMatrix,
    solver: ShiftedSolver,
    drive: Vec<C64>,
    drive_reduced: Vec<C64>,
    back_reduced: Vec<C64>,
    front_reduced: Vec<C64>,
    input_projection: C64,
    scratch: ShiftScratch,
    pub direction: Direction,
}

impl ReflectivityProbe {
    pub fn new(
        arr: &ArrayRealization,
        beam: &GaussianBeam,
        opts: &SpectrumOptions,
    ) -> Result<Self> {
        arr.validate()?;
        let matrix = build_matrix(arr, 0.0)?;
        let grid = opts.grid.unwrap_or_else(|| ProjectionGrid::for_beam(beam));
        let coeffs = ModeProjector::new(*beam, grid, opts.distance)?.coefficients(arr)?;
        let solver = ShiftedSolver::new(matrix.kernel());
        let drive = drive_vector(arr, beam, opts.direction);
        let i_drive: Vec<C64> = drive.iter().map(|b| I * b).collect();
        let (back, front) = match opts.direction {
            Direction::Forward => (&coeffs.minus, &coeffs.plus),
            Direction::Backward => (&coeffs.plus, &coeffs.minus),
        };
        Ok(Self {
            drive_reduced: solver.reduce_rhs(&i_drive),
            back_reduced: solver.reduce_functional(back),
            front_reduced: solver.reduce_functional(front),
            input_projection: coeffs.input_projection,
            solver,
            drive,
            matrix,
            scratch: ShiftScratch::default(),
            direction: opts.direction,
        })
    }

    pub fn matrix(&self) -> &InteractionMatrix {
        &self.matrix
    }

    pub fn amplitudes(&mut self, delta_p: f64) -> Result<(C64, C64)> {
        let y = self
            .solver
            .solve_reduced(delta_p, &self.drive_reduced, &mut self.scratch)?;
        let dot = |c: &[C64]| c.iter().zip(&y).map(|(a, b)| a * b).sum::<C64>();
        let r = dot(&self.back_reduced) / self.input_projection;
        let t = 1.0 + dot(&self.front_reduced) / self.input_projection;
        Ok((r, t))
    }

    /// Steady-state dipoles, checked against the dense residual contract.
    pub fn dipoles(&mut self, delta_p: f64) -> Result<Vec<C64>> {
        let y = self
            .solver
            .solve_reduced(delta_p, &self.drive_reduced, &mut self.scratch)?;
        let sigma = self.solver.expand(&y);
        let m = self.matrix.with_delta_p(delta_p);
        let mx = m.apply(&sigma);
        let num = mx
            .iter()
            .zip(&self.drive)
            .map(|(a, b)| (a - I * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den = self.drive.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        let residual = num / den;
        if !(residual <= RESIDUAL_LIMIT) {
            return Err(Error::Singular {
                condition: residual / f64::EPSILON,
            });
        }
        Ok(sigma)
    }
}

impl ReflectionModel for ReflectivityProbe {
    fn amplitudes(&mut self, delta_p: f64) -> Result<(C64, C64)> {
        ReflectivityProbe::amplitudes(self, delta_p)
    }
}

/// Coarse scan, Brent refinement of the `|r|` maximum, and a Lorentzian fit
/// over the full width at half maximum.
pub fn find_resonance(model: &mut impl ReflectionModel, coarse: &ScanGrid) -> Result<ResonanceFit> {
    let deltas = coarse.points();
    let mut mags = Vec::with_capacity(deltas.len());
    for d in &deltas {
        mags.push(model.amplitudes(*d)?.0.norm());
    }
    resonance_from_samples(model, &deltas, &mags)
}

fn resonance_from_samples(
    model: &mut impl ReflectionModel,
    deltas: &[f64],
    mags: &[f64],
) -> Result<ResonanceFit> {
    if deltas.len() < MIN_COARSE_POINTS {
        log::warn!(
            "coarse scan has {} points; resonance finding expects at least {MIN_COARSE_POINTS}",
            deltas.len()
        );
    }
    let (jmax, &peak) = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::FitFailure("empty scan".into()))?;
    if peak * peak < MIN_PEAK {
        return Err(Error::FitFailure(format!(
            "peak reflectivity {:.3e} is below {MIN_PEAK:e}",
            peak * peak
        )));
    }
    if jmax == 0 || jmax + 1 == deltas.len() {
        return Err(Error::FitFailure(format!(
            "reflectivity peak at δ_p = {} lies on the scan boundary",
            deltas[jmax]
        )));
    }
    let (center, r0) = brent_maximize(
        |d| Ok(model.amplitudes(d)?.0.norm()),
        deltas[jmax - 1],
        deltas[jmax + 1],
        1e-10,
    )?;

    // half-power points from the coarse samples, interpolated linearly
    let half = 0.5 * r0 * r0;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = jmax;
        for j in range {
            let p = mags[j] * mags[j];
            if p < half {
                let q = mags[prev] * mags[prev];
                let f = (q - half) / (q - p);
                return Some(deltas[prev] + f * (deltas[j] - deltas[prev]));
            }
            prev = j;
        }
        None
    };
    let left = crossing(&mut (0..jmax).rev());
    let right = crossing(&mut (jmax + 1..deltas.len()));
    let hw = match (left, right) {
        (Some(l), Some(r)) => 0.5 * (r - l),
        (Some(l), None) => center - l,
        (None, Some(r)) => r - center,
        (None, None) => {
            return Err(Error::FitFailure("resonance is wider than the scan".into()));
        }
    };
    let window = ScanGrid::around(center, hw.max(1e-12), FIT_POINTS)?.points();
    let mut wmags = Vec::with_capacity(FIT_POINTS);
    for d in &window {
        wmags.push(model.amplitudes(*d)?.0.norm());
    }
    let lorentzian = fit_lorentzian(&window, &wmags)?;
    if r0 >= 1.0 {
        return Err(Error::FitFailure(format!(
            "peak amplitude {r0} is not below one"
        )));
    }
    Ok(ResonanceFit::from_peak(r0, center, lorentzian))
}

/// Evaluates `model` on `grid` and optionally extracts the resonance.
pub fn scan_model(
    model: &mut impl ReflectionModel,
    grid: &ScanGrid,
    fit: bool,
) -> Result<SpectrumScan> {
    let deltas = grid.points();
    let mut points = Vec::with_capacity(deltas.len());
    for d in &deltas {
        let (r, t) = model.amplitudes(*d)?;
        points.push(SpectrumPoint::new(*d, r, t));
    }
    let fit = if fit {
        let mags: Vec<f64> = points.iter().map(|p| p.r.norm()).collect();
        Some(resonance_from_samples(model, &deltas, &mags)?)
    } else {
        None
    };
    Ok(SpectrumScan {
        points,
        fit,
        seed: 0,
        realization_index: 0,
    })
}

/// Full coupled-dipole spectrum of one realization.
pub fn reflectivity_spectrum(
    arr: &ArrayRealization,
    beam: &GaussianBeam,
    grid: &ScanGrid,
    opts: &SpectrumOptions,
) -> Result<SpectrumScan> {
    let mut probe = ReflectivityProbe::new(arr, beam, opts)?;
    let mut scan = scan_model(&mut probe, grid, opts.fit)?;
    if let Some(fit) = &scan.fit {
        // audit the fast path against the dense residual at the resonance
        probe.dipoles(fit.center)?;
    }
    scan.seed = arr.seed;
    scan.realization_index = arr.realization_index;
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_2d, mode_overlap_eta};
    use crate::greens::{collective_rate_2d, collective_shift_2d, LatticeParams, DEFAULT_CUTOFF};
    use crate::model1d::{reflection_amplitude, InterfaceParams};
    use crate::scattering::{solve_steady_state, ProjectionCoefficients};

    #[test]
    fn analytic_model_is_recovered() {
        let p = InterfaceParams::new(0.8, 0.05).unwrap().with_shift(0.3);
        let mut model = |d: f64| {
            let r = reflection_amplitude(&p, d);
            Ok((r, 1.0 + r))
        };
        let grid = ScanGrid::around(0.3, 4.0, 81).unwrap();
        let fit = find_resonance(&mut model, &grid).unwrap();
        assert!((fit.r0 - 0.8 / 0.85).abs() < 1e-9);
        assert!((fit.center - 0.3).abs() < 1e-5);
        assert!((fit.cooperativity - 16.0).abs() < 1e-6);
        assert!((fit.linewidth() - 0.85).abs() < 1e-6);
    }

    #[test]
    fn boundary_peak_and_weak_peak_fail() {
        let p = InterfaceParams::new(0.8, 0.05).unwrap().with_shift(0.3);
        let mut model = |d: f64| {
            let r = reflection_amplitude(&p, d);
            Ok((r, 1.0 + r))
        };
        let grid = ScanGrid::new(1.0, 5.0, 81).unwrap();
        assert!(matches!(
            find_resonance(&mut model, &grid),
            Err(Error::FitFailure(_))
        ));
        let weak = InterfaceParams::new(1e-3, 10.0).unwrap();
        let mut model = |d: f64| {
            let r = reflection_amplitude(&weak, d);
            Ok((r, 1.0 + r))
        };
        let grid = ScanGrid::around(0.0, 5.0, 81).unwrap();
        assert!(matches!(
            find_resonance(&mut model, &grid),
            Err(Error::FitFailure(_))
        ));
    }

    #[test]
    fn probe_matches_dense_solve() {
        let lat = LatticeParams::planar(0.6).unwrap();
        let arr = build_2d(&lat, 8).unwrap();
        let beam = GaussianBeam::new(1.5).unwrap();
        let opts = SpectrumOptions::default();
        let mut probe = ReflectivityProbe::new(&arr, &beam, &opts).unwrap();
        let coeffs: ProjectionCoefficients =
            super::super::projection_coefficients(&arr, &beam).unwrap();
        for d in [-0.4, 0.0, 0.25] {
            let m = build_matrix(&arr, d).unwrap();
            let sol =
                solve_steady_state(&m, &drive_vector(&arr, &beam, Direction::Forward)).unwrap();
            let (r, t) = coeffs.amplitudes(&sol.dipoles, Direction::Forward);
            let (rp, tp) = probe.amplitudes(d).unwrap();
            assert!((r - rp).norm() < 1e-10 && (t - tp).norm() < 1e-10);
            let sigma = probe.dipoles(d).unwrap();
            for (a, b) in sigma.iter().zip(&sol.dipoles) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn ordered_array_obeys_mapping() {
        // 20×20 array at a = 0.6 with w = 8a: r₀ ≈ η and the peak sits near Δ₀
        let lat = LatticeParams::planar(0.6).unwrap();
        let arr = build_2d(&lat, 20).unwrap();
        let beam = GaussianBeam::new(4.8).unwrap();
        let g0 = collective_rate_2d(&lat);
        let d0 = collective_shift_2d(&lat, DEFAULT_CUTOFF).unwrap().shift;
        let grid = ScanGrid::around(d0, 5.0 * g0, 81).unwrap();
        let scan = reflectivity_spectrum(&arr, &beam, &grid, &SpectrumOptions::default()).unwrap();
        let fit = scan.fit.unwrap();
        let eta = mode_overlap_eta(&beam, 20.0 * 0.6);
        assert!((fit.r0 - eta).abs() < 0.01, "r0 {} eta {eta}", fit.r0);
        assert!(
            (fit.center - d0).abs() < 0.1 * g0,
            "center {} d0 {d0}",
            fit.center
        );
        for p in &scan.points {
            assert!(p.reflectivity + p.transmission <= 1.0 + 1e-6, "{p:?}");
        }
    }
}
