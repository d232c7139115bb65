//! Time-domain coupled-dipole dynamics with a pulsed beam and a checkerboard
//! detuning, and the array memory that stores light in the subradiant
//! M-point mode.
//!
//! State equation, in the convention of [`crate::greens`]:
//!
//! ```text
//! dσ_n/dt = −Σ_m K_nm σ_m + i(δ_p + V(t) s_n) σ_n + i·b_n·h(t)
//! ```
//!
//! with `s_n = (−1)^{n_x+n_y}`. Drives and outputs are normalized so that
//! `|h(t)|²` and the projected output `|𝓔(t)|²` are photon fluxes.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::geometry::{mode_overlap_eta, ArrayRealization, GaussianBeam};
use crate::greens::{collective_rate_2d, collective_shift_2d, lattice_kernel_sum, DEFAULT_CUTOFF};
use crate::memory::{optimal_storage_control, time_reverse_control, PulseShape};
use crate::model1d::InterfaceParams;
use crate::ode::Rk4;
use crate::scattering::{build_matrix, drive_vector, Direction, EigenmodeSet, ModeProjector};
use crate::{Error, Result, C64, I};

/// Relative change of the final observables tolerated by the step-halving audit.
pub const HALVING_LIMIT: f64 = 1e-4;

/// Per-side field amplitude that produces a unit-flux drive: `a·√(Γ₀/2)`,
/// which is independent of the lattice constant.
fn flux_coupling() -> f64 {
    (3.0 / (8.0 * PI)).sqrt()
}

/// Which side(s) the target-mode input arrives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Illumination {
    Forward,
    Backward,
    /// Equal halves from both sides, the input that couples to a planar array's bright mode.
    Symmetric,
}

impl Illumination {
    /// Flux amplitudes of the forward- and backward-travelling inputs per unit `h`.
    fn split(self) -> (f64, f64) {
        match self {
            Illumination::Forward => (1.0, 0.0),
            Illumination::Backward => (0.0, 1.0),
            Illumination::Symmetric => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        }
    }
}

/// Time-dependent controls of one integration segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    /// Input envelope `h(t)`; zero outside its grid.
    pub input: Option<PulseShape>,
    /// Checkerboard amplitude `V(t)`; only the real part is used.
    pub modulation: Option<PulseShape>,
    pub delta_p: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl DriveSchedule {
    /// No input and no modulation.
    pub fn free(delta_p: f64, t_start: f64, t_end: f64) -> Self {
        Self {
            input: None,
            modulation: None,
            delta_p,
            t_start,
            t_end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) || !self.delta_p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "schedule needs t_end > t_start, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if let Some(v) = &self.modulation {
            let imag = v.values.iter().map(|x| x.im.abs()).fold(0.0, f64::max);
            if imag > 1e-9 * v.max_abs().max(1e-300) {
                log::warn!(
                    "checkerboard modulation has an imaginary part ({imag:.2e}); it is ignored"
                );
            }
        }
        Ok(())
    }

    fn input_at(&self, t: f64) -> C64 {
        self.input
            .as_ref()
            .map_or(C64::new(0.0, 0.0), |h| h.sample(t))
    }

    fn modulation_at(&self, t: f64) -> f64 {
        self.modulation.as_ref().map_or(0.0, |v| v.sample(t).re)
    }

    fn modulation_peak(&self) -> f64 {
        self.modulation.as_ref().map_or(0.0, |v| v.max_abs())
    }
}

/// Collective observables along a trajectory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `P₀ = (a/√η) Σ u_n σ_n`.
    pub bright: Vec<C64>,
    /// `P_M = (a/√η) Σ u_n s_n σ_n`.
    pub dark: Vec<C64>,
    /// `Σ|σ_n|²`.
    pub excitation: Vec<f64>,
    /// Cumulative target-mode output energy, both sides.
    pub emitted: Vec<f64>,
    /// Cumulative total radiated energy `∫ 2σ†Re(K)σ dt`, when tracked.
    pub radiated: Vec<f64>,
    pub final_state: Vec<C64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn append(&mut self, mut other: Trajectory) {
        let offset_e = self.emitted.last().copied().unwrap_or(0.0);
        let offset_r = self.radiated.last().copied().unwrap_or(0.0);
        let skip = usize::from(!self.times.is_empty());
        self.times.extend(other.times.drain(..).skip(skip));
        self.bright.extend(other.bright.drain(..).skip(skip));
        self.dark.extend(other.dark.drain(..).skip(skip));
        self.excitation
            .extend(other.excitation.drain(..).skip(skip));
        self.emitted
            .extend(other.emitted.drain(..).skip(skip).map(|e| e + offset_e));
        self.radiated
            .extend(other.radiated.drain(..).skip(skip).map(|e| e + offset_r));
        self.final_state = other.final_state;
    }

    fn final_observables(&self) -> [f64; 4] {
        let last = |v: &Vec<f64>| v.last().copied().unwrap_or(0.0);
        [
            self.bright.last().map_or(0.0, |p| p.norm_sqr()),
            self.dark.last().map_or(0.0, |p| p.norm_sqr()),
            last(&self.excitation),
            last(&self.emitted),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep every `record_every`-th step.
    pub record_every: usize,
    pub track_radiated: bool,
    /// Repeat at half the step and compare the final observables.
    pub halving_check: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            record_every: 10,
            track_radiated: false,
            halving_check: true,
        }
    }
}

#[derive(Debug, Clone)]
struct Emission {
    forward: Vec<C64>,
    backward: Vec<C64>,
}

/// Precomputed operators for time-domain runs on one realization.
#[derive(Debug, Clone)]
pub struct ArrayDynamics {
    kernel: Mat<C64>,
    signs: Vec<f64>,
    drive: Vec<C64>,
    pass: (f64, f64),
    bright_weights: Vec<C64>,
    dark_weights: Vec<C64>,
    emission: Option<Emission>,
    norm_estimate: f64,
    pub eta: f64,
    pub lattice_constant: f64,
}

impl ArrayDynamics {
    /// Requires lattice metadata for the collective-dipole normalization.
    /// `with_emission` precomputes the target-mode output projections.
    pub fn new(
        arr: &ArrayRealization,
        beam: &GaussianBeam,
        illumination: Illumination,
        with_emission: bool,
    ) -> Result<Self> {
        arr.validate()?;
        let meta = arr.lattice.ok_or_else(|| {
            Error::InvalidParameter("time-domain runs need a lattice-built array".into())
        })?;
        let a = meta.params.a;
        let eta = mode_overlap_eta(beam, meta.side_length());
        let kernel = build_matrix(arr, 0.0)?.kernel().clone();
        let signs = arr
            .checkerboard_signs()
            .unwrap_or_else(|_| vec![0.0; arr.len()]);
        let g = flux_coupling() * beam.center_amplitude();
        let pass = illumination.split();
        let fwd = drive_vector(arr, beam, Direction::Forward);
        let bwd = drive_vector(arr, beam, Direction::Backward);
        let drive = fwd
            .iter()
            .zip(&bwd)
            .map(|(f, b)| g * (pass.0 * f + pass.1 * b))
            .collect();
        let scale = a / eta.sqrt();
        let bright_weights: Vec<C64> = arr
            .positions
            .iter()
            .map(|p| C64::new(scale * beam.profile(p[0], p[1]), 0.0))
            .collect();
        let dark_weights = bright_weights
            .iter()
            .zip(&signs)
            .map(|(w, s)| w * s)
            .collect();
        let emission = if with_emission {
            let coeffs = ModeProjector::standard(*beam)?.coefficients(arr)?;
            let norm = coeffs.input_projection * g;
            Some(Emission {
                forward: coeffs.plus.iter().map(|c| c / norm).collect(),
                backward: coeffs.minus.iter().map(|c| c / norm).collect(),
            })
        } else {
            None
        };
        let norm_estimate = operator_norm(&kernel);
        Ok(Self {
            kernel,
            signs,
            drive,
            pass,
            bright_weights,
            dark_weights,
            emission,
            norm_estimate,
            eta,
            lattice_constant: a,
        })
    }

    /// Replaces the per-unit-flux drive with an arbitrary spatial pattern.
    pub fn with_drive(mut self, drive: Vec<C64>) -> Result<Self> {
        if drive.len() != self.dim() {
            return Err(Error::InvalidParameter(
                "drive length does not match the array".into(),
            ));
        }
        self.drive = drive;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn kernel(&self) -> &Mat<C64> {
        &self.kernel
    }

    /// Spectral-norm estimate of the kernel.
    pub fn norm_estimate(&self) -> f64 {
        self.norm_estimate
    }

    pub fn bright_weights(&self) -> &[C64] {
        &self.bright_weights
    }

    pub fn dark_weights(&self) -> &[C64] {
        &self.dark_weights
    }

    /// State with unit amplitude in the collective dipole with `weights`.
    pub fn impulse(weights: &[C64]) -> Vec<C64> {
        let n2: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
        weights.iter().map(|w| w.conj() / n2).collect()
    }

    pub fn bright(&self, sigma: &[C64]) -> C64 {
        dot(&self.bright_weights, sigma)
    }

    pub fn dark(&self, sigma: &[C64]) -> C64 {
        dot(&self.dark_weights, sigma)
    }

    /// Forward and backward output flux amplitudes.
    pub fn outputs(&self, sigma: &[C64], h: C64) -> Option<(C64, C64)> {
        self.emission.as_ref().map(|e| {
            (
                self.pass.0 * h + dot(&e.forward, sigma),
                self.pass.1 * h + dot(&e.backward, sigma),
            )
        })
    }

    fn kernel_apply(&self, x: &[C64], out: &mut [C64]) {
        let n = self.dim();
        let xm = MatRef::from_column_major_slice(x, n, 1);
        let om = MatMut::from_column_major_slice_mut(out, n, 1);
        matmul(
            om,
            Accum::Replace,
            self.kernel.as_ref(),
            xm,
            C64::new(1.0, 0.0),
            Par::Seq,
        );
    }

    /// `2σ†Re(K)σ`, the instantaneous total radiated power.
    pub fn radiated_power(&self, sigma: &[C64]) -> f64 {
        let mut k = vec![C64::new(0.0, 0.0); self.dim()];
        self.kernel_apply(sigma, &mut k);
        2.0 * sigma
            .iter()
            .zip(&k)
            .map(|(s, v)| (s.conj() * v).re)
            .sum::<f64>()
    }

    fn check_step(&self, schedule: &DriveSchedule, dt: f64) -> Result<()> {
        let norm = self.norm_estimate + schedule.delta_p.abs() + schedule.modulation_peak();
        // accuracy is audited by step halving; this only guards RK4 stability
        let limit = 1.0 / norm;
        if !(dt > 0.0) || dt > limit {
            return Err(Error::StepSize { dt, limit });
        }
        if dt > 0.02 / norm {
            log::debug!(
                "step {dt} exceeds 0.02/‖M‖ = {:.3e}; relying on the halving audit",
                0.02 / norm
            );
        }
        Ok(())
    }

    /// Integrates one segment from `init` with fixed step `dt`.
    pub fn run(
        &self,
        schedule: &DriveSchedule,
        init: &[C64],
        dt: f64,
        opts: &RunOptions,
    ) -> Result<Trajectory> {
        schedule.validate()?;
        self.check_step(schedule, dt)?;
        if init.len() != self.dim() {
            return Err(Error::InvalidParameter(
                "initial state length does not match the array".into(),
            ));
        }
        let coarse = self.run_fixed(schedule, init, dt, opts);
        if opts.halving_check {
            let fine_opts = RunOptions {
                record_every: usize::MAX,
                ..*opts
            };
            let fine = self.run_fixed(schedule, init, 0.5 * dt, &fine_opts);
            let a = coarse.final_observables();
            let b = fine.final_observables();
            let scale = a
                .iter()
                .chain(&b)
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(1e-12);
            let change = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
                / scale;
            if change > HALVING_LIMIT {
                return Err(Error::Instability {
                    quantity: "collective observables",
                    change,
                    limit: HALVING_LIMIT,
                });
            }
        }
        Ok(coarse)
    }

    fn run_fixed(
        &self,
        schedule: &DriveSchedule,
        init: &[C64],
        dt: f64,
        opts: &RunOptions,
    ) -> Trajectory {
        let n = self.dim();
        let span = schedule.t_end - schedule.t_start;
        let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let mut y = init.to_vec();
        let mut rk = Rk4::new(n);
        let mut rhs = |t: f64, s: &[C64], out: &mut [C64]| {
            self.kernel_apply(s, out);
            let hin = schedule.input_at(t);
            let v = schedule.modulation_at(t);
            for i in 0..n {
                out[i] = -out[i]
                    + I * (schedule.delta_p + v * self.signs[i]) * s[i]
                    + I * self.drive[i] * hin;
            }
        };
        let flux = |t: f64, s: &[C64]| {
            self.outputs(s, schedule.input_at(t))
                .map_or(0.0, |(f, b)| f.norm_sqr() + b.norm_sqr())
        };
        let mut traj = Trajectory::default();
        let mut emitted = 0.0;
        let mut radiated = 0.0;
        let mut flux_prev = flux(schedule.t_start, &y);
        let mut rad_prev = if opts.track_radiated {
            self.radiated_power(&y)
        } else {
            0.0
        };
        let record = |traj: &mut Trajectory, t: f64, y: &[C64], emitted: f64, radiated: f64| {
            traj.times.push(t);
            traj.bright.push(self.bright(y));
            traj.dark.push(self.dark(y));
            traj.excitation.push(y.iter().map(|s| s.norm_sqr()).sum());
            traj.emitted.push(emitted);
            if opts.track_radiated {
                traj.radiated.push(radiated);
            }
        };
        record(&mut traj, schedule.t_start, &y, 0.0, 0.0);
        for j in 0..steps {
            let t = schedule.t_start + j as f64 * h;
            rk.step(&mut rhs, t, h, &mut y);
            let f = flux(t + h, &y);
            emitted += 0.5 * h * (flux_prev + f);
            flux_prev = f;
            if opts.track_radiated {
                let r = self.radiated_power(&y);
                radiated += 0.5 * h * (rad_prev + r);
                rad_prev = r;
            }
            if (j + 1) % opts.record_every.max(1) == 0 || j + 1 == steps {
                record(&mut traj, t + h, &y, emitted, radiated);
            }
        }
        traj.final_state = y;
        traj
    }
}

fn dot(w: &[C64], s: &[C64]) -> C64 {
    w.iter().zip(s).map(|(a, b)| a * b).sum()
}

/// Power-iteration estimate of `‖K‖₂`.
fn operator_norm(k: &Mat<C64>) -> f64 {
    let n = k.nrows();
    let mut x = Mat::<C64>::from_fn(n, 1, |i, _| C64::new(1.0 + (i as f64 * 0.37).sin(), 0.0));
    let mut est = 0.0;
    for _ in 0..30 {
        let y = k * &x;
        let z = k.adjoint() * &y;
        let nz = z.norm_l2();
        if !(nz > 0.0) {
            return 0.0;
        }
        est = (nz / x.norm_l2()).sqrt();
        x = z * faer::Scale(C64::new(1.0 / nz, 0.0));
    }
    est * 1.05
}

/// Integrates `schedule` from rest with symmetric illumination.
pub fn integrate(
    arr: &ArrayRealization,
    beam: &GaussianBeam,
    schedule: &DriveSchedule,
    dt: f64,
) -> Result<Trajectory> {
    let dynamics = ArrayDynamics::new(arr, beam, Illumination::Symmetric, true)?;
    let init = vec![C64::new(0.0, 0.0); dynamics.dim()];
    dynamics.run(schedule, &init, dt, &RunOptions::default())
}

/// Least-squares decay rate of `populations(t) ∝ e^{−γt}`.
pub fn fitted_decay_rate(times: &[f64], populations: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(populations)
        .filter(|(_, p)| **p > 0.0)
        .map(|(t, p)| (*t, p.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::FitFailure(
            "need two positive samples for a decay fit".into(),
        ));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::FitFailure("decay fit needs distinct times".into()));
    }
    Ok(-sxy / sxx)
}

/// Free evolution `σ(t) = Σ_l v_l e^{−λ_l t} (v_lᵀσ₀)` under `M(δ_p)`, from
/// its eigendecomposition. An independent check on the time stepper.
pub fn eigen_propagate(set: &EigenmodeSet, state: &[C64], t: f64) -> Vec<C64> {
    let n = state.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for l in 0..set.len() {
        let v = set.vectors.col(l);
        let c: C64 = (0..n).map(|i| v[i] * state[i]).sum::<C64>() * (-set.values[l] * t).exp();
        for (i, o) in out.iter_mut().enumerate() {
            *o += c * v[i];
        }
    }
    out
}

/// Single-mode parameters of the subradiant memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubradiantMapping {
    /// `Γ = ηΓ₀`, `γ_loss = (1−η)Γ₀ + γ_s`, `Δ = Δ₀`, `δ₂ = 0` at the operating point.
    pub interface: InterfaceParams,
    pub eta: f64,
    pub collective_rate: f64,
    /// Shift `Δ_M` of the beam-weighted M-point pattern on the finite array.
    pub dark_shift: f64,
    /// Decay rate of the same pattern (Rayleigh quotient).
    pub dark_rate: f64,
    /// `Δ_M` of the infinite lattice.
    pub dark_shift_infinite: f64,
    /// Probe detuning at which the stored spin is resonant, `δ_p = Δ_M`.
    pub operating_detuning: f64,
}

impl SubradiantMapping {
    pub fn cooperativity(&self) -> f64 {
        self.interface.gamma_target / self.interface.gamma_loss
    }
}

/// Maps an ordered planar array and beam onto the single-mode memory model.
pub fn mapping_params_subradiant(
    arr: &ArrayRealization,
    beam: &GaussianBeam,
) -> Result<SubradiantMapping> {
    let meta = arr
        .lattice
        .ok_or_else(|| Error::InvalidParameter("the mapping needs a lattice-built array".into()))?;
    let lat = meta.params;
    if lat.a >= FRAC_1_SQRT_2 {
        return Err(Error::Range(format!(
            "M-point mode radiates for a = {} ≥ λ/√2; the subradiant mapping does not apply",
            lat.a
        )));
    }
    if meta.layers != 1 {
        return Err(Error::InvalidParameter(
            "the subradiant mapping needs a single layer".into(),
        ));
    }
    let g0 = collective_rate_2d(&lat);
    let eta = mode_overlap_eta(beam, meta.side_length());
    let gamma_s = arr.noncollective_rates.iter().sum::<f64>() / arr.len() as f64;
    let d0 = collective_shift_2d(&lat, DEFAULT_CUTOFF)?.shift;
    let interface = InterfaceParams::new(eta * g0, (1.0 - eta) * g0 + gamma_s)?.with_shift(d0);

    // Rayleigh quotient of the beam-weighted checkerboard pattern
    let signs = arr.checkerboard_signs()?;
    let v: Vec<C64> = arr
        .positions
        .iter()
        .zip(&signs)
        .map(|(p, s)| C64::new(beam.profile(p[0], p[1]) * s, 0.0))
        .collect();
    let k = build_matrix(arr, 0.0)?;
    let kv = k.apply(&v);
    let num: C64 = v.iter().zip(&kv).map(|(a, b)| a * b).sum();
    let den: C64 = v.iter().map(|a| a * a).sum();
    let q = num / den;
    let m_point = [PI / lat.a, PI / lat.a];
    let infinite = lattice_kernel_sum(&lat, m_point, DEFAULT_CUTOFF, 1e-3 * g0)?;
    Ok(SubradiantMapping {
        interface,
        eta,
        collective_rate: g0,
        dark_shift: q.im,
        dark_rate: 2.0 * q.re,
        dark_shift_infinite: infinite.value.im,
        operating_detuning: q.im,
    })
}

/// Input pulse `h(t) ∝ e^{κt/2}` carrying the phase chirp that makes the
/// optimal checkerboard control real for the given mapping.
pub fn chirped_input(
    mapping: &SubradiantMapping,
    rate: f64,
    duration: f64,
    samples: usize,
) -> Result<PulseShape> {
    let base = PulseShape::rising_exponential(rate, duration, samples)?;
    let p = &mapping.interface;
    let a = p.half_width();
    let detune = p.collective_shift - mapping.operating_detuning;
    let offset = (-C64::new(a, detune)).arg();
    let cum = base.cumulative_energy();
    let total = *cum.last().unwrap();
    let values = base
        .values
        .iter()
        .zip(&cum)
        .map(|(h, c)| {
            let lc = if *c > 0.0 { (c / total).ln() } else { 0.0 };
            h * C64::from_polar(1.0, detune / (2.0 * a) * lc - offset)
        })
        .collect();
    PulseShape::new(base.t0, base.dt, values)
}

/// Result of a store / hold / retrieve cycle on the array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubradiantMemoryRun {
    pub mapping: SubradiantMapping,
    /// `|P_M(T)|² / ∫|h|²`.
    pub storage_efficiency: f64,
    /// `Σ|σ_n(T)|² / ∫|h|²`, for diagnostics.
    pub storage_excitation: f64,
    /// `|P_M|²` after the hold divided by `|P_M|²` before it.
    pub hold_retention: f64,
    /// Decay rate of `Σ|σ_n|²` during the hold, fitted after the bright remnant has gone.
    pub hold_decay_rate: Option<f64>,
    /// Start of the window used for [`hold_decay_rate`](Self::hold_decay_rate).
    pub hold_fit_start: f64,
    /// Array state when the storage control ends.
    pub stored_state: Vec<C64>,
    /// Emitted target-mode energy during retrieval divided by `|P_M|²` at its start.
    pub retrieval_efficiency: f64,
    /// Emitted retrieval energy divided by `∫|h|²`.
    pub total_efficiency: f64,
    /// Boundaries of the storage, hold and retrieval phases.
    pub phase_times: [f64; 4],
    pub trajectory: Trajectory,
}

/// Options for [`subradiant_memory_run`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryRunOptions {
    pub dt: f64,
    pub hold: f64,
    /// Extra time after the retrieval control ends, for the dipole to empty.
    pub tail: f64,
    pub run: RunOptions,
}

/// Stores `h0` in the M-point mode with checkerboard control `v_pulse`,
/// holds it with `V = 0`, and retrieves it with the time-reversed control.
pub fn subradiant_memory_run(
    arr: &ArrayRealization,
    beam: &GaussianBeam,
    h0: &PulseShape,
    v_pulse: &PulseShape,
    opts: &MemoryRunOptions,
) -> Result<SubradiantMemoryRun> {
    let mapping = mapping_params_subradiant(arr, beam)?;
    let dynamics = ArrayDynamics::new(arr, beam, Illumination::Symmetric, true)?;
    run_memory_protocol(&dynamics, &mapping, h0, v_pulse, opts)
}

/// Three-phase protocol on prebuilt operators, at `mapping.operating_detuning`.
pub fn run_memory_protocol(
    dynamics: &ArrayDynamics,
    mapping: &SubradiantMapping,
    h0: &PulseShape,
    v_pulse: &PulseShape,
    opts: &MemoryRunOptions,
) -> Result<SubradiantMemoryRun> {
    let mapping = *mapping;
    let delta_p = mapping.operating_detuning;
    let input_energy = h0.energy();
    if !(input_energy > 0.0) {
        return Err(Error::InvalidParameter(
            "input pulse carries no energy".into(),
        ));
    }
    let n = dynamics.dim();

    let t0 = h0.t0;
    let t1 = h0.t_end();
    let storage = DriveSchedule {
        input: Some(h0.clone()),
        modulation: Some(v_pulse.clone()),
        delta_p,
        t_start: t0,
        t_end: t1,
    };
    let mut traj = dynamics.run(&storage, &vec![C64::new(0.0, 0.0); n], opts.dt, &opts.run)?;
    let stored = traj.dark.last().unwrap().norm_sqr();
    let storage_efficiency = stored / input_energy;
    let storage_excitation = traj.excitation.last().unwrap() / input_energy;

    let t2 = t1 + opts.hold;
    let mut state = traj.final_state.clone();
    let stored_state = state.clone();
    let mut before_retrieval = stored;
    let mut hold_decay_rate = None;
    // the bright remnant decays at Γ₀; skip ten of its lifetimes, or half the hold
    let hold_fit_start = t1 + (10.0 / mapping.collective_rate).min(0.5 * opts.hold);
    if opts.hold > 0.0 {
        let hold = DriveSchedule::free(delta_p, t1, t2);
        let seg = dynamics.run(&hold, &state, opts.dt, &opts.run)?;
        let (times, pops): (Vec<f64>, Vec<f64>) = seg
            .times
            .iter()
            .zip(&seg.excitation)
            .filter(|(t, _)| **t >= hold_fit_start)
            .map(|(t, e)| (*t, *e))
            .unzip();
        hold_decay_rate = fitted_decay_rate(&times, &pops).ok();
        before_retrieval = seg.dark.last().unwrap().norm_sqr();
        state = seg.final_state.clone();
        traj.append(seg);
    }
    let hold_retention = if stored > 0.0 {
        before_retrieval / stored
    } else {
        0.0
    };

    let reversed = time_reverse_control(v_pulse);
    let control = PulseShape { t0: t2, ..reversed };
    let t3 = control.t_end() + opts.tail;
    let retrieval = DriveSchedule {
        input: None,
        modulation: Some(control),
        delta_p,
        t_start: t2,
        t_end: t3,
    };
    let seg = dynamics.run(&retrieval, &state, opts.dt, &opts.run)?;
    let emitted = seg.emitted.last().copied().unwrap_or(0.0);
    traj.append(seg);
    let retrieval_efficiency = if before_retrieval > 0.0 {
        emitted / before_retrieval
    } else {
        0.0
    };
    Ok(SubradiantMemoryRun {
        mapping,
        storage_efficiency,
        storage_excitation,
        hold_retention,
        hold_decay_rate,
        hold_fit_start,
        stored_state,
        retrieval_efficiency,
        total_efficiency: emitted / input_energy,
        phase_times: [t0, t1, t2, t3],
        trajectory: traj,
    })
}

/// Chirped rising-exponential input and its optimal checkerboard control for
/// two-photon bandwidth `rate` and `∫Γ_S dt = area`.
pub fn optimal_subradiant_pulses(
    mapping: &SubradiantMapping,
    rate: f64,
    area: f64,
    samples: usize,
) -> Result<(PulseShape, PulseShape)> {
    let h0 = chirped_input(mapping, rate, area / rate, samples)?;
    let ctl = optimal_storage_control(&h0, &mapping.interface, mapping.operating_detuning)?;
    Ok((h0, ctl.control))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_2d;
    use crate::greens::LatticeParams;
    use crate::scattering::solve_steady_state;

    fn small() -> (ArrayRealization, GaussianBeam) {
        let lat = LatticeParams::planar(0.6).unwrap();
        (build_2d(&lat, 6).unwrap(), GaussianBeam::new(1.2).unwrap())
    }

    #[test]
    fn zero_drive_stays_zero() {
        let (arr, beam) = small();
        let t = integrate(&arr, &beam, &DriveSchedule::free(0.0, 0.0, 5.0), 0.05).unwrap();
        assert!(t.excitation.iter().all(|x| *x == 0.0));
        assert!(t.bright.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn linear_in_the_input() {
        let (arr, beam) = small();
        let dynamics = ArrayDynamics::new(&arr, &beam, Illumination::Symmetric, false).unwrap();
        let h =
            PulseShape::from_fn(0.0, 10.0, 201, |t| C64::new((t * 0.3).sin(), 0.1 * t)).unwrap();
        let v =
            PulseShape::from_fn(0.0, 10.0, 201, |t| C64::new(0.2 * (t * 0.5).cos(), 0.0)).unwrap();
        let mut sched = DriveSchedule {
            input: Some(h.clone()),
            modulation: Some(v),
            delta_p: 0.1,
            t_start: 0.0,
            t_end: 10.0,
        };
        let zero = vec![C64::new(0.0, 0.0); arr.len()];
        let opts = RunOptions {
            halving_check: false,
            ..Default::default()
        };
        let one = dynamics.run(&sched, &zero, 0.02, &opts).unwrap();
        sched.input = Some(h.scaled(C64::new(2.0, 0.0)));
        let two = dynamics.run(&sched, &zero, 0.02, &opts).unwrap();
        for (a, b) in one.final_state.iter().zip(&two.final_state) {
            assert!((2.0 * a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn constant_drive_reaches_steady_state() {
        let (arr, beam) = small();
        let b = drive_vector(&arr, &beam, Direction::Forward);
        let dynamics = ArrayDynamics::new(&arr, &beam, Illumination::Forward, false)
            .unwrap()
            .with_drive(b.clone())
            .unwrap();
        let h = PulseShape::from_fn(0.0, 200.0, 3, |_| C64::new(1.0, 0.0)).unwrap();
        let sched = DriveSchedule {
            input: Some(h),
            modulation: None,
            delta_p: 0.2,
            t_start: 0.0,
            t_end: 200.0,
        };
        let t = dynamics
            .run(
                &sched,
                &vec![C64::new(0.0, 0.0); arr.len()],
                0.05,
                &RunOptions::default(),
            )
            .unwrap();
        let ss = solve_steady_state(&build_matrix(&arr, 0.2).unwrap(), &b).unwrap();
        for (x, y) in t.final_state.iter().zip(&ss.dipoles) {
            assert!((x - y).norm() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn excitation_loss_equals_radiated_energy() {
        let (arr, beam) = small();
        let dynamics = ArrayDynamics::new(&arr, &beam, Illumination::Symmetric, false).unwrap();
        let init = ArrayDynamics::impulse(dynamics.bright_weights());
        let opts = RunOptions {
            record_every: 1,
            track_radiated: true,
            halving_check: false,
        };
        let t = dynamics
            .run(&DriveSchedule::free(0.0, 0.0, 20.0), &init, 0.01, &opts)
            .unwrap();
        let lost = t.excitation[0] - t.excitation.last().unwrap();
        let rad = *t.radiated.last().unwrap();
        assert!((lost - rad).abs() < 0.01 * lost, "{lost} vs {rad}");
    }

    #[test]
    fn eigen_expansion_matches_stepper() {
        let (arr, beam) = small();
        let dynamics = ArrayDynamics::new(&arr, &beam, Illumination::Symmetric, false).unwrap();
        let init = ArrayDynamics::impulse(dynamics.dark_weights());
        let t = dynamics
            .run(
                &DriveSchedule::free(-0.3, 0.0, 10.0),
                &init,
                0.01,
                &RunOptions::default(),
            )
            .unwrap();
        let set = crate::scattering::eigenmodes(&build_matrix(&arr, -0.3).unwrap()).unwrap();
        let spectral = eigen_propagate(&set, &init, 10.0);
        for (a, b) in t.final_state.iter().zip(&spectral) {
            assert!((a - b).norm() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn mapping_range_check() {
        let beam = GaussianBeam::new(4.0).unwrap();
        let ok = build_2d(&LatticeParams::planar(0.6).unwrap(), 8).unwrap();
        assert!(mapping_params_subradiant(&ok, &beam).is_ok());
        let bad = build_2d(&LatticeParams::planar(0.72).unwrap(), 8).unwrap();
        assert!(matches!(
            mapping_params_subradiant(&bad, &beam),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn zero_modulation_stores_nothing() {
        let (arr, beam) = small();
        let h = PulseShape::rising_exponential(0.5, 10.0, 201).unwrap();
        let v = h.scaled(C64::new(0.0, 0.0));
        let opts = MemoryRunOptions {
            dt: 0.05,
            hold: 0.0,
            tail: 0.0,
            run: RunOptions::default(),
        };
        let run = subradiant_memory_run(&arr, &beam, &h, &v, &opts).unwrap();
        assert!(run.storage_efficiency < 1e-20, "{}", run.storage_efficiency);
    }

    #[test]
    fn chirp_makes_control_real() {
        let lat = LatticeParams::planar(0.6).unwrap();
        let arr = build_2d(&lat, 10).unwrap();
        let beam = GaussianBeam::new(2.4).unwrap();
        let mapping = mapping_params_subradiant(&arr, &beam).unwrap();
        let (_, ctl) = optimal_subradiant_pulses(&mapping, 0.05, 10.0, 2001).unwrap();
        for v in &ctl.values {
            assert!(v.im.abs() <= 1e-9 * v.norm().max(1e-300), "{v}");
            assert!(v.re >= 0.0);
        }
    }
}
