//! Steady-state coupled-dipole scattering of a Gaussian beam by a finite array.
//!
//! The steady state solves `M·σ = i·drive` with `M = K − iδ_p` where `K` is
//! the kernel of [`crate::greens`] (diagonal `1/2 + γ_s,n/2 − iδ_n`).

mod eigen;
mod field;
mod fit;
mod multilayer;
mod shifted;
mod spectrum;

pub use eigen::{eigenmodes, EigenmodeSet, ModeSummary};
pub use field::{
    incident_field, project_onto_mode, projection_coefficients, scattered_field, ModeProjector,
    ProjectionCoefficients, ProjectionGrid,
};
pub use fit::{brent_maximize, fit_lorentzian, LorentzianFit};
pub use multilayer::{multilayer_effective_solve, multilayer_reflection, LayerStack};
pub use shifted::{ShiftScratch, ShiftedSolver};
pub use spectrum::{
    find_resonance, reflectivity_spectrum, scan_model, ReflectionModel, ReflectivityProbe,
    ResonanceFit, ScanGrid, SpectrumOptions, SpectrumPoint, SpectrumScan, MIN_COARSE_POINTS,
};

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::geometry::{ArrayRealization, GaussianBeam, MIN_SEPARATION};
use crate::greens::coupling_unchecked;
use crate::{Error, Result, C64, I, K};

/// Dense interaction matrix `M = K − iδ_p`, stored as the probe-independent
/// kernel `K` plus the probe detuning.
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    kernel: Mat<C64>,
    pub delta_p: f64,
}

impl InteractionMatrix {
    pub fn dim(&self) -> usize {
        self.kernel.nrows()
    }

    /// Probe-independent part `K`.
    pub fn kernel(&self) -> &Mat<C64> {
        &self.kernel
    }

    pub fn entry(&self, n: usize, m: usize) -> C64 {
        let k = self.kernel[(n, m)];
        if n == m {
            k - I * self.delta_p
        } else {
            k
        }
    }

    /// Full matrix including `−iδ_p` on the diagonal.
    pub fn to_mat(&self) -> Mat<C64> {
        let mut m = self.kernel.clone();
        for i in 0..self.dim() {
            m[(i, i)] -= I * self.delta_p;
        }
        m
    }

    pub fn with_delta_p(&self, delta_p: f64) -> Self {
        Self {
            kernel: self.kernel.clone(),
            delta_p,
        }
    }

    /// `M·x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (j, xj) in x.iter().enumerate() {
            let col = self.kernel.col(j);
            for i in 0..n {
                out[i] += col[i] * xj;
            }
        }
        for i in 0..n {
            out[i] -= I * self.delta_p * x[i];
        }
        out
    }
}

/// Builds `M` for probe detuning `delta_p`.
pub fn build_matrix(arr: &ArrayRealization, delta_p: f64) -> Result<InteractionMatrix> {
    let n = arr.len();
    if n == 0 {
        return Err(Error::InvalidParameter("array has no atoms".into()));
    }
    let e = &arr.orientation;
    let mut kernel = Mat::<C64>::zeros(n, n);
    for i in 0..n {
        kernel[(i, i)] = C64::new(0.5 + 0.5 * arr.noncollective_rates[i], -arr.detunings[i]);
        let pi = arr.positions[i];
        for j in 0..i {
            let pj = arr.positions[j];
            let r = [pi[0] - pj[0], pi[1] - pj[1], pi[2] - pj[2]];
            let d = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            if d < MIN_SEPARATION {
                return Err(Error::Overlap {
                    first: j,
                    second: i,
                    min_separation: MIN_SEPARATION,
                });
            }
            let c = coupling_unchecked(r, d, e);
            kernel[(i, j)] = c;
            kernel[(j, i)] = c;
        }
    }
    Ok(InteractionMatrix { kernel, delta_p })
}

/// Propagation direction of the incident beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Travelling towards `+z`, incident from `z < 0`.
    Forward,
    /// Travelling towards `−z`, incident from `z > 0`.
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Incident field at each atom, normalized to unit amplitude at the beam
/// centre in the plane `z = 0`.
pub fn drive_vector(arr: &ArrayRealization, beam: &GaussianBeam, direction: Direction) -> Vec<C64> {
    if let Some(meta) = arr.lattice {
        if beam.waist < 2.0 * meta.params.a {
            log::warn!(
                "beam waist {} is below twice the lattice constant {}",
                beam.waist,
                meta.params.a
            );
        }
    }
    let s = direction.sign();
    let u0 = beam.center_amplitude();
    arr.positions
        .iter()
        .map(|p| {
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let z = s * p[2];
            beam.propagated(rho, z) / u0 * C64::from_polar(1.0, K * z)
        })
        .collect()
}

/// Steady-state dipoles and the relative residual of the solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteadyStateSolution {
    pub dipoles: Vec<C64>,
    pub drive: Vec<C64>,
    pub residual_norm: f64,
}

/// Relative residual above which a dense solve is reported as singular.
pub const RESIDUAL_LIMIT: f64 = 1e-10;

pub fn solve_steady_state(m: &InteractionMatrix, drive: &[C64]) -> Result<SteadyStateSolution> {
    let n = m.dim();
    if drive.len() != n {
        return Err(Error::InvalidParameter(format!(
            "drive has {} entries for a {n}-atom matrix",
            drive.len()
        )));
    }
    let a = m.to_mat();
    let lu = a.partial_piv_lu();
    let rhs = Mat::<C64>::from_fn(n, 1, |i, _| I * drive[i]);
    let x = lu.solve(&rhs);
    let dipoles: Vec<C64> = (0..n).map(|i| x[(i, 0)]).collect();
    let mx = m.apply(&dipoles);
    let num: f64 = mx
        .iter()
        .zip(drive)
        .map(|(a, b)| (a - I * b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = drive.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
    let residual = if den > 0.0 { num / den } else { num };
    if !(residual <= RESIDUAL_LIMIT) {
        let u = lu.U();
        let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
        let hi = diag.iter().cloned().fold(0.0, f64::max);
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        return Err(Error::Singular { condition: hi / lo });
    }
    Ok(SteadyStateSolution {
        dipoles,
        drive: drive.to_vec(),
        residual_norm: residual,
    })
}
