//! Layer-collective model of a stack of identical square lattices.
//!
//! Each layer is reduced to its beam-weighted collective dipole `P_n`; layers
//! couple through the infinite-lattice inter-layer kernel.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::spectrum::{scan_model, ScanGrid, SpectrumScan};
use crate::greens::{
    collective_rate_2d, collective_shift_2d, interlayer_kernel, LatticeParams, DEFAULT_CUTOFF,
};
use crate::{Error, Result, C64, I, K};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub lattice: LatticeParams,
    pub layers: usize,
    /// Beam overlap `η` of a single layer.
    pub eta: f64,
    /// Extra per-atom loss rate `γ_s`.
    pub gamma_s: f64,
    /// Single-layer collective shift `Δ₀`.
    pub shift: f64,
    /// Inter-layer kernel for `dn = 1 … layers−1`.
    couplings: Vec<C64>,
}

impl LayerStack {
    /// Computes `Δ₀` and the inter-layer kernel for the given lattice.
    pub fn new(lattice: LatticeParams, layers: usize, eta: f64, gamma_s: f64) -> Result<Self> {
        let shift = collective_shift_2d(&lattice, DEFAULT_CUTOFF)?.shift;
        Self::with_shift(lattice, layers, eta, gamma_s, shift)
    }

    pub fn with_shift(
        lattice: LatticeParams,
        layers: usize,
        eta: f64,
        gamma_s: f64,
        shift: f64,
    ) -> Result<Self> {
        if layers == 0 {
            return Err(Error::InvalidParameter("need at least one layer".into()));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beam overlap must lie in (0, 1], got {eta}"
            )));
        }
        if !(gamma_s >= 0.0 && gamma_s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "loss rate must be non-negative, got {gamma_s}"
            )));
        }
        let mut couplings = Vec::with_capacity(layers.saturating_sub(1));
        for dn in 1..layers {
            let sum = interlayer_kernel(&lattice, dn as i32)?;
            if sum.first_excluded > 1e-8 * sum.value.norm() {
                log::warn!(
                    "inter-layer sum at dn = {dn} truncated with largest excluded term {:.2e}",
                    sum.first_excluded
                );
            }
            couplings.push(sum.value);
        }
        Ok(Self {
            lattice,
            layers,
            eta,
            gamma_s,
            shift,
            couplings,
        })
    }

    pub fn collective_rate(&self) -> f64 {
        collective_rate_2d(&self.lattice)
    }

    /// Layer-space matrix `M(δ_p)`.
    pub fn matrix(&self, delta_p: f64) -> Mat<C64> {
        let n = self.layers;
        let diag = C64::new(
            0.5 * self.collective_rate() + 0.5 * self.gamma_s,
            self.shift - delta_p,
        );
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                diag
            } else {
                self.couplings[i.abs_diff(j) - 1]
            }
        })
    }

    fn coupling_amplitude(&self) -> f64 {
        (0.5 * self.eta * self.collective_rate()).sqrt()
    }

    /// Layer dipoles under unit forward drive.
    pub fn solve(&self, delta_p: f64) -> Result<Vec<C64>> {
        let n = self.layers;
        let g = self.coupling_amplitude();
        let m = self.matrix(delta_p);
        let b = Mat::from_fn(n, 1, |i, _| {
            I * g * C64::from_polar(1.0, K * self.lattice.a_z * i as f64)
        });
        let lu = m.partial_piv_lu();
        let x = lu.solve(&b);
        let p: Vec<C64> = (0..n).map(|i| x[(i, 0)]).collect();
        let res = (&m * &x - &b).norm_max() / b.norm_max();
        if !(res < 1e-10) {
            return Err(Error::Singular {
                condition: res / f64::EPSILON,
            });
        }
        Ok(p)
    }

    /// `(r, t)` at probe detuning `delta_p`.
    pub fn amplitudes(&self, delta_p: f64) -> Result<(C64, C64)> {
        let p = self.solve(delta_p)?;
        let g = self.coupling_amplitude();
        let az = self.lattice.a_z;
        let mut r = C64::new(0.0, 0.0);
        let mut t = C64::new(0.0, 0.0);
        for (i, pi) in p.iter().enumerate() {
            let ph = C64::from_polar(1.0, K * az * i as f64);
            r += ph * pi;
            t += ph.conj() * pi;
        }
        Ok((I * g * r, 1.0 + I * g * t))
    }
}

/// `(r, t)` of the stack at one detuning.
pub fn multilayer_reflection(stack: &LayerStack, delta_p: f64) -> Result<(C64, C64)> {
    stack.amplitudes(delta_p)
}

/// Spectrum of the stack on `grid`, with resonance extraction.
pub fn multilayer_effective_solve(stack: &LayerStack, grid: &ScanGrid) -> Result<SpectrumScan> {
    let mut model = |d: f64| stack.amplitudes(d);
    scan_model(&mut model, grid, true)
}
