//! Single-mode interface model: a collective dipole that radiates into one
//! target mode at rate `Γ` and into everything else at rate `γ_loss`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64, I};

/// Rates and frequencies of the single-mode model, in units of the
/// single-atom decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceParams {
    /// Emission rate into the target mode.
    pub gamma_target: f64,
    /// Emission rate into all other channels.
    pub gamma_loss: f64,
    /// Collective resonance shift of the dipole.
    pub collective_shift: f64,
    /// Two-photon detuning of the stable spin.
    pub two_photon_detuning: f64,
    /// Control field coupling the dipole to the spin.
    pub control_amplitude: C64,
}

impl InterfaceParams {
    pub fn new(gamma_target: f64, gamma_loss: f64) -> Result<Self> {
        let p = Self {
            gamma_target,
            gamma_loss,
            collective_shift: 0.0,
            two_photon_detuning: 0.0,
            control_amplitude: C64::new(0.0, 0.0),
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with `Γ/γ_loss = c`, normalized so that `Γ + γ_loss = total`.
    pub fn from_cooperativity(c: f64, total: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && total > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cooperativity {c} and total width {total} must be positive"
            )));
        }
        Self::new(total * c / (1.0 + c), total / (1.0 + c))
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.collective_shift = shift;
        self
    }

    pub fn with_two_photon_detuning(mut self, delta2: f64) -> Self {
        self.two_photon_detuning = delta2;
        self
    }

    pub fn with_control(mut self, omega: C64) -> Self {
        self.control_amplitude = omega;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.gamma_target.is_finite()
            && self.gamma_loss.is_finite()
            && self.collective_shift.is_finite()
            && self.two_photon_detuning.is_finite()
            && self.control_amplitude.re.is_finite()
            && self.control_amplitude.im.is_finite();
        if !finite {
            return Err(Error::InvalidParameter(
                "non-finite interface parameter".into(),
            ));
        }
        if self.gamma_target <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "target rate must be positive, got {}",
                self.gamma_target
            )));
        }
        if self.gamma_loss < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "loss rate must be non-negative, got {}",
                self.gamma_loss
            )));
        }
        Ok(())
    }

    /// `Γ + γ_loss`.
    pub fn total_width(&self) -> f64 {
        self.gamma_target + self.gamma_loss
    }

    /// Amplitude decay rate of the dipole, `(Γ + γ_loss)/2`.
    pub fn half_width(&self) -> f64 {
        0.5 * self.total_width()
    }
}

pub fn cooperativity(p: &InterfaceParams) -> Result<f64> {
    if p.gamma_loss <= 0.0 {
        return Err(Error::Domain(
            "cooperativity is unbounded for zero loss; use the resonant reflectivity limit".into(),
        ));
    }
    Ok(p.gamma_target / p.gamma_loss)
}

/// On-resonance reflectivity `C/(1+C)`.
pub fn resonant_reflectivity(c: f64) -> f64 {
    c / (c + 1.0)
}

/// Inverse of [`resonant_reflectivity`].
pub fn cooperativity_from_reflectivity(r0: f64) -> f64 {
    r0 / (1.0 - r0)
}

/// Amplitude reflectivity at probe detuning `delta_p`.
pub fn reflection_amplitude(p: &InterfaceParams, delta_p: f64) -> C64 {
    let denom = C64::new(p.total_width(), 2.0 * (p.collective_shift - delta_p));
    -p.gamma_target / denom
}

pub fn transmission_amplitude(p: &InterfaceParams, delta_p: f64) -> C64 {
    1.0 + reflection_amplitude(p, delta_p)
}

/// Fraction of an initial dipole excitation emitted into the target mode
/// before `t_max`, integrated with Simpson's rule on a grid of spacing `dt`.
pub fn radiated_fraction(p: &InterfaceParams, t_max: f64, dt: f64) -> Result<f64> {
    p.validate()?;
    let rate = p.total_width();
    let limit = 0.1 / rate;
    if !(dt > 0.0) || dt > limit {
        return Err(Error::StepSize { dt, limit });
    }
    if !(t_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    let mut n = (t_max / dt).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let h = t_max / n as f64;
    let flux = |t: f64| p.gamma_target * (-rate * t).exp();
    let mut acc = flux(0.0) + flux(t_max);
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * flux(j as f64 * h);
    }
    Ok(acc * h / 3.0)
}

/// [`radiated_fraction`] with `t_max` doubled until the result moves by less
/// than `tol`. Returns the value and the final `t_max`.
pub fn radiated_fraction_converged(p: &InterfaceParams, dt: f64, tol: f64) -> Result<(f64, f64)> {
    let mut t_max = 10.0 / p.total_width();
    let mut prev = radiated_fraction(p, t_max, dt)?;
    for _ in 0..20 {
        t_max *= 2.0;
        let next = radiated_fraction(p, t_max, dt)?;
        if (next - prev).abs() < tol {
            return Ok((next, t_max));
        }
        prev = next;
    }
    Err(Error::NonConvergence {
        change: f64::NAN,
        tolerance: tol,
    })
}

/// Power dissipated on the dipole under CW drive in the target mode.
pub fn absorbed_fraction(p: &InterfaceParams, delta_p: f64) -> f64 {
    let a = p.half_width();
    let d = delta_p - p.collective_shift;
    p.gamma_target * a / (2.0 * (a * a + d * d))
}

/// Equal-time intensity correlation of the transmitted light at double resonance.
pub fn g2_zero(r0: f64) -> f64 {
    let x = 1.0 - r0 * r0;
    x * x
}

/// Width `Γ_S` and shift `Δ_S` of the two-photon transition after adiabatic
/// elimination of the dipole.
pub fn two_photon_params(p: &InterfaceParams, delta_p: f64) -> (f64, f64) {
    let denom = p.half_width() + I * (p.collective_shift - delta_p);
    let z = p.control_amplitude.norm_sqr() / denom;
    (2.0 * z.re, z.im)
}
