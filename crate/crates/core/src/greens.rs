//! Free-space dipole-dipole kernel and closed-form lattice quantities.
//!
//! Sign convention, fixed here for the whole crate:
//!
//! ```text
//! dσ_n/dt = (iδ_p − D_nn) σ_n − Σ_{m≠n} D_nm σ_m + i·drive_n
//! D_nm    = −i (3π/k) e*·G(r_n − r_m)·e        (off-diagonal)
//! D_nn    = 1/2 + γ_s,n/2 − iδ_n                (set by hand)
//! ```
//!
//! so `Re D` is a decay rate and `Im D` a frequency shift. A uniformly
//! excited infinite square lattice has `Σ_m D_nm = Γ₀/2 + iΔ₀`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64, I, K};

/// Unit complex polarization vector of the atomic transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleOrientation {
    e: [C64; 3],
}

impl DipoleOrientation {
    /// Normalizes `e`; rejects the zero vector.
    pub fn new(e: [C64; 3]) -> Result<Self> {
        let n = e.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter(
                "dipole orientation must be nonzero".into(),
            ));
        }
        Ok(Self {
            e: [e[0] / n, e[1] / n, e[2] / n],
        })
    }

    pub fn x() -> Self {
        Self::real([1.0, 0.0, 0.0])
    }

    pub fn y() -> Self {
        Self::real([0.0, 1.0, 0.0])
    }

    /// `(x̂ + iŷ)/√2`.
    pub fn circular() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            e: [C64::new(s, 0.0), C64::new(0.0, s), C64::new(0.0, 0.0)],
        }
    }

    fn real(v: [f64; 3]) -> Self {
        Self {
            e: v.map(|x| C64::new(x, 0.0)),
        }
    }

    /// Parses `x`, `y` or `circular`.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "x" => Ok(Self::x()),
            "y" => Ok(Self::y()),
            "circular" | "sigma+" => Ok(Self::circular()),
            other => Err(Error::Parse(format!(
                "unknown dipole orientation '{other}'"
            ))),
        }
    }

    pub fn vector(&self) -> [C64; 3] {
        self.e
    }

    /// `|m·e|²` for an in-plane vector `m`.
    pub fn in_plane_weight(&self, mx: f64, my: f64) -> f64 {
        (self.e[0] * mx + self.e[1] * my).norm_sqr()
    }

    /// `|r̂·e|²` for a unit vector `r̂`.
    fn projection_weight(&self, r: [f64; 3]) -> f64 {
        (self.e[0] * r[0] + self.e[1] * r[1] + self.e[2] * r[2]).norm_sqr()
    }

    /// Lies in the lattice plane.
    pub fn is_in_plane(&self) -> bool {
        self.e[2].norm() < 1e-12
    }
}

impl Default for DipoleOrientation {
    fn default() -> Self {
        Self::x()
    }
}

/// Square-lattice geometry shared by the lattice sums and the builders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    /// In-plane lattice constant.
    pub a: f64,
    /// Layer spacing.
    pub a_z: f64,
    pub orientation: DipoleOrientation,
}

impl LatticeParams {
    pub fn new(a: f64, a_z: f64, orientation: DipoleOrientation) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lattice constant must be positive, got {a}"
            )));
        }
        if !(a_z > 0.0 && a_z.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "layer spacing must be positive, got {a_z}"
            )));
        }
        Ok(Self {
            a,
            a_z,
            orientation,
        })
    }

    /// Single layer with x-polarized dipoles.
    pub fn planar(a: f64) -> Result<Self> {
        Self::new(a, 1.0, DipoleOrientation::x())
    }
}

/// Free-space dyadic Green's function at wavenumber `K`.
pub fn dyadic_green(r: [f64; 3]) -> Result<[[C64; 3]; 3]> {
    let d = norm3(r);
    if !(d > 0.0) {
        return Err(Error::Domain(
            "Green's function is singular at zero separation".into(),
        ));
    }
    let (a, b, phase) = green_radial(d);
    let u = [r[0] / d, r[1] / d, r[2] / d];
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let diag = if i == j { a } else { C64::new(0.0, 0.0) };
            g[i][j] = phase * (diag + b * (u[i] * u[j]));
        }
    }
    Ok(g)
}

#[inline]
fn green_radial(d: f64) -> (C64, C64, C64) {
    let kr = K * d;
    let inv = 1.0 / (kr * kr);
    let (s, c) = kr.sin_cos();
    let phase = C64::new(c, s) / (4.0 * PI * d);
    let a = C64::new(1.0 - inv, kr * inv);
    let b = C64::new((3.0 - kr * kr) * inv, -3.0 * kr * inv);
    (a, b, phase)
}

#[inline]
fn norm3(r: [f64; 3]) -> f64 {
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

/// `e*·G(r)·e`.
pub fn projected_green(r: [f64; 3], e: &DipoleOrientation) -> Result<C64> {
    let d = norm3(r);
    if !(d > 0.0) {
        return Err(Error::Domain(
            "Green's function is singular at zero separation".into(),
        ));
    }
    Ok(projected_green_unchecked(r, d, e))
}

#[inline]
pub(crate) fn projected_green_unchecked(r: [f64; 3], d: f64, e: &DipoleOrientation) -> C64 {
    let (a, b, phase) = green_radial(d);
    let w = e.projection_weight([r[0] / d, r[1] / d, r[2] / d]);
    phase * (a + b * w)
}

/// Converts a projected Green's function into the dipole equation's units.
pub(crate) const FIELD_SCALE: f64 = 3.0 * PI / K;

/// Off-diagonal kernel element `D(r) = −i(3π/k) e*·G(r)·e`.
pub fn coupling(r: [f64; 3], e: &DipoleOrientation) -> Result<C64> {
    Ok(-I * FIELD_SCALE * projected_green(r, e)?)
}

#[inline]
pub(crate) fn coupling_unchecked(r: [f64; 3], d: f64, e: &DipoleOrientation) -> C64 {
    -I * FIELD_SCALE * projected_green_unchecked(r, d, e)
}

/// `Γ₀ = (3/4π)(λ/a)²` in units of the single-atom rate.
pub fn collective_rate_2d(lat: &LatticeParams) -> f64 {
    3.0 / (4.0 * PI * lat.a * lat.a)
}

/// Lattice sum of the kernel with an in-plane Bloch phase, including the
/// self term `1/2`, with its cutoff-doubling error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSum {
    /// `Γ_q/2 + iΔ_q`.
    pub value: C64,
    /// `|value(2R) − value(R)|`.
    pub error: f64,
    pub cutoff_radius: f64,
}

/// Gaussian-windowed real-space sum `1/2 + Σ_{n≠0} D(r_n) e^{iq·r_n}` over a
/// disc. The window `exp(−(r/R_w)²)` with `R_w = cutoff/5` turns the
/// conditionally convergent sum into one whose bias shrinks like `(kR_w)^{-2}`.
pub fn windowed_kernel_sum(lat: &LatticeParams, q: [f64; 2], cutoff_radius: f64) -> C64 {
    let a = lat.a;
    let rw = cutoff_radius / 5.0;
    let inv_rw2 = 1.0 / (rw * rw);
    let nmax = (cutoff_radius / a).ceil() as i64;
    let e = &lat.orientation;
    // row-major accumulation, one partial sum per row, for a fixed summation order
    let mut total = C64::new(0.5, 0.0);
    for ix in -nmax..=nmax {
        let x = ix as f64 * a;
        let mut row = C64::new(0.0, 0.0);
        for iy in -nmax..=nmax {
            if ix == 0 && iy == 0 {
                continue;
            }
            let y = iy as f64 * a;
            let d2 = x * x + y * y;
            if d2 > cutoff_radius * cutoff_radius {
                continue;
            }
            let d = d2.sqrt();
            let w = (-d2 * inv_rw2).exp();
            let bloch = C64::from_polar(1.0, q[0] * x + q[1] * y);
            row += coupling_unchecked([x, y, 0.0], d, e) * bloch * w;
        }
        total += row;
    }
    total
}

/// [`windowed_kernel_sum`] extrapolated in the cutoff. The window bias falls
/// off like `R⁻²`, so sums at `R`, `2R`, `4R` give two Richardson estimates;
/// the later one is returned and their difference is the error estimate.
pub fn lattice_kernel_sum(
    lat: &LatticeParams,
    q: [f64; 2],
    cutoff_radius: f64,
    tolerance: f64,
) -> Result<LatticeSum> {
    if cutoff_radius < 50.0 {
        return Err(Error::InvalidParameter(format!(
            "cutoff radius must be at least 50 wavelengths, got {cutoff_radius}"
        )));
    }
    let s1 = windowed_kernel_sum(lat, q, cutoff_radius);
    let s2 = windowed_kernel_sum(lat, q, 2.0 * cutoff_radius);
    let s4 = windowed_kernel_sum(lat, q, 4.0 * cutoff_radius);
    let coarse = s2 + (s2 - s1) / 3.0;
    let fine = s4 + (s4 - s2) / 3.0;
    let change = (fine - coarse).norm();
    if change > tolerance {
        return Err(Error::NonConvergence { change, tolerance });
    }
    Ok(LatticeSum {
        value: fine,
        error: change,
        cutoff_radius: 4.0 * cutoff_radius,
    })
}

/// Collective shift `Δ₀` of the uniform mode of an infinite single layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveShift {
    pub shift: f64,
    pub error: f64,
    /// Real part of the same sum; should equal `Γ₀/2`.
    pub half_rate: f64,
}

/// Near the `a → λ` anomaly the sum converges slowly, so the cutoff is
/// doubled (up to three times) until the tolerance `Γ₀/100` is met.
pub fn collective_shift_2d(lat: &LatticeParams, cutoff_radius: f64) -> Result<CollectiveShift> {
    let tolerance = 1e-2 * collective_rate_2d(lat);
    let mut radius = cutoff_radius;
    let mut attempt = lattice_kernel_sum(lat, [0.0, 0.0], radius, tolerance);
    for _ in 0..3 {
        if !matches!(attempt, Err(Error::NonConvergence { .. })) {
            break;
        }
        radius *= 2.0;
        log::debug!("collective shift not converged; retrying with cutoff {radius}");
        attempt = lattice_kernel_sum(lat, [0.0, 0.0], radius, tolerance);
    }
    let sum = attempt?;
    Ok(CollectiveShift {
        shift: sum.value.im,
        error: sum.error,
        half_rate: sum.value.re,
    })
}

/// Default cutoff used by callers that do not care about the sum itself.
pub const DEFAULT_CUTOFF: f64 = 60.0;

/// Propagating diffraction orders `(m_x, m_y) ≠ (0,0)` with `|m| < a/λ`.
pub fn diffraction_orders(lat: &LatticeParams) -> Vec<(i32, i32)> {
    let a = lat.a;
    let m = a.floor() as i32;
    let mut out = Vec::new();
    for mx in -m..=m {
        for my in -m..=m {
            let m2 = (mx * mx + my * my) as f64;
            if (mx, my) != (0, 0) && m2 < a * a {
                out.push((mx, my));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffractionLoss {
    /// `γ_diff` in units of the single-atom rate.
    pub rate: f64,
    pub orders: Vec<(i32, i32)>,
    /// Orders within 1e-9 of grazing emission.
    pub grazing: Vec<(i32, i32)>,
}

/// Loss into non-specular diffraction orders of a lattice with `a > λ`.
pub fn diffraction_loss(lat: &LatticeParams) -> DiffractionLoss {
    let g0 = collective_rate_2d(lat);
    let inv_a2 = 1.0 / (lat.a * lat.a);
    let orders = diffraction_orders(lat);
    let mut rate = 0.0;
    let mut grazing = Vec::new();
    for &(mx, my) in &orders {
        let (fx, fy) = (mx as f64, my as f64);
        let cos2 = 1.0 - inv_a2 * (fx * fx + fy * fy);
        if cos2 < 1e-9 {
            grazing.push((mx, my));
            log::warn!("diffraction order ({mx},{my}) is within 1e-9 of grazing");
        }
        let numer = 1.0 - inv_a2 * lat.orientation.in_plane_weight(fx, fy);
        rate += numer / cos2.max(f64::MIN_POSITIVE).sqrt();
    }
    DiffractionLoss {
        rate: g0 * rate,
        orders,
        grazing,
    }
}

/// A truncated order sum together with the size of what was left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSum<T> {
    pub value: T,
    /// Magnitude of the largest excluded term.
    pub first_excluded: f64,
    pub orders_used: usize,
}

/// Longitudinal wavenumber factor `√(1 − |m|²λ²/a²)`, positive imaginary for evanescent orders.
fn longitudinal(m2_over_a2: f64) -> C64 {
    let x = 1.0 - m2_over_a2;
    if x >= 0.0 {
        C64::new(x.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-x).sqrt())
    }
}

/// Iterates square shells `max(|m_x|,|m_y|) = s` until a whole shell is
/// excluded by the decay-length rule `ξ ≥ a_z|dn|/20`.
fn order_sum<F>(lat: &LatticeParams, dn: i32, include_zero: bool, mut term: F) -> TruncatedSum<C64>
where
    F: FnMut(i32, i32) -> C64,
{
    let inv_a2 = 1.0 / (lat.a * lat.a);
    let dist = lat.a_z * dn.unsigned_abs() as f64;
    let mut value = C64::new(0.0, 0.0);
    let mut first_excluded: f64 = 0.0;
    let mut used = 0;
    let mut shell = 0i32;
    loop {
        let mut any_included = false;
        for mx in -shell..=shell {
            for my in -shell..=shell {
                if mx.abs().max(my.abs()) != shell || (!include_zero && (mx, my) == (0, 0)) {
                    continue;
                }
                let m2 = (mx * mx + my * my) as f64 * inv_a2;
                let evanescent_rate = K * (m2 - 1.0).max(0.0).sqrt();
                let t = term(mx, my);
                if evanescent_rate * dist <= 20.0 {
                    value += t;
                    used += 1;
                    any_included = true;
                } else {
                    first_excluded = first_excluded.max(t.norm());
                }
            }
        }
        if !any_included && shell > 0 && (shell as f64) > lat.a {
            break;
        }
        shell += 1;
    }
    TruncatedSum {
        value,
        first_excluded,
        orders_used: used,
    }
}

fn check_layer_args(lat: &LatticeParams, dn: i32) -> Result<()> {
    if dn == 0 {
        return Err(Error::InvalidParameter(
            "layer separation must be nonzero".into(),
        ));
    }
    let inv_a2 = 1.0 / (lat.a * lat.a);
    let m = lat.a.floor() as i32 + 1;
    for mx in -m..=m {
        for my in -m..=m {
            let x = 1.0 - inv_a2 * (mx * mx + my * my) as f64;
            if x.abs() < 1e-12 {
                return Err(Error::Domain(format!(
                    "diffraction order ({mx},{my}) is exactly grazing; the layer kernel diverges"
                )));
            }
        }
    }
    Ok(())
}

/// Effective coupling between the uniform modes of two layers `dn` apart.
pub fn interlayer_kernel(lat: &LatticeParams, dn: i32) -> Result<TruncatedSum<C64>> {
    check_layer_args(lat, dn)?;
    let half = 0.5 * collective_rate_2d(lat);
    let inv_a2 = 1.0 / (lat.a * lat.a);
    let dist = lat.a_z * dn.unsigned_abs() as f64;
    Ok(order_sum(lat, dn, true, |mx, my| {
        let (fx, fy) = (mx as f64, my as f64);
        let kz = longitudinal(inv_a2 * (fx * fx + fy * fy));
        let numer = 1.0 - inv_a2 * lat.orientation.in_plane_weight(fx, fy);
        half * numer / kz * (I * K * kz * dist).exp()
    }))
}

/// Evanescent part `ε` of [`interlayer_kernel`] for `a < λ`.
pub fn evanescent_correction(lat: &LatticeParams, dn: i32) -> Result<TruncatedSum<f64>> {
    if lat.a >= 1.0 {
        return Err(Error::Range(format!(
            "evanescent correction needs a < λ, got a = {}",
            lat.a
        )));
    }
    check_layer_args(lat, dn)?;
    let half = 0.5 * collective_rate_2d(lat);
    let inv_a2 = 1.0 / (lat.a * lat.a);
    let dist = lat.a_z * dn.unsigned_abs() as f64;
    let s = order_sum(lat, dn, false, |mx, my| {
        let (fx, fy) = (mx as f64, my as f64);
        let root = (inv_a2 * (fx * fx + fy * fy) - 1.0).sqrt();
        let numer = inv_a2 * lat.orientation.in_plane_weight(fx, fy) - 1.0;
        C64::new(half * numer / root * (-K * dist * root).exp(), 0.0)
    });
    Ok(TruncatedSum {
        value: s.value.re,
        first_excluded: s.first_excluded,
        orders_used: s.orders_used,
    })
}

/// First-order shift `Δ′` of the phase-matched multilayer mode.
pub fn phase_matched_shift(lat: &LatticeParams, layers: usize) -> Result<f64> {
    let twice = 2.0 * lat.a_z;
    if (twice - twice.round()).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "phase matching needs 2a_z to be an integer number of wavelengths, got a_z = {}",
            lat.a_z
        )));
    }
    if layers < 2 {
        return Ok(0.0);
    }
    let mut eps = Vec::with_capacity(layers);
    eps.push(0.0);
    for dn in 1..layers {
        eps.push(evanescent_correction(lat, dn as i32)?.value);
    }
    let mut acc = C64::new(0.0, 0.0);
    for n in 0..layers {
        for m in 0..layers {
            if n != m {
                let d = n as i64 - m as i64;
                acc +=
                    C64::from_polar(1.0, K * lat.a_z * d as f64) * eps[d.unsigned_abs() as usize];
            }
        }
    }
    acc /= layers as f64;
    if acc.im.abs() > 1e-8 {
        return Err(Error::Assertion(format!(
            "phase-matched shift has imaginary residue {:.3e}",
            acc.im
        )));
    }
    Ok(acc.re)
}
