//! Light-matter interfaces built from atomic arrays.
//!
//! Two layers live here. The generic single-mode interface model
//! ([`model1d`], [`memory`]) reduces any interface to a target emission rate
//! and a loss rate. The coupled-dipole layer ([`greens`], [`geometry`],
//! [`scattering`], [`dynamics`]) solves the full classical scattering problem
//! for finite 2D and 3D arrays so those two rates can be measured instead of
//! assumed.
//!
//! Units throughout: the single-atom decay rate is 1 and the wavelength is 1,
//! so the carrier wavenumber is `2π`.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod greens;
pub mod io;
pub mod memory;
pub mod model1d;
pub mod ode;
pub mod scattering;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Carrier wavenumber in units of 1/λ.
pub const K: f64 = 2.0 * std::f64::consts::PI;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Runs dense factorizations on the calling thread only, so results do not
/// depend on how many threads the host offers. Callers that parallelize over
/// independent runs should set this once at startup.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}
