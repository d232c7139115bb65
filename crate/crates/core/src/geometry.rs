//! Array realizations (ordered lattices, disordered copies, checkerboard
//! detunings) and the Gaussian target mode.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::greens::{DipoleOrientation, LatticeParams};
use crate::{Error, Result, C64, I, K};

/// Lattice bookkeeping carried by realizations built from a square lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeMeta {
    pub params: LatticeParams,
    pub n_side: usize,
    pub layers: usize,
}

impl LatticeMeta {
    /// Side length `L_a = n_side·a` of the square footprint.
    pub fn side_length(&self) -> f64 {
        self.n_side as f64 * self.params.a
    }
}

/// One concrete set of atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayRealization {
    pub positions: Vec<[f64; 3]>,
    /// Local detunings `δ_n`.
    pub detunings: Vec<f64>,
    /// Extra single-atom loss rates `γ_s,n`.
    pub noncollective_rates: Vec<f64>,
    pub layer_index: Vec<i32>,
    /// In-plane lattice indices `(n_x, n_y)` from build time, kept through disorder.
    pub site_index: Option<Vec<[i32; 2]>>,
    pub orientation: DipoleOrientation,
    pub lattice: Option<LatticeMeta>,
    pub seed: u64,
    pub realization_index: u64,
}

pub const MIN_SEPARATION: f64 = 1e-6;

impl ArrayRealization {
    /// Bare realization from explicit positions.
    pub fn from_positions(
        positions: Vec<[f64; 3]>,
        orientation: DipoleOrientation,
    ) -> Result<Self> {
        let n = positions.len();
        let arr = Self {
            positions,
            detunings: vec![0.0; n],
            noncollective_rates: vec![0.0; n],
            layer_index: vec![0; n],
            site_index: None,
            orientation,
            lattice: None,
            seed: 0,
            realization_index: 0,
        };
        arr.validate()?;
        Ok(arr)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Checks list lengths, finiteness and the minimum pair separation.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::InvalidParameter("array has no atoms".into()));
        }
        let lens = [
            self.detunings.len(),
            self.noncollective_rates.len(),
            self.layer_index.len(),
            self.site_index.as_ref().map_or(n, |s| s.len()),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::InvalidParameter(format!(
                "per-atom lists disagree in length: {n} positions vs {lens:?}"
            )));
        }
        let finite = self.positions.iter().flatten().all(|x| x.is_finite())
            && self.detunings.iter().all(|x| x.is_finite())
            && self
                .noncollective_rates
                .iter()
                .all(|x| x.is_finite() && *x >= 0.0);
        if !finite {
            return Err(Error::InvalidParameter(
                "non-finite or negative per-atom value".into(),
            ));
        }
        self.check_separation()
    }

    pub fn check_separation(&self) -> Result<()> {
        let p = &self.positions;
        for i in 0..p.len() {
            for j in 0..i {
                let d2 = (p[i][0] - p[j][0]).powi(2)
                    + (p[i][1] - p[j][1]).powi(2)
                    + (p[i][2] - p[j][2]).powi(2);
                if d2 < MIN_SEPARATION * MIN_SEPARATION {
                    return Err(Error::Overlap {
                        first: j,
                        second: i,
                        min_separation: MIN_SEPARATION,
                    });
                }
            }
        }
        Ok(())
    }

    /// All atoms in the plane `z = 0`.
    pub fn is_planar(&self) -> bool {
        self.positions.iter().all(|p| p[2] == 0.0)
    }

    /// `(−1)^{n_x+n_y}` per atom.
    pub fn checkerboard_signs(&self) -> Result<Vec<f64>> {
        let idx = self
            .site_index
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("array carries no lattice indices".into()))?;
        Ok(idx
            .iter()
            .map(|[x, y]| {
                if (x + y).rem_euclid(2) == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let arr: Self = serde_json::from_str(s)?;
        arr.validate()?;
        Ok(arr)
    }
}

/// `n_side × n_side` square lattice in the plane `z = 0`, centered on the origin.
pub fn build_2d(lat: &LatticeParams, n_side: usize) -> Result<ArrayRealization> {
    build_3d(lat, n_side, 1)
}

/// `layers` copies of [`build_2d`] at `z = a_z·n_z`.
pub fn build_3d(lat: &LatticeParams, n_side: usize, layers: usize) -> Result<ArrayRealization> {
    if n_side == 0 || layers == 0 {
        return Err(Error::InvalidParameter(
            "n_side and layer count must be at least 1".into(),
        ));
    }
    let n = n_side * n_side * layers;
    let offset = 0.5 * (n_side as f64 - 1.0);
    let mut positions = Vec::with_capacity(n);
    let mut layer_index = Vec::with_capacity(n);
    let mut site_index = Vec::with_capacity(n);
    for nz in 0..layers {
        for nx in 0..n_side {
            for ny in 0..n_side {
                positions.push([
                    lat.a * (nx as f64 - offset),
                    lat.a * (ny as f64 - offset),
                    lat.a_z * nz as f64,
                ]);
                layer_index.push(nz as i32);
                site_index.push([nx as i32, ny as i32]);
            }
        }
    }
    Ok(ArrayRealization {
        positions,
        detunings: vec![0.0; n],
        noncollective_rates: vec![0.0; n],
        layer_index,
        site_index: Some(site_index),
        orientation: lat.orientation,
        lattice: Some(LatticeMeta {
            params: *lat,
            n_side,
            layers,
        }),
        seed: 0,
        realization_index: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DisorderDistribution {
    #[default]
    Normal,
    /// Uniform with the same standard deviation.
    Uniform,
}

impl DisorderDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Uniform => "uniform",
        }
    }
}

/// Positional disorder applied independently per atom and axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    /// Standard deviation per axis, in wavelengths.
    pub sigma: f64,
    pub distribution: DisorderDistribution,
    /// Also displace atoms along the beam axis.
    pub include_z: bool,
    pub realizations: usize,
    pub base_seed: u64,
}

impl DisorderSpec {
    pub fn normal(sigma: f64, realizations: usize, base_seed: u64) -> Self {
        Self {
            sigma,
            distribution: DisorderDistribution::Normal,
            include_z: true,
            realizations,
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "disorder sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidParameter(
                "need at least one disorder realization".into(),
            ));
        }
        Ok(())
    }
}

/// Deterministic draws keyed by `(base_seed, realization, atom, axis)`.
///
/// Each key owns a disjoint 64-word window of the ChaCha keystream, so the
/// value of a draw never depends on which other draws were made or in what order.
pub struct KeyedRng {
    rng: ChaCha8Rng,
}

impl KeyedRng {
    pub fn new(base_seed: u64, realization: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(realization);
        Self { rng }
    }

    fn seek(&mut self, atom: usize, axis: usize) {
        self.rng
            .set_word_pos(((atom as u128) * 3 + axis as u128) << 6);
    }

    pub fn normal(&mut self, atom: usize, axis: usize) -> f64 {
        self.seek(atom, axis);
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[−√3, √3)` (unit variance).
    pub fn uniform(&mut self, atom: usize, axis: usize) -> f64 {
        self.seek(atom, axis);
        let u: f64 = self.rng.random();
        3f64.sqrt() * (2.0 * u - 1.0)
    }
}

/// Independent displacement of every coordinate; returns a new realization.
pub fn apply_disorder(
    arr: &ArrayRealization,
    spec: &DisorderSpec,
    realization_index: u64,
) -> Result<ArrayRealization> {
    spec.validate()?;
    let mut out = arr.clone();
    out.seed = spec.base_seed;
    out.realization_index = realization_index;
    if spec.sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = KeyedRng::new(spec.base_seed, realization_index);
    let axes = if spec.include_z { 3 } else { 2 };
    for (n, p) in out.positions.iter_mut().enumerate() {
        for (c, x) in p.iter_mut().enumerate().take(axes) {
            let draw = match spec.distribution {
                DisorderDistribution::Normal => rng.normal(n, c),
                DisorderDistribution::Uniform => rng.uniform(n, c),
            };
            *x += spec.sigma * draw;
        }
    }
    out.check_separation()?;
    Ok(out)
}

/// Sets `δ_n = V·(−1)^{n_x+n_y}`.
pub fn checkerboard_detuning(arr: &ArrayRealization, v: f64) -> Result<ArrayRealization> {
    let signs = arr.checkerboard_signs()?;
    let mut out = arr.clone();
    out.detunings = signs.iter().map(|s| v * s).collect();
    Ok(out)
}

/// Gaussian target mode travelling along ±z with waist at `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam {
    pub waist: f64,
}

/// Number of Simpson intervals of the angular-spectrum integral.
const SPECTRUM_INTERVALS: usize = 512;

impl GaussianBeam {
    pub fn new(waist: f64) -> Result<Self> {
        if !(waist > 0.0 && waist.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "waist must be positive, got {waist}"
            )));
        }
        Ok(Self { waist })
    }

    /// Normalized waist profile `√(2/πw²)·e^{−r²/w²}`.
    pub fn profile(&self, x: f64, y: f64) -> f64 {
        let w = self.waist;
        (2.0 / PI).sqrt() / w * (-(x * x + y * y) / (w * w)).exp()
    }

    pub fn center_amplitude(&self) -> f64 {
        self.profile(0.0, 0.0)
    }

    /// `A_u = πw²/2`.
    pub fn mode_area(&self) -> f64 {
        0.5 * PI * self.waist * self.waist
    }

    /// Midpoint-rule `∫|u|²` over a `6w × 6w` window.
    pub fn numerical_norm(&self, spacing: f64) -> f64 {
        let half = 3.0 * self.waist;
        let n = (2.0 * half / spacing).ceil() as usize;
        let h = 2.0 * half / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let x = -half + (i as f64 + 0.5) * h;
            for j in 0..n {
                let y = -half + (j as f64 + 0.5) * h;
                acc += self.profile(x, y).powi(2);
            }
        }
        acc * h * h
    }

    /// Slowly varying envelope after free propagation over `z` (either sign),
    /// from the exact angular spectrum of the waist profile restricted to
    /// propagating components. The full field is this times `e^{ikz}`.
    pub fn propagated(&self, rho: f64, z: f64) -> C64 {
        if z == 0.0 {
            return C64::new(self.profile(rho, 0.0), 0.0);
        }
        let w = self.waist;
        let q_max = K.min(14.0 / w);
        let n = SPECTRUM_INTERVALS;
        let h = q_max / n as f64;
        let amp = w / (2.0 * PI).sqrt();
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..=n {
            let q = j as f64 * h;
            let weight = if j == 0 || j == n {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let kz = (K * K - q * q).max(0.0).sqrt();
            let spectral = amp * (-0.25 * q * q * w * w).exp() * libm::j0(q * rho) * q;
            acc += weight * spectral * (I * (kz - K) * z).exp();
        }
        acc * (h / 3.0)
    }
}

/// Fraction of the beam power falling on a square of side `side_length`.
pub fn mode_overlap_eta(beam: &GaussianBeam, side_length: f64) -> f64 {
    let e = libm::erf(side_length / (SQRT_2 * beam.waist));
    e * e
}

/// `1 − η` computed without cancellation.
pub fn mode_overlap_complement(beam: &GaussianBeam, side_length: f64) -> f64 {
    let c = libm::erfc(side_length / (SQRT_2 * beam.waist));
    c * (2.0 - c)
}

/// Large-array asymptote of `1 − η`.
pub fn mode_overlap_complement_asymptotic(beam: &GaussianBeam, side_length: f64) -> f64 {
    let w = beam.waist;
    2.0 / PI.sqrt()
        * (SQRT_2 * w / side_length)
        * (-(side_length * side_length) / (2.0 * w * w)).exp()
}

/// `∫|u|²` of an arbitrary profile over a centered square, midpoint rule at
/// resolution no coarser than λ/8.
pub fn footprint_overlap(profile: impl Fn(f64, f64) -> f64, side_length: f64) -> f64 {
    let n = (side_length * 8.0).ceil().max(1.0) as usize;
    let h = side_length / n as f64;
    let half = 0.5 * side_length;
    let mut acc = 0.0;
    for i in 0..n {
        let x = -half + (i as f64 + 0.5) * h;
        for j in 0..n {
            let y = -half + (j as f64 + 0.5) * h;
            acc += profile(x, y).powi(2);
        }
    }
    acc * h * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lat(a: f64) -> LatticeParams {
        LatticeParams::new(a, 1.0, DipoleOrientation::x()).unwrap()
    }

    #[test]
    fn build_2d_basics() {
        let one = build_2d(&lat(0.6), 1).unwrap();
        assert_eq!(one.positions, vec![[0.0, 0.0, 0.0]]);
        let arr = build_2d(&lat(0.6), 30).unwrap();
        assert_eq!(arr.len(), 900);
        assert_abs_diff_eq!(arr.lattice.unwrap().side_length(), 18.0, epsilon = 1e-12);
        for n in [4, 5] {
            let arr = build_2d(&lat(0.7), n).unwrap();
            let c: [f64; 3] = arr.positions.iter().fold([0.0; 3], |acc, p| {
                [acc[0] + p[0], acc[1] + p[1], acc[2] + p[2]]
            });
            assert!(c.iter().all(|x| x.abs() < 1e-12));
        }
        assert!(arr.validate().is_ok());
    }

    #[test]
    fn build_3d_layers() {
        let l = LatticeParams::new(0.6, 1.0, DipoleOrientation::x()).unwrap();
        assert_eq!(build_3d(&l, 4, 1).unwrap(), build_2d(&l, 4).unwrap());
        let arr = build_3d(&l, 3, 10).unwrap();
        let zmax = arr.positions.iter().map(|p| p[2]).fold(0.0, f64::max);
        assert_abs_diff_eq!(zmax, 9.0);
        let arr = build_3d(&l, 2, 3).unwrap();
        for nz in 0..3 {
            assert_eq!(arr.layer_index.iter().filter(|&&i| i == nz).count(), 4);
        }
    }

    #[test]
    fn disorder_determinism_and_statistics() {
        let arr = build_2d(&lat(0.6), 30).unwrap();
        let zero = apply_disorder(&arr, &DisorderSpec::normal(0.0, 1, 7), 0).unwrap();
        assert_eq!(zero.positions, arr.positions);
        let spec = DisorderSpec::normal(0.05, 1, 42);
        let a = apply_disorder(&arr, &spec, 3).unwrap();
        let b = apply_disorder(&arr, &spec, 3).unwrap();
        assert_eq!(a, b);
        let c = apply_disorder(&arr, &spec, 4).unwrap();
        assert_ne!(a.positions, c.positions);
        assert_eq!(a.layer_index, arr.layer_index);
        assert_eq!(a.site_index, arr.site_index);
        let d: Vec<f64> = a
            .positions
            .iter()
            .zip(&arr.positions)
            .flat_map(|(p, q)| (0..3).map(move |i| p[i] - q[i]))
            .collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
        assert!((std - 0.05).abs() < 0.005, "{std}");
        assert!(mean.abs() < 0.005);
    }

    #[test]
    fn keyed_draws_do_not_depend_on_order() {
        let mut r1 = KeyedRng::new(9, 2);
        let forward: Vec<f64> = (0..20).map(|n| r1.normal(n, 1)).collect();
        let mut r2 = KeyedRng::new(9, 2);
        let mut backward: Vec<f64> = (0..20).rev().map(|n| r2.normal(n, 1)).collect();
        backward.reverse();
        assert_eq!(forward, backward);
    }

    #[test]
    fn checkerboard() {
        let arr = build_2d(&lat(0.6), 6).unwrap();
        let z = checkerboard_detuning(&arr, 0.0).unwrap();
        assert!(z.detunings.iter().all(|&d| d == 0.0));
        let cb = checkerboard_detuning(&arr, 0.3).unwrap();
        assert_abs_diff_eq!(cb.detunings.iter().sum::<f64>(), 0.0);
        // neighbours along y are adjacent in storage order
        for nx in 0..6 {
            for ny in 0..5 {
                let i = nx * 6 + ny;
                assert_eq!(cb.detunings[i], -cb.detunings[i + 1]);
            }
        }
        let mut bare = arr.clone();
        bare.site_index = None;
        assert!(checkerboard_detuning(&bare, 0.3).is_err());
    }

    #[test]
    fn eta_values() {
        let beam = GaussianBeam::new(1.0).unwrap();
        assert_abs_diff_eq!(mode_overlap_eta(&beam, SQRT_2), 0.710_144_6, epsilon = 1e-6);
        assert_abs_diff_eq!(mode_overlap_eta(&beam, 100.0), 1.0);
        let beam = GaussianBeam::new(8.0 * 0.6).unwrap();
        let eta = mode_overlap_eta(&beam, 18.0);
        assert_abs_diff_eq!(eta, 0.99964, epsilon = 1e-5);
        let ratio = mode_overlap_complement(&beam, 18.0) / eta;
        assert!((ratio - 3.6e-4).abs() < 0.1e-4, "{ratio}");
        let asym = mode_overlap_complement_asymptotic(&beam, 30.0);
        let exact = mode_overlap_complement(&beam, 30.0);
        assert!((asym / exact - 1.0).abs() < 0.05);
        let num = footprint_overlap(|x, y| beam.profile(x, y), 18.0);
        assert_abs_diff_eq!(num, eta, epsilon = 1e-6);
    }

    #[test]
    fn beam_normalization_and_propagation() {
        for w in [2.0, 4.5, 7.0] {
            let beam = GaussianBeam::new(w).unwrap();
            assert_abs_diff_eq!(beam.numerical_norm(0.05), 1.0, epsilon = 1e-6);
            assert!(
                (beam.propagated(0.0, 1e-9) - C64::new(beam.center_amplitude(), 0.0)).norm() < 1e-9
            );
            // paraxial Gaussian beam at small distance
            let z = 5.0;
            let zr = PI * w * w;
            let q = C64::new(z, -zr);
            for rho in [0.0, 0.5 * w, w] {
                let parax =
                    beam.center_amplitude() * (-I * zr / q) * (I * K * rho * rho / (2.0 * q)).exp();
                let exact = beam.propagated(rho, z);
                // non-paraxial corrections scale like (kw)⁻²
                let tol = 1.0 / (K * w).powi(2);
                assert!(
                    (exact - parax).norm() < tol * beam.center_amplitude(),
                    "w={w} rho={rho}"
                );
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let arr = apply_disorder(
            &build_2d(&lat(0.6), 3).unwrap(),
            &DisorderSpec::normal(0.02, 1, 5),
            1,
        )
        .unwrap();
        let back = ArrayRealization::from_json(&arr.to_json().unwrap()).unwrap();
        assert_eq!(back, arr);
    }

    #[test]
    fn overlapping_atoms_rejected() {
        let r = ArrayRealization::from_positions(
            vec![[0.0; 3], [1e-8, 0.0, 0.0]],
            DipoleOrientation::x(),
        );
        assert!(matches!(r, Err(Error::Overlap { .. })));
    }
}
