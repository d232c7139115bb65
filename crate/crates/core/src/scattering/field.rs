//! Scattered fields on transverse planes and their projection onto the
//! Gaussian target mode.

use serde::{Deserialize, Serialize};

use super::Direction;
use crate::geometry::{ArrayRealization, GaussianBeam};
use crate::greens::{projected_green_unchecked, FIELD_SCALE};
use crate::{Error, Result, C64, K};

/// Coarsest sampling that still resolves the far field without aliasing.
pub const MAX_SPACING: f64 = 0.25;

/// Square sampling grid `[−h, h]²` with trapezoid weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionGrid {
    pub half_width: f64,
    pub spacing: f64,
}

impl ProjectionGrid {
    pub fn new(half_width: f64, spacing: f64) -> Result<Self> {
        if !(half_width > 0.0 && spacing > 0.0 && spacing.is_finite() && half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "projection grid needs positive extent and spacing, got {half_width} and {spacing}"
            )));
        }
        if spacing > MAX_SPACING {
            log::warn!("projection grid spacing {spacing} is coarser than λ/4; expect aliasing");
        }
        Ok(Self {
            half_width,
            spacing,
        })
    }

    /// Extent `3w` at spacing λ/4.
    pub fn for_beam(beam: &GaussianBeam) -> Self {
        Self {
            half_width: 3.0 * beam.waist,
            spacing: MAX_SPACING,
        }
    }

    /// Points per axis.
    pub fn points(&self) -> usize {
        (2.0 * self.half_width / self.spacing).ceil() as usize + 1
    }

    fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points() - 1) as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }

    fn weight_1d(&self, i: usize) -> f64 {
        let h = self.step();
        if i == 0 || i + 1 == self.points() {
            0.5 * h
        } else {
            h
        }
    }

    /// `(x, y, weight)` in row-major order (x outer).
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        let n = self.points();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push((
                    self.coordinate(i),
                    self.coordinate(j),
                    self.weight_1d(i) * self.weight_1d(j),
                ));
            }
        }
        out
    }
}

/// Field radiated by the dipoles at the plane `plane_z`, in drive units.
pub fn scattered_field(
    dipoles: &[C64],
    arr: &ArrayRealization,
    plane_z: f64,
    grid: &ProjectionGrid,
) -> Result<Vec<C64>> {
    if dipoles.len() != arr.len() {
        return Err(Error::InvalidParameter(
            "dipole count does not match the array".into(),
        ));
    }
    let e = &arr.orientation;
    let mut out = Vec::with_capacity(grid.points() * grid.points());
    for (x, y, _) in grid.samples() {
        let mut acc = C64::new(0.0, 0.0);
        for (p, s) in arr.positions.iter().zip(dipoles) {
            let r = [x - p[0], y - p[1], plane_z - p[2]];
            let d = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            if d == 0.0 {
                return Err(Error::Domain("field sample coincides with an atom".into()));
            }
            acc += projected_green_unchecked(r, d, e) * s;
        }
        out.push(FIELD_SCALE * acc);
    }
    Ok(out)
}

/// Incident beam on the plane `plane_z`, unit amplitude at the focus.
pub fn incident_field(
    beam: &GaussianBeam,
    plane_z: f64,
    direction: Direction,
    grid: &ProjectionGrid,
) -> Vec<C64> {
    let z = direction.sign() * plane_z;
    let u0 = beam.center_amplitude();
    let carrier = C64::from_polar(1.0, K * z);
    radial_table(beam, z, grid)
        .into_iter()
        .map(|u| u / u0 * carrier)
        .collect()
}

/// Propagated mode on every grid point, evaluated once per distinct radius.
fn radial_table(beam: &GaussianBeam, z: f64, grid: &ProjectionGrid) -> Vec<C64> {
    let mut cache: std::collections::HashMap<u64, C64> = std::collections::HashMap::new();
    grid.samples()
        .into_iter()
        .map(|(x, y, _)| {
            let r2 = x * x + y * y;
            *cache
                .entry(r2.to_bits())
                .or_insert_with(|| beam.propagated(r2.sqrt(), z))
        })
        .collect()
}

/// `∫ field·conj(u(r⊥, |z|)) d²r⊥` with the carrier `e^{ik|z|}` removed.
pub fn project_onto_mode(
    field: &[C64],
    beam: &GaussianBeam,
    plane_z: f64,
    grid: &ProjectionGrid,
) -> Result<C64> {
    let samples = grid.samples();
    if field.len() != samples.len() {
        return Err(Error::InvalidParameter(format!(
            "field has {} samples, grid has {}",
            field.len(),
            samples.len()
        )));
    }
    let d = plane_z.abs();
    let mode = radial_table(beam, d, grid);
    let carrier = C64::from_polar(1.0, -K * d);
    let acc: C64 = field
        .iter()
        .zip(&mode)
        .zip(&samples)
        .map(|((f, u), (_, _, w))| f * u.conj() * *w)
        .sum();
    Ok(acc * carrier)
}

/// Linear functionals mapping dipoles to projected amplitudes on the planes `∓d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionCoefficients {
    /// Plane `z = −d`.
    pub minus: Vec<C64>,
    /// Plane `z = +d`.
    pub plus: Vec<C64>,
    /// Projection of the unit-amplitude incident beam onto the mode at `|z| = d`.
    pub input_projection: C64,
    pub distance: f64,
}

impl ProjectionCoefficients {
    /// `(r, t)` for illumination travelling in `direction`.
    pub fn amplitudes(&self, dipoles: &[C64], direction: Direction) -> (C64, C64) {
        let dot = |c: &[C64]| c.iter().zip(dipoles).map(|(a, b)| a * b).sum::<C64>();
        let (back, front) = match direction {
            Direction::Forward => (&self.minus, &self.plus),
            Direction::Backward => (&self.plus, &self.minus),
        };
        let r = dot(back) / self.input_projection;
        let t = 1.0 + dot(front) / self.input_projection;
        (r, t)
    }
}

/// Precomputed mode samples for projecting array fields at `|z| = distance`.
#[derive(Debug, Clone)]
pub struct ModeProjector {
    pub beam: GaussianBeam,
    pub grid: ProjectionGrid,
    pub distance: f64,
    points: Vec<[f64; 2]>,
    /// `w·conj(u(r⊥, d))·e^{−ikd}` per grid point.
    weights: Vec<C64>,
    input_projection: C64,
}

impl ModeProjector {
    pub fn new(beam: GaussianBeam, grid: ProjectionGrid, distance: f64) -> Result<Self> {
        if !(distance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "projection distance must be positive, got {distance}"
            )));
        }
        let samples = grid.samples();
        let mode = radial_table(&beam, distance, &grid);
        let carrier = C64::from_polar(1.0, -K * distance);
        let mut points = Vec::with_capacity(samples.len());
        let mut weights = Vec::with_capacity(samples.len());
        let mut norm = 0.0;
        // keep only points where the mode is not negligible
        for ((x, y, w), u) in samples.iter().zip(&mode) {
            norm += w * u.norm_sqr();
            if u.norm() * w > 1e-18 {
                points.push([*x, *y]);
                weights.push(u.conj() * *w * carrier);
            }
        }
        let input_projection = C64::new(norm / beam.center_amplitude(), 0.0);
        Ok(Self {
            beam,
            grid,
            distance,
            points,
            weights,
            input_projection,
        })
    }

    /// Default projector: `3w` grid at λ/4, planes at `|z| = 5λ`.
    pub fn standard(beam: GaussianBeam) -> Result<Self> {
        Self::new(beam, ProjectionGrid::for_beam(&beam), 5.0)
    }

    fn coefficient(&self, p: &[f64; 3], plane_z: f64, arr: &ArrayRealization) -> C64 {
        let e = &arr.orientation;
        let mut acc = C64::new(0.0, 0.0);
        for (g, w) in self.points.iter().zip(&self.weights) {
            let r = [g[0] - p[0], g[1] - p[1], plane_z - p[2]];
            let d = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            acc += w * projected_green_unchecked(r, d, e);
        }
        FIELD_SCALE * acc
    }

    fn plane(&self, arr: &ArrayRealization, plane_z: f64) -> Vec<C64> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            arr.positions
                .par_iter()
                .map(|p| self.coefficient(p, plane_z, arr))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            arr.positions
                .iter()
                .map(|p| self.coefficient(p, plane_z, arr))
                .collect()
        }
    }

    pub fn coefficients(&self, arr: &ArrayRealization) -> Result<ProjectionCoefficients> {
        let d = self.distance;
        if arr.positions.iter().any(|p| p[2].abs() >= d) {
            return Err(Error::InvalidParameter(format!(
                "projection planes at |z| = {d} cut through the array"
            )));
        }
        let minus = self.plane(arr, -d);
        // a flat array with in-plane dipoles radiates symmetrically into both half spaces
        let plus = if arr.is_planar() && arr.orientation.is_in_plane() {
            minus.clone()
        } else {
            self.plane(arr, d)
        };
        Ok(ProjectionCoefficients {
            minus,
            plus,
            input_projection: self.input_projection,
            distance: d,
        })
    }
}

/// Coefficients with the default projector.
pub fn projection_coefficients(
    arr: &ArrayRealization,
    beam: &GaussianBeam,
) -> Result<ProjectionCoefficients> {
    ModeProjector::standard(*beam)?.coefficients(arr)
}
