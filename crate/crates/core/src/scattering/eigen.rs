//! Eigenmodes of the complex-symmetric interaction matrix.
//!
//! Eigenvectors are normalized with the bilinear form `Σ_n v_n² = 1`
//! (no conjugation), under which modes of a complex symmetric matrix are
//! orthogonal and complete.

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::InteractionMatrix;
use crate::{Error, Result, C64};

/// Relative size of `Σv²` below which a mode is treated as exceptional.
const EXCEPTIONAL: f64 = 1e-10;
/// Eigenvalues closer than this (relative to the spectral radius) are
/// re-orthogonalized together.
const CLUSTER: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EigenmodeSet {
    pub values: Vec<C64>,
    /// Column `l` is mode `l`.
    pub vectors: Mat<C64>,
    /// Modes whose bilinear norm vanished and were left unnormalized.
    pub exceptional: Vec<usize>,
}

/// One row of a mode table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub index: usize,
    pub eigenvalue: C64,
    pub decay_rate: f64,
    pub overlap: f64,
}

pub fn eigenmodes(m: &InteractionMatrix) -> Result<EigenmodeSet> {
    let a = m.to_mat();
    let n = a.nrows();
    let evd = a.eigen().map_err(|e| {
        log::error!("eigendecomposition failed: {e:?}");
        Error::Singular {
            condition: f64::INFINITY,
        }
    })?;
    let s = evd.S();
    let values: Vec<C64> = (0..n).map(|i| s[i]).collect();
    let mut vectors = evd.U().to_owned();

    let radius = values
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        values[i]
            .re
            .total_cmp(&values[j].re)
            .then(values[i].im.total_cmp(&values[j].im))
    });

    let mut exceptional = Vec::new();
    let mut done: Vec<usize> = Vec::new();
    for &l in &order {
        // bilinear Gram-Schmidt against already normalized members of the cluster
        for &k in done.iter().rev() {
            if (values[k] - values[l]).norm() > CLUSTER * radius {
                if values[k].re < values[l].re - CLUSTER * radius {
                    break;
                }
                continue;
            }
            if exceptional.contains(&k) {
                continue;
            }
            let proj: C64 = (0..n).map(|i| vectors[(i, k)] * vectors[(i, l)]).sum();
            for i in 0..n {
                let vk = vectors[(i, k)];
                vectors[(i, l)] -= proj * vk;
            }
        }
        let bil: C64 = (0..n).map(|i| vectors[(i, l)] * vectors[(i, l)]).sum();
        let herm: f64 = (0..n).map(|i| vectors[(i, l)].norm_sqr()).sum();
        if bil.norm() < EXCEPTIONAL * herm {
            log::warn!(
                "mode {l} is near an exceptional point (Σv² = {bil:.2e}); left unnormalized"
            );
            exceptional.push(l);
        } else {
            let scale = bil.sqrt().inv();
            for i in 0..n {
                vectors[(i, l)] *= scale;
            }
        }
        done.push(l);
    }
    Ok(EigenmodeSet {
        values,
        vectors,
        exceptional,
    })
}

impl EigenmodeSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `2·Re λ_l`.
    pub fn decay_rate(&self, l: usize) -> f64 {
        2.0 * self.values[l].re
    }

    pub fn mode(&self, l: usize) -> Vec<C64> {
        let c = self.vectors.col(l);
        (0..self.vectors.nrows()).map(|i| c[i]).collect()
    }

    /// `|Σ_n v_n t_n|² / (‖v‖²‖t‖²)`, in `[0, 1]`.
    pub fn overlap(&self, l: usize, target: &[C64]) -> f64 {
        let c = self.vectors.col(l);
        let mut dot = C64::new(0.0, 0.0);
        let mut vv = 0.0;
        for (i, t) in target.iter().enumerate() {
            dot += c[i] * t;
            vv += c[i].norm_sqr();
        }
        let tt: f64 = target.iter().map(|t| t.norm_sqr()).sum();
        dot.norm_sqr() / (vv * tt)
    }

    /// Mode with the largest [`overlap`](Self::overlap) with `target`.
    pub fn best_overlap(&self, target: &[C64]) -> ModeSummary {
        let (index, overlap) = (0..self.len())
            .map(|l| (l, self.overlap(l, target)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        self.summary(index, overlap)
    }

    pub fn summary(&self, l: usize, overlap: f64) -> ModeSummary {
        ModeSummary {
            index: l,
            eigenvalue: self.values[l],
            decay_rate: self.decay_rate(l),
            overlap,
        }
    }

    /// `max |Σ_n v_{l,n} v_{l',n} − δ_{ll'}|` over all mode pairs.
    pub fn orthogonality_error(&self) -> f64 {
        let g = self.vectors.transpose() * &self.vectors;
        let n = g.nrows();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// `max ‖V·Vᵀ·x − x‖/‖x‖` over the supplied vectors.
    pub fn completeness_error(&self, probes: &[Vec<C64>]) -> f64 {
        let n = self.vectors.nrows();
        probes
            .iter()
            .map(|x| {
                let xm = Mat::from_fn(n, 1, |i, _| x[i]);
                let back = &self.vectors * (self.vectors.transpose() * &xm);
                let diff: f64 = (0..n)
                    .map(|i| (back[(i, 0)] - x[i]).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                let norm: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                diff / norm
            })
            .fold(0.0, f64::max)
    }

    /// `Σ_l v_{l,n} v_{l,m}`.
    pub fn completeness_entry(&self, n: usize, m: usize) -> C64 {
        (0..self.len())
            .map(|l| self.vectors[(n, l)] * self.vectors[(m, l)])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_2d, ArrayRealization};
    use crate::greens::{coupling, DipoleOrientation, LatticeParams};
    use crate::scattering::build_matrix;

    #[test]
    fn pair_modes() {
        let e = DipoleOrientation::x();
        let arr = ArrayRealization::from_positions(vec![[0.0; 3], [0.0, 0.4, 0.0]], e).unwrap();
        let set = eigenmodes(&build_matrix(&arr, 0.2).unwrap()).unwrap();
        let d12 = coupling([0.0, 0.4, 0.0], &e).unwrap();
        let base = C64::new(0.5, -0.2);
        let mut vals = set.values.clone();
        vals.sort_by(|a, b| a.re.total_cmp(&b.re));
        let mut want = [base + d12, base - d12];
        want.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (v, w) in vals.iter().zip(&want) {
            assert!((v - w).norm() < 1e-12);
        }
        for l in 0..2 {
            let v = set.mode(l);
            assert!((v[0].norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
            assert!((v[0] * v[0] + v[1] * v[1] - 1.0).norm() < 1e-12);
        }
        assert!(set.orthogonality_error() < 1e-12);
    }

    #[test]
    fn orthogonal_and_complete_with_degeneracies() {
        // an ordered lattice has symmetry-degenerate modes
        let lat = LatticeParams::new(0.5, 1.0, DipoleOrientation::circular()).unwrap();
        let arr = build_2d(&lat, 6).unwrap();
        let set = eigenmodes(&build_matrix(&arr, 0.0).unwrap()).unwrap();
        assert!(set.exceptional.is_empty());
        assert!(
            set.orthogonality_error() < 1e-8,
            "{}",
            set.orthogonality_error()
        );
        let probes: Vec<Vec<C64>> = (0..10)
            .map(|k| {
                (0..36)
                    .map(|i| C64::new(((i * 7 + k) as f64).sin(), ((i + 3 * k) as f64).cos()))
                    .collect()
            })
            .collect();
        assert!(set.completeness_error(&probes) < 1e-6);
        for (n, m) in [(0, 0), (3, 5), (35, 35), (10, 20)] {
            let want = if n == m { 1.0 } else { 0.0 };
            assert!((set.completeness_entry(n, m) - want).norm() < 1e-6);
        }
    }
}
