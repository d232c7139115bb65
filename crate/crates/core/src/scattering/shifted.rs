//! Repeated solves of `(K − iδ)·x = b` over many shifts `δ`.
//!
//! `K` is reduced once to upper Hessenberg form `K = Q·H·Qᴴ`; each shift then
//! costs one O(N²) Hessenberg elimination instead of a fresh O(N³) LU.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::{Mat, Par};

use crate::{Error, Result, C64, I};

/// Condition estimate above which a shifted system is reported as singular.
pub const CONDITION_LIMIT: f64 = 1e13;

#[derive(Debug, Clone)]
pub struct ShiftedSolver {
    n: usize,
    /// Row-major Hessenberg matrix; row `i` is stored from column `i−1`.
    h: Vec<C64>,
    q: Mat<C64>,
}

/// Reusable buffers for [`ShiftedSolver::solve_reduced`].
#[derive(Debug, Clone, Default)]
pub struct ShiftScratch {
    u: Vec<C64>,
    cur: Vec<C64>,
    rhs: Vec<C64>,
}

impl ShiftedSolver {
    pub fn new(kernel: &Mat<C64>) -> Self {
        let n = kernel.nrows();
        let mut h = kernel.clone();
        let mut q = Mat::<C64>::identity(n, n);
        if n > 2 {
            let bs =
                faer::linalg::qr::no_pivoting::factor::recommended_block_size::<C64>(n - 1, n - 1);
            let mut hh = Mat::<C64>::zeros(bs, n - 1);
            let req = faer::linalg::evd::hessenberg::hessenberg_in_place_scratch::<C64>(
                n,
                bs,
                Par::Seq,
                Default::default(),
            )
            .or(
                faer::linalg::householder::apply_block_householder_sequence_on_the_right_in_place_scratch::<C64>(
                    n - 1,
                    bs,
                    n - 1,
                ),
            );
            let mut mem = MemBuffer::new(req);
            let stack = MemStack::new(&mut mem);
            faer::linalg::evd::hessenberg::hessenberg_in_place(
                h.as_mut(),
                hh.as_mut(),
                Par::Seq,
                stack,
                Default::default(),
            );
            faer::linalg::householder::apply_block_householder_sequence_on_the_right_in_place_with_conj(
                h.as_ref().submatrix(1, 0, n - 1, n - 1),
                hh.as_ref(),
                faer::Conj::No,
                q.as_mut().submatrix_mut(1, 1, n - 1, n - 1),
                Par::Seq,
                stack,
            );
        }
        let mut rows = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                rows[i * n + j] = h[(i, j)];
            }
        }
        Self { n, h: rows, q }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Qᴴ·b`.
    pub fn reduce_rhs(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        (0..n)
            .map(|j| {
                let col = self.q.col(j);
                (0..n).map(|i| col[i].conj() * b[i]).sum()
            })
            .collect()
    }

    /// `Qᵀ·c`, so that `cᵀx = (Qᵀc)ᵀ y` for `x = Q·y`.
    pub fn reduce_functional(&self, c: &[C64]) -> Vec<C64> {
        let n = self.n;
        (0..n)
            .map(|j| {
                let col = self.q.col(j);
                (0..n).map(|i| col[i] * c[i]).sum()
            })
            .collect()
    }

    /// `Q·y`.
    pub fn expand(&self, y: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (j, yj) in y.iter().enumerate() {
            let col = self.q.col(j);
            for i in 0..n {
                out[i] += col[i] * yj;
            }
        }
        out
    }

    /// Solves `(H − iδ)·y = rhs` in the reduced basis.
    pub fn solve_reduced(
        &self,
        delta: f64,
        rhs: &[C64],
        scratch: &mut ShiftScratch,
    ) -> Result<Vec<C64>> {
        let n = self.n;
        let shift = -I * delta;
        scratch.u.resize(n * n, C64::new(0.0, 0.0));
        scratch.cur.resize(n, C64::new(0.0, 0.0));
        scratch.rhs.clear();
        scratch.rhs.extend_from_slice(rhs);
        let (u, cur, b) = (&mut scratch.u, &mut scratch.cur, &mut scratch.rhs);
        let h = &self.h;

        // cur holds the partially eliminated pivot candidate row k
        cur[..n].copy_from_slice(&h[..n]);
        cur[0] += shift;
        let mut cur_b = b[0];
        for k in 0..n {
            if k + 1 == n {
                u[k * n + k] = cur[k];
                b[k] = cur_b;
                break;
            }
            let next = &h[(k + 1) * n..(k + 2) * n];
            let next_diag = |j: usize| if j == k + 1 { next[j] + shift } else { next[j] };
            let next_b = b[k + 1];
            if cur[k].norm() >= next[k].norm() {
                // pivot stays: U row k = cur
                let l = if cur[k].norm() > 0.0 {
                    next[k] / cur[k]
                } else {
                    C64::new(0.0, 0.0)
                };
                for j in k..n {
                    u[k * n + j] = cur[j];
                }
                b[k] = cur_b;
                for j in k + 1..n {
                    cur[j] = next_diag(j) - l * u[k * n + j];
                }
                cur_b = next_b - l * b[k];
            } else {
                let l = cur[k] / next[k];
                for j in k..n {
                    let nj = next_diag(j);
                    let old = cur[j];
                    u[k * n + j] = nj;
                    cur[j] = old - l * nj;
                }
                b[k] = next_b;
                cur_b -= l * next_b;
            }
        }

        let mut hi: f64 = 0.0;
        let mut lo = f64::INFINITY;
        for k in 0..n {
            let d = u[k * n + k].norm();
            hi = hi.max(d);
            lo = lo.min(d);
        }
        let condition = hi / lo;
        if !(condition < CONDITION_LIMIT) {
            return Err(Error::Singular { condition });
        }
        let mut y = vec![C64::new(0.0, 0.0); n];
        for k in (0..n).rev() {
            let mut acc = b[k];
            let row = &u[k * n..(k + 1) * n];
            for j in k + 1..n {
                acc -= row[j] * y[j];
            }
            y[k] = acc / row[k];
        }
        if y.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Singular { condition });
        }
        Ok(y)
    }

    /// Solves `(K − iδ)·x = b` in the original basis.
    pub fn solve(&self, delta: f64, b: &[C64]) -> Result<Vec<C64>> {
        let mut scratch = ShiftScratch::default();
        let y = self.solve_reduced(delta, &self.reduce_rhs(b), &mut scratch)?;
        Ok(self.expand(&y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::linalg::solvers::Solve;

    fn random_symmetric(n: usize, seed: u64) -> Mat<C64> {
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = Mat::<C64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = C64::new(next(), next());
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
            m[(i, i)] += C64::new(0.5, 0.0);
        }
        m
    }

    #[test]
    fn matches_dense_lu() {
        for n in [1usize, 2, 3, 7, 40] {
            let k = random_symmetric(n, n as u64);
            let solver = ShiftedSolver::new(&k);
            let b: Vec<C64> = (0..n).map(|i| C64::new(1.0, i as f64 * 0.1)).collect();
            for delta in [-1.3, 0.0, 0.7] {
                let x = solver.solve(delta, &b).unwrap();
                let mut a = k.clone();
                for i in 0..n {
                    a[(i, i)] -= I * delta;
                }
                let rhs = Mat::<C64>::from_fn(n, 1, |i, _| b[i]);
                let dense = a.partial_piv_lu().solve(&rhs);
                for i in 0..n {
                    assert!((x[i] - dense[(i, 0)]).norm() < 1e-10 * (1.0 + dense[(i, 0)].norm()));
                }
            }
        }
    }

    #[test]
    fn functional_reduction_is_consistent() {
        let n = 12;
        let k = random_symmetric(n, 3);
        let solver = ShiftedSolver::new(&k);
        let b: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), 0.2)).collect();
        let c: Vec<C64> = (0..n).map(|i| C64::new(0.3, (i as f64).cos())).collect();
        let x = solver.solve(0.4, &b).unwrap();
        let direct: C64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        let mut scratch = ShiftScratch::default();
        let y = solver
            .solve_reduced(0.4, &solver.reduce_rhs(&b), &mut scratch)
            .unwrap();
        let g = solver.reduce_functional(&c);
        let reduced: C64 = g.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((direct - reduced).norm() < 1e-12);
    }

    #[test]
    fn singular_shift_is_reported() {
        let mut k = Mat::<C64>::zeros(2, 2);
        k[(0, 0)] = C64::new(0.0, -1.0);
        k[(1, 1)] = C64::new(1.0, 0.0);
        let solver = ShiftedSolver::new(&k);
        assert!(matches!(
            solver.solve(-1.0, &[C64::new(1.0, 0.0); 2]),
            Err(Error::Singular { .. })
        ));
    }
}
