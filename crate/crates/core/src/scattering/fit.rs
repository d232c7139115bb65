//! One-dimensional maximization and the Lorentzian resonance fit.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Brent's method (golden section with parabolic steps) for the maximum of
/// `f` on `[lo, hi]`. Returns `(argmax, max)`.
pub fn brent_maximize(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = -f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-14;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Ok((x, -fx));
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = -f(u)?;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Err(Error::FitFailure("maximization did not converge".into()))
}

/// Parameters of `|r(δ)| = Γ/√((Γ+γ)² + 4(δ−Δ)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub r0: f64,
    pub center: f64,
    /// `Γ + γ_loss`.
    pub total_width: f64,
    /// `Γ`.
    pub target_rate: f64,
    /// Root-mean-square relative misfit of `|r|`.
    pub rms_misfit: f64,
}

/// Least-squares fit of `1/|r|²` to a quadratic in `δ`.
pub fn fit_lorentzian(deltas: &[f64], magnitudes: &[f64]) -> Result<LorentzianFit> {
    if deltas.len() != magnitudes.len() || deltas.len() < 3 {
        return Err(Error::FitFailure("need at least three samples".into()));
    }
    if magnitudes.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::FitFailure(
            "reflectivity samples must be positive".into(),
        ));
    }
    let n = deltas.len() as f64;
    let mean = deltas.iter().sum::<f64>() / n;
    let scale = deltas
        .iter()
        .map(|d| (d - mean).abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    // normal equations in the centered, scaled variable s = (δ − mean)/scale
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (d, m) in deltas.iter().zip(magnitudes) {
        let s = (d - mean) / scale;
        let row = [s * s, s, 1.0];
        let y = 1.0 / (m * m);
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    let [a2, a1, a0] =
        solve3(ata, atb).ok_or_else(|| Error::FitFailure("degenerate fit window".into()))?;
    if !(a2 > 0.0) {
        return Err(Error::FitFailure(
            "fitted curvature has the wrong sign".into(),
        ));
    }
    let c2 = a2 / (scale * scale);
    let center = mean - a1 / (2.0 * a2) * scale;
    let floor = a0 - a1 * a1 / (4.0 * a2);
    if !(floor > 0.0) {
        return Err(Error::FitFailure(
            "fitted peak exceeds unit reflectivity".into(),
        ));
    }
    let r0 = 1.0 / floor.sqrt();
    let target_rate = 2.0 / c2.sqrt();
    let total_width = target_rate / r0;
    let mut misfit = 0.0;
    for (d, m) in deltas.iter().zip(magnitudes) {
        let model = target_rate / (total_width * total_width + 4.0 * (d - center).powi(2)).sqrt();
        misfit += ((model - m) / m).powi(2);
    }
    Ok(LorentzianFit {
        r0,
        center,
        total_width,
        target_rate,
        rms_misfit: (misfit / n).sqrt(),
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for k in 0..3 {
        let p = (k..3).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..3 {
            let l = a[i][k] / a[k][k];
            let pivot = a[k];
            for (x, p) in a[i].iter_mut().zip(pivot).skip(k) {
                *x -= l * p;
            }
            b[i] -= l * b[k];
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let mut s = b[k];
        for j in k + 1..3 {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model1d::{reflection_amplitude, InterfaceParams};

    #[test]
    fn brent_finds_parabola_peak() {
        let (x, fx) = brent_maximize(|x| Ok(1.0 - (x - 0.3).powi(2)), -1.0, 2.0, 1e-12).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lorentzian_self_consistency() {
        for &(g, l, shift) in &[(0.663, 3.57e-4, -0.1), (1.0, 1.0, 0.5), (3.0, 0.2, -2.0)] {
            let p = InterfaceParams::new(g, l).unwrap().with_shift(shift);
            let hw = 0.5 * p.total_width();
            let deltas: Vec<f64> = (0..41).map(|j| shift - hw + j as f64 * hw / 20.0).collect();
            let mags: Vec<f64> = deltas
                .iter()
                .map(|d| reflection_amplitude(&p, *d).norm())
                .collect();
            let fit = fit_lorentzian(&deltas, &mags).unwrap();
            let r0 = g / (g + l);
            assert!((fit.r0 - r0).abs() < 1e-6, "{fit:?}");
            assert!((fit.center - shift).abs() < 1e-6);
            assert!((fit.total_width - (g + l)).abs() < 1e-6 * (g + l));
            assert!(fit.rms_misfit < 1e-9);
        }
    }

    #[test]
    fn flat_data_is_rejected() {
        let d = [0.0, 1.0, 2.0];
        assert!(fit_lorentzian(&d, &[0.5, 0.5, 0.5]).is_err());
    }
}
