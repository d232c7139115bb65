//! Storage and retrieval of a single photon wave packet in the spin of the
//! single-mode model, driven by a classical control field.
//!
//! The dipole `P` couples to the input mode with amplitude `√Γ` and to the
//! spin `S` through the control `Ω(t)`. Only classical means are evolved.

use serde::{Deserialize, Serialize};

use crate::model1d::InterfaceParams;
use crate::ode::Rk4;
use crate::{Error, Result, C64, I};

/// Complex envelope sampled on a uniform time grid `t0 + j·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<C64>,
}

impl PulseShape {
    pub fn new(t0: f64, dt: f64, values: Vec<C64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bad pulse grid: t0={t0}, dt={dt}"
            )));
        }
        if values.len() < 2 {
            return Err(Error::InvalidParameter(
                "a pulse needs at least two samples".into(),
            ));
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::InvalidParameter("non-finite pulse sample".into()));
        }
        Ok(Self { t0, dt, values })
    }

    /// Samples `f` at `n` points spanning `[t0, t_end]` inclusive.
    pub fn from_fn(t0: f64, t_end: f64, n: usize, f: impl Fn(f64) -> C64) -> Result<Self> {
        if n < 2 || !(t_end > t0) {
            return Err(Error::InvalidParameter(format!(
                "need n >= 2 and t_end > t0 (n={n}, t0={t0}, t_end={t_end})"
            )));
        }
        let dt = (t_end - t0) / (n - 1) as f64;
        Self::new(t0, dt, (0..n).map(|j| f(t0 + j as f64 * dt)).collect())
    }

    /// Normalized `h(t) ∝ e^{κt/2}` on `[0, duration]`, whose storage needs a
    /// constant two-photon width `Γ_S = κ`.
    pub fn rising_exponential(rate: f64, duration: f64, n: usize) -> Result<Self> {
        Self::from_fn(0.0, duration, n, |t| {
            C64::new((0.5 * rate * (t - duration)).exp(), 0.0)
        })?
        .normalized()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn duration(&self) -> f64 {
        self.t_end() - self.t0
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.time(j)).collect()
    }

    /// Trapezoidal `∫|h|² dt`.
    pub fn energy(&self) -> f64 {
        let n = self.len();
        let inner: f64 = self.values[1..n - 1].iter().map(|v| v.norm_sqr()).sum();
        self.dt * (inner + 0.5 * (self.values[0].norm_sqr() + self.values[n - 1].norm_sqr()))
    }

    /// Trapezoidal running integral of `|h|²`, one entry per sample.
    pub fn cumulative_energy(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * self.dt * (w[0].norm_sqr() + w[1].norm_sqr());
            out.push(acc);
        }
        out
    }

    pub fn normalized(&self) -> Result<Self> {
        let e = self.energy();
        if !(e > 0.0) {
            return Err(Error::InvalidParameter(
                "cannot normalize an empty pulse".into(),
            ));
        }
        Ok(self.scaled(C64::new(1.0 / e.sqrt(), 0.0)))
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.energy() - 1.0).abs() <= tol
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Same samples on a grid starting at `t0`.
    pub fn shifted_to(&self, t0: f64) -> Self {
        Self { t0, ..self.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Cubic Lagrange interpolation; zero outside the grid.
    pub fn sample(&self, t: f64) -> C64 {
        let n = self.len();
        let x = (t - self.t0) / self.dt;
        let tol = 1e-9;
        if x < -tol || x > (n - 1) as f64 + tol {
            return C64::new(0.0, 0.0);
        }
        let x = x.clamp(0.0, (n - 1) as f64);
        let nearest = x.round();
        if (x - nearest).abs() < 1e-12 {
            return self.values[nearest as usize];
        }
        if n < 4 {
            let j = (x.floor() as usize).min(n - 2);
            let f = x - j as f64;
            return self.values[j] * (1.0 - f) + self.values[j + 1] * f;
        }
        let j = (x.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..4 {
            let xa = (j + a) as f64;
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    let xb = (j + b) as f64;
                    w *= (x - xb) / (xa - xb);
                }
            }
            acc += self.values[j + a] * w;
        }
        acc
    }

    /// Normalized overlap `|∫ a b*|² / (∫|a|² ∫|b|²)` of two pulses on the same grid.
    pub fn overlap(&self, other: &PulseShape) -> Result<f64> {
        if self.len() != other.len() || (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return Err(Error::InvalidParameter(
                "pulses are on different grids".into(),
            ));
        }
        let n = self.len();
        let mut cross = C64::new(0.0, 0.0);
        for j in 0..n {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            cross += self.values[j] * other.values[j].conj() * w;
        }
        cross *= self.dt;
        Ok(cross.norm_sqr() / (self.energy() * other.energy()))
    }
}

/// Safety limits for the optimal-control synthesis near `t = t0`, where the
/// closed form diverges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlOptions {
    /// `|Ω|` is clamped to this multiple of `Γ + γ_loss`.
    pub clamp_factor: f64,
    /// The control is zero before this fraction of the pulse duration.
    pub start_fraction: f64,
}

impl Default for ControlOptions {
    fn default() -> Self {
        Self {
            clamp_factor: 1e3,
            start_fraction: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StorageControl {
    pub control: PulseShape,
    /// Samples whose magnitude hit the clamp.
    pub clamped_samples: usize,
    /// Set when the input starts abruptly, which makes the control diverge as `t^{-1/2}`.
    pub singular_start: bool,
}

/// Control field that maps the input `h0` onto the spin with the maximal
/// efficiency `C/(1+C)`, given enough two-photon bandwidth.
pub fn optimal_storage_control(
    h0: &PulseShape,
    p: &InterfaceParams,
    delta_p: f64,
) -> Result<StorageControl> {
    optimal_storage_control_with(h0, p, delta_p, ControlOptions::default())
}

pub fn optimal_storage_control_with(
    h0: &PulseShape,
    p: &InterfaceParams,
    delta_p: f64,
    opts: ControlOptions,
) -> Result<StorageControl> {
    p.validate()?;
    let total = p.total_width();
    let a = p.half_width();
    let detune = p.collective_shift - delta_p;
    let prefactor = -C64::new(a, detune) / total.sqrt();
    let exponent = C64::new(1.0, 2.0 * detune / total);
    let cum = h0.cumulative_energy();
    let norm = *cum.last().unwrap();
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter(
            "input pulse carries no energy".into(),
        ));
    }
    let t_start = h0.t0 + opts.start_fraction * h0.duration();
    let clamp = opts.clamp_factor * total;
    let t_end = h0.t_end();
    let peak = h0.max_abs();
    let singular_start = h0.values[0].norm() > 1e-12 * peak;
    if singular_start {
        log::warn!(
            "input pulse is nonzero at its first sample; the optimal control diverges there"
        );
    }

    let mut clamped = 0;
    let values = (0..h0.len())
        .map(|j| {
            let t = h0.time(j);
            let c = cum[j] / norm;
            if t < t_start - 1e-12 * h0.dt || c <= 0.0 {
                return C64::new(0.0, 0.0);
            }
            // c^{-exponent/2} = exp(-(exponent/2) ln c)
            let power = (-(exponent * 0.5) * c.ln()).exp();
            let mut omega = prefactor * h0.values[j] / norm.sqrt()
                * power
                * (I * p.two_photon_detuning * (t_end - t)).exp();
            if omega.norm() > clamp {
                omega *= clamp / omega.norm();
                clamped += 1;
            }
            omega
        })
        .collect();
    Ok(StorageControl {
        control: PulseShape::new(h0.t0, h0.dt, values)?,
        clamped_samples: clamped,
        singular_start,
    })
}

/// `Ω*(T − t)` on the same grid.
pub fn time_reverse_control(control: &PulseShape) -> PulseShape {
    PulseShape {
        t0: control.t0,
        dt: control.dt,
        values: control.values.iter().rev().map(|v| v.conj()).collect(),
    }
}

/// Time-ordered record of a storage or retrieval simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemoryRun {
    pub times: Vec<f64>,
    pub dipole: Vec<C64>,
    pub spin: Vec<C64>,
    /// Outgoing target-mode field `𝓔₀ + i√Γ P`.
    pub output: Vec<C64>,
    pub input: Option<PulseShape>,
    pub control: PulseShape,
    /// `|S|²` at the end of the run.
    pub stored_excitation: f64,
    /// `e_s` for storage runs, `e_r` for retrieval runs.
    pub efficiency: f64,
    /// Energy carried away by the outgoing field.
    pub emitted_energy: f64,
}

struct Segment<'a> {
    p: &'a InterfaceParams,
    delta_p: f64,
    input: Option<&'a PulseShape>,
    control: Option<&'a PulseShape>,
    t_start: f64,
    t_end: f64,
}

struct SegmentResult {
    times: Vec<f64>,
    dipole: Vec<C64>,
    spin: Vec<C64>,
    output: Vec<C64>,
    final_state: [C64; 2],
    emitted: f64,
}

fn run_segment(seg: &Segment, init: [C64; 2], dt: f64) -> SegmentResult {
    let span = seg.t_end - seg.t_start;
    let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let sqrt_g = seg.p.gamma_target.sqrt();
    let decay = C64::new(-seg.p.half_width(), seg.delta_p - seg.p.collective_shift);
    let delta2 = seg.p.two_photon_detuning;
    let field = |t: f64| seg.input.map_or(C64::new(0.0, 0.0), |h| h.sample(t));
    let omega = |t: f64| seg.control.map_or(C64::new(0.0, 0.0), |c| c.sample(t));

    // state: P, S, accumulated outgoing energy (real part)
    let mut y = [init[0], init[1], C64::new(0.0, 0.0)];
    let mut rhs = |t: f64, y: &[C64], out: &mut [C64]| {
        let e_in = field(t);
        let om = omega(t);
        out[0] = decay * y[0] + I * om * y[1] + I * sqrt_g * e_in;
        out[1] = I * delta2 * y[1] + I * om.conj() * y[0];
        out[2] = C64::new((e_in + I * sqrt_g * y[0]).norm_sqr(), 0.0);
    };
    let mut rk = Rk4::new(3);
    let mut res = SegmentResult {
        times: Vec::with_capacity(steps + 1),
        dipole: Vec::with_capacity(steps + 1),
        spin: Vec::with_capacity(steps + 1),
        output: Vec::with_capacity(steps + 1),
        final_state: init,
        emitted: 0.0,
    };
    let record = |t: f64, y: &[C64; 3], res: &mut SegmentResult| {
        res.times.push(t);
        res.dipole.push(y[0]);
        res.spin.push(y[1]);
        res.output.push(field(t) + I * sqrt_g * y[0]);
    };
    record(seg.t_start, &y, &mut res);
    for j in 0..steps {
        let t = seg.t_start + j as f64 * h;
        rk.step(&mut rhs, t, h, &mut y);
        record(t + h, &y, &mut res);
    }
    res.final_state = [y[0], y[1]];
    res.emitted = y[2].re;
    res
}

const HALVING_LIMIT: f64 = 1e-4;

fn check_step(p: &InterfaceParams, control: &PulseShape, dt: f64) -> Result<()> {
    let scale = p.total_width().max(control.max_abs());
    let limit = 0.05 / scale;
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepSize { dt, limit });
    }
    Ok(())
}

/// Largest step accepted by [`simulate_storage`] and [`simulate_retrieval`].
pub fn max_step(p: &InterfaceParams, control: &PulseShape) -> f64 {
    0.05 / p.total_width().max(control.max_abs())
}

/// Stores `h0` using `control`; both share the same time grid.
pub fn simulate_storage(
    h0: &PulseShape,
    control: &PulseShape,
    p: &InterfaceParams,
    delta_p: f64,
    dt: f64,
) -> Result<MemoryRun> {
    p.validate()?;
    check_step(p, control, dt)?;
    let seg = Segment {
        p,
        delta_p,
        input: Some(h0),
        control: Some(control),
        t_start: h0.t0,
        t_end: h0.t_end(),
    };
    let zero = [C64::new(0.0, 0.0); 2];
    let input_energy = h0.energy();
    let coarse = run_segment(&seg, zero, dt);
    let fine = run_segment(&seg, zero, 0.5 * dt);
    let e_coarse = coarse.final_state[1].norm_sqr() / input_energy;
    let e_fine = fine.final_state[1].norm_sqr() / input_energy;
    if (e_coarse - e_fine).abs() > HALVING_LIMIT {
        return Err(Error::Instability {
            quantity: "storage efficiency",
            change: (e_coarse - e_fine).abs(),
            limit: HALVING_LIMIT,
        });
    }
    Ok(MemoryRun {
        stored_excitation: coarse.final_state[1].norm_sqr(),
        efficiency: e_coarse.clamp(0.0, 1.0),
        emitted_energy: coarse.emitted,
        times: coarse.times,
        dipole: coarse.dipole,
        spin: coarse.spin,
        output: coarse.output,
        input: Some(h0.clone()),
        control: control.clone(),
    })
}

/// Retrieves a stored spin amplitude `s0` into the output mode with `control`,
/// starting at the first sample of the control grid with the dipole empty.
pub fn simulate_retrieval(
    s0: C64,
    control: &PulseShape,
    p: &InterfaceParams,
    delta_p: f64,
    dt: f64,
) -> Result<MemoryRun> {
    retrieve_from([C64::new(0.0, 0.0), s0], control, p, delta_p, dt)
}

fn retrieve_from(
    init: [C64; 2],
    control: &PulseShape,
    p: &InterfaceParams,
    delta_p: f64,
    dt: f64,
) -> Result<MemoryRun> {
    p.validate()?;
    check_step(p, control, dt)?;
    if p.two_photon_detuning != 0.0 {
        log::warn!(
            "retrieval with nonzero two-photon detuning uses an unverified phase convention"
        );
    }
    let stored = init[1].norm_sqr();
    if !(stored > 0.0) {
        return Err(Error::InvalidParameter(
            "retrieval needs a nonzero stored spin".into(),
        ));
    }
    let seg = Segment {
        p,
        delta_p,
        input: None,
        control: Some(control),
        t_start: control.t0,
        t_end: control.t_end(),
    };
    let coarse = run_segment(&seg, init, dt);
    let fine = run_segment(&seg, init, 0.5 * dt);
    let (e_coarse, e_fine) = (coarse.emitted / stored, fine.emitted / stored);
    if (e_coarse - e_fine).abs() > HALVING_LIMIT {
        return Err(Error::Instability {
            quantity: "retrieval efficiency",
            change: (e_coarse - e_fine).abs(),
            limit: HALVING_LIMIT,
        });
    }
    Ok(MemoryRun {
        stored_excitation: coarse.final_state[1].norm_sqr(),
        efficiency: e_coarse.clamp(0.0, 1.0),
        emitted_energy: coarse.emitted,
        times: coarse.times,
        dipole: coarse.dipole,
        spin: coarse.spin,
        output: coarse.output,
        input: None,
        control: control.clone(),
    })
}

/// Outcome of a full store / hold / retrieve cycle.
#[derive(Debug, Clone)]
pub struct MemoryCycle {
    pub storage: MemoryRun,
    /// `None` when nothing survived storage and hold.
    pub retrieval: Option<MemoryRun>,
    pub storage_efficiency: f64,
    pub retrieval_efficiency: f64,
    /// Retrieved energy divided by input energy.
    pub total_efficiency: f64,
}

/// Stores with `control`, waits `hold` with the control off, then retrieves
/// with the time-reversed control.
pub fn store_hold_retrieve(
    h0: &PulseShape,
    control: &PulseShape,
    p: &InterfaceParams,
    delta_p: f64,
    hold: f64,
    dt: f64,
) -> Result<MemoryCycle> {
    let storage = simulate_storage(h0, control, p, delta_p, dt)?;
    let after_store = [
        *storage.dipole.last().unwrap(),
        *storage.spin.last().unwrap(),
    ];
    let hold_end = h0.t_end() + hold;
    let state = if hold > 0.0 {
        let seg = Segment {
            p,
            delta_p,
            input: None,
            control: None,
            t_start: h0.t_end(),
            t_end: hold_end,
        };
        run_segment(&seg, after_store, dt).final_state
    } else {
        after_store
    };
    let reversed = time_reverse_control(control).shifted_to(hold_end);
    let retrieval = if state[1].norm_sqr() > 0.0 {
        Some(retrieve_from(state, &reversed, p, delta_p, dt)?)
    } else {
        None
    };
    let (retrieval_efficiency, emitted) = retrieval
        .as_ref()
        .map_or((0.0, 0.0), |r| (r.efficiency, r.emitted_energy));
    Ok(MemoryCycle {
        storage_efficiency: storage.efficiency,
        retrieval_efficiency,
        total_efficiency: emitted / h0.energy(),
        storage,
        retrieval,
    })
}
