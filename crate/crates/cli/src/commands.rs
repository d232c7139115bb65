//! One function per subcommand. Each builds its inputs from the config,
//! fans independent runs out over the worker pool, and writes results in
//! task order so the files do not depend on the worker count.

use atomarray::dynamics::{
    mapping_params_subradiant, optimal_subradiant_pulses, run_memory_protocol, ArrayDynamics,
    Illumination, MemoryRunOptions, RunOptions,
};
use atomarray::geometry::{
    apply_disorder, build_2d, build_3d, checkerboard_detuning, mode_overlap_eta, ArrayRealization,
    DisorderDistribution, DisorderSpec, GaussianBeam,
};
use atomarray::greens::{
    collective_rate_2d, collective_shift_2d, phase_matched_shift, DipoleOrientation, LatticeParams,
    DEFAULT_CUTOFF,
};
use atomarray::io::{
    read_pulse_csv, spectrum_sidecar, write_memory_run_csv, write_pulse_csv, write_spectrum_csv,
    write_trajectory_csv,
};
use atomarray::memory::{
    max_step, optimal_storage_control_with, store_hold_retrieve, ControlOptions, PulseShape,
};
use atomarray::model1d::InterfaceParams;
use atomarray::scattering::{
    build_matrix, drive_vector, eigenmodes, multilayer_effective_solve, reflectivity_spectrum,
    Direction, LayerStack, ScanGrid, SpectrumOptions, SpectrumScan,
};
use atomarray::C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{MemoryModel, RunConfig};
use crate::error::CliError;
use crate::output::{num, OutputDir};

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub pool: &'a rayon::ThreadPool,
    pub out: OutputDir,
}

fn lattice_at(cfg: &RunConfig, a: f64) -> Result<LatticeParams, CliError> {
    let e = DipoleOrientation::parse(&cfg.lattice.orientation)
        .map_err(|e| CliError::Config(format!("lattice.orientation: {e}")))?;
    LatticeParams::new(a, cfg.lattice.a_z, e).map_err(CliError::core("lattice"))
}

fn lattice(cfg: &RunConfig) -> Result<LatticeParams, CliError> {
    lattice_at(cfg, cfg.lattice.a)
}

fn beam(cfg: &RunConfig, n_side: usize) -> Result<GaussianBeam, CliError> {
    GaussianBeam::new(cfg.beam.waist_for(cfg.lattice.a, n_side)).map_err(CliError::core("beam"))
}

fn disorder(cfg: &RunConfig, sigma: f64) -> DisorderSpec {
    let d = &cfg.disorder;
    DisorderSpec {
        sigma,
        distribution: if d.distribution == "uniform" {
            DisorderDistribution::Uniform
        } else {
            DisorderDistribution::Normal
        },
        include_z: d.include_z,
        realizations: d.realizations,
        base_seed: d.base_seed,
    }
}

/// Ordered array with the configured layers and checkerboard detuning.
fn ordered_array(cfg: &RunConfig, n_side: usize) -> Result<ArrayRealization, CliError> {
    let lat = lattice(cfg)?;
    let arr = if cfg.lattice.layers > 1 {
        build_3d(&lat, n_side, cfg.lattice.layers)
    } else {
        build_2d(&lat, n_side)
    }
    .map_err(CliError::core("building the array"))?;
    if cfg.superlattice.v != 0.0 {
        return checkerboard_detuning(&arr, cfg.superlattice.v)
            .map_err(CliError::core("superlattice"));
    }
    Ok(arr)
}

fn scan_grid(cfg: &RunConfig) -> Result<ScanGrid, CliError> {
    let s = &cfg.scan;
    match (s.min, s.max) {
        (Some(lo), Some(hi)) => ScanGrid::new(lo, hi, s.steps),
        _ => {
            let lat = lattice(cfg)?;
            let g0 = collective_rate_2d(&lat);
            let d0 = collective_shift_2d(&lat, DEFAULT_CUTOFF)
                .map_err(CliError::core("collective shift"))?
                .shift;
            ScanGrid::around(d0, s.half_width * g0, s.steps)
        }
    }
    .map_err(CliError::core("scan grid"))
}

fn spectrum_options(cfg: &RunConfig) -> SpectrumOptions {
    SpectrumOptions {
        distance: cfg.beam.plane_z,
        ..Default::default()
    }
}

/// `(slope, R²)` of a least-squares line.
fn line_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| {
        (
            sxy / sxx,
            if syy > 0.0 {
                sxy * sxy / (sxx * syy)
            } else {
                1.0
            },
        )
    })
}

fn fitted(
    scan: &SpectrumScan,
    what: &str,
) -> Result<atomarray::scattering::ResonanceFit, CliError> {
    scan.fit.ok_or_else(|| {
        CliError::core(what.to_string())(atomarray::Error::FitFailure(
            "no resonance extracted".into(),
        ))
    })
}

pub fn spectrum(ctx: &mut Context) -> Result<String, CliError> {
    let cfg = ctx.cfg;
    let sigma = cfg.disorder.sigma[0];
    let arr = apply_disorder(
        &ordered_array(cfg, cfg.lattice.n_side)?,
        &disorder(cfg, sigma),
        0,
    )
    .map_err(CliError::core("disorder"))?;
    let scan = reflectivity_spectrum(
        &arr,
        &beam(cfg, cfg.lattice.n_side)?,
        &scan_grid(cfg)?,
        &spectrum_options(cfg),
    )
    .map_err(CliError::core("spectrum"))?;
    ctx.out
        .with_csv("spectrum.csv", |w, prov| write_spectrum_csv(w, &scan, prov))?;
    if cfg.output.json() {
        let text = spectrum_sidecar(&scan, &ctx.out.provenance)
            .map_err(CliError::core("spectrum sidecar"))?;
        ctx.out.write_text("spectrum.json", &text)?;
    }
    let fit = fitted(&scan, "spectrum")?;
    Ok(format!(
        "r0 = {:.6}, centre = {:.6}, 1/C = {:.4e}",
        fit.r0, fit.center, fit.inverse_cooperativity
    ))
}

#[derive(Serialize)]
struct DisorderRow {
    sigma: f64,
    mean_inverse_cooperativity: f64,
    standard_error: f64,
    realizations: usize,
}

#[derive(Serialize)]
struct DisorderSummary {
    rows: Vec<DisorderRow>,
    /// Log-log slope of mean 1/C against σ over the nonzero σ.
    loglog_slope: Option<f64>,
}

pub fn disorder_sweep(ctx: &mut Context) -> Result<String, CliError> {
    let cfg = ctx.cfg;
    let n = cfg.lattice.n_side;
    let base = ordered_array(cfg, n)?;
    let beam = beam(cfg, n)?;
    let grid = scan_grid(cfg)?;
    let opts = spectrum_options(cfg);
    // an ordered array needs one realization only
    let tasks: Vec<(f64, u64)> = cfg
        .disorder
        .sigma
        .iter()
        .flat_map(|&s| {
            let count = if s == 0.0 {
                1
            } else {
                cfg.disorder.realizations
            };
            (0..count as u64).map(move |r| (s, r))
        })
        .collect();
    let results: Vec<Result<_, CliError>> = ctx.pool.install(|| {
        tasks
            .par_iter()
            .map(|&(sigma, r)| {
                let what = format!("sigma = {sigma}, realization {r}");
                let arr = apply_disorder(&base, &disorder(cfg, sigma), r)
                    .map_err(CliError::core(what.clone()))?;
                let scan = reflectivity_spectrum(&arr, &beam, &grid, &opts)
                    .map_err(CliError::core(what.clone()))?;
                fitted(&scan, &what)
            })
            .collect()
    });
    let mut per_run = Vec::with_capacity(tasks.len());
    let mut fits = Vec::with_capacity(tasks.len());
    for (&(sigma, r), res) in tasks.iter().zip(results) {
        let fit = res?;
        per_run.push(vec![
            num(sigma),
            r.to_string(),
            num(fit.r0),
            num(fit.center),
            num(fit.linewidth()),
            num(fit.inverse_cooperativity),
        ]);
        fits.push((sigma, fit.inverse_cooperativity));
    }
    let mut rows = Vec::new();
    for &sigma in &cfg.disorder.sigma {
        let vals: Vec<f64> = fits
            .iter()
            .filter(|(s, _)| *s == sigma)
            .map(|(_, v)| *v)
            .collect();
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let se = if vals.len() > 1 {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
        } else {
            0.0
        };
        rows.push(DisorderRow {
            sigma,
            mean_inverse_cooperativity: mean,
            standard_error: se,
            realizations: vals.len(),
        });
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.sigma > 0.0)
        .map(|r| (r.sigma.ln(), r.mean_inverse_cooperativity.ln()))
        .unzip();
    let summary = DisorderSummary {
        loglog_slope: line_fit(&lx, &ly).map(|f| f.0),
        rows,
    };
    ctx.out.csv(
        "disorder_realizations.csv",
        &["sigma", "realization", "r0", "center", "linewidth", "inv_C"],
        &per_run,
    )?;
    let table: Vec<Vec<String>> = summary
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.sigma),
                num(r.mean_inverse_cooperativity),
                num(r.standard_error),
                r.realizations.to_string(),
            ]
        })
        .collect();
    ctx.out.csv(
        "disorder_summary.csv",
        &["sigma", "mean_inv_C", "stderr", "realizations"],
        &table,
    )?;
    ctx.out.json("disorder_sweep.json", &summary)?;
    Ok(match summary.loglog_slope {
        Some(s) => format!(
            "{} runs; log-log slope of 1/C vs sigma = {s:.3}",
            tasks.len()
        ),
        None => format!(
            "{} runs; 1/C = {:.4e}",
            tasks.len(),
            summary.rows[0].mean_inverse_cooperativity
        ),
    })
}

#[derive(Serialize)]
struct SizeSummary {
    /// Slope of ln(1/C) against the atom number.
    slope_per_atom: Option<f64>,
    r_squared: Option<f64>,
}

pub fn size_sweep(ctx: &mut Context) -> Result<String, CliError> {
    let cfg = ctx.cfg;
    let grid = scan_grid(cfg)?;
    let opts = spectrum_options(cfg);
    let sizes = cfg.sweep.n_side.clone();
    let results: Vec<Result<_, CliError>> = ctx.pool.install(|| {
        sizes
            .par_iter()
            .map(|&n| {
                let what = format!("n_side = {n}");
                let arr = ordered_array(cfg, n)?;
                let beam = beam(cfg, n)?;
                let scan = reflectivity_spectrum(&arr, &beam, &grid, &opts)
                    .map_err(CliError::core(what.clone()))?;
                Ok((beam, fitted(&scan, &what)?))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&n, res) in sizes.iter().zip(results) {
        let (beam, fit) = res?;
        let side = n as f64 * cfg.lattice.a;
        let eta = mode_overlap_eta(&beam, side);
        let predicted = (1.0 - eta) / eta;
        let atoms = n * n * cfg.lattice.layers;
        rows.push(vec![
            n.to_string(),
            atoms.to_string(),
            num(beam.waist),
            num(eta),
            num(fit.inverse_cooperativity),
            num(predicted),
            num(fit.inverse_cooperativity / predicted),
        ]);
        xs.push(atoms as f64);
        ys.push(fit.inverse_cooperativity.ln());
    }
    let fit = line_fit(&xs, &ys);
    let summary = SizeSummary {
        slope_per_atom: fit.map(|f| f.0),
        r_squared: fit.map(|f| f.1),
    };
    ctx.out.csv(
        "size_sweep.csv",
        &[
            "n_side",
            "atoms",
            "waist",
            "eta",
            "inv_C",
            "predicted_inv_C",
            "ratio",
        ],
        &rows,
    )?;
    ctx.out.json("size_sweep.json", &summary)?;
    Ok(format!(
        "{} sizes; ln(1/C) slope per atom {:?}",
        rows.len(),
        summary.slope_per_atom
    ))
}

#[derive(Serialize)]
struct LayerPeak {
    a: f64,
    shift: f64,
    /// `Δ′`; absent where the evanescent correction is undefined (`a ≥ λ`).
    delta_prime: Option<f64>,
    peak_detuning: f64,
    /// `(peak − Δ₀ − Δ′)/Γ₀`.
    offset_in_rates: Option<f64>,
    cooperativity: f64,
}

pub fn layers_map(ctx: &mut Context) -> Result<String, CliError> {
    let cfg = ctx.cfg;
    let y = &cfg.layers;
    let nz = cfg.lattice.layers;
    let lattice_constants = cfg.layer_lattice_constants();
    let results: Vec<Result<_, CliError>> = ctx.pool.install(|| {
        lattice_constants
            .par_iter()
            .map(|&a| {
                let what = format!("a = {a}");
                let lat = lattice_at(cfg, a)?;
                let g0 = collective_rate_2d(&lat);
                let stack = LayerStack::new(lat, nz, y.eta, y.gamma_loss * g0)
                    .map_err(CliError::core(what.clone()))?;
                let dp = if a < 1.0 {
                    Some(phase_matched_shift(&lat, nz).map_err(CliError::core(what.clone()))?)
                } else {
                    None
                };
                let centre = stack.shift + dp.unwrap_or(0.0);
                let grid = ScanGrid::around(centre, y.half_width * nz as f64 * g0, y.steps)
                    .map_err(CliError::core(what.clone()))?;
                let scan = multilayer_effective_solve(&stack, &grid)
                    .map_err(CliError::core(what.clone()))?;
                let fit = fitted(&scan, &what)?;
                let peak = LayerPeak {
                    a,
                    shift: stack.shift,
                    delta_prime: dp,
                    peak_detuning: fit.center,
                    offset_in_rates: dp.map(|d| (fit.center - stack.shift - d) / g0),
                    cooperativity: fit.cooperativity,
                };
                Ok((scan, peak))
            })
            .collect()
    });
    let mut map_rows = Vec::new();
    let mut peaks = Vec::new();
    for res in results {
        let (scan, peak) = res?;
        let overlay = peak.delta_prime.map(|d| peak.shift + d).unwrap_or(f64::NAN);
        for p in &scan.points {
            map_rows.push(vec![
                num(peak.a),
                num(p.delta_p),
                num(p.reflectivity),
                num(overlay),
            ]);
        }
        peaks.push(peak);
    }
    let peak_rows: Vec<Vec<String>> = peaks
        .iter()
        .map(|p| {
            vec![
                num(p.a),
                num(p.peak_detuning),
                num(p.shift),
                num(p.delta_prime.unwrap_or(f64::NAN)),
                num(p.offset_in_rates.unwrap_or(f64::NAN)),
                num(p.cooperativity),
            ]
        })
        .collect();
    ctx.out.csv(
        "layers_map.csv",
        &["a", "delta_p", "R", "shift_plus_delta_prime"],
        &map_rows,
    )?;
    ctx.out.csv(
        "layers_peaks.csv",
        &[
            "a",
            "peak_detuning",
            "shift",
            "delta_prime",
            "offset_over_rate",
            "C",
        ],
        &peak_rows,
    )?;
    #[derive(Serialize)]
    struct Body<'a> {
        layers: usize,
        a_z: f64,
        peaks: &'a [LayerPeak],
    }
    ctx.out.json(
        "layers_map.json",
        &Body {
            layers: nz,
            a_z: cfg.lattice.a_z,
            peaks: &peaks,
        },
    )?;
    let worst = peaks
        .iter()
        .filter_map(|p| p.offset_in_rates)
        .map(f64::abs)
        .fold(0.0, f64::max);
    Ok(format!(
        "{} lattice constants; largest |peak − Δ₀ − Δ′| = {worst:.4} Γ₀",
        peaks.len()
    ))
}

fn read_pulse(path: &str) -> Result<PulseShape, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Config(format!("cannot open pulse file {path}: {e}")))?;
    read_pulse_csv(file).map_err(|e| CliError::Config(format!("pulse file {path}: {e}")))
}

fn same_grid(a: &PulseShape, b: &PulseShape) -> Result<(), CliError> {
    let tol = 1e-9 * a.dt.abs().max(1e-300);
    if a.len() != b.len() || (a.t0 - b.t0).abs() > tol || (a.dt - b.dt).abs() > tol {
        return Err(CliError::Config(
            "control pulse must share the input pulse's time grid".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct InterfaceMemorySummary {
    cooperativity: f64,
    bound: f64,
    storage_efficiency: f64,
    retrieval_efficiency: f64,
    total_efficiency: f64,
    dt: f64,
    clamped_samples: Option<usize>,
    singular_start: Option<bool>,
}

pub fn memory(ctx: &mut Context) -> Result<String, CliError> {
    match ctx.cfg.memory.model {
        MemoryModel::Interface => interface_memory(ctx),
        MemoryModel::Array => array_memory(ctx),
    }
}

fn interface_memory(ctx: &mut Context) -> Result<String, CliError> {
    let m = &ctx.cfg.memory;
    let p = InterfaceParams::from_cooperativity(m.cooperativity, 1.0)
        .map_err(CliError::core("interface"))?;
    let h0 = match &m.pulse_file {
        Some(path) => read_pulse(path)?,
        None => {
            let kappa = m.rate * p.total_width();
            PulseShape::rising_exponential(kappa, m.area / kappa, m.samples)
                .map_err(CliError::core("input pulse"))?
        }
    };
    let (control, clamped, singular) = match &m.control_file {
        Some(path) => {
            let c = read_pulse(path)?;
            same_grid(&h0, &c)?;
            (c, None, None)
        }
        None => {
            let opts = ControlOptions {
                clamp_factor: m.clamp,
                ..Default::default()
            };
            let c = optimal_storage_control_with(&h0, &p, 0.0, opts)
                .map_err(CliError::core("optimal control"))?;
            (c.control, Some(c.clamped_samples), Some(c.singular_start))
        }
    };
    let dt = if m.dt > 0.0 {
        m.dt
    } else {
        max_step(&p, &control)
    };
    let cycle = store_hold_retrieve(&h0, &control, &p, 0.0, m.hold, dt)
        .map_err(CliError::core("memory cycle"))?;
    ctx.out
        .with_csv("memory_input.csv", |w, prov| write_pulse_csv(w, &h0, prov))?;
    ctx.out.with_csv("memory_control.csv", |w, prov| {
        write_pulse_csv(w, &control, prov)
    })?;
    ctx.out.with_csv("memory_storage.csv", |w, prov| {
        write_memory_run_csv(w, &cycle.storage, prov)
    })?;
    if let Some(retrieval) = &cycle.retrieval {
        ctx.out.with_csv("memory_retrieval.csv", |w, prov| {
            write_memory_run_csv(w, retrieval, prov)
        })?;
    }
    let c = m.cooperativity;
    let summary = InterfaceMemorySummary {
        cooperativity: c,
        bound: c / (1.0 + c),
        storage_efficiency: cycle.storage_efficiency,
        retrieval_efficiency: cycle.retrieval_efficiency,
        total_efficiency: cycle.total_efficiency,
        dt,
        clamped_samples: clamped,
        singular_start: singular,
    };
    ctx.out.json("memory.json", &summary)?;
    Ok(format!(
        "e_s = {:.6}, e_r = {:.6} (bound C/(1+C) = {:.6})",
        summary.storage_efficiency, summary.retrieval_efficiency, summary.bound
    ))
}

fn array_memory(ctx: &mut Context) -> Result<String, CliError> {
    let cfg = ctx.cfg;
    let m = &cfg.memory;
    let n = cfg.lattice.n_side;
    let arr = build_2d(&lattice(cfg)?, n).map_err(CliError::core("building the array"))?;
    let beam = beam(cfg, n)?;
    let mapping =
        mapping_params_subradiant(&arr, &beam).map_err(CliError::core("subradiant mapping"))?;
    let (h0, control) = match &m.pulse_file {
        Some(path) => {
            let h0 = read_pulse(path)?;
            let control = match &m.control_file {
                Some(c) => read_pulse(c)?,
                None => {
                    let opts = ControlOptions {
                        clamp_factor: m.clamp,
                        ..Default::default()
                    };
                    optimal_storage_control_with(
                        &h0,
                        &mapping.interface,
                        mapping.operating_detuning,
                        opts,
                    )
                    .map_err(CliError::core("optimal control"))?
                    .control
                }
            };
            (h0, control)
        }
        None => optimal_subradiant_pulses(&mapping, m.rate, m.area, m.samples)
            .map_err(CliError::core("pulses"))?,
    };
    same_grid(&h0, &control)?;
    let dynamics = ArrayDynamics::new(&arr, &beam, Illumination::Symmetric, true)
        .map_err(CliError::core("array dynamics"))?;
    let opts = MemoryRunOptions {
        dt: if m.dt > 0.0 { m.dt } else { 0.1 },
        hold: m.hold,
        tail: 20.0,
        run: RunOptions::default(),
    };
    let run = run_memory_protocol(&dynamics, &mapping, &h0, &control, &opts)
        .map_err(CliError::core("memory run"))?;
    ctx.out
        .with_csv("memory_input.csv", |w, prov| write_pulse_csv(w, &h0, prov))?;
    ctx.out.with_csv("memory_control.csv", |w, prov| {
        write_pulse_csv(w, &control, prov)
    })?;
    ctx.out.with_csv("memory_trajectory.csv", |w, prov| {
        write_trajectory_csv(w, &run.trajectory, prov)
    })?;
    #[derive(Serialize)]
    struct Body<'a> {
        mapping: &'a atomarray::dynamics::SubradiantMapping,
        storage_efficiency: f64,
        storage_excitation: f64,
        hold_retention: f64,
        hold_decay_rate: Option<f64>,
        retrieval_efficiency: f64,
        total_efficiency: f64,
        phase_times: [f64; 4],
        dt: f64,
    }
    ctx.out.json(
        "memory.json",
        &Body {
            mapping: &run.mapping,
            storage_efficiency: run.storage_efficiency,
            storage_excitation: run.storage_excitation,
            hold_retention: run.hold_retention,
            hold_decay_rate: run.hold_decay_rate,
            retrieval_efficiency: run.retrieval_efficiency,
            total_efficiency: run.total_efficiency,
            phase_times: run.phase_times,
            dt: opts.dt,
        },
    )?;
    Ok(format!(
        "e_s = {:.4} (η = {:.4}), e_r = {:.4}",
        run.storage_efficiency, mapping.eta, run.retrieval_efficiency
    ))
}

/// Checkerboard signs under the lowest standing-wave envelope
/// `sin(π(i+1)/(n+1))·sin(π(j+1)/(n+1))`: the finite-array form of the
/// zone-corner Bloch wave. Layers repeat the in-plane pattern.
fn zone_corner_pattern(arr: &ArrayRealization) -> Option<Vec<C64>> {
    let idx = arr.site_index.as_ref()?;
    let signs = arr.checkerboard_signs().ok()?;
    let lo = |k: usize| idx.iter().map(|s| s[k]).min().unwrap_or(0);
    let hi = |k: usize| idx.iter().map(|s| s[k]).max().unwrap_or(0);
    let envelope = |k: usize, v: i32| {
        let span = (hi(k) - lo(k) + 2) as f64;
        (std::f64::consts::PI * (v - lo(k) + 1) as f64 / span).sin()
    };
    Some(
        idx.iter()
            .zip(&signs)
            .map(|(s, sign)| C64::new(sign * envelope(0, s[0]) * envelope(1, s[1]), 0.0))
            .collect(),
    )
}

#[derive(Serialize)]
struct ModeRow {
    index: usize,
    eigenvalue_re: f64,
    eigenvalue_im: f64,
    decay_rate: f64,
    target_overlap: f64,
    /// Overlap with [`zone_corner_pattern`]; absent without lattice indices.
    m_overlap: Option<f64>,
}

pub fn eigs(ctx: &mut Context) -> Result<String, CliError> {
    let cfg = ctx.cfg;
    let n = cfg.lattice.n_side;
    let arr = apply_disorder(
        &ordered_array(cfg, n)?,
        &disorder(cfg, cfg.disorder.sigma[0]),
        0,
    )
    .map_err(CliError::core("disorder"))?;
    let beam = beam(cfg, n)?;
    let set = eigenmodes(&build_matrix(&arr, 0.0).map_err(CliError::core("interaction matrix"))?)
        .map_err(CliError::core("eigenmodes"))?;
    let target = drive_vector(&arr, &beam, Direction::Forward);
    let checker = zone_corner_pattern(&arr);
    let mut rows: Vec<ModeRow> = (0..set.len())
        .map(|l| ModeRow {
            index: l,
            eigenvalue_re: set.values[l].re,
            eigenvalue_im: set.values[l].im,
            decay_rate: set.decay_rate(l),
            target_overlap: set.overlap(l, &target),
            m_overlap: checker.as_ref().map(|c| set.overlap(l, c)),
        })
        .collect();
    rows.sort_by(|a, b| {
        a.decay_rate
            .total_cmp(&b.decay_rate)
            .then(a.index.cmp(&b.index))
    });
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                num(r.eigenvalue_re),
                num(r.eigenvalue_im),
                num(r.decay_rate),
                num(r.target_overlap),
                num(r.m_overlap.unwrap_or(f64::NAN)),
            ]
        })
        .collect();
    ctx.out.csv(
        "eigs.csv",
        &[
            "index",
            "re_lambda",
            "im_lambda",
            "decay_rate",
            "target_overlap",
            "m_overlap",
        ],
        &table,
    )?;
    let best_m = rows
        .iter()
        .filter(|r| r.m_overlap.is_some())
        .max_by(|a, b| a.m_overlap.unwrap().total_cmp(&b.m_overlap.unwrap()));
    let best_target = rows
        .iter()
        .max_by(|a, b| a.target_overlap.total_cmp(&b.target_overlap));
    #[derive(Serialize)]
    struct Body<'a> {
        modes: usize,
        exceptional: usize,
        best_target_mode: Option<&'a ModeRow>,
        best_m_mode: Option<&'a ModeRow>,
    }
    ctx.out.json(
        "eigs.json",
        &Body {
            modes: rows.len(),
            exceptional: set.exceptional.len(),
            best_target_mode: best_target,
            best_m_mode: best_m,
        },
    )?;
    Ok(match best_m {
        Some(r) => format!(
            "{} modes; best checkerboard mode decays at {:.3e} with overlap {:.3}",
            rows.len(),
            r.decay_rate,
            r.m_overlap.unwrap()
        ),
        None => format!("{} modes", rows.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_slope() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let (s, r2) = line_fit(&xs, &ys).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        assert!(line_fit(&[1.0], &[1.0]).is_none());
    }
}
