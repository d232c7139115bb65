//! CSV and JSON serialization of pulses, spectra and trajectories.
//!
//! Every file starts with `#`-prefixed provenance lines so a result can be
//! traced to the configuration and seeds that produced it. Readers skip them.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::memory::{MemoryRun, PulseShape};
use crate::scattering::SpectrumScan;
use crate::{Error, Result, C64};

/// Where a result came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seeds: Vec<u64>) -> Self {
        Self {
            config_hash: config_hash.into(),
            seeds,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Writes the `#` comment lines that open every data file.
    pub fn write_header<W: Write>(&self, w: &mut W) -> Result<()> {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        writeln!(w, "# config_hash={}", self.config_hash)?;
        writeln!(w, "# seeds={}", seeds.join(","))?;
        writeln!(w, "# version={}", self.version)?;
        Ok(())
    }
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(true).from_writer(w)
}

/// Shortest round-trip form of `x`, in exponent notation outside `[1e-4, 1e16)`.
pub fn format_value(x: f64) -> String {
    if x != 0.0 && !(1e-4..1e16).contains(&x.abs()) && x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn row(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format_value(*v)).collect()
}

/// Pulse samples as `t,re,im`.
pub fn write_pulse_csv<W: Write>(mut w: W, pulse: &PulseShape, prov: &Provenance) -> Result<()> {
    prov.write_header(&mut w)?;
    let mut out = csv_writer(w);
    out.write_record(["t", "re", "im"])?;
    for (j, v) in pulse.values.iter().enumerate() {
        out.write_record(row(&[pulse.time(j), v.re, v.im]))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a `t,re,im` pulse on a uniform grid.
pub fn read_pulse_csv<R: Read>(r: R) -> Result<PulseShape> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("pulse file lacks a '{name}' column")))
    };
    let (ct, cre, cim) = (col("t")?, col("re")?, col("im")?);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("bad number in pulse row {}", line + 1)))
        };
        times.push(get(ct)?);
        values.push(C64::new(get(cre)?, get(cim)?));
    }
    if times.len() < 2 {
        return Err(Error::Parse("pulse file needs at least two samples".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    for (j, t) in times.iter().enumerate() {
        if (t - (times[0] + j as f64 * dt)).abs() > 1e-6 * dt.abs().max(1e-300) {
            return Err(Error::Parse(format!(
                "pulse grid is not uniform at row {}",
                j + 1
            )));
        }
    }
    PulseShape::new(times[0], dt, values)
}

/// Spectrum as `delta_p,R,T,L`.
pub fn write_spectrum_csv<W: Write>(
    mut w: W,
    scan: &SpectrumScan,
    prov: &Provenance,
) -> Result<()> {
    prov.write_header(&mut w)?;
    let mut out = csv_writer(w);
    out.write_record(["delta_p", "R", "T", "L"])?;
    for p in &scan.points {
        out.write_record(row(&[p.delta_p, p.reflectivity, p.transmission, p.loss]))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SpectrumSidecar<'a, F: Serialize> {
    provenance: &'a Provenance,
    seed: u64,
    realization_index: u64,
    points: usize,
    fit: F,
}

/// JSON sidecar with the fit results and provenance of a spectrum.
pub fn spectrum_sidecar(scan: &SpectrumScan, prov: &Provenance) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SpectrumSidecar {
        provenance: prov,
        seed: scan.seed,
        realization_index: scan.realization_index,
        points: scan.points.len(),
        fit: &scan.fit,
    })?)
}

/// Array trajectory as `t,re_p0,im_p0,re_pm,im_pm,excitation,emitted`.
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    traj: &Trajectory,
    prov: &Provenance,
) -> Result<()> {
    prov.write_header(&mut w)?;
    let mut out = csv_writer(w);
    out.write_record([
        "t",
        "re_p0",
        "im_p0",
        "re_pm",
        "im_pm",
        "excitation",
        "emitted",
    ])?;
    for j in 0..traj.len() {
        let (b, d) = (traj.bright[j], traj.dark[j]);
        out.write_record(row(&[
            traj.times[j],
            b.re,
            b.im,
            d.re,
            d.im,
            traj.excitation[j],
            traj.emitted[j],
        ]))?;
    }
    out.flush()?;
    Ok(())
}

/// Single-mode memory record as `t,re_p,im_p,re_s,im_s,re_out,im_out`.
pub fn write_memory_run_csv<W: Write>(mut w: W, run: &MemoryRun, prov: &Provenance) -> Result<()> {
    prov.write_header(&mut w)?;
    let mut out = csv_writer(w);
    out.write_record(["t", "re_p", "im_p", "re_s", "im_s", "re_out", "im_out"])?;
    for j in 0..run.times.len() {
        let (p, s, o) = (run.dipole[j], run.spin[j], run.output[j]);
        out.write_record(row(&[run.times[j], p.re, p.im, s.re, s.im, o.re, o.im]))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_roundtrip_is_exact() {
        let p = PulseShape::from_fn(0.5, 3.0, 26, |t| C64::new(t.sin(), -0.1 * t)).unwrap();
        let mut buf = Vec::new();
        write_pulse_csv(&mut buf, &p, &Provenance::new("abc", vec![7, 8])).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# config_hash=abc\n# seeds=7,8\n"));
        let back = read_pulse_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values, p.values);
        assert!((back.dt - p.dt).abs() < 1e-15);
    }

    #[test]
    fn values_round_trip() {
        for x in [
            0.0,
            1.5e-33,
            -2.5e-5,
            1e-4,
            0.25,
            123456.789,
            f64::MAX,
            f64::MIN_POSITIVE,
        ] {
            let s = format_value(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            assert!(s.len() < 30, "{s}");
        }
        assert_eq!(format_value(f64::NAN), "NaN");
    }

    #[test]
    fn nonuniform_pulse_rejected() {
        let text = "t,re,im\n0,1,0\n1,1,0\n3,1,0\n";
        assert!(matches!(
            read_pulse_csv(text.as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            read_pulse_csv("x,y\n1,2\n".as_bytes()),
            Err(Error::Parse(_))
        ));
    }
}
