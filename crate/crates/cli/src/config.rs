//! Run configuration: a TOML document of `section.key = value` entries.
//!
//! Presets are ordinary config files compiled into the binary. A `--config`
//! file is merged key by key over the preset, so a file can override a
//! single value. Unknown keys anywhere are an error.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub const PRESETS: &[(&str, &str)] = &[
    ("fig4a", include_str!("../presets/fig4a.toml")),
    ("fig4b", include_str!("../presets/fig4b.toml")),
    ("fig8a", include_str!("../presets/fig8a.toml")),
    ("fig8b", include_str!("../presets/fig8b.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema: u32,
    pub lattice: LatticeSection,
    pub beam: BeamSection,
    pub disorder: DisorderSection,
    pub scan: ScanSection,
    pub sweep: SweepSection,
    pub layers: LayersSection,
    pub memory: MemorySection,
    pub superlattice: SuperlatticeSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            lattice: Default::default(),
            beam: Default::default(),
            disorder: Default::default(),
            scan: Default::default(),
            sweep: Default::default(),
            layers: Default::default(),
            memory: Default::default(),
            superlattice: Default::default(),
            output: Default::default(),
        }
    }
}

/// Lengths in wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub a: f64,
    pub n_side: usize,
    pub layers: usize,
    pub a_z: f64,
    /// `x`, `y` or `circular`.
    pub orientation: String,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            a: 0.6,
            n_side: 30,
            layers: 1,
            a_z: 1.0,
            orientation: "x".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaistUnit {
    Wavelength,
    /// Lattice constant `a`.
    Spacing,
    /// Array side `L = n·a`.
    Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSection {
    pub waist: f64,
    pub waist_unit: WaistUnit,
    /// Distance of the projection planes from the array.
    pub plane_z: f64,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self {
            waist: 0.25,
            waist_unit: WaistUnit::Side,
            plane_z: 5.0,
        }
    }
}

impl BeamSection {
    pub fn waist_for(&self, a: f64, n_side: usize) -> f64 {
        match self.waist_unit {
            WaistUnit::Wavelength => self.waist,
            WaistUnit::Spacing => self.waist * a,
            WaistUnit::Side => self.waist * a * n_side as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisorderSection {
    /// Position spread in wavelengths; sweeps visit every entry, single runs use the first.
    pub sigma: Vec<f64>,
    pub realizations: usize,
    pub base_seed: u64,
    pub include_z: bool,
    /// `normal` or `uniform`.
    pub distribution: String,
}

impl Default for DisorderSection {
    fn default() -> Self {
        Self {
            sigma: vec![0.0],
            realizations: 1,
            base_seed: 0,
            include_z: true,
            distribution: "normal".into(),
        }
    }
}

/// Probe detunings. Without `min`/`max` the scan is centred on the
/// infinite-lattice shift with a half-width of `half_width` collective rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub half_width: f64,
    pub steps: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            min: None,
            max: None,
            half_width: 5.0,
            steps: 81,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub n_side: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            n_side: vec![20, 22, 24, 26, 28, 30, 32, 34],
        }
    }
}

/// Layer-collective maps over the lattice constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayersSection {
    pub a_min: f64,
    pub a_max: f64,
    pub a_steps: usize,
    /// Beam overlap of one layer.
    pub eta: f64,
    /// Extra loss per atom, in units of the collective rate.
    pub gamma_loss: f64,
    /// Half-width of each scan in units of `layers·Γ₀`.
    pub half_width: f64,
    pub steps: usize,
}

impl Default for LayersSection {
    fn default() -> Self {
        Self {
            a_min: 0.55,
            a_max: 0.95,
            a_steps: 9,
            eta: 1.0,
            gamma_loss: 0.05,
            half_width: 5.0,
            steps: 401,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryModel {
    /// Single-mode interface model with cooperativity `cooperativity`.
    Interface,
    /// Coupled-dipole array storing in its checkerboard mode.
    Array,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemorySection {
    pub model: MemoryModel,
    pub cooperativity: f64,
    /// Input pulse (`t,re,im`); without it a rising exponential is used.
    pub pulse_file: Option<String>,
    /// Control pulse (`t,re,im`) on the input grid; replaces the optimal control.
    pub control_file: Option<String>,
    /// Two-photon bandwidth of the default input, relative to the total linewidth
    /// (interface) or in units of γ (array).
    pub rate: f64,
    /// `∫Γ_S dt` of the default input.
    pub area: f64,
    pub samples: usize,
    /// `|Ω|` ceiling as a multiple of the linewidth.
    pub clamp: f64,
    pub hold: f64,
    /// Integration step; `0` picks the largest stable step (interface) or 0.1 (array).
    pub dt: f64,
}

impl Default for MemorySection {
    fn default() -> Self {
        Self {
            model: MemoryModel::Interface,
            cooperativity: 10.0,
            pulse_file: None,
            control_file: None,
            rate: 0.0025,
            area: 20.0,
            samples: 8001,
            clamp: 1e3,
            hold: 0.0,
            dt: 0.0,
        }
    }
}

/// Static checkerboard detuning `δ_n = V·(−1)^{n_x+n_y}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SuperlatticeSection {
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl OutputSection {
    pub fn csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }

    pub fn json(&self) -> bool {
        self.formats.contains(&Format::Json)
    }
}

pub fn preset_source(name: &str) -> Result<&'static str, CliError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!(
                "unknown preset '{name}' (available: {})",
                names.join(", ")
            ))
        })
}

fn parse_table(source: &str, origin: &str) -> Result<Table, CliError> {
    source
        .parse::<Table>()
        .map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

/// Overlays `top` onto `base`, recursing into sub-tables.
fn merge(base: &mut Table, top: Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

impl RunConfig {
    /// Preset first, then the file on top; both optional.
    pub fn load(preset: Option<&str>, path: Option<&Path>) -> Result<Self, CliError> {
        let mut table = match preset {
            Some(name) => parse_table(preset_source(name)?, &format!("preset {name}"))?,
            None => Table::new(),
        };
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            merge(&mut table, parse_table(&text, &path.display().to_string())?);
        }
        Self::from_table(table)
    }

    #[cfg(test)]
    pub fn from_toml(source: &str) -> Result<Self, CliError> {
        Self::from_table(parse_table(source, "config")?)
    }

    fn from_table(table: Table) -> Result<Self, CliError> {
        let cfg: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema != SCHEMA_VERSION {
            return bad(format!(
                "schema {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            ));
        }
        let l = &self.lattice;
        if !(l.a > 0.0) || !(l.a_z > 0.0) || l.n_side == 0 || l.layers == 0 {
            return bad(
                "lattice.a, lattice.a_z, lattice.n_side and lattice.layers must be positive".into(),
            );
        }
        if !(self.beam.waist > 0.0) || !(self.beam.plane_z > 0.0) {
            return bad("beam.waist and beam.plane_z must be positive".into());
        }
        let d = &self.disorder;
        if d.sigma.is_empty() || d.sigma.iter().any(|s| !(*s >= 0.0)) {
            return bad("disorder.sigma needs at least one non-negative entry".into());
        }
        if d.realizations == 0 {
            return bad("disorder.realizations must be at least 1".into());
        }
        if !matches!(d.distribution.as_str(), "normal" | "uniform") {
            return bad(format!(
                "disorder.distribution must be normal or uniform, got '{}'",
                d.distribution
            ));
        }
        let s = &self.scan;
        if s.min.is_some() != s.max.is_some() {
            return bad("scan.min and scan.max must be given together".into());
        }
        if let (Some(lo), Some(hi)) = (s.min, s.max) {
            if !(hi > lo) {
                return bad("scan.max must exceed scan.min".into());
            }
        }
        if s.steps < 2 || !(s.half_width > 0.0) {
            return bad("scan.steps must be at least 2 and scan.half_width positive".into());
        }
        if self.sweep.n_side.is_empty() || self.sweep.n_side.contains(&0) {
            return bad("sweep.n_side needs positive entries".into());
        }
        let y = &self.layers;
        if y.a_steps == 0 || !(y.a_min > 0.0) || y.a_max < y.a_min || y.steps < 2 {
            return bad("layers needs 0 < a_min <= a_max, a_steps >= 1 and steps >= 2".into());
        }
        if !(y.eta > 0.0 && y.eta <= 1.0) || !(y.gamma_loss >= 0.0) || !(y.half_width > 0.0) {
            return bad("layers.eta must lie in (0, 1], gamma_loss >= 0, half_width > 0".into());
        }
        let m = &self.memory;
        if !(m.cooperativity > 0.0) || !(m.rate > 0.0) || !(m.area > 0.0) || m.samples < 2 {
            return bad(
                "memory.cooperativity, rate and area must be positive and samples >= 2".into(),
            );
        }
        if !(m.clamp > 0.0) || !(m.hold >= 0.0) || !(m.dt >= 0.0) {
            return bad("memory.clamp must be positive; hold and dt non-negative".into());
        }
        if !self.superlattice.v.is_finite() {
            return bad("superlattice.v must be finite".into());
        }
        if self.output.formats.is_empty() {
            return bad("output.formats must name at least one format".into());
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration in canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The layer-map grid of lattice constants.
    pub fn layer_lattice_constants(&self) -> Vec<f64> {
        let y = &self.layers;
        if y.a_steps == 1 {
            return vec![y.a_min];
        }
        (0..y.a_steps)
            .map(|j| y.a_min + (y.a_max - y.a_min) * j as f64 / (y.a_steps - 1) as f64)
            .collect()
    }
}
