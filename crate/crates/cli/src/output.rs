//! Result files. Data files open with the config hash and seeds; the run
//! record is the only file carrying wall-clock timings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use atomarray::io::Provenance;
use serde::Serialize;

use crate::config::OutputSection;
use crate::error::CliError;

pub struct OutputDir {
    dir: PathBuf,
    pub provenance: Provenance,
    formats: OutputSection,
    written: Vec<String>,
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
pub struct RunRecord<'a> {
    pub command: &'a str,
    pub config_hash: &'a str,
    pub version: &'a str,
    pub seeds: &'a [u64],
    pub workers: usize,
    pub elapsed_seconds: f64,
    pub files: &'a [String],
}

/// CSV cell for a float; `NaN` marks values that do not exist.
pub fn num(x: f64) -> String {
    atomarray::io::format_value(x)
}

impl OutputDir {
    pub fn create(
        dir: &Path,
        provenance: Provenance,
        formats: OutputSection,
    ) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            provenance,
            formats,
            written: Vec::new(),
        })
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        })?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    fn io_err(&self, name: &str, source: std::io::Error) -> CliError {
        CliError::Output {
            path: self.dir.join(name).display().to_string(),
            source,
        }
    }

    /// Hands a buffered writer to one of the library's CSV writers.
    pub fn with_csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>, &Provenance) -> atomarray::Result<()>,
    ) -> Result<(), CliError> {
        if !self.formats.csv() {
            return Ok(());
        }
        let mut w = self.open(name)?;
        let prov = self.provenance.clone();
        write(&mut w, &prov).map_err(CliError::core(format!("writing {name}")))?;
        w.flush().map_err(|e| self.io_err(name, e))
    }

    /// CSV with a provenance header, a column header and string rows.
    pub fn csv(
        &mut self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        self.with_csv(name, |w, prov| {
            prov.write_header(w)?;
            let mut out = csv::Writer::from_writer(w);
            out.write_record(columns)?;
            for row in rows {
                out.write_record(row)?;
            }
            out.flush()?;
            Ok(())
        })
    }

    /// Pretty JSON with a `provenance` block merged into `body`.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), CliError> {
        if !self.formats.json() {
            return Ok(());
        }
        let text = serde_json::to_string_pretty(&Sidecar {
            provenance: &self.provenance,
            body,
        })
        .map_err(|e| CliError::core(format!("serializing {name}"))(e.into()))?;
        self.write_text(name, &text)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        w.write_all(text.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|e| self.io_err(name, e))
    }

    pub fn record(
        &mut self,
        command: &str,
        workers: usize,
        elapsed_seconds: f64,
    ) -> Result<(), CliError> {
        let files = self.written.clone();
        let rec = RunRecord {
            command,
            config_hash: &self.provenance.config_hash,
            version: &self.provenance.version,
            seeds: &self.provenance.seeds,
            workers,
            elapsed_seconds,
            files: &files,
        };
        let text = serde_json::to_string_pretty(&rec).expect("run record serializes");
        self.write_text("run_record.json", &text)
    }
}
