//! Command-line runner for array scattering and memory simulations.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use atomarray::io::Provenance;
use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutputDir;

#[derive(Parser)]
#[command(
    name = "atomarray",
    version,
    about = "Atomic-array light-matter interface simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config; merged over the preset when both are given.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Built-in config: fig4a, fig4b, fig8a or fig8b.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Worker threads for independent runs; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Overrides disorder.base_seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Reflection spectrum and resonance fit of one realization.
    Spectrum,
    /// Mean 1/C over disorder realizations for each position spread.
    DisorderSweep,
    /// 1/C of ordered arrays over a range of sizes.
    SizeSweep,
    /// Reflectivity of layer stacks against lattice constant and detuning.
    LayersMap,
    /// Store and retrieve a pulse in the interface model or the array.
    Memory,
    /// Eigenmode table of the interaction matrix.
    Eigs,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::DisorderSweep => "disorder-sweep",
            Command::SizeSweep => "size-sweep",
            Command::LayersMap => "layers-map",
            Command::Memory => "memory",
            Command::Eigs => "eigs",
        }
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let mut cfg = RunConfig::load(cli.preset.as_deref(), cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.disorder.base_seed = seed;
    }
    let workers = match cli.workers {
        Some(0) => return Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    atomarray::use_sequential_kernels();

    let provenance = Provenance::new(cfg.hash(), vec![cfg.disorder.base_seed]);
    let out = OutputDir::create(&cli.out, provenance, cfg.output.clone())?;
    let mut ctx = Context {
        cfg: &cfg,
        pool: &pool,
        out,
    };
    let start = Instant::now();
    let summary = match cli.command {
        Command::Spectrum => commands::spectrum(&mut ctx),
        Command::DisorderSweep => commands::disorder_sweep(&mut ctx),
        Command::SizeSweep => commands::size_sweep(&mut ctx),
        Command::LayersMap => commands::layers_map(&mut ctx),
        Command::Memory => commands::memory(&mut ctx),
        Command::Eigs => commands::eigs(&mut ctx),
    }?;
    ctx.out
        .record(cli.command.name(), workers, start.elapsed().as_secs_f64())?;
    Ok(format!(
        "{}: {summary}\nconfig hash {}; wrote {} files to {}",
        cli.command.name(),
        cfg.hash(),
        ctx.out.files().len(),
        cli.out.display()
    ))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
