//! `lorentz`: command-line driver for the periodic Lorentz gas toolkit.

mod commands;
mod config;
mod output;
mod sweep;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use config::RunConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Errors with a fixed exit status.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Validation(String),
    /// Corrupted or inconsistent sweep manifest.
    #[error("{0}")]
    Corrupt(String),
    #[error("horizon violation: {0}")]
    Horizon(String),
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_DYNAMICS: u8 = 3;
const EXIT_HORIZON: u8 = 4;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "lorentz",
    version,
    about = "Periodic Lorentz gas with small forces"
)]
struct Cli {
    /// JSON config file; missing fields take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (same as --override seed=N).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (same as --override workers=N).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Artifact directory; defaults to the config's output_dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Set a config field by dotted path, e.g. force.epsilon=0.02. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Probe the table for free paths longer than the horizon bound.
    CheckHorizon,
    /// Run a trajectory and report basic collision averages.
    Simulate,
    /// Marginal density of the collision angle φ.
    PhiDensity,
    /// Marginal density of the boundary coordinate r.
    RDensity,
    /// Occupation density of position on a grid.
    SpatialDensity,
    /// Time-averaged velocity per grid cell.
    VelocityField,
    /// Density of the velocity direction θ.
    ThetaDensity,
    /// Average current J.
    Current,
    /// Kawasaki identity for response.observables at force.epsilon.
    Kawasaki,
    /// Fit of ν_ε(f) over response.eps_grid against the series slope.
    LinearResponse,
    /// J₁/ε over response.eps_grid.
    Conductivity,
    /// Run sweep.command once per field of response.eps_grid.
    Sweep {
        /// Stop after this many cells; `resume` continues.
        #[arg(long)]
        max_cells: Option<usize>,
    },
    /// Continue an interrupted sweep.
    Resume {
        dir: PathBuf,
        #[arg(long)]
        max_cells: Option<usize>,
    },
    /// Print every config field with its type, default and meaning.
    ConfigSchema,
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::CheckHorizon => "check-horizon",
            Cmd::Simulate => "simulate",
            Cmd::PhiDensity => "phi-density",
            Cmd::RDensity => "r-density",
            Cmd::SpatialDensity => "spatial-density",
            Cmd::VelocityField => "velocity-field",
            Cmd::ThetaDensity => "theta-density",
            Cmd::Current => "current",
            Cmd::Kawasaki => "kawasaki",
            Cmd::LinearResponse => "linear-response",
            Cmd::Conductivity => "conductivity",
            Cmd::Sweep { .. } => "sweep",
            Cmd::Resume { .. } => "resume",
            Cmd::ConfigSchema => "config-schema",
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Validation(_) => EXIT_VALIDATION,
                Failure::Corrupt(_) => EXIT_DYNAMICS,
                Failure::Horizon(_) => EXIT_HORIZON,
            };
        }
        if let Some(err) = cause.downcast_ref::<lorentz_core::Error>() {
            return match err.root() {
                lorentz_core::Error::InvalidInput(_) => EXIT_VALIDATION,
                lorentz_core::Error::HorizonViolation { .. } => EXIT_HORIZON,
                _ => EXIT_DYNAMICS,
            };
        }
    }
    1
}

fn load_config(cli: &Cli, base: Option<&RunConfig>) -> anyhow::Result<RunConfig> {
    let mut overrides = cli.overrides.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(w) = cli.workers {
        overrides.push(format!("workers={w}"));
    }
    let r = match (cli.config.as_deref(), base) {
        (None, Some(b)) => config::with_overrides(b, &overrides),
        (path, _) => RunConfig::load(path, &overrides),
    };
    r.map_err(|e| Failure::Validation(format!("{e:#}")).into())
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Cmd::ConfigSchema => {
            println!("{}", serde_json::to_string_pretty(&config::schema())?);
        }
        Cmd::Resume { dir, max_cells } => {
            let explicit = cli.config.is_some()
                || !cli.overrides.is_empty()
                || cli.seed.is_some()
                || cli.workers.is_some();
            let expected = if explicit {
                let recorded = sweep::Manifest::load(dir)?.config;
                Some(load_config(&cli, Some(&recorded))?)
            } else {
                None
            };
            let ran = sweep::resume(dir, expected.as_ref(), *max_cells)?;
            summarize_sweep(dir, &ran)?;
        }
        Cmd::Sweep { max_cells } => {
            let cfg = load_config(&cli, None)?;
            let dir = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
            let ran = sweep::sweep(&cfg, &dir, *max_cells)?;
            summarize_sweep(&dir, &ran)?;
        }
        cmd => {
            let cfg = load_config(&cli, None)?;
            let dir = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
            report(&commands::run(cmd.name(), &cfg, &dir)?);
        }
    }
    Ok(())
}

fn summarize_sweep(dir: &Path, ran: &[String]) -> anyhow::Result<()> {
    let m = sweep::Manifest::load(dir)?;
    let done = m.cells.iter().filter(|c| c.complete).count();
    for r in ran {
        println!("{}", dir.join(r).display());
    }
    eprintln!("{done} of {} cells complete", m.cells.len());
    Ok(())
}

/// The cause chain joined by `: `, skipping causes that the previous
/// message already spells out.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if out.ends_with(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
    }
    out
}

fn main() -> ExitCode {
    let cmd = Cli::command().after_long_help(config::help_text());
    let matches = match cmd.try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::InvalidSubcommand
                | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
                _ => EXIT_VALIDATION,
            };
            let _ = e.print();
            if code == EXIT_USAGE {
                eprintln!(
                    "\ncommands: {}, sweep, resume, config-schema",
                    commands::COMMANDS.join(", ")
                );
            }
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
