//! `sqz`: command-line front end to the `opa_squeeze` library.
//!
//! Each subcommand reads one JSON run config (`--config`), resolves file
//! paths in it against the config's directory and writes its result to
//! `--out` or stdout. Exit status: 0 on success (a fit that did not converge
//! still succeeds), 2 for invalid input, 3 for physically invalid requests.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

mod cmd;
pub mod error;
mod io;

pub use error::{CliError, CliResult};

pub const TOOL_NAME: &str = "sqz";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "sqz", version, about = "Model, simulate and fit below-threshold OPA squeezed-light sources")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run config for the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the seed of a synth config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Squeezed and anti-squeezed variance at one operating point.
    Model,
    /// Model spectra for a list of pump powers.
    Spectrum,
    /// Fit efficiency, threshold and phase jitter to a pump-sweep dataset.
    Fit,
    /// Dark-noise correction and vacuum normalisation of a trace.
    Correct,
    /// Eigenmode and spectral figures of a cavity layout.
    Cavity,
    /// Seeded synthetic datasets, traces and spectra.
    Synth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let config = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Validation("--config PATH is required".into()))?;
    let mut ctx = io::RunContext::load(config)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Model => cmd::model::run(&ctx, cli.format, out),
        Command::Spectrum => cmd::spectrum::run(&ctx, cli.format, out),
        Command::Fit => cmd::fit::run(&mut ctx, cli.format, out),
        Command::Correct => cmd::correct::run(&mut ctx, cli.format, out),
        Command::Cavity => cmd::cavity::run(&ctx, cli.format, out),
        Command::Synth => cmd::synth::run(&ctx, cli.seed, cli.format, out),
    }
}
