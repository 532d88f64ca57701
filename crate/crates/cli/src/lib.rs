//! Command-line front end for the shadowfreq library.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::Config;
pub use error::{CliError, EXIT_INTERNAL, EXIT_IO, EXIT_OK, EXIT_VALIDATION};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "SHADOWFREQ_CONFIG";

#[derive(Debug, Parser)]
#[command(
    name = "shadowfreq",
    version,
    about = "Frequency and chromaticity tools for shadow removal"
)]
pub struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override a config key, e.g. `--set loss.frequency=0`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Output directory for images and reports (defaults to `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Print the JSON report on stdout instead of a summary.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Haar subbands of an image.
    Decompose {
        input: PathBuf,
        /// Center-crop odd dimensions to even ones.
        #[arg(long)]
        crop: bool,
    },
    /// Log-magnitude DFT of each channel, optionally with the focal weights against a reference.
    Spectrum {
        input: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Shadow-free chromaticity maps.
    Chroma {
        input: PathBuf,
        /// Shadow-free counterpart, used to locate the non-shadow region for compensation.
        #[arg(long)]
        free: Option<PathBuf>,
    },
    /// Soft shadow mask of a pair.
    Mask { shadow: PathBuf, free: PathBuf },
    /// All losses for a pair.
    Loss {
        shadow: PathBuf,
        free: PathBuf,
        /// Candidate restoration scored against `free`; the shadow image when omitted.
        #[arg(long)]
        result: Option<PathBuf>,
    },
    /// Per-region metrics over a manifest or dataset directory.
    Eval {
        dataset: PathBuf,
        /// Also write per-image rows as CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Forward pass of the wavelet attention downsampling module with invariant checks.
    WadmDemo {
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        input: Option<PathBuf>,
        #[arg(long)]
        synthetic: bool,
        /// JSON parameter file; seeded parameters when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 8)]
        c_out: usize,
        /// Side of the synthetic input.
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Channels of the synthetic input.
        #[arg(long, default_value_t = 3)]
        channels: usize,
    },
    /// Seeded synthetic corpus in AISTD and SRD layouts.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
    },
}

/// The result of one command: a JSON report, a human summary and the exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub json: String,
    pub summary: String,
    pub code: i32,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    commands::dispatch(&cli.command, &cfg, &out)
}
