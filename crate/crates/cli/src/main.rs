//! `bae`: command-line front end for the back-action evading measurement
//! simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric or I/O failure,
//! 4 acceptance failure.

mod config;
mod output;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use scenarios::Ctx;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Numeric(bae_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<bae_core::Error> for CliError {
    fn from(e: bae_core::Error) -> Self {
        match e {
            bae_core::Error::Config(m) | bae_core::Error::Domain(m) => CliError::Config(m),
            e => CliError::Numeric(e),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bae", version, about = "Back-action evading measurement simulator")]
struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the `seed` key
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV artifacts
    #[arg(long, global = true, default_value = "bae-out")]
    out: PathBuf,
    /// Only print errors
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the multitone envelope that approaches a square wave
    SynthesizeDrive {
        /// Number of added tones N (N + 1 coefficients)
        #[arg(long)]
        tones: Option<usize>,
    },
    /// Harmonics of the intracavity energy for a drive
    EnergySpectrum,
    /// Floquet stability of a modulated oscillator
    Stability,
    /// Critical modulation depth by bisection
    ThresholdScan,
    /// Two-tone against three-tone drive at the same sideband amplitude
    InstabilityDemo,
    /// Reduced Gaussian conditional filter
    Filter,
    /// Stochastic master equation trajectories
    Sme,
    /// Full SME against the reduced filter
    Compare,
    /// Conditional variance for amplitude against phase detection
    PhaseDemo,
    /// Run the acceptance criteria and print a pass/fail table
    Reproduce {
        /// Comma-separated criterion numbers to run (default: all)
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SynthesizeDrive { .. } => "synthesize-drive",
            Command::EnergySpectrum => "energy-spectrum",
            Command::Stability => "stability",
            Command::ThresholdScan => "threshold-scan",
            Command::InstabilityDemo => "instability-demo",
            Command::Filter => "filter",
            Command::Sme => "sme",
            Command::Compare => "compare",
            Command::PhaseDemo => "phase-demo",
            Command::Reproduce { .. } => "reproduce",
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::empty(),
    };
    let seed = match cli.seed {
        Some(s) => {
            let _ = cfg.u64("seed")?;
            s
        }
        None => cfg.u64("seed")?.unwrap_or(0),
    };
    let ctx = Ctx {
        cfg: &cfg,
        out: &cli.out,
        seed,
        quiet: cli.quiet,
        scenario: cli.cmd.name(),
    };
    match &cli.cmd {
        Command::SynthesizeDrive { tones } => scenarios::synthesize_drive(&ctx, *tones)?,
        Command::EnergySpectrum => scenarios::energy_spectrum_cmd(&ctx)?,
        Command::Stability => scenarios::stability(&ctx)?,
        Command::ThresholdScan => scenarios::threshold_scan(&ctx)?,
        Command::InstabilityDemo => scenarios::instability_demo_cmd(&ctx)?,
        Command::Filter => scenarios::filter(&ctx)?,
        Command::Sme => scenarios::sme(&ctx)?,
        Command::Compare => scenarios::compare(&ctx)?,
        Command::PhaseDemo => scenarios::phase_demo(&ctx)?,
        Command::Reproduce { only } => return scenarios::reproduce(&ctx, only),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("bae {}: {e}", cli.cmd.name());
            ExitCode::from(e.code())
        }
    }
}
