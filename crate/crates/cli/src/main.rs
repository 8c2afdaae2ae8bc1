//! `storedlight`: simulate, extract, sweep, sensitivity, averaging, selftest.
//!
//! Exit codes: 0 success, 1 runtime failure (including low signal), 2 invalid
//! configuration, arguments or file format, 3 I/O failure.

mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use storedlight_core::Error;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io { path: PathBuf, source: std::io::Error },
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Io(_)) | CliError::Io { .. } => 3,
            CliError::Core(Error::LowSignal { .. }) | CliError::Failed(_) => 1,
            CliError::Core(_) | CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "storedlight", version, about = "Stored-light moving-memory simulator and velocimetry toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the configuration-driven commands.
#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// Experiment configuration (TOML). Built-in defaults when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace every noise source with zero.
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeArg {
    Rest,
    Motion,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print or write the default configuration.
    Config {
        /// Write to this file instead of standard output.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Synthesize one shot: reference and probe traces, ground truth, manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Shot index in the seed derivation.
        #[arg(long, default_value_t = 0)]
        shot: u64,
        /// Stage velocity (m/s); the configured stage velocity when omitted.
        #[arg(long, allow_hyphen_values = true)]
        velocity: Option<f64>,
        /// Storage time (s); the configured storage time when omitted.
        #[arg(long)]
        storage_time: Option<f64>,
        /// Also write CSV copies of the traces.
        #[arg(long)]
        csv: bool,
    },
    /// Measure ΔΦ₀, ΔΦ₁ and ΔΦ_P from trace files.
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        probe: PathBuf,
        #[arg(long, value_enum, default_value_t = RegimeArg::Rest)]
        regime: RegimeArg,
        /// A rest-shot reference trace; with `--rest-probe`, also reports ΔΦ_Tr and V.
        #[arg(long, requires = "rest_probe")]
        rest_reference: Option<PathBuf>,
        #[arg(long, requires = "rest_reference")]
        rest_probe: Option<PathBuf>,
        /// Storage time used by the window layout and the velocity inversion (s).
        #[arg(long)]
        storage_time: Option<f64>,
        /// Demodulation window length (s).
        #[arg(long)]
        window_length: Option<f64>,
        /// Skip low-signal shots with a warning instead of failing.
        #[arg(long)]
        lenient: bool,
        /// Write rows here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Emit JSON lines instead of CSV.
        #[arg(long)]
        jsonl: bool,
    },
    /// Velocity sweeps at every storage time; writes fig3a.csv and fig3b.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Sensitivity versus storage time; writes fig3c.csv.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        /// Use this σ_Φ (rad) at every storage time instead of running sweeps.
        #[arg(long)]
        sigma_phi: Option<f64>,
        /// Fit the vibration RMS to `--target` before sweeping.
        #[arg(long, conflicts_with = "sigma_phi")]
        calibrate: bool,
        /// Calibration target σ̂_Φ at the configured storage time (rad).
        #[arg(long, default_value_t = 17.4e-3)]
        target: f64,
        /// Seeds averaged per calibration step.
        #[arg(long, default_value_t = 8)]
        calibration_seeds: u64,
    },
    /// Phase spread versus oscilloscope averages; writes supp_fig2.csv.
    Averaging {
        #[command(flatten)]
        common: Common,
    },
    /// Fast end-to-end consistency checks.
    Selftest,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Config { write } => commands::config(write.as_deref()),
        Command::Simulate {
            common,
            shot,
            velocity,
            storage_time,
            csv,
        } => commands::simulate(&common, shot, velocity, storage_time, csv),
        Command::Extract {
            common,
            reference,
            probe,
            regime,
            rest_reference,
            rest_probe,
            storage_time,
            window_length,
            lenient,
            output,
            jsonl,
        } => commands::extract(commands::ExtractArgs {
            common,
            reference,
            probe,
            regime,
            rest: rest_reference.zip(rest_probe),
            storage_time,
            window_length,
            lenient,
            output,
            jsonl,
        }),
        Command::Sweep { common } => commands::sweep(&common),
        Command::Sensitivity {
            common,
            sigma_phi,
            calibrate,
            target,
            calibration_seeds,
        } => commands::sensitivity_cmd(&common, sigma_phi, calibrate.then_some((target, calibration_seeds))),
        Command::Averaging { common } => commands::averaging(&common),
        Command::Selftest => commands::selftest(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
