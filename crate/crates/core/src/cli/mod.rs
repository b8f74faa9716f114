//! Command-line front end.
//!
//! Exit codes: 0 success, 2 bad arguments or configuration, 3 I/O failure,
//! 4 malformed input file, 5 images on different grids.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::beamformers::Method;

mod commands;
pub mod config;
pub mod format;

pub use commands::{bench, beamform, log_log_slope, metrics, simulate, BenchRow};
pub use config::RunConfig;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const MALFORMED: u8 = 4;
    pub const GRID_MISMATCH: u8 = 5;

    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: Self::USAGE, message: message.into() }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self { code: Self::IO, message: format!("{}: {err}", path.display()) }
    }

    pub fn malformed(path: &std::path::Path, message: impl std::fmt::Display) -> Self {
        Self { code: Self::MALFORMED, message: format!("{}: {message}", path.display()) }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        Self::usage(e.to_string())
    }
}

/// Channel SNR in dB; `None` means noiseless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel(pub Option<f64>);

/// Parses `inf` as "no noise", anything else as a finite dB value.
fn parse_snr(s: &str) -> Result<NoiseLevel, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(NoiseLevel(None)),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(|v| NoiseLevel(Some(v)))
            .ok_or_else(|| format!("`{s}` is neither a finite number nor `inf`")),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("`{t}` is not a valid list entry")))
        .collect()
}

/// Comma-separated depths in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct Depths(pub Vec<f64>);

/// Comma-separated element counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep(pub Vec<usize>);

fn parse_depths(s: &str) -> Result<Depths, String> {
    let v: Vec<f64> = parse_list(s)?;
    if v.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err("depths must be positive millimetres".into());
    }
    Ok(Depths(v))
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let v: Vec<usize> = parse_list(s)?;
    if let Some(m) = v.iter().find(|&&m| m < 8) {
        return Err(format!("element count {m} is below the minimum of 8"));
    }
    Ok(Sweep(v))
}

#[derive(Debug, Parser)]
#[command(name = "pabf", version, about = "Photoacoustic DAS / MV / double-stage MV reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the phantom and write channel data plus a config copy.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Channel SNR in dB, or `inf` for noiseless data.
        #[arg(long = "snr-db", value_parser = parse_snr, allow_hyphen_values = true)]
        snr_db: Option<NoiseLevel>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct a channel file; writes envelope rasters and PGM previews.
    Beamform {
        input: PathBuf,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Defaults to `config.json` next to the input, then to built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// FWHM and SNR per target depth from envelope rasters.
    Metrics {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Target depths in mm; defaults to the phantom targets.
        #[arg(long, value_parser = parse_depths)]
        depths: Option<Depths>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-pixel wall-clock cost of each method across element counts.
    Bench {
        /// Element counts, each at least 8.
        #[arg(long, value_parser = parse_sweep, default_value = "32,64,128")]
        sweep: Sweep,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, snr_db, seed, out } => {
            let path = simulate(config.as_deref(), snr_db.map(|n| n.0), seed, out.as_deref())?;
            println!("wrote {}", path.display());
        }
        Command::Beamform { input, method, config, out } => {
            for (m, flagged, path) in beamform(&input, method, config.as_deref(), out.as_deref())? {
                println!("{m}: {flagged} flagged pixels -> {}", path.display());
            }
        }
        Command::Metrics { inputs, depths, out } => {
            let path = metrics(&inputs, depths.as_ref().map(|d| d.0.as_slice()), out.as_deref())?;
            println!("wrote {}", path.display());
        }
        Command::Bench { sweep, config, reps, out } => {
            for row in bench(&sweep.0, config.as_deref(), reps, out.as_deref())? {
                println!(
                    "M={:<4} {:<4} {:.3e} s/pixel",
                    row.element_count, row.method, row.median_seconds_per_pixel
                );
            }
        }
    }
    Ok(())
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CliError::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
