//! `hazard-lfd` command-line driver.
//!
//! Exit codes: 0 ok, 1 other failure, 2 too few demonstrations, 3 malformed
//! trajectory CSV, 4 unsupported hazard overlap, 5 model/road traffic
//! mismatch, 6 infeasible driver profile, 7 cross-traffic comparison,
//! 8 malformed plot input.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hazard_lfd::analysis::AnalysisError;
use hazard_lfd::constraints::ConstraintError;
use hazard_lfd::demogen::DemogenError;
use hazard_lfd::io::IoError;
use hazard_lfd::keyframe::KeyframeError;

#[derive(Debug, Parser)]
#[command(name = "hazard-lfd", version, about = "Learn hazard-avoidance behaviour from demonstrations")]
pub struct Cli {
    /// TOML file overriding any of the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for synthetic populations.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the primary result to stdout; diagnostics go to stderr.
    #[arg(long, global = true)]
    pub stdout: bool,
    /// Calibration table replacing the built-in onset measurements.
    #[arg(long, global = true, env = "HAZARD_LFD_CALIBRATION")]
    pub calibration: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a scenario model from a directory of trajectory CSVs.
    Train {
        demo_dir: PathBuf,
        /// Scenario label such as `large-near-uni`; read from the
        /// directory's manifest.json when omitted.
        #[arg(long)]
        label: Option<String>,
        /// `x,y,length,width` or just `y` for the default footprint.
        #[arg(long, allow_hyphen_values = true)]
        hazard: Option<String>,
    },
    /// Build a constraint envelope for hazards ahead of the ego vehicle.
    Generate {
        /// One model per hazard, in the same order.
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        /// `x,y,length,width` or just `y`, in travel order.
        #[arg(long = "hazard", required = true, allow_hyphen_values = true)]
        hazards: Vec<String>,
        /// `x,y,heading,speed` of the ego vehicle.
        #[arg(long, default_value = "0,0,0,10", allow_hyphen_values = true)]
        ego: String,
        /// `uni` or `bi`; taken from the first model when omitted.
        #[arg(long)]
        traffic: Option<String>,
    },
    /// Write a synthetic population of demonstrations.
    Simulate {
        label: String,
        #[arg(long, default_value_t = 24)]
        n: usize,
        /// Share of safety-oriented drivers.
        #[arg(long, default_value_t = 0.5)]
        style_mix: f64,
        /// Calibrate to one table row (`small`, `large`, `near`, `far`)
        /// instead of the label's size/closeness average.
        #[arg(long)]
        factor: Option<String>,
    },
    /// Paired significance tests between populations.
    Analyze {
        #[arg(num_args = 2.., required = true)]
        dirs: Vec<PathBuf>,
        /// `i,j` indices into the directory list; all pairs when omitted.
        #[arg(long = "pair")]
        pairs: Vec<String>,
    },
    /// Render an envelope or model document as SVG.
    Plot {
        input: PathBuf,
    },
}

/// Failure classes with stable exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    InsufficientDemos(String),
    #[error("malformed plot input: {0}")]
    PlotInput(String),
    #[error("{0}")]
    Usage(String),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::InsufficientDemos(_) => 2,
                CliError::PlotInput(_) => 8,
                CliError::Usage(_) => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<KeyframeError>() {
            if matches!(e, KeyframeError::InsufficientDemos { .. } | KeyframeError::TooFewDemos(_)) {
                return 2;
            }
        }
        if let Some(e) = cause.downcast_ref::<IoError>() {
            if !matches!(e, IoError::Io { .. } | IoError::Document(_)) {
                return 3;
            }
        }
        if let Some(e) = cause.downcast_ref::<ConstraintError>() {
            match e {
                ConstraintError::UnsupportedOverlap(..) => return 4,
                ConstraintError::ModelRoadMismatch { .. } => return 5,
                _ => {}
            }
        }
        if let Some(DemogenError::InfeasibleProfile(_)) = cause.downcast_ref::<DemogenError>() {
            return 6;
        }
        if let Some(AnalysisError::CrossTrafficComparison(..)) = cause.downcast_ref::<AnalysisError>() {
            return 7;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
