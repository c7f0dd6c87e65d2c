use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mindkit::MindError;
use serde_json::json;

mod commands;
mod config;
mod io;

use config::Opts;

#[derive(Debug, Parser)]
#[command(
    name = "mindkit",
    version,
    about = "Multiscale constrained estimation, threshold calibration and change-point segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a test signal and a noisy observation of it.
    Simulate(Opts),
    /// Estimate a signal from an observation.
    Estimate(Opts),
    /// Piecewise-constant segmentation of an observation.
    Segment(Opts),
    /// Threshold of a multiscale statistic.
    Quantile(Opts),
    /// Run the built-in consistency suites.
    Verify(Opts),
}

/// A failed command: exit code plus a machine-readable kind.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "usage",
            message: message.into(),
        }
    }

    pub fn runtime(kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            kind,
            message: message.into(),
        }
    }
}

impl From<MindError> for Failure {
    fn from(e: MindError) -> Self {
        let kind = match e {
            MindError::Infeasible { .. } | MindError::NoFeasibleSegmentation { .. } => "infeasible",
            MindError::NotConverged { .. } => "not_converged",
            MindError::Dimension { .. } => "dimension",
            MindError::InvalidInput(_) => "invalid_input",
            MindError::Unsupported(_) => "unsupported",
        };
        Failure::runtime(kind, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate(o) => o.validate().and_then(|_| commands::simulate(o)),
        Command::Estimate(o) => o.validate().and_then(|_| commands::estimate(o)),
        Command::Segment(o) => o.validate().and_then(|_| commands::segment(o)),
        Command::Quantile(o) => o.validate().and_then(|_| commands::quantile(o)),
        Command::Verify(o) => o.validate().and_then(|_| commands::verify(o)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
            if f.code == 2 {
                eprintln!(
                    "usage: mindkit <simulate|estimate|segment|quantile|verify> [OPTIONS]; see `mindkit <command> --help`"
                );
            }
            ExitCode::from(f.code)
        }
    }
}
