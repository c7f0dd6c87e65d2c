use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Intervals {
    All,
    Dyadic,
}

/// Flags shared by every command; each command reads the ones it needs.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Opts {
    /// Input CSV with a header row.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Estimator, segmentation method, quantile mode or simulated signal.
    #[arg(long, value_name = "NAME")]
    pub method: Option<String>,
    /// Noise level, or `estimate` for the MAD of finest-scale differences.
    #[arg(long, value_name = "VAL|estimate")]
    pub sigma: Option<String>,
    /// Error level of the threshold, in (0, 1).
    #[arg(long, value_name = "VAL")]
    pub alpha: Option<f64>,
    /// Threshold override; excludes --alpha.
    #[arg(long, value_name = "VAL")]
    pub q: Option<f64>,
    #[arg(long, value_name = "INT", default_value_t = 0)]
    pub seed: u64,
    /// Interval system for interval-based constraints.
    #[arg(long, value_enum, value_name = "all|dyadic")]
    pub intervals: Option<Intervals>,
    /// Monte Carlo replications (instances per suite for `verify`).
    #[arg(long, value_name = "INT")]
    pub reps: Option<usize>,
    /// Output format; `json` by default for `quantile` and `verify`, else `csv`.
    #[arg(long, value_enum, value_name = "csv|json")]
    pub format: Option<Format>,
    /// Signal length for `simulate` and `quantile` without input.
    #[arg(long, value_name = "INT")]
    pub n: Option<usize>,
    /// Penalty weight for `potts` and `group-lasso`.
    #[arg(long, value_name = "VAL")]
    pub gamma: Option<f64>,
    /// Suite for `verify`, or `all`.
    #[arg(long, value_name = "NAME", default_value = "all")]
    pub suite: String,
    /// Dense design matrix as CSV (header row, one row per observation).
    #[arg(long, value_name = "PATH")]
    pub design: Option<PathBuf>,
    /// Probe family for `quantile`: haar, intervals (scale-penalised) or nemirovskii.
    #[arg(long, value_name = "NAME", default_value = "haar")]
    pub probes: String,
    /// Block length for block methods; defaults to log2(n).
    #[arg(long, value_name = "INT")]
    pub block_len: Option<usize>,
    /// Iteration budget of the primal-dual solver.
    #[arg(long, value_name = "INT", default_value_t = 200_000)]
    pub max_iter: usize,
}

impl Opts {
    pub fn validate(&self) -> Result<(), Failure> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Failure::usage(format!(
                    "--alpha must lie in (0, 1), got {a}"
                )));
            }
        }
        if self.alpha.is_some() && self.q.is_some() {
            return Err(Failure::usage("--q and --alpha are mutually exclusive"));
        }
        if let Some(q) = self.q {
            if !q.is_finite() {
                return Err(Failure::usage(format!("--q must be finite, got {q}")));
            }
        }
        if self.reps == Some(0) {
            return Err(Failure::usage("--reps must be positive"));
        }
        if self.block_len == Some(0) {
            return Err(Failure::usage("--block-len must be positive"));
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Failure::usage(format!(
                    "--gamma must be nonnegative, got {g}"
                )));
            }
        }
        Ok(())
    }

    pub fn alpha_or_default(&self) -> f64 {
        self.alpha.unwrap_or(0.1)
    }

    /// `None` for "estimate from data".
    pub fn sigma_value(&self) -> Result<Option<f64>, Failure> {
        match self.sigma.as_deref() {
            None | Some("estimate") => Ok(None),
            Some(s) => match s.parse::<f64>() {
                Ok(v) if v >= 0.0 && v.is_finite() => Ok(Some(v)),
                _ => Err(Failure::usage(format!(
                    "--sigma expects a nonnegative number or `estimate`, got {s:?}"
                ))),
            },
        }
    }
}
