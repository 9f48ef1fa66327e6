//! Monte Carlo ensembles, theory-vs-simulation reports, experiment
//! configuration and the built-in reproduction presets.

pub mod config;
pub mod curve;
pub mod ensemble;
pub mod presets;
pub mod report;
pub mod runner;

use std::path::PathBuf;

use thiserror::Error;

use crate::filter::FilterError;
use crate::model::ModelError;
use crate::rules::RuleError;
use crate::theory::TheoryError;

pub use config::{
    ExperimentConfig, ModelConfig, OutputFormat, OutputsConfig, RuleEntry, RunConfig,
    TheoryConfig, UnknownSystem,
};
pub use curve::{
    load_curve, read_curve_csv, save_curve, steady_state_estimate, write_curve_csv, CurveSource,
    LearningCurve,
};
pub use ensemble::{run_ensemble, EnsembleOptions, EnsembleResult};
pub use report::{
    compare_report, transient_max_deviation, ComparisonReport, ComparisonRow, ReportSettings,
    SteadyStateRow,
};
pub use runner::{
    file_stem, run_compare, run_simulation, run_stability, run_steady_state, run_theory,
    write_curves, write_report, write_stability, write_steady, CompareOutcome, RuleResolved,
    StabilityRow,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed curve file: {0}")]
    CurveFormat(String),
    #[error("all {trials} trials of rule {rule} diverged")]
    AllTrialsDiverged { rule: String, trials: usize },
    #[error("steady-state tail has {got} samples, need at least {needed}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("tail fraction must lie in (0, 1], got {0}")]
    InvalidTailFraction(f64),
    #[error("curve diverged (non-finite MSD at iteration {0})")]
    CurveDiverged(usize),
    #[error("theory and simulation cover different rules: {0}")]
    MismatchedRules(String),
}

impl HarnessError {
    /// Divergence, instability or a failed fixed point, as opposed to bad
    /// input.
    pub fn is_numerical(&self) -> bool {
        match self {
            HarnessError::Filter(FilterError::Diverged { .. })
            | HarnessError::AllTrialsDiverged { .. }
            | HarnessError::CurveDiverged(_) => true,
            HarnessError::Theory(e) => matches!(
                e,
                TheoryError::Diverged { .. }
                    | TheoryError::Unstable { .. }
                    | TheoryError::NonConvergent { .. }
            ),
            _ => false,
        }
    }
}

/// `10·log10(x)`.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Inverse of [`to_db`].
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
