//! Variable step-size LMS adaptive filters together with their transient and
//! steady-state mean-square theory, and a Monte Carlo harness that checks one
//! against the other.
//!
//! * [`model`]: unknown system, input statistics, sample streams.
//! * [`rules`]: step-size update rules.
//! * [`filter`]: the adaptive filter and single-trial runs.
//! * [`theory`]: moment recursions, learning curves, steady state.
//! * [`harness`]: ensembles, configuration, reports and presets.

pub mod filter;
pub mod harness;
pub mod model;
pub mod rules;
pub mod scalar;
pub mod theory;

pub use filter::{run_trial, run_trial_bounded, FilterError, FilterState, TrialTrajectory};
pub use model::{
    build_covariance, generate_stream, snr_to_noise_variance, spectral_decompose, CovarianceSpec,
    ModelError, Sample, SpectralModel, SystemModel,
};
pub use rules::{RuleError, RuleParams, RuleState, StepBounds};
pub use scalar::{FieldScalar, ValueField};
