//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "model": {
//!     "m": 4,
//!     "covariance": { "type": "white", "variance": 1.0 },
//!     "snr_db": 20.0,
//!     "w_o": { "kind": "unit_ones" },
//!     "field": "real"
//!   },
//!   "rules": [
//!     { "name": "KJ", "params": { "rule": "kj", "alpha": 0.995, "gamma": 0.001 },
//!       "mu_initial": 0.01 }
//!   ],
//!   "run": { "iters": 20000, "trials": 500, "base_seed": 1, "tail_fraction": 0.1 },
//!   "theory": { "engine": "oracle", "mu2_mode": "squared-mean" },
//!   "outputs": { "directory": "out", "formats": ["csv", "json"] }
//! }
//! ```
//!
//! Exactly one of `snr_db` and `sigma_v2` must be given. Rule entries may
//! override `iters`, `trials`, `record_stride`, `steady_state_mode`,
//! `tolerance_db` and `tail_fraction`.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::model::{unit_ones, CovarianceSpec, SystemModel};
use crate::rules::{RuleParams, StepBounds};
use crate::scalar::ValueField;
use crate::theory::{Engine, Mu2Mode, PaperForm, SteadyStateMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub rules: Vec<RuleEntry>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub theory: TheoryConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub m: usize,
    #[serde(default)]
    pub covariance: CovarianceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_v2: Option<f64>,
    #[serde(default)]
    pub w_o: UnknownSystem,
    #[serde(default)]
    pub field: ValueField,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UnknownSystem {
    /// `(1, …, 1)/√M`.
    #[default]
    UnitOnes,
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleEntry {
    /// Label used in files and reports; defaults to the rule's short name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub params: RuleParams,
    #[serde(default = "default_mu_initial")]
    pub mu_initial: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_state_mode: Option<SteadyStateMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_fraction: Option<f64>,
}

impl RuleEntry {
    pub fn new(params: RuleParams, mu_initial: f64) -> Self {
        Self {
            name: None,
            params,
            mu_initial,
            iters: None,
            trials: None,
            record_stride: None,
            steady_state_mode: None,
            tolerance_db: None,
            tail_fraction: None,
        }
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.params.short_name().to_string())
    }
}

fn default_mu_initial() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub iters: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub tail_fraction: f64,
    pub record_stride: usize,
    /// Iterations excluded from the transient deviation.
    pub transient_skip: usize,
    pub tolerance_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp: Option<StepBounds>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iters: 20_000,
            trials: 500,
            base_seed: 1,
            tail_fraction: 0.1,
            record_stride: 1,
            transient_skip: 50,
            tolerance_db: 0.3,
            clamp: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub engine: Engine,
    pub mu2_mode: Mu2Mode,
    pub paper_form: PaperForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        match (self.model.snr_db, self.model.sigma_v2) {
            (Some(_), Some(_)) => return bad("give either model.snr_db or model.sigma_v2, not both".into()),
            (None, None) => return bad("one of model.snr_db or model.sigma_v2 is required".into()),
            _ => {}
        }
        if self.model.m == 0 {
            return bad("model.m must be at least 1".into());
        }
        if let UnknownSystem::Explicit { values } = &self.model.w_o {
            if values.len() != self.model.m {
                return bad(format!(
                    "model.w_o has {} entries but model.m is {}",
                    values.len(),
                    self.model.m
                ));
            }
        }
        if self.rules.is_empty() {
            return bad("at least one rule is required".into());
        }
        if self.run.trials == 0 {
            return bad("run.trials must be at least 1".into());
        }
        if self.run.iters == 0 {
            return bad("run.iters must be at least 1".into());
        }
        if !(self.run.tail_fraction > 0.0 && self.run.tail_fraction <= 0.5) {
            return bad(format!(
                "run.tail_fraction must lie in (0, 0.5], got {}",
                self.run.tail_fraction
            ));
        }
        if !(self.run.tolerance_db >= 0.0) {
            return bad("run.tolerance_db must be nonnegative".into());
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.rules {
            let label = r.label();
            r.params.init(r.mu_initial)?;
            if !seen.insert(label.clone()) {
                return bad(format!("duplicate rule name {label:?}"));
            }
            if r.trials == Some(0) || r.iters == Some(0) {
                return bad(format!("rule {label}: trials and iters must be at least 1"));
            }
            if r.tail_fraction.is_some_and(|f| !(f > 0.0 && f <= 0.5)) {
                return bad(format!("rule {label}: tail_fraction must lie in (0, 0.5]"));
            }
            if r.tolerance_db.is_some_and(|t| !(t >= 0.0)) {
                return bad(format!("rule {label}: tolerance_db must be nonnegative"));
            }
        }
        self.build_model()?;
        Ok(())
    }

    pub fn w_o(&self) -> DVector<f64> {
        match &self.model.w_o {
            UnknownSystem::UnitOnes => unit_ones(self.model.m),
            UnknownSystem::Explicit { values } => DVector::from_vec(values.clone()),
        }
    }

    pub fn build_model(&self) -> Result<SystemModel, HarnessError> {
        let w_o = self.w_o();
        let cov = self.model.covariance.clone();
        let model = match (self.model.snr_db, self.model.sigma_v2) {
            (Some(snr), _) => SystemModel::with_snr(w_o, snr, cov, self.model.field)?,
            (None, Some(s)) => SystemModel::new(w_o, s, cov, self.model.field)?,
            (None, None) => {
                return Err(HarnessError::Config(
                    "one of model.snr_db or model.sigma_v2 is required".into(),
                ))
            }
        };
        Ok(model)
    }

    /// Replaces the global and every per-rule iteration count. Per-rule
    /// recording strides are dropped too, since they were sized for the
    /// old horizon.
    pub fn override_iters(&mut self, iters: usize) {
        self.run.iters = iters;
        self.rules.iter_mut().for_each(|r| {
            r.iters = None;
            r.record_stride = None;
        });
    }

    /// Replaces the global and every per-rule trial count.
    pub fn override_trials(&mut self, trials: usize) {
        self.run.trials = trials;
        self.rules.iter_mut().for_each(|r| r.trials = None);
    }
}
