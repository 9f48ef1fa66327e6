//! Config-driven experiment runs and their output files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, OutputFormat};
use super::curve::{save_curve, CurveSource, LearningCurve};
use super::ensemble::{run_ensemble, EnsembleOptions, EnsembleResult};
use super::report::{compare_report, write_steady_csv, ComparisonReport, ReportSettings, SteadyStateRow};
use super::{to_db, HarnessError};
use crate::model::SystemModel;
use crate::rules::RuleParams;
use crate::theory::{
    closed_form_mu, f_matrix, mean_stability_bound, ms_stability_check, steady_state_msd_emse,
    steady_state_mu, transient_curve, SteadyStateMode, TransientOptions,
};

/// One rule entry with every run setting resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleResolved {
    pub label: String,
    pub params: RuleParams,
    pub mu_initial: f64,
    pub iters: usize,
    pub trials: usize,
    pub record_stride: usize,
    pub steady_state_mode: SteadyStateMode,
    pub tolerance_db: f64,
    pub tail_fraction: f64,
}

impl ExperimentConfig {
    pub fn resolved_rules(&self) -> Vec<RuleResolved> {
        self.rules
            .iter()
            .map(|r| RuleResolved {
                label: r.label(),
                params: r.params,
                mu_initial: r.mu_initial,
                iters: r.iters.unwrap_or(self.run.iters),
                trials: r.trials.unwrap_or(self.run.trials),
                record_stride: r.record_stride.unwrap_or(self.run.record_stride).max(1),
                steady_state_mode: r
                    .steady_state_mode
                    .unwrap_or_else(|| SteadyStateMode::default_for(&r.params)),
                tolerance_db: r.tolerance_db.unwrap_or(self.run.tolerance_db),
                tail_fraction: r.tail_fraction.unwrap_or(self.run.tail_fraction),
            })
            .collect()
    }

    pub fn report_settings(&self) -> ReportSettings {
        let rules = self.resolved_rules();
        ReportSettings {
            tail_fraction: self.run.tail_fraction,
            transient_skip: self.run.transient_skip,
            tolerance_db: self.run.tolerance_db,
            rule_tolerance_db: rules
                .iter()
                .map(|r| (r.label.clone(), r.tolerance_db))
                .collect::<BTreeMap<_, _>>(),
            rule_tail_fraction: rules
                .iter()
                .map(|r| (r.label.clone(), r.tail_fraction))
                .collect::<BTreeMap<_, _>>(),
        }
    }

    fn transient_options(&self, stride: usize) -> TransientOptions {
        TransientOptions {
            engine: self.theory.engine,
            mu2_mode: self.theory.mu2_mode,
            paper_form: self.theory.paper_form,
            stride,
        }
    }
}

/// Steady-state prediction of every rule.
pub fn run_steady_state(config: &ExperimentConfig) -> Result<Vec<SteadyStateRow>, HarnessError> {
    let model = config.build_model()?;
    config
        .resolved_rules()
        .iter()
        .map(|r| steady_row(&model, r))
        .collect()
}

fn steady_row(model: &SystemModel, r: &RuleResolved) -> Result<SteadyStateRow, HarnessError> {
    let lambda = &model.spectral().lambda;
    let sigma_v2 = model.sigma_v2();
    let mu_ss = steady_state_mu(&r.params, sigma_v2, Some(r.steady_state_mode))?;
    let ss = steady_state_msd_emse(mu_ss, lambda, sigma_v2)?;
    let closed = closed_form_mu(&r.params, sigma_v2);
    let closed_db = steady_state_msd_emse(closed, lambda, sigma_v2)
        .ok()
        .map(|c| to_db(c.msd_ss));
    Ok(SteadyStateRow {
        rule: r.label.clone(),
        mode: r.steady_state_mode,
        mu_ss,
        msd_db: to_db(ss.msd_ss),
        emse_db: to_db(ss.emse_ss),
        radius: ss.radius,
        closed_form_mu: closed,
        closed_form_msd_db: closed_db,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub rule: String,
    pub mu_ss: f64,
    /// `2/β_max`.
    pub mean_bound: f64,
    pub mean_stable: bool,
    /// Spectral radius of `F_ss`.
    pub radius: f64,
    pub ms_stable: bool,
}

impl StabilityRow {
    pub fn stable(&self) -> bool {
        self.mean_stable && self.ms_stable
    }
}

/// Mean bound and `F_ss` spectral radius for every rule.
pub fn run_stability(config: &ExperimentConfig) -> Result<Vec<StabilityRow>, HarnessError> {
    let model = config.build_model()?;
    let spectral = model.spectral();
    let bound = mean_stability_bound(spectral)?;
    config
        .resolved_rules()
        .iter()
        .map(|r| {
            let mu_ss = steady_state_mu(&r.params, model.sigma_v2(), Some(r.steady_state_mode))?;
            let (ms_stable, radius) = ms_stability_check(&f_matrix(mu_ss, mu_ss * mu_ss, &spectral.lambda));
            Ok(StabilityRow {
                rule: r.label.clone(),
                mu_ss,
                mean_bound: bound,
                mean_stable: mu_ss > 0.0 && mu_ss < bound,
                radius,
                ms_stable,
            })
        })
        .collect()
}

/// Theoretical learning curves and steady-state rows.
pub fn run_theory(
    config: &ExperimentConfig,
) -> Result<(Vec<LearningCurve>, Vec<SteadyStateRow>), HarnessError> {
    let model = config.build_model()?;
    let mut curves = Vec::new();
    let mut rows = Vec::new();
    for r in config.resolved_rules() {
        curves.push(theory_curve(config, &model, &r)?);
        rows.push(steady_row(&model, &r)?);
    }
    Ok((curves, rows))
}

fn theory_curve(
    config: &ExperimentConfig,
    model: &SystemModel,
    r: &RuleResolved,
) -> Result<LearningCurve, HarnessError> {
    log::info!("{}: theory, {} iterations", r.label, r.iters);
    let c = transient_curve(
        model.spectral(),
        model.w_o(),
        &r.params,
        r.mu_initial,
        model.sigma_v2(),
        r.iters,
        config.transient_options(r.record_stride),
    )?;
    Ok(LearningCurve::from_linear(
        r.label.clone(),
        CurveSource::Theory,
        c.iter,
        &c.msd,
        &c.emse,
        c.mu_mean,
    ))
}

/// Monte Carlo ensemble of every rule.
pub fn run_simulation(config: &ExperimentConfig) -> Result<Vec<EnsembleResult>, HarnessError> {
    let model = config.build_model()?;
    config
        .resolved_rules()
        .iter()
        .map(|r| simulate(config, &model, r))
        .collect()
}

fn simulate(
    config: &ExperimentConfig,
    model: &SystemModel,
    r: &RuleResolved,
) -> Result<EnsembleResult, HarnessError> {
    log::info!("{}: {} trials of {} iterations", r.label, r.trials, r.iters);
    let opts = EnsembleOptions {
        trials: r.trials,
        base_seed: config.run.base_seed,
        record_stride: r.record_stride,
        bounds: config.run.clamp,
    };
    run_ensemble(model, &r.params, r.mu_initial, r.iters, &opts, &r.label)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutcome {
    pub theory: Vec<LearningCurve>,
    pub steady: Vec<SteadyStateRow>,
    pub simulation: Vec<EnsembleResult>,
    pub report: ComparisonReport,
}

/// Theory, simulation and the comparison report.
pub fn run_compare(config: &ExperimentConfig) -> Result<CompareOutcome, HarnessError> {
    let (theory, steady) = run_theory(config)?;
    let simulation = run_simulation(config)?;
    let sim_curves: Vec<LearningCurve> = simulation.iter().map(|e| e.curve.clone()).collect();
    let report = compare_report(&steady, &theory, &sim_curves, &config.report_settings())?;
    Ok(CompareOutcome {
        theory,
        steady,
        simulation,
        report,
    })
}

/// File-system-safe form of a rule label.
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| HarnessError::Write {
            path: path.to_path_buf(),
            source,
        })
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `<rule>_<source>.csv` for each curve; returns the paths.
pub fn write_curves(dir: &Path, curves: &[LearningCurve]) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(dir)?;
    curves
        .iter()
        .map(|c| {
            let path = dir.join(format!("{}_{}.csv", file_stem(&c.rule), c.source.as_str()));
            save_curve(c, &path)?;
            Ok(path)
        })
        .collect()
}

/// Writes `steadystate.csv` / `steadystate.json`.
pub fn write_steady(
    dir: &Path,
    rows: &[SteadyStateRow],
    formats: &[OutputFormat],
) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(dir)?;
    let mut out = Vec::new();
    if formats.contains(&OutputFormat::Csv) {
        let path = dir.join("steadystate.csv");
        write_steady_csv(rows, create(&path)?)?;
        out.push(path);
    }
    if formats.contains(&OutputFormat::Json) {
        let path = dir.join("steadystate.json");
        write_text(&path, &serde_json::to_string_pretty(rows)?)?;
        out.push(path);
    }
    Ok(out)
}

/// Writes `summary.csv` / `report.json`.
pub fn write_report(
    dir: &Path,
    report: &ComparisonReport,
    formats: &[OutputFormat],
) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(dir)?;
    let mut out = Vec::new();
    if formats.contains(&OutputFormat::Csv) {
        let path = dir.join("summary.csv");
        report.write_csv(create(&path)?)?;
        out.push(path);
    }
    if formats.contains(&OutputFormat::Json) {
        let path = dir.join("report.json");
        write_text(&path, &report.to_json())?;
        out.push(path);
    }
    Ok(out)
}

/// Writes `stability.csv`.
pub fn write_stability(dir: &Path, rows: &[StabilityRow]) -> Result<PathBuf, HarnessError> {
    ensure_dir(dir)?;
    let path = dir.join("stability.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["rule", "mu_ss", "mean_bound", "mean_stable", "radius", "ms_stable", "status"])?;
    for r in rows {
        w.write_record([
            r.rule.clone(),
            r.mu_ss.to_string(),
            r.mean_bound.to_string(),
            r.mean_stable.to_string(),
            r.radius.to_string(),
            r.ms_stable.to_string(),
            if r.stable() { "STABLE" } else { "UNSTABLE" }.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(path)
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}
