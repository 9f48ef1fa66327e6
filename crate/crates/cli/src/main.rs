//! `vsslms`: theory curves, Monte Carlo ensembles and comparison reports for
//! variable step-size LMS filters.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 when a
//! run fails numerically (divergence, instability, no fixed point).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use vsslms::harness::{
    self, presets, run_compare, run_simulation, run_stability, run_steady_state, run_theory,
    write_curves, write_report, write_stability, write_steady, ExperimentConfig, HarnessError,
    LearningCurve,
};
use vsslms::theory::{Engine, Mu2Mode};

const OUT_DIR_ENV: &str = "VSSLMS_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "vsslms", version, about = "Variable step-size LMS theory and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Theoretical learning curves and steady-state table.
    Theory(ConfigArgs),
    /// Monte Carlo learning curves.
    Simulate(ConfigArgs),
    /// Theory, simulation and the comparison report.
    Compare(ConfigArgs),
    /// Steady-state step-size and MSD table only.
    Steadystate(ConfigArgs),
    /// Mean-stability bound and steady-state spectral radius per rule.
    Stability(ConfigArgs),
    /// Run a built-in preset.
    Reproduce {
        #[arg(value_enum)]
        preset: Preset,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// Theory and simulated learning curves of all five rules.
    Fig1,
    /// Steady-state theory against simulation for all five rules.
    Table5,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Experiment configuration (JSON).
    #[arg(value_name = "CONFIG")]
    path: Option<PathBuf>,
    /// Experiment configuration (JSON), alternative to the positional form.
    #[arg(long = "config", value_name = "PATH", conflicts_with = "path")]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Output directory; defaults to the configuration's outputs.directory.
    #[arg(long, value_name = "DIR", env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Trials per rule, replacing every configured count.
    #[arg(long)]
    trials: Option<usize>,
    /// Iterations per rule, replacing every configured count.
    #[arg(long)]
    iters: Option<usize>,
    /// Seed of trial 0; trial t uses seed + t.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    #[arg(long = "mu2-mode", value_enum)]
    mu2_mode: Option<Mu2Arg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EngineArg {
    Oracle,
    Paper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mu2Arg {
    SquaredMean,
    ExactKj,
}

/// Error carrying its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure {
            code: if e.is_numerical() { 2 } else { 1 },
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 1, error }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    let path = args
        .path
        .as_ref()
        .or(args.config.as_ref())
        .ok_or_else(|| anyhow::anyhow!("no configuration given; pass CONFIG or --config <PATH>"))?;
    let config = ExperimentConfig::load(path)
        .with_context(|| format!("configuration {}", path.display()))?;
    apply(config, &args.common)
}

fn apply(mut config: ExperimentConfig, common: &CommonArgs) -> Result<ExperimentConfig, Failure> {
    if let Some(n) = common.iters {
        config.override_iters(n);
    }
    if let Some(t) = common.trials {
        config.override_trials(t);
    }
    if let Some(s) = common.seed {
        config.run.base_seed = s;
    }
    if let Some(e) = common.engine {
        config.theory.engine = match e {
            EngineArg::Oracle => Engine::Oracle,
            EngineArg::Paper => Engine::Paper,
        };
    }
    if let Some(m) = common.mu2_mode {
        config.theory.mu2_mode = match m {
            Mu2Arg::SquaredMean => Mu2Mode::SquaredMean,
            Mu2Arg::ExactKj => Mu2Mode::ExactKj,
        };
    }
    if let Some(dir) = &common.out {
        config.outputs.directory = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Theory(args) => theory(&load(&args)?),
        Command::Simulate(args) => simulate(&load(&args)?),
        Command::Compare(args) => compare(&load(&args)?),
        Command::Steadystate(args) => steadystate(&load(&args)?),
        Command::Stability(args) => stability(&load(&args)?),
        Command::Reproduce { preset, common } => match preset {
            Preset::Fig1 => compare(&apply(presets::fig1(), &common)?),
            Preset::Table5 => table5(&apply(presets::table5(), &common)?),
        },
    }
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn dir(config: &ExperimentConfig) -> &Path {
    &config.outputs.directory
}

fn theory(config: &ExperimentConfig) -> Result<(), Failure> {
    let (curves, rows) = run_theory(config)?;
    print_steady(&rows);
    announce(&write_curves(dir(config), &curves)?);
    announce(&write_steady(dir(config), &rows, &config.outputs.formats)?);
    Ok(())
}

fn simulate(config: &ExperimentConfig) -> Result<(), Failure> {
    let results = run_simulation(config)?;
    println!("{:<8} {:>9} {:>9} {:>12}", "rule", "trials", "diverged", "final_dB");
    for r in &results {
        println!(
            "{:<8} {:>9} {:>9} {:>12.2}",
            r.curve.rule,
            r.completed + r.diverged.len(),
            r.diverged.len(),
            r.curve.terminal_msd_db().unwrap_or(f64::NAN)
        );
    }
    let curves: Vec<LearningCurve> = results.into_iter().map(|r| r.curve).collect();
    announce(&write_curves(dir(config), &curves)?);
    Ok(())
}

fn compare(config: &ExperimentConfig) -> Result<(), Failure> {
    let out = run_compare(config)?;
    print!("{}", out.report.to_table());
    let mut curves = out.theory;
    curves.extend(out.simulation.into_iter().map(|r| r.curve));
    announce(&write_curves(dir(config), &curves)?);
    announce(&write_steady(dir(config), &out.steady, &config.outputs.formats)?);
    announce(&write_report(dir(config), &out.report, &config.outputs.formats)?);
    Ok(())
}

fn table5(config: &ExperimentConfig) -> Result<(), Failure> {
    let steady = run_steady_state(config)?;
    let sims = run_simulation(config)?;
    let curves: Vec<LearningCurve> = sims.into_iter().map(|r| r.curve).collect();
    let report = harness::compare_report(&steady, &[], &curves, &config.report_settings())?;
    print!("{}", report.to_table());
    announce(&write_report(dir(config), &report, &config.outputs.formats)?);
    announce(&write_steady(dir(config), &steady, &config.outputs.formats)?);
    Ok(())
}

fn steadystate(config: &ExperimentConfig) -> Result<(), Failure> {
    let rows = run_steady_state(config)?;
    print_steady(&rows);
    announce(&write_steady(dir(config), &rows, &config.outputs.formats)?);
    Ok(())
}

fn print_steady(rows: &[harness::SteadyStateRow]) {
    println!(
        "{:<8} {:>12} {:>10} {:>10} {:>12} {:>10}",
        "rule", "mu_ss", "msd_dB", "emse_dB", "closed_mu", "closed_dB"
    );
    for r in rows {
        println!(
            "{:<8} {:>12.5e} {:>10.2} {:>10.2} {:>12.5e} {:>10}",
            r.rule,
            r.mu_ss,
            r.msd_db,
            r.emse_db,
            r.closed_form_mu,
            r.closed_form_msd_db
                .map_or("unstable".to_string(), |v| format!("{v:.2}"))
        );
    }
}

fn stability(config: &ExperimentConfig) -> Result<(), Failure> {
    let rows = run_stability(config)?;
    println!(
        "{:<8} {:>12} {:>10} {:>12} {:>9}",
        "rule", "E[mu]_ss", "bound", "radius", "status"
    );
    for r in &rows {
        println!(
            "{:<8} {:>12.5e} {:>10.4} {:>12.6} {:>9}",
            r.rule,
            r.mu_ss,
            r.mean_bound,
            r.radius,
            if r.stable() { "STABLE" } else { "UNSTABLE" }
        );
        if !r.mean_stable {
            println!("  {}: E[mu] = {} exceeds the mean bound {}", r.rule, r.mu_ss, r.mean_bound);
        }
    }
    announce(&[write_stability(dir(config), &rows)?]);
    Ok(())
}
