//! Parallel Monte Carlo ensembles.
//!
//! Trial `t` uses seed `base_seed + t`. Trials are grouped into fixed-size
//! chunks; each chunk is summed sequentially and the chunk sums are combined
//! in chunk order, so the result does not depend on the thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use super::curve::{CurveSource, LearningCurve};
use super::HarnessError;
use crate::filter::{drive, FilterError};
use crate::model::SystemModel;
use crate::rules::{RuleParams, StepBounds};
use crate::scalar::{FieldScalar, ValueField};

const CHUNK_TRIALS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    pub trials: usize,
    pub base_seed: u64,
    /// Average each block of this many iterations into one point.
    pub record_stride: usize,
    pub bounds: Option<StepBounds>,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            trials: 500,
            base_seed: 1,
            record_stride: 1,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub curve: LearningCurve,
    /// Trials that finished and entered the average.
    pub completed: usize,
    /// `(trial index, iteration)` of every diverged trial.
    pub diverged: Vec<(usize, usize)>,
}

// Block sums of MSD, EMSE and μ for one or more trials.
#[derive(Clone)]
struct Sums {
    msd: Vec<f64>,
    emse: Vec<f64>,
    mu: Vec<f64>,
}

impl Sums {
    fn zeros(points: usize) -> Self {
        Self {
            msd: vec![0.0; points],
            emse: vec![0.0; points],
            mu: vec![0.0; points],
        }
    }

    fn add(&mut self, other: &Sums) {
        for (a, b) in [
            (&mut self.msd, &other.msd),
            (&mut self.emse, &other.emse),
            (&mut self.mu, &other.mu),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn clear(&mut self) {
        self.msd.fill(0.0);
        self.emse.fill(0.0);
        self.mu.fill(0.0);
    }
}

struct ChunkOutcome {
    sums: Sums,
    completed: usize,
    diverged: Vec<(usize, usize)>,
}

/// Runs `options.trials` independent trials of `rule` on `model` and
/// averages MSD, EMSE and `μ(i)` over the trials that did not diverge.
pub fn run_ensemble(
    model: &SystemModel,
    rule: &RuleParams,
    mu_initial: f64,
    n: usize,
    options: &EnsembleOptions,
    label: &str,
) -> Result<EnsembleResult, HarnessError> {
    if options.trials == 0 {
        return Err(HarnessError::Config("trials must be at least 1".into()));
    }
    if n == 0 {
        return Err(FilterError::NoIterations.into());
    }
    rule.init(mu_initial)?;
    let stride = options.record_stride.max(1);
    let points = n.div_ceil(stride);

    let chunks: Vec<ChunkOutcome> = (0..options.trials.div_ceil(CHUNK_TRIALS))
        .into_par_iter()
        .map(|c| {
            let first = c * CHUNK_TRIALS;
            let last = (first + CHUNK_TRIALS).min(options.trials);
            let mut out = ChunkOutcome {
                sums: Sums::zeros(points),
                completed: 0,
                diverged: Vec::new(),
            };
            let mut trial = Sums::zeros(points);
            for t in first..last {
                trial.clear();
                let seed = options.base_seed.wrapping_add(t as u64);
                let run = match model.value_field() {
                    ValueField::Real => accumulate::<f64>(model, rule, mu_initial, n, seed, stride, options.bounds, &mut trial),
                    ValueField::ComplexCircular => accumulate::<Complex64>(
                        model,
                        rule,
                        mu_initial,
                        n,
                        seed,
                        stride,
                        options.bounds,
                        &mut trial,
                    ),
                };
                match run {
                    Ok(()) => {
                        out.sums.add(&trial);
                        out.completed += 1;
                    }
                    Err(FilterError::Diverged { iteration, .. }) => out.diverged.push((t, iteration)),
                    Err(e) => unreachable!("validated before the run: {e}"),
                }
            }
            out
        })
        .collect();

    let mut total = Sums::zeros(points);
    let mut completed = 0;
    let mut diverged = Vec::new();
    for c in &chunks {
        total.add(&c.sums);
        completed += c.completed;
        diverged.extend_from_slice(&c.diverged);
    }
    if !diverged.is_empty() {
        log::warn!(
            "{label}: {} of {} trials diverged and were excluded",
            diverged.len(),
            options.trials
        );
    }
    if completed == 0 {
        return Err(HarnessError::AllTrialsDiverged {
            rule: label.to_string(),
            trials: options.trials,
        });
    }

    let iter: Vec<usize> = (0..points).map(|k| k * stride).collect();
    let scale = |k: usize, v: &[f64]| {
        let width = stride.min(n - k * stride) as f64;
        v[k] / (width * completed as f64)
    };
    let msd: Vec<f64> = (0..points).map(|k| scale(k, &total.msd)).collect();
    let emse: Vec<f64> = (0..points).map(|k| scale(k, &total.emse)).collect();
    let mu: Vec<f64> = (0..points).map(|k| scale(k, &total.mu)).collect();
    Ok(EnsembleResult {
        curve: LearningCurve::from_linear(label, CurveSource::Simulation, iter, &msd, &emse, mu),
        completed,
        diverged,
    })
}

#[allow(clippy::too_many_arguments)]
fn accumulate<T: FieldScalar>(
    model: &SystemModel,
    rule: &RuleParams,
    mu_initial: f64,
    n: usize,
    seed: u64,
    stride: usize,
    bounds: Option<StepBounds>,
    sums: &mut Sums,
) -> Result<(), FilterError> {
    drive::<T, _>(model, rule, mu_initial, n, seed, bounds, |i, rec| {
        let k = i / stride;
        sums.msd[k] += rec.msd;
        sums.emse[k] += rec.emse;
        sums.mu[k] += rec.mu;
    })
}
