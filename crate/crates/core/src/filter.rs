//! The VSS-LMS adaptive filter: `e(i) = d(i) - u(i)w(i)`,
//! `w(i+1) = w(i) + μ(i) e(i) u*(i)`, then `μ(i+1) = f{μ(i)}`.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{Sample, SystemModel};
use crate::rules::{RuleError, RuleParams, StepBounds};
use crate::scalar::{FieldScalar, ValueField};

/// A trial is abandoned once `‖w‖` exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("trial needs at least one iteration")]
    NoIterations,
    #[error("weights diverged at iteration {iteration} (|w| = {norm:e})")]
    Diverged { iteration: usize, norm: f64 },
}

/// Current estimate `w(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState<T> {
    pub w: Vec<T>,
    pub i: usize,
}

impl<T: FieldScalar> FilterState<T> {
    pub fn zeros(m: usize) -> Self {
        Self {
            w: vec![T::default(); m],
            i: 0,
        }
    }

    /// `u·w`.
    pub fn output(&self, u: &[T]) -> T {
        let mut y = T::default();
        for (&u, &w) in u.iter().zip(&self.w) {
            y += u * w;
        }
        y
    }

    /// One LMS update with step `mu`; returns the a-priori error `e(i)`.
    pub fn lms_step(&mut self, sample: &Sample<T>, mu: f64) -> T {
        debug_assert_eq!(sample.u.len(), self.w.len());
        let e = sample.d - self.output(&sample.u);
        let g = e.scale(mu);
        for (w, &u) in self.w.iter_mut().zip(&sample.u) {
            *w += g * u.conj();
        }
        self.i += 1;
        e
    }
}

/// Per-iteration quantities seen by a trial, recorded before the update.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepRecord<T> {
    /// `‖w_o - w(i)‖²`
    pub msd: f64,
    /// `|u(i)(w_o - w(i))|²`
    pub emse: f64,
    pub mu: f64,
    pub e: T,
}

/// Error sequence of one trial in its native field.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorTrace {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl ErrorTrace {
    pub fn len(&self) -> usize {
        match self {
            ErrorTrace::Real(v) => v.len(),
            ErrorTrace::Complex(v) => v.len(),
        }
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything recorded during a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrajectory {
    pub msd: Vec<f64>,
    pub emse_proxy: Vec<f64>,
    pub mu_trace: Vec<f64>,
    pub e_trace: ErrorTrace,
}

impl TrialTrajectory {
    pub fn len(&self) -> usize {
        self.msd.len()
    }
    pub fn is_empty(&self) -> bool {
        self.msd.is_empty()
    }
}

/// Runs one trial of `n` iterations from `w(0) = 0`.
///
/// Each iteration draws a sample, records the deviation with the current
/// `w(i)` and `μ(i)`, updates the weights and then advances the step-size
/// with `e(i)`. Fails with [`FilterError::Diverged`] once `‖w‖ > 1e12`.
pub fn run_trial(
    model: &SystemModel,
    rule: &RuleParams,
    mu_initial: f64,
    n: usize,
    seed: u64,
) -> Result<TrialTrajectory, FilterError> {
    run_trial_bounded(model, rule, mu_initial, n, seed, None)
}

/// [`run_trial`] with an optional step-size projection after each update.
pub fn run_trial_bounded(
    model: &SystemModel,
    rule: &RuleParams,
    mu_initial: f64,
    n: usize,
    seed: u64,
    bounds: Option<StepBounds>,
) -> Result<TrialTrajectory, FilterError> {
    fn collect<T: FieldScalar>(
        model: &SystemModel,
        rule: &RuleParams,
        mu_initial: f64,
        n: usize,
        seed: u64,
        bounds: Option<StepBounds>,
    ) -> Result<(TrialTrajectory, Vec<T>), FilterError> {
        let mut traj = TrialTrajectory {
            msd: Vec::with_capacity(n),
            emse_proxy: Vec::with_capacity(n),
            mu_trace: Vec::with_capacity(n),
            e_trace: ErrorTrace::Real(Vec::new()),
        };
        let mut errors = Vec::with_capacity(n);
        drive::<T, _>(model, rule, mu_initial, n, seed, bounds, |_, rec| {
            traj.msd.push(rec.msd);
            traj.emse_proxy.push(rec.emse);
            traj.mu_trace.push(rec.mu);
            errors.push(rec.e);
        })?;
        Ok((traj, errors))
    }

    match model.value_field() {
        ValueField::Real => {
            let (mut t, e) = collect::<f64>(model, rule, mu_initial, n, seed, bounds)?;
            t.e_trace = ErrorTrace::Real(e);
            Ok(t)
        }
        ValueField::ComplexCircular => {
            let (mut t, e) = collect::<Complex64>(model, rule, mu_initial, n, seed, bounds)?;
            t.e_trace = ErrorTrace::Complex(e);
            Ok(t)
        }
    }
}

/// Core trial loop shared by [`run_trial`] and the ensemble runner.
pub(crate) fn drive<T, V>(
    model: &SystemModel,
    rule: &RuleParams,
    mu_initial: f64,
    n: usize,
    seed: u64,
    bounds: Option<StepBounds>,
    mut visit: V,
) -> Result<(), FilterError>
where
    T: FieldScalar,
    V: FnMut(usize, &StepRecord<T>),
{
    if n == 0 {
        return Err(FilterError::NoIterations);
    }
    let m = model.dim();
    let sigma_v2 = model.sigma_v2();
    let w_o: Vec<T> = model.w_o().iter().map(|&x| T::from_real(x)).collect();
    let mut step = rule.init(mu_initial)?.clamped(bounds);
    let mut filter = FilterState::<T>::zeros(m);
    let mut stream = model.stream::<T>(seed);
    let mut sample = Sample {
        u: vec![T::default(); m],
        d: T::default(),
        v: T::default(),
    };
    let limit = DIVERGENCE_NORM * DIVERGENCE_NORM;

    for i in 0..n {
        stream.next_into(&mut sample);
        let mut msd = 0.0;
        let mut prior = T::default();
        for ((&wo, &w), &u) in w_o.iter().zip(&filter.w).zip(&sample.u) {
            let dev = wo - w;
            msd += dev.abs2();
            prior += u * dev;
        }
        let mu = step.mu;
        let e = filter.lms_step(&sample, mu);
        visit(
            i,
            &StepRecord {
                msd,
                emse: prior.abs2(),
                mu,
                e,
            },
        );
        let norm2: f64 = filter.w.iter().map(|w| w.abs2()).sum();
        if !(norm2 <= limit) {
            return Err(FilterError::Diverged {
                iteration: i,
                norm: norm2.sqrt(),
            });
        }
        step = step.advance(rule, e, sigma_v2).clamped(bounds);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_stream, unit_ones, CovarianceSpec};

    fn model(sigma_v2: f64, field: ValueField) -> SystemModel {
        SystemModel::new(
            unit_ones(4),
            sigma_v2,
            CovarianceSpec::White { variance: 1.0 },
            field,
        )
        .unwrap()
    }

    #[test]
    fn perfect_estimate_is_fixed_point() {
        let m = model(0.0, ValueField::Real);
        let mut f = FilterState {
            w: m.w_o().iter().copied().collect::<Vec<f64>>(),
            i: 0,
        };
        let before = f.w.clone();
        for s in generate_stream::<f64>(&m, 1, 20) {
            assert_eq!(f.lms_step(&s, 0.3), 0.0);
        }
        assert_eq!(f.w, before);
        assert_eq!(f.i, 20);
    }

    #[test]
    fn scalar_step() {
        let mut f = FilterState::<f64>::zeros(1);
        let s = Sample {
            u: vec![1.0],
            d: 1.0,
            v: 0.0,
        };
        let e = f.lms_step(&s, 0.5);
        assert_eq!(e, 1.0);
        assert_eq!(f.w, vec![0.5]);
    }

    #[test]
    fn zero_step_leaves_weights() {
        let mut f = FilterState {
            w: vec![0.2, -0.1],
            i: 0,
        };
        let s = Sample {
            u: vec![1.0, 2.0],
            d: 0.5,
            v: 0.0,
        };
        let e = f.lms_step(&s, 0.0);
        assert_eq!(e, 0.5 - (0.2 - 0.2));
        assert_eq!(f.w, vec![0.2, -0.1]);
    }

    #[test]
    fn complex_step_conjugates_regressor() {
        let mut f = FilterState::<Complex64>::zeros(1);
        let s = Sample {
            u: vec![Complex64::new(0.0, 1.0)],
            d: Complex64::new(1.0, 0.0),
            v: Complex64::default(),
        };
        f.lms_step(&s, 1.0);
        // w = e·conj(u) = -i, so u·w = 1 = d.
        assert_eq!(f.w[0], Complex64::new(0.0, -1.0));
        assert_eq!(f.output(&s.u), s.d);
    }

    #[test]
    fn trial_starts_at_system_norm_and_is_deterministic() {
        let m = model(0.01, ValueField::Real);
        let rule = RuleParams::Kj {
            alpha: 0.995,
            gamma: 1e-3,
        };
        let a = run_trial(&m, &rule, 0.01, 500, 9).unwrap();
        let b = run_trial(&m, &rule, 0.01, 500, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        assert_eq!(a.e_trace.len(), 500);
        assert!((a.msd[0] - 1.0).abs() < 1e-15);
        assert_eq!(a.mu_trace[0], 0.01);
    }

    #[test]
    fn trial_matches_manual_loop_over_stream() {
        let m = model(0.01, ValueField::ComplexCircular);
        let rule = RuleParams::Sp {
            alpha: 0.99,
            gamma: 1e-3,
        };
        let traj = run_trial(&m, &rule, 0.02, 200, 4).unwrap();
        let mut f = FilterState::<Complex64>::zeros(4);
        let mut st = rule.init(0.02).unwrap();
        let wo: Vec<Complex64> = m.w_o().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut errors = Vec::new();
        for (i, s) in generate_stream::<Complex64>(&m, 4, 200).iter().enumerate() {
            let msd: f64 = wo.iter().zip(&f.w).map(|(a, b)| (a - b).norm_sqr()).sum();
            assert_eq!(traj.msd[i], msd);
            assert_eq!(traj.mu_trace[i], st.mu);
            let e = f.lms_step(s, st.mu);
            errors.push(e);
            st = st.advance(&rule, e, m.sigma_v2());
        }
        assert_eq!(traj.e_trace, ErrorTrace::Complex(errors));
    }

    #[test]
    fn noiseless_fixed_step_converges() {
        let m = model(0.0, ValueField::Real);
        let traj = run_trial(&m, &RuleParams::Fixed { mu: 0.1 }, 1.0, 2000, 5).unwrap();
        assert!(traj.msd[1999] < 1e-20, "terminal msd {}", traj.msd[1999]);
    }

    #[test]
    fn oversized_step_diverges() {
        let m = model(0.01, ValueField::Real);
        match run_trial(&m, &RuleParams::Fixed { mu: 3.0 }, 1.0, 5000, 5) {
            Err(FilterError::Diverged { iteration, norm }) => {
                assert!(iteration < 5000);
                assert!(norm > DIVERGENCE_NORM);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn clamped_trial_respects_bounds() {
        let m = model(0.01, ValueField::Real);
        let rule = RuleParams::Kj {
            alpha: 0.9,
            gamma: 0.5,
        };
        let bounds = StepBounds::new(0.001, 0.02).unwrap();
        let t = run_trial_bounded(&m, &rule, 0.5, 300, 2, Some(bounds)).unwrap();
        assert!(t.mu_trace.iter().all(|&mu| (0.001..=0.02).contains(&mu)));
    }

    #[test]
    fn zero_iterations_rejected() {
        let m = model(0.01, ValueField::Real);
        assert_eq!(
            run_trial(&m, &RuleParams::Fixed { mu: 0.1 }, 1.0, 0, 0),
            Err(FilterError::NoIterations)
        );
    }
}
