//! Transient mean-square learning curves.
//!
//! Two propagators are available:
//!
//! * [`Engine::Oracle`] carries the diagonal `s(i)` of the rotated
//!   weight-error covariance, `E‖w̄(i)‖²_σ = s(i)ᵀσ`, through
//!   `s(i+1) = F(i)ᵀ s(i) + σ_v² E[μ²(i)] λ`. It is exact under the modelling
//!   assumptions for any input covariance.
//! * [`Engine::Paper`] uses the accumulated-operator form
//!
//!   ```text
//!   E‖w̄(i+1)‖²_σ = E‖w̄(i)‖²_σ + ‖w̄_o‖²_{(F(i)−I)A(i)σ}
//!                  + σ_v² E[μ²(i)] λᵀσ + σ_v² λᵀ(F(i)−I)B(i)σ
//!   A(i+1) = F(i)A(i),   B(i+1) = E[μ²(i)] I + F(i)B(i)
//!   ```
//!
//!   with `A(0) = I`, `B(0) = 0`. The products are accumulated on the left,
//!   so it matches the oracle only when the `F(i)` commute (white input).
//!
//! Both are evaluated for every weighting at once by keeping `s(i)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::moments::{moment_advance, MomentState, Mu2Mode};
use super::{fill_f_matrix, TheoryError, DIVERGENCE_MSD};
use crate::model::SpectralModel;
use crate::rules::RuleParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Oracle,
    Paper,
}

/// Which weighting the `‖w̄_o‖²` difference term of the paper engine uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaperForm {
    /// `(F(i) − I)A(i)σ`, the difference of consecutive unrolled updates.
    #[default]
    Corrected,
    /// `F(i)A(i)σ`, kept for comparison only; it does not telescope.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransientOptions {
    pub engine: Engine,
    pub mu2_mode: Mu2Mode,
    pub paper_form: PaperForm,
    /// Record one block-averaged point every `stride` iterations.
    pub stride: usize,
}

impl Default for TransientOptions {
    fn default() -> Self {
        Self {
            engine: Engine::Oracle,
            mu2_mode: Mu2Mode::SquaredMean,
            paper_form: PaperForm::Corrected,
            stride: 1,
        }
    }
}

/// Mean-square state at iteration `i`.
///
/// `a` and `b` are only maintained by the paper engine.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryState {
    pub s: DVector<f64>,
    pub f: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub zeta: f64,
    pub msd: f64,
}

impl TheoryState {
    fn new(s: DVector<f64>, f: DMatrix<f64>, lambda: &DVector<f64>) -> Self {
        let m = s.len();
        Self {
            zeta: lambda.dot(&s),
            msd: s.sum(),
            s,
            f,
            a: DMatrix::identity(m, m),
            b: DMatrix::zeros(m, m),
        }
    }

    /// `E‖w̄(i)‖²_σ`.
    pub fn weighted(&self, sigma: &DVector<f64>) -> f64 {
        self.s.dot(sigma)
    }
}

/// `s' = Fᵀs + σ_v² E[μ²] λ`.
pub fn covariance_advance(
    s: &DVector<f64>,
    f: &DMatrix<f64>,
    e_mu2: f64,
    sigma_v2: f64,
    lambda: &DVector<f64>,
) -> DVector<f64> {
    let mut out = f.tr_mul(s);
    out.axpy(sigma_v2 * e_mu2, lambda, 1.0);
    out
}

/// One step of the accumulated-operator recursion; `t.f` must hold `F(i)`.
/// The returned state keeps `F(i)` in `f`; the caller installs `F(i+1)`.
pub fn paper_transient_advance(
    t: &TheoryState,
    e_mu2: f64,
    sigma_v2: f64,
    lambda: &DVector<f64>,
    w_bar_o: &DVector<f64>,
    form: PaperForm,
) -> TheoryState {
    let m = lambda.len();
    let initial = w_bar_o.map(|x| x * x);
    let f_minus_i = &t.f - DMatrix::<f64>::identity(m, m);
    let drift = match form {
        PaperForm::Corrected => &f_minus_i * &t.a,
        PaperForm::AsPrinted => &t.f * &t.a,
    };
    let mut s = &t.s + drift.tr_mul(&initial);
    s.axpy(sigma_v2 * e_mu2, lambda, 1.0);
    s += (&f_minus_i * &t.b).tr_mul(lambda) * sigma_v2;

    let a = &t.f * &t.a;
    let mut b = &t.f * &t.b;
    for k in 0..m {
        b[(k, k)] += e_mu2;
    }
    TheoryState {
        zeta: lambda.dot(&s),
        msd: s.sum(),
        s,
        f: t.f.clone(),
        a,
        b,
    }
}

/// Couples the step-size moments with the mean-square propagator.
///
/// At every step `F(i)` is built from `E[μ(i)]`, `E[μ²(i)]`; the state moves
/// to `i+1`, and the moments are then advanced with `ζ(i)`.
#[derive(Debug, Clone)]
pub struct TransientEngine {
    rule: RuleParams,
    sigma_v2: f64,
    lambda: DVector<f64>,
    w_bar_o: DVector<f64>,
    options: TransientOptions,
    moments: MomentState,
    state: TheoryState,
    iteration: usize,
}

impl TransientEngine {
    pub fn new(
        spectral: &SpectralModel,
        w_o: &DVector<f64>,
        rule: &RuleParams,
        mu_initial: f64,
        sigma_v2: f64,
        options: TransientOptions,
    ) -> Result<Self, TheoryError> {
        if w_o.len() != spectral.dim() {
            return Err(TheoryError::DimensionMismatch {
                expected: spectral.dim(),
                got: w_o.len(),
            });
        }
        let moments = MomentState::initial(rule, mu_initial)?;
        let lambda = spectral.lambda.clone();
        let w_bar_o = spectral.rotate(w_o);
        let m = lambda.len();
        let mut f = DMatrix::zeros(m, m);
        fill_f_matrix(&mut f, moments.e_mu, moments.e_mu2, &lambda);
        let state = TheoryState::new(w_bar_o.map(|x| x * x), f, &lambda);
        Ok(Self {
            rule: *rule,
            sigma_v2,
            lambda,
            w_bar_o,
            options,
            moments,
            state,
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }
    pub fn state(&self) -> &TheoryState {
        &self.state
    }
    pub fn moments(&self) -> &MomentState {
        &self.moments
    }

    /// Moves from `i` to `i+1`.
    pub fn step(&mut self) -> Result<(), TheoryError> {
        let zeta_i = self.state.zeta;
        let e_mu2 = self.moments.e_mu2;
        match self.options.engine {
            Engine::Oracle => {
                let s = covariance_advance(
                    &self.state.s,
                    &self.state.f,
                    e_mu2,
                    self.sigma_v2,
                    &self.lambda,
                );
                self.state.zeta = self.lambda.dot(&s);
                self.state.msd = s.sum();
                self.state.s = s;
            }
            Engine::Paper => {
                self.state = paper_transient_advance(
                    &self.state,
                    e_mu2,
                    self.sigma_v2,
                    &self.lambda,
                    &self.w_bar_o,
                    self.options.paper_form,
                );
            }
        }
        self.iteration += 1;
        if !self.state.msd.is_finite() || self.state.msd > DIVERGENCE_MSD {
            return Err(TheoryError::Diverged {
                iteration: self.iteration,
                msd: self.state.msd,
            });
        }
        self.moments = moment_advance(
            &self.rule,
            &self.moments,
            zeta_i,
            self.sigma_v2,
            self.options.mu2_mode,
        );
        fill_f_matrix(
            &mut self.state.f,
            self.moments.e_mu,
            self.moments.e_mu2,
            &self.lambda,
        );
        Ok(())
    }

    /// Steps until the relative MSD change falls below `tol` or `max_iters`
    /// steps have been taken; returns the number of steps.
    pub fn run_to_convergence(&mut self, tol: f64, max_iters: usize) -> Result<usize, TheoryError> {
        for k in 0..max_iters {
            let prev = self.state.msd;
            self.step()?;
            let cur = self.state.msd;
            if (cur - prev).abs() <= tol * cur.abs().max(prev.abs()) {
                return Ok(k + 1);
            }
        }
        Err(TheoryError::NonConvergent {
            iterations: max_iters,
        })
    }
}

/// Theoretical learning curve; each point averages `stride` consecutive
/// iterations, and `iter` is the first iteration of its block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TheoryCurve {
    pub iter: Vec<usize>,
    pub msd: Vec<f64>,
    pub emse: Vec<f64>,
    pub mu_mean: Vec<f64>,
}

impl TheoryCurve {
    pub fn len(&self) -> usize {
        self.iter.len()
    }
    pub fn is_empty(&self) -> bool {
        self.iter.is_empty()
    }
}

/// MSD, EMSE and `E[μ]` for `i = 0..n`.
pub fn transient_curve(
    spectral: &SpectralModel,
    w_o: &DVector<f64>,
    rule: &RuleParams,
    mu_initial: f64,
    sigma_v2: f64,
    n: usize,
    options: TransientOptions,
) -> Result<TheoryCurve, TheoryError> {
    if n == 0 {
        return Err(TheoryError::NoIterations);
    }
    let stride = options.stride.max(1);
    let mut engine = TransientEngine::new(spectral, w_o, rule, mu_initial, sigma_v2, options)?;
    let points = n.div_ceil(stride);
    let mut curve = TheoryCurve {
        iter: Vec::with_capacity(points),
        msd: Vec::with_capacity(points),
        emse: Vec::with_capacity(points),
        mu_mean: Vec::with_capacity(points),
    };
    let mut acc = [0.0f64; 3];
    let mut count = 0usize;
    for i in 0..n {
        let st = engine.state();
        acc[0] += st.msd;
        acc[1] += st.zeta;
        acc[2] += engine.moments().e_mu;
        count += 1;
        if count == stride || i + 1 == n {
            let c = count as f64;
            curve.iter.push(i + 1 - count);
            curve.msd.push(acc[0] / c);
            curve.emse.push(acc[1] / c);
            curve.mu_mean.push(acc[2] / c);
            acc = [0.0; 3];
            count = 0;
        }
        if i + 1 < n {
            engine.step()?;
        }
    }
    Ok(curve)
}
