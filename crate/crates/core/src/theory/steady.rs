//! Steady-state step-size and the resulting MSD/EMSE.
//!
//! At steady state `E[μ(i)] → μ_ss` and
//! `E‖w̄_ss‖²_σ = σ_v² μ_ss² λᵀ(I − F_ss)⁻¹σ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::moments::{moment_advance, MomentAux, MomentState, Mu2Mode};
use super::{f_matrix, ms_stability_check, TheoryError};
use crate::rules::RuleParams;

// Relative change per iteration.
const FIXED_POINT_TOL: f64 = 1e-14;
const FIXED_POINT_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyStateMode {
    /// Closed-form approximations with the steady-state EMSE dropped.
    ClosedForm,
    /// Iterate the moment recursions with `ζ = 0` until `E[μ]` settles.
    FixedPoint,
}

impl SteadyStateMode {
    /// Closed form for KJ, NC, Sp and Fixed; fixed point for AM and VSQ,
    /// whose closed forms do not match their own moment recursions.
    pub fn default_for(rule: &RuleParams) -> Self {
        match rule {
            RuleParams::Am { .. } | RuleParams::Vsq { .. } => SteadyStateMode::FixedPoint,
            _ => SteadyStateMode::ClosedForm,
        }
    }
}

/// `μ_ss` for `rule`; `mode = None` picks [`SteadyStateMode::default_for`].
pub fn steady_state_mu(
    rule: &RuleParams,
    sigma_v2: f64,
    mode: Option<SteadyStateMode>,
) -> Result<f64, TheoryError> {
    rule.validate()?;
    match mode.unwrap_or_else(|| SteadyStateMode::default_for(rule)) {
        SteadyStateMode::ClosedForm => Ok(closed_form_mu(rule, sigma_v2)),
        SteadyStateMode::FixedPoint => fixed_point_mu(rule, sigma_v2),
    }
}

/// Tabulated closed-form steady-state step-sizes.
pub fn closed_form_mu(rule: &RuleParams, sigma_v2: f64) -> f64 {
    match *rule {
        RuleParams::Kj { alpha, gamma } => gamma * sigma_v2 / (1.0 - alpha),
        RuleParams::Am { alpha, gamma, beta } => gamma * (1.0 - beta) * sigma_v2 / (1.0 - alpha),
        RuleParams::Nc { mu0, .. } => mu0,
        RuleParams::Vsq { alpha, gamma, a, b } => gamma * (1.0 - b) / (1.0 - alpha * (1.0 - a)),
        RuleParams::Sp { alpha, gamma } => {
            gamma / (1.0 - alpha) * (2.0 * sigma_v2 / std::f64::consts::PI).sqrt()
        }
        RuleParams::Fixed { mu } => mu,
    }
}

/// Limit of the `E[μ]` recursion with the EMSE held at zero, iterated until
/// the relative change of every moment drops below 1e-14.
pub fn fixed_point_mu(rule: &RuleParams, sigma_v2: f64) -> Result<f64, TheoryError> {
    rule.validate()?;
    let start = match *rule {
        RuleParams::Nc { mu0, .. } => mu0,
        RuleParams::Fixed { mu } => mu,
        _ => 0.0,
    };
    let mut m = MomentState::with_mu(rule, start);
    for iteration in 0..FIXED_POINT_MAX_ITERS {
        let next = moment_advance(rule, &m, 0.0, sigma_v2, Mu2Mode::SquaredMean);
        let delta = rel(next.e_mu, m.e_mu).max(aux_delta(&next.aux, &m.aux));
        m = next;
        // AM only sees the lagged error power from the second step on.
        if iteration >= 2 && delta < FIXED_POINT_TOL {
            return Ok(m.e_mu);
        }
    }
    Err(TheoryError::NonConvergent {
        iterations: FIXED_POINT_MAX_ITERS,
    })
}

fn aux_delta(a: &MomentAux, b: &MomentAux) -> f64 {
    match (a, b) {
        (MomentAux::Am { e_p2: x, .. }, MomentAux::Am { e_p2: y, .. }) => rel(*x, *y),
        (MomentAux::Nc { e_theta: x }, MomentAux::Nc { e_theta: y }) => rel(*x, *y),
        (MomentAux::Vsq { e_a: xa, e_b: xb }, MomentAux::Vsq { e_a: ya, e_b: yb }) => {
            rel(*xa, *ya).max(rel(*xb, *yb))
        }
        _ => 0.0,
    }
}

fn rel(x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs());
    if scale == 0.0 {
        0.0
    } else {
        (x - y).abs() / scale
    }
}

/// Steady-state operator and the MSD/EMSE it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub mu_ss: f64,
    pub f_ss: DMatrix<f64>,
    pub radius: f64,
    pub msd_ss: f64,
    pub emse_ss: f64,
}

/// Solves `s = F_ssᵀ s + σ_v² μ_ss² λ` for the MSD (`σ = 1`) and EMSE
/// (`σ = λ`). Fails when `F_ss` is not mean-square stable.
pub fn steady_state_msd_emse(
    mu_ss: f64,
    lambda: &DVector<f64>,
    sigma_v2: f64,
) -> Result<SteadyState, TheoryError> {
    let m = lambda.len();
    let f_ss = f_matrix(mu_ss, mu_ss * mu_ss, lambda);
    let (stable, radius) = ms_stability_check(&f_ss);
    if !stable {
        return Err(TheoryError::Unstable { radius });
    }
    let lu = (DMatrix::identity(m, m) - &f_ss).lu();
    let ones = DVector::from_element(m, 1.0);
    let (x_msd, x_emse) = match (lu.solve(&ones), lu.solve(lambda)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(TheoryError::Unstable { radius }),
    };
    let scale = sigma_v2 * mu_ss * mu_ss;
    Ok(SteadyState {
        mu_ss,
        radius,
        msd_ss: scale * lambda.dot(&x_msd),
        emse_ss: scale * lambda.dot(&x_emse),
        f_ss,
    })
}
