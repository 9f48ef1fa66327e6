//! Deterministic recursions for the step-size moments `E[μ(i)]`, `E[μ²(i)]`.
//!
//! The error `e(i)` is modelled as zero-mean Gaussian with power
//! `E|e(i)|² = ζ(i) + σ_v²`, where `ζ(i)` is the EMSE.

use serde::{Deserialize, Serialize};

use crate::rules::{RuleError, RuleParams, EPS_DIV};

/// How `E[μ²(i)]` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mu2Mode {
    /// `E[μ²] = E[μ]²`, i.e. step-size fluctuations neglected.
    #[default]
    SquaredMean,
    /// Second-moment recursion of the KJ rule using the Gaussian fourth
    /// moment `E[e⁴] = 3(ζ+σ_v²)²`. Other rules fall back to squared-mean.
    ExactKj,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentAux {
    None,
    /// `e_p2 = E[p²(i−1)]`; `zeta_prev = ζ(i−1)`, `None` before the first
    /// error exists (the simulated `e(−1)` is zero).
    Am { e_p2: f64, zeta_prev: Option<f64> },
    Nc { e_theta: f64 },
    Vsq { e_a: f64, e_b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState {
    pub e_mu: f64,
    pub e_mu2: f64,
    pub aux: MomentAux,
}

impl MomentState {
    /// Moments at `i = 0`: the initial step is deterministic, so
    /// `E[μ(0)] = μ(0)` and `E[μ²(0)] = μ(0)²`.
    pub fn initial(rule: &RuleParams, mu_initial: f64) -> Result<Self, RuleError> {
        let mu = rule.init(mu_initial)?.mu;
        Ok(Self::with_mu(rule, mu))
    }

    pub(crate) fn with_mu(rule: &RuleParams, mu: f64) -> Self {
        let aux = match rule {
            RuleParams::Am { .. } => MomentAux::Am {
                e_p2: 0.0,
                zeta_prev: None,
            },
            RuleParams::Nc { .. } => MomentAux::Nc { e_theta: 0.0 },
            RuleParams::Vsq { .. } => MomentAux::Vsq { e_a: 0.0, e_b: 0.0 },
            _ => MomentAux::None,
        };
        Self {
            e_mu: mu,
            e_mu2: mu * mu,
            aux,
        }
    }
}

/// Advances the moments from `i` to `i+1` given `ζ(i)`.
pub fn moment_advance(
    rule: &RuleParams,
    m: &MomentState,
    zeta: f64,
    sigma_v2: f64,
    mode: Mu2Mode,
) -> MomentState {
    let power = zeta + sigma_v2;
    let (e_mu, aux) = match (*rule, m.aux) {
        (RuleParams::Kj { alpha, gamma }, aux) => (alpha * m.e_mu + gamma * power, aux),
        (RuleParams::Am { alpha, gamma, beta }, MomentAux::Am { e_p2, zeta_prev }) => {
            let prev_power = zeta_prev.map_or(0.0, |z| z + sigma_v2);
            let e_p2 = beta * beta * e_p2 + (1.0 - beta).powi(2) * power * prev_power;
            (
                alpha * m.e_mu + gamma * e_p2,
                MomentAux::Am {
                    e_p2,
                    zeta_prev: Some(zeta),
                },
            )
        }
        (RuleParams::Nc { mu0, gamma, alpha }, MomentAux::Nc { e_theta }) => {
            let e_theta = (1.0 - alpha) * e_theta + 0.5 * alpha * zeta;
            (mu0 * (1.0 + gamma * e_theta), MomentAux::Nc { e_theta })
        }
        (RuleParams::Vsq { alpha, gamma, a, b }, MomentAux::Vsq { e_a, e_b }) => {
            let e_a = a * e_a + power;
            let e_b = b * e_b + power;
            (
                alpha * m.e_mu + gamma * e_a / e_b.max(EPS_DIV),
                MomentAux::Vsq { e_a, e_b },
            )
        }
        (RuleParams::Sp { alpha, gamma }, aux) => (
            alpha * m.e_mu + gamma * (2.0 * power / std::f64::consts::PI).sqrt(),
            aux,
        ),
        (RuleParams::Fixed { mu }, aux) => (mu, aux),
        (rule, aux) => panic!(
            "moment state {aux:?} was not produced by {} parameters",
            rule.short_name()
        ),
    };
    let e_mu2 = match (mode, rule) {
        (Mu2Mode::ExactKj, RuleParams::Kj { alpha, gamma }) => {
            alpha * alpha * m.e_mu2
                + 2.0 * alpha * gamma * m.e_mu * power
                + 3.0 * gamma * gamma * power * power
        }
        _ => e_mu * e_mu,
    };
    MomentState { e_mu, e_mu2, aux }
}
