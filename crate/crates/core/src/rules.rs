//! Step-size control rules `μ(i+1) = f{μ(i)}` as small per-sample state machines.
//!
//! | rule  | update (with `e2 = |e(i)|²`)                                                |
//! |-------|------------------------------------------------------------------------------|
//! | KJ    | `μ' = α μ + γ e2`                                                            |
//! | AM    | `p = β p_prev + (1-β) Re(e·conj(e_prev))`, `μ' = α μ + γ p²`                 |
//! | NC    | `θ' = (1-α) θ + (α/2)(e2 - σ_v²)`, `μ' = μ0 (1 + γ θ')`                     |
//! | VSQ   | `A' = a A + e2`, `B' = b B + e2`, `μ' = α μ + γ A'/B'`                      |
//! | Sp    | `μ' = α μ + γ |e|`                                                           |
//! | Fixed | `μ' = μ`                                                                     |
//!
//! No clamping is applied unless a [`StepBounds`] is supplied explicitly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::FieldScalar;

/// Guards the VSQ quotient against an exactly zero denominator.
pub const EPS_DIV: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("{rule}: parameter {name} = {value} outside {range}")]
    OutOfRange {
        rule: &'static str,
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("initial step-size must be positive and finite, got {0}")]
    InvalidInitialStep(f64),
    #[error("step-size bounds inverted: min {min} > max {max}")]
    InvertedBounds { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RuleParams {
    /// Kwong–Johnston: error-power driven.
    Kj { alpha: f64, gamma: f64 },
    /// Aboulnasr–Mayyas: driven by the error autocorrelation estimate.
    Am { alpha: f64, gamma: f64, beta: f64 },
    /// Noise-constrained LMS; needs the noise variance.
    Nc { mu0: f64, gamma: f64, alpha: f64 },
    /// Quotient form, ratio of two exponentially weighted error powers.
    Vsq { alpha: f64, gamma: f64, a: f64, b: f64 },
    /// Sparse VSS, driven by the error magnitude.
    Sp { alpha: f64, gamma: f64 },
    /// Constant step-size (plain LMS).
    Fixed { mu: f64 },
}

impl RuleParams {
    pub fn short_name(&self) -> &'static str {
        match self {
            RuleParams::Kj { .. } => "KJ",
            RuleParams::Am { .. } => "AM",
            RuleParams::Nc { .. } => "NC",
            RuleParams::Vsq { .. } => "VSQ",
            RuleParams::Sp { .. } => "Sp",
            RuleParams::Fixed { .. } => "Fixed",
        }
    }

    /// Checks parameter ranges. `γ = 0` is accepted (the rule degenerates
    /// to geometric decay), negative or non-finite values are not.
    pub fn validate(&self) -> Result<(), RuleError> {
        let rule = self.short_name();
        let unit = |name, value: f64| open_unit(rule, name, value);
        let nonneg = |name, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(RuleError::OutOfRange {
                    rule,
                    name,
                    value,
                    range: "[0, inf)",
                })
            }
        };
        let positive = |name, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(RuleError::OutOfRange {
                    rule,
                    name,
                    value,
                    range: "(0, inf)",
                })
            }
        };
        match *self {
            RuleParams::Kj { alpha, gamma } | RuleParams::Sp { alpha, gamma } => {
                unit("alpha", alpha)?;
                nonneg("gamma", gamma)
            }
            RuleParams::Am { alpha, gamma, beta } => {
                unit("alpha", alpha)?;
                nonneg("gamma", gamma)?;
                unit("beta", beta)
            }
            RuleParams::Nc { mu0, gamma, alpha } => {
                positive("mu0", mu0)?;
                nonneg("gamma", gamma)?;
                unit("alpha", alpha)
            }
            RuleParams::Vsq { alpha, gamma, a, b } => {
                unit("alpha", alpha)?;
                nonneg("gamma", gamma)?;
                unit("a", a)?;
                unit("b", b)
            }
            RuleParams::Fixed { mu } => positive("mu", mu),
        }
    }

    /// Initial rule state. NC ignores `mu_initial`: its step is always
    /// `μ0 (1 + γ θ)` and `θ` starts at zero.
    pub fn init(&self, mu_initial: f64) -> Result<RuleState, RuleError> {
        self.validate()?;
        if !(mu_initial.is_finite() && mu_initial > 0.0) {
            return Err(RuleError::InvalidInitialStep(mu_initial));
        }
        let (mu, aux) = match *self {
            RuleParams::Am { .. } => (
                mu_initial,
                RuleAux::Am {
                    p_prev: 0.0,
                    e_prev: Complex64::new(0.0, 0.0),
                },
            ),
            RuleParams::Nc { mu0, .. } => (mu0, RuleAux::Nc { theta: 0.0 }),
            RuleParams::Vsq { .. } => (
                mu_initial,
                RuleAux::Vsq {
                    a_acc: 0.0,
                    b_acc: 0.0,
                },
            ),
            RuleParams::Fixed { mu } => (mu, RuleAux::None),
            RuleParams::Kj { .. } | RuleParams::Sp { .. } => (mu_initial, RuleAux::None),
        };
        Ok(RuleState { mu, aux })
    }
}

fn open_unit(rule: &'static str, name: &'static str, value: f64) -> Result<(), RuleError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(RuleError::OutOfRange {
            rule,
            name,
            value,
            range: "(0, 1)",
        })
    }
}

/// Rule-specific memory carried between samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleAux {
    None,
    Am { p_prev: f64, e_prev: Complex64 },
    Nc { theta: f64 },
    Vsq { a_acc: f64, b_acc: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleState {
    pub mu: f64,
    pub aux: RuleAux,
}

impl RuleState {
    /// Consumes the error `e(i)` and returns the state holding `μ(i+1)`.
    ///
    /// `params` must be the ones the state was initialised with. `sigma_v2`
    /// is only read by NC.
    pub fn advance<T: FieldScalar>(&self, params: &RuleParams, e: T, sigma_v2: f64) -> RuleState {
        let e2 = e.abs2();
        match (*params, self.aux) {
            (RuleParams::Kj { alpha, gamma }, aux) => RuleState {
                mu: alpha * self.mu + gamma * e2,
                aux,
            },
            (RuleParams::Am { alpha, gamma, beta }, RuleAux::Am { p_prev, e_prev }) => {
                let e = e.to_complex();
                let p = beta * p_prev + (1.0 - beta) * (e * e_prev.conj()).re;
                RuleState {
                    mu: alpha * self.mu + gamma * p * p,
                    aux: RuleAux::Am { p_prev: p, e_prev: e },
                }
            }
            (RuleParams::Nc { mu0, gamma, alpha }, RuleAux::Nc { theta }) => {
                let theta = (1.0 - alpha) * theta + 0.5 * alpha * (e2 - sigma_v2);
                RuleState {
                    mu: mu0 * (1.0 + gamma * theta),
                    aux: RuleAux::Nc { theta },
                }
            }
            (RuleParams::Vsq { alpha, gamma, a, b }, RuleAux::Vsq { a_acc, b_acc }) => {
                let a_acc = a * a_acc + e2;
                let b_acc = b * b_acc + e2;
                let quotient = a_acc / b_acc.max(EPS_DIV);
                RuleState {
                    mu: alpha * self.mu + gamma * quotient,
                    aux: RuleAux::Vsq { a_acc, b_acc },
                }
            }
            (RuleParams::Sp { alpha, gamma }, aux) => RuleState {
                mu: alpha * self.mu + gamma * e2.sqrt(),
                aux,
            },
            (RuleParams::Fixed { .. }, aux) => RuleState { mu: self.mu, aux },
            (params, aux) => panic!(
                "rule state {aux:?} was not produced by {} parameters",
                params.short_name()
            ),
        }
    }

    /// Projects `mu` into `bounds` when present.
    pub fn clamped(self, bounds: Option<StepBounds>) -> RuleState {
        match bounds {
            Some(b) => RuleState {
                mu: self.mu.clamp(b.min, b.max),
                ..self
            },
            None => self,
        }
    }
}

/// Optional `[mu_min, mu_max]` projection of the step-size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBounds")]
pub struct StepBounds {
    min: f64,
    max: f64,
}

#[derive(Deserialize)]
struct RawBounds {
    min: f64,
    max: f64,
}

impl TryFrom<RawBounds> for StepBounds {
    type Error = RuleError;
    fn try_from(raw: RawBounds) -> Result<Self, RuleError> {
        StepBounds::new(raw.min, raw.max)
    }
}

impl StepBounds {
    pub fn new(min: f64, max: f64) -> Result<Self, RuleError> {
        if min > max || min.is_nan() || max.is_nan() {
            return Err(RuleError::InvertedBounds { min, max });
        }
        Ok(Self { min, max })
    }
    pub fn min(&self) -> f64 {
        self.min
    }
    pub fn max(&self) -> f64 {
        self.max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const KJ: RuleParams = RuleParams::Kj {
        alpha: 0.995,
        gamma: 1e-3,
    };
    const SP: RuleParams = RuleParams::Sp {
        alpha: 0.995,
        gamma: 1e-3,
    };

    #[test]
    fn init_states() {
        assert_eq!(
            KJ.init(0.01).unwrap(),
            RuleState {
                mu: 0.01,
                aux: RuleAux::None
            }
        );
        let nc = RuleParams::Nc {
            mu0: 0.05,
            gamma: 10.0,
            alpha: 1e-3,
        };
        assert_eq!(nc.init(0.7).unwrap().mu, 0.05);
        let vsq = RuleParams::Vsq {
            alpha: 0.995,
            gamma: 1e-3,
            a: 0.99,
            b: 0.999,
        };
        assert_eq!(
            vsq.init(0.01).unwrap().aux,
            RuleAux::Vsq {
                a_acc: 0.0,
                b_acc: 0.0
            }
        );
    }

    #[test]
    fn init_rejects_bad_input() {
        assert_eq!(KJ.init(0.0), Err(RuleError::InvalidInitialStep(0.0)));
        let bad = RuleParams::Am {
            alpha: 0.995,
            gamma: 1e-3,
            beta: 1.0,
        };
        assert!(matches!(
            bad.init(0.01),
            Err(RuleError::OutOfRange { name: "beta", .. })
        ));
        assert!(RuleParams::Fixed { mu: -1.0 }.validate().is_err());
        assert!(RuleParams::Kj {
            alpha: 0.5,
            gamma: -1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn kj_step_arithmetic() {
        let s = RuleState {
            mu: 2e-3,
            aux: RuleAux::None,
        };
        let next = s.advance(&KJ, 0.1f64, 0.01);
        assert_relative_eq!(next.mu, 0.995 * 0.002 + 1e-3 * 0.01, max_relative = 1e-15);
        assert_relative_eq!(next.mu, 2.0e-3, max_relative = 1e-12);
    }

    #[test]
    fn sp_uses_error_magnitude() {
        let s = SP.init(0.01).unwrap();
        let next = s.advance(&SP, -0.2f64, 0.01);
        assert_relative_eq!(next.mu, 1.015e-2, max_relative = 1e-12);
    }

    #[test]
    fn zero_error_decays_geometrically() {
        let rules = [
            KJ,
            SP,
            RuleParams::Am {
                alpha: 0.9,
                gamma: 1.0,
                beta: 0.5,
            },
            RuleParams::Vsq {
                alpha: 0.8,
                gamma: 0.0,
                a: 0.9,
                b: 0.99,
            },
        ];
        for rule in rules {
            let alpha = match rule {
                RuleParams::Kj { alpha, .. }
                | RuleParams::Sp { alpha, .. }
                | RuleParams::Am { alpha, .. }
                | RuleParams::Vsq { alpha, .. } => alpha,
                _ => unreachable!(),
            };
            let next = rule.init(0.02).unwrap().advance(&rule, 0.0f64, 0.01);
            assert_relative_eq!(next.mu, alpha * 0.02, max_relative = 1e-15);
        }
        let nc = RuleParams::Nc {
            mu0: 0.05,
            gamma: 10.0,
            alpha: 1e-3,
        };
        // θ drifts by -(α/2)σ_v² when e = 0; with σ_v² = 0 it stays put.
        assert_eq!(nc.init(1.0).unwrap().advance(&nc, 0.0f64, 0.0).mu, 0.05);
    }

    #[test]
    fn am_uses_lagged_product() {
        let am = RuleParams::Am {
            alpha: 0.5,
            gamma: 2.0,
            beta: 0.75,
        };
        let s0 = am.init(0.1).unwrap();
        let s1 = s0.advance(&am, 0.4f64, 0.0);
        // e_prev = 0, so p = 0.
        assert_relative_eq!(s1.mu, 0.05, max_relative = 1e-15);
        let s2 = s1.advance(&am, -0.5f64, 0.0);
        let p = 0.25 * (0.4 * -0.5);
        assert_relative_eq!(s2.mu, 0.5 * 0.05 + 2.0 * p * p, max_relative = 1e-15);
        match s2.aux {
            RuleAux::Am { p_prev, e_prev } => {
                assert_relative_eq!(p_prev, p);
                assert_eq!(e_prev, Complex64::new(-0.5, 0.0));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn am_complex_takes_real_part() {
        let am = RuleParams::Am {
            alpha: 0.5,
            gamma: 1.0,
            beta: 0.5,
        };
        let s = am
            .init(0.1)
            .unwrap()
            .advance(&am, Complex64::new(0.0, 1.0), 0.0)
            .advance(&am, Complex64::new(0.0, 1.0), 0.0);
        // e·conj(e_prev) = i·(-i) = 1.
        let p = 0.5;
        assert_relative_eq!(s.mu, 0.5 * 0.05 + p * p, max_relative = 1e-15);
    }

    #[test]
    fn nc_tracks_excess_error_power() {
        let nc = RuleParams::Nc {
            mu0: 0.05,
            gamma: 10.0,
            alpha: 0.1,
        };
        let s = nc.init(0.5).unwrap().advance(&nc, 0.2f64, 0.01);
        let theta = 0.05 * (0.04 - 0.01);
        assert_relative_eq!(s.mu, 0.05 * (1.0 + 10.0 * theta), max_relative = 1e-15);
    }

    #[test]
    fn vsq_first_step_is_neutral_quotient() {
        let vsq = RuleParams::Vsq {
            alpha: 0.9,
            gamma: 0.01,
            a: 0.99,
            b: 0.5,
        };
        let s = vsq.init(0.1).unwrap();
        let s1 = s.advance(&vsq, 0.3f64, 0.0);
        assert_relative_eq!(s1.mu, 0.09 + 0.01, max_relative = 1e-15);
        let s2 = s1.advance(&vsq, 0.0f64, 0.0);
        let q = (0.99 * 0.09) / (0.5 * 0.09);
        assert_relative_eq!(s2.mu, 0.9 * 0.1 + 0.01 * q, max_relative = 1e-14);
        // All-zero history: 0 / ε_div, no NaN.
        let z = s.advance(&vsq, 0.0f64, 0.0);
        assert_relative_eq!(z.mu, 0.09, max_relative = 1e-15);
    }

    #[test]
    fn fixed_ignores_error() {
        let f = RuleParams::Fixed { mu: 0.3 };
        let s = f.init(1.0).unwrap();
        assert_eq!(s.mu, 0.3);
        assert_eq!(s.advance(&f, 123.0f64, 0.0).mu, 0.3);
    }

    #[test]
    fn clamp_policy() {
        let s = RuleState {
            mu: 0.5,
            aux: RuleAux::None,
        };
        assert_eq!(s.clamped(None), s);
        let b = StepBounds::new(0.0, 0.1).unwrap();
        assert_eq!(s.clamped(Some(b)).mu, 0.1);
        assert_eq!(RuleState { mu: 0.05, ..s }.clamped(Some(b)).mu, 0.05);
        assert_eq!(
            StepBounds::new(0.2, 0.1),
            Err(RuleError::InvertedBounds { min: 0.2, max: 0.1 })
        );
    }

    #[test]
    fn params_serde_tagging() {
        let json = r#"{"rule":"vsq","alpha":0.995,"gamma":0.001,"a":0.99,"b":0.999}"#;
        let p: RuleParams = serde_json::from_str(json).unwrap();
        assert_eq!(
            p,
            RuleParams::Vsq {
                alpha: 0.995,
                gamma: 1e-3,
                a: 0.99,
                b: 0.999
            }
        );
        assert!(serde_json::from_str::<StepBounds>(r#"{"min":1.0,"max":0.5}"#).is_err());
    }
}
