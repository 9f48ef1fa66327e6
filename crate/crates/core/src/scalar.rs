//! Scalar field abstraction so the filter runs on real or circular complex data.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Which number field the regressors, noise and error live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueField {
    #[default]
    Real,
    ComplexCircular,
}

/// Arithmetic the LMS recursion needs from its sample type.
pub trait FieldScalar:
    Copy
    + Debug
    + Default
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + 'static
{
    const FIELD: ValueField;

    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    /// Squared modulus `|x|²`.
    fn abs2(self) -> f64;
    fn scale(self, k: f64) -> Self;
    fn to_complex(self) -> Complex64;
    fn is_finite(self) -> bool;
    /// A zero-mean draw with `E|x|² = 1` (circular for the complex field).
    fn standard_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl FieldScalar for f64 {
    const FIELD: ValueField = ValueField::Real;

    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn abs2(self) -> f64 {
        self * self
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    #[inline]
    fn standard_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl FieldScalar for Complex64 {
    const FIELD: ValueField = ValueField::ComplexCircular;

    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
    #[inline]
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
    #[inline]
    fn standard_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
}
