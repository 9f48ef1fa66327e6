//! System-identification model: unknown system, input statistics and the
//! noisy sample stream `d(i) = u(i)·w_o + v(i)`.
//!
//! Regressors are drawn independently at every iteration with covariance
//! `R_u = E[u*(i) u(i)]`. The eigenstructure `R_u = T Λ T*` is computed once
//! at construction and reused both to shape the regressors and by the theory.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{FieldScalar, ValueField};

const SYMMETRY_TOL: f64 = 1e-12;
const NEGATIVE_EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("filter length must be at least 1")]
    EmptySystem,
    #[error("unknown system has {got} taps, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown system has a non-finite entry")]
    NonFiniteSystem,
    #[error("noise variance must be finite and nonnegative, got {0}")]
    InvalidNoiseVariance(f64),
    #[error("input variance must be positive, got {0}")]
    InvalidVariance(f64),
    #[error("AR(1) correlation must lie in (-1, 1), got {0}")]
    InvalidCorrelation(f64),
    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("covariance matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),
    #[error("signal power u·w_o is zero, SNR is undefined")]
    ZeroSignalPower,
}

/// How the regressor covariance `R_u` is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CovarianceSpec {
    White { variance: f64 },
    ToeplitzAr1 { rho: f64, variance: f64 },
    /// Real symmetric positive semidefinite matrix, row major.
    Explicit { matrix: Vec<Vec<f64>> },
}

impl Default for CovarianceSpec {
    fn default() -> Self {
        CovarianceSpec::White { variance: 1.0 }
    }
}

/// Builds the `M×M` input covariance described by `spec`.
pub fn build_covariance(spec: &CovarianceSpec, m: usize) -> Result<DMatrix<f64>, ModelError> {
    if m == 0 {
        return Err(ModelError::EmptySystem);
    }
    match spec {
        CovarianceSpec::White { variance } => {
            check_variance(*variance)?;
            Ok(DMatrix::identity(m, m) * *variance)
        }
        CovarianceSpec::ToeplitzAr1 { rho, variance } => {
            check_variance(*variance)?;
            if !(rho.is_finite() && rho.abs() < 1.0) {
                return Err(ModelError::InvalidCorrelation(*rho));
            }
            Ok(DMatrix::from_fn(m, m, |j, k| {
                variance * rho.powi(j.abs_diff(k) as i32)
            }))
        }
        CovarianceSpec::Explicit { matrix } => {
            if matrix.len() != m {
                return Err(ModelError::DimensionMismatch {
                    expected: m,
                    got: matrix.len(),
                });
            }
            if let Some(row) = matrix.iter().find(|row| row.len() != m) {
                return Err(ModelError::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
            let r = DMatrix::from_fn(m, m, |j, k| matrix[j][k]);
            // Validates symmetry and semidefiniteness.
            spectral_decompose(&r)?;
            Ok(r)
        }
    }
}

fn check_variance(variance: f64) -> Result<(), ModelError> {
    if variance.is_finite() && variance > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidVariance(variance))
    }
}

/// Eigenstructure `R = T·diag(λ)·T*` of the input covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    /// Orthonormal eigenvectors, one per column, matching `lambda`.
    pub t: DMatrix<f64>,
    /// Eigenvalues, sorted descending.
    pub lambda: DVector<f64>,
    pub beta_max: f64,
}

impl SpectralModel {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// `T·diag(λ)·Tᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.t * DMatrix::from_diagonal(&self.lambda) * self.t.transpose()
    }

    /// Rotates a weight vector into the eigenbasis: `T*·w`.
    pub fn rotate(&self, w: &DVector<f64>) -> DVector<f64> {
        self.t.transpose() * w
    }
}

/// Eigendecomposition of a real symmetric PSD matrix.
///
/// Eigenvalues come out sorted descending (stable for ties) and each
/// eigenvector is signed so its first non-negligible entry is positive.
/// Eigenvalues in `[-1e-10, 0)` are clamped to zero.
pub fn spectral_decompose(r: &DMatrix<f64>) -> Result<SpectralModel, ModelError> {
    let m = r.nrows();
    if m == 0 {
        return Err(ModelError::EmptySystem);
    }
    if r.ncols() != m {
        return Err(ModelError::DimensionMismatch {
            expected: m,
            got: r.ncols(),
        });
    }
    let asym = (r - r.transpose()).amax();
    if !(asym <= SYMMETRY_TOL) {
        return Err(ModelError::NotSymmetric(asym));
    }

    let eig = SymmetricEigen::new(r.clone());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut t = DMatrix::zeros(m, m);
    let mut lambda = DVector::zeros(m);
    for (col, &src) in order.iter().enumerate() {
        let value = eig.eigenvalues[src];
        if value < -NEGATIVE_EIGEN_TOL {
            return Err(ModelError::NotPositiveSemidefinite(value));
        }
        lambda[col] = value.max(0.0);
        let mut v = eig.eigenvectors.column(src).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        t.set_column(col, &v);
    }
    let beta_max = lambda.max();
    Ok(SpectralModel { t, lambda, beta_max })
}

/// Noise variance that yields `snr_db` for signal power `w_oᵀ R w_o`.
pub fn snr_to_noise_variance(
    snr_db: f64,
    w_o: &DVector<f64>,
    r: &DMatrix<f64>,
) -> Result<f64, ModelError> {
    let power = w_o.dot(&(r * w_o));
    if !(power > 0.0) {
        return Err(ModelError::ZeroSignalPower);
    }
    Ok(power / 10f64.powf(snr_db / 10.0))
}

/// Unit-norm vector with equal entries, the default unknown system.
pub fn unit_ones(m: usize) -> DVector<f64> {
    DVector::from_element(m, 1.0 / (m as f64).sqrt())
}

/// One observation of the identification problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub u: Vec<T>,
    pub d: T,
    pub v: T,
}

/// The unknown system together with input and noise statistics.
#[derive(Debug, Clone)]
pub struct SystemModel {
    w_o: DVector<f64>,
    sigma_v2: f64,
    cov_spec: CovarianceSpec,
    value_field: ValueField,
    covariance: DMatrix<f64>,
    spectral: SpectralModel,
    // Row-major copy of T·diag(√λ), so u = (factor·g)ᵀ has covariance R_u.
    factor: Vec<f64>,
}

impl SystemModel {
    pub fn new(
        w_o: DVector<f64>,
        sigma_v2: f64,
        cov_spec: CovarianceSpec,
        value_field: ValueField,
    ) -> Result<Self, ModelError> {
        let m = w_o.len();
        if m == 0 {
            return Err(ModelError::EmptySystem);
        }
        if w_o.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteSystem);
        }
        if !(sigma_v2.is_finite() && sigma_v2 >= 0.0) {
            return Err(ModelError::InvalidNoiseVariance(sigma_v2));
        }
        let covariance = build_covariance(&cov_spec, m)?;
        let spectral = spectral_decompose(&covariance)?;
        let root = &spectral.t * DMatrix::from_diagonal(&spectral.lambda.map(f64::sqrt));
        let factor = (0..m)
            .flat_map(|j| (0..m).map(move |k| (j, k)))
            .map(|(j, k)| root[(j, k)])
            .collect();
        Ok(Self {
            w_o,
            sigma_v2,
            cov_spec,
            value_field,
            covariance,
            spectral,
            factor,
        })
    }

    /// Builds a model whose noise variance is set from an SNR in dB.
    pub fn with_snr(
        w_o: DVector<f64>,
        snr_db: f64,
        cov_spec: CovarianceSpec,
        value_field: ValueField,
    ) -> Result<Self, ModelError> {
        let r = build_covariance(&cov_spec, w_o.len())?;
        let sigma_v2 = snr_to_noise_variance(snr_db, &w_o, &r)?;
        Self::new(w_o, sigma_v2, cov_spec, value_field)
    }

    pub fn dim(&self) -> usize {
        self.w_o.len()
    }
    pub fn w_o(&self) -> &DVector<f64> {
        &self.w_o
    }
    pub fn sigma_v2(&self) -> f64 {
        self.sigma_v2
    }
    pub fn cov_spec(&self) -> &CovarianceSpec {
        &self.cov_spec
    }
    pub fn value_field(&self) -> ValueField {
        self.value_field
    }
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
    pub fn spectral(&self) -> &SpectralModel {
        &self.spectral
    }

    /// Infinite, seeded stream of samples over field `T`.
    ///
    /// The stream is a pure function of `(self, seed)`. `T` is normally the
    /// type matching [`SystemModel::value_field`].
    pub fn stream<T: FieldScalar>(&self, seed: u64) -> SampleStream<'_, T> {
        SampleStream {
            model: self,
            rng: ChaCha8Rng::seed_from_u64(seed),
            w_o: self.w_o.iter().map(|&x| T::from_real(x)).collect(),
            noise_std: self.sigma_v2.sqrt(),
            scratch: vec![T::default(); self.dim()],
        }
    }
}

/// Iterator over independent samples of one model.
pub struct SampleStream<'a, T> {
    model: &'a SystemModel,
    rng: ChaCha8Rng,
    w_o: Vec<T>,
    noise_std: f64,
    scratch: Vec<T>,
}

impl<T: FieldScalar> SampleStream<'_, T> {
    /// Draws the next sample into `out`, reusing its buffer.
    pub fn next_into(&mut self, out: &mut Sample<T>) {
        let m = self.w_o.len();
        for g in self.scratch.iter_mut() {
            *g = T::standard_gaussian(&mut self.rng);
        }
        out.u.resize(m, T::default());
        for (j, u) in out.u.iter_mut().enumerate() {
            let row = &self.model.factor[j * m..(j + 1) * m];
            let mut acc = T::default();
            for (&f, &g) in row.iter().zip(&self.scratch) {
                acc += g.scale(f);
            }
            *u = acc;
        }
        let v = T::standard_gaussian(&mut self.rng).scale(self.noise_std);
        let mut d = v;
        for (&u, &w) in out.u.iter().zip(&self.w_o) {
            d += u * w;
        }
        out.d = d;
        out.v = v;
    }
}

impl<T: FieldScalar> Iterator for SampleStream<'_, T> {
    type Item = Sample<T>;

    fn next(&mut self) -> Option<Sample<T>> {
        let mut s = Sample {
            u: Vec::with_capacity(self.w_o.len()),
            d: T::default(),
            v: T::default(),
        };
        self.next_into(&mut s);
        Some(s)
    }
}

/// Collects the first `n` samples of the seeded stream.
pub fn generate_stream<T: FieldScalar>(model: &SystemModel, seed: u64, n: usize) -> Vec<Sample<T>> {
    model.stream(seed).take(n).collect()
}
