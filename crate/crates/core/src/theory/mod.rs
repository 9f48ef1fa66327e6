//! Mean and mean-square analysis of VSS-LMS under the independence and
//! asymptotic step-size independence assumptions.
//!
//! Everything is expressed in the eigenbasis of `R_u`: `w̄(i) = T* w̃(i)`.
//! For a diagonal weighting with diagonal `σ`,
//!
//! ```text
//! E‖w̄(i+1)‖²_σ = E‖w̄(i)‖²_{F(i)σ} + σ_v² E[μ²(i)] λᵀσ
//! F(i)         = I − 2E[μ(i)]Λ + E[μ²(i)](Λ² + λλᵀ)
//! ```
//!
//! `σ = 1` gives the MSD and `σ = λ` the EMSE `ζ(i)`. The step-size moments
//! `E[μ(i)]`, `E[μ²(i)]` come from [`moments`]; [`transient`] couples the two
//! and [`steady`] solves the fixed point.

pub mod moments;
pub mod steady;
pub mod transient;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::model::SpectralModel;
use crate::rules::RuleError;

pub use moments::{moment_advance, MomentAux, MomentState, Mu2Mode};
pub use steady::{
    closed_form_mu, fixed_point_mu, steady_state_msd_emse, steady_state_mu, SteadyState,
    SteadyStateMode,
};
pub use transient::{
    covariance_advance, paper_transient_advance, transient_curve, Engine, PaperForm, TheoryCurve,
    TheoryState, TransientEngine, TransientOptions,
};

/// Theory trajectories above this MSD are reported as divergent.
pub const DIVERGENCE_MSD: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("input covariance is zero, no stability bound exists")]
    ZeroCovariance,
    #[error("length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least one iteration")]
    NoIterations,
    #[error("theoretical MSD diverged at iteration {iteration} (MSD = {msd:e})")]
    Diverged { iteration: usize, msd: f64 },
    #[error("steady state is mean-square unstable (spectral radius of F_ss = {radius})")]
    Unstable { radius: f64 },
    #[error("step-size fixed point did not converge within {iterations} iterations")]
    NonConvergent { iterations: usize },
}

/// `E[w̄(i)]` for `i = 0..=n`, from `E[w̄(i+1)] = (I − E[μ(i)]Λ)E[w̄(i)]`
/// with `E[w̄(0)] = T* w_o`.
pub fn mean_trajectory(
    spectral: &SpectralModel,
    e_mu_series: &[f64],
    w_o: &DVector<f64>,
    n: usize,
) -> Result<Vec<DVector<f64>>, TheoryError> {
    if e_mu_series.len() != n {
        return Err(TheoryError::DimensionMismatch {
            expected: n,
            got: e_mu_series.len(),
        });
    }
    if w_o.len() != spectral.dim() {
        return Err(TheoryError::DimensionMismatch {
            expected: spectral.dim(),
            got: w_o.len(),
        });
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut cur = spectral.rotate(w_o);
    out.push(cur.clone());
    for &mu in e_mu_series {
        cur.iter_mut()
            .zip(spectral.lambda.iter())
            .for_each(|(w, &l)| *w *= 1.0 - mu * l);
        out.push(cur.clone());
    }
    Ok(out)
}

/// Mean stability requires `0 < E[μ(i)] < 2/β_max`; returns `2/β_max`.
pub fn mean_stability_bound(spectral: &SpectralModel) -> Result<f64, TheoryError> {
    if spectral.beta_max > 0.0 {
        Ok(2.0 / spectral.beta_max)
    } else {
        Err(TheoryError::ZeroCovariance)
    }
}

/// `F = I − 2E[μ]Λ + E[μ²](Λ² + λλᵀ)`.
pub fn f_matrix(e_mu: f64, e_mu2: f64, lambda: &DVector<f64>) -> DMatrix<f64> {
    let m = lambda.len();
    let mut f = DMatrix::zeros(m, m);
    fill_f_matrix(&mut f, e_mu, e_mu2, lambda);
    f
}

pub(crate) fn fill_f_matrix(f: &mut DMatrix<f64>, e_mu: f64, e_mu2: f64, lambda: &DVector<f64>) {
    let m = lambda.len();
    for k in 0..m {
        for j in 0..m {
            f[(j, k)] = e_mu2 * lambda[j] * lambda[k];
        }
        let l = lambda[k];
        f[(k, k)] += 1.0 - 2.0 * e_mu * l + e_mu2 * l * l;
    }
}

/// Largest eigenvalue magnitude of a square matrix.
pub fn spectral_radius(f: &DMatrix<f64>) -> f64 {
    assert!(f.is_square(), "spectral radius of a non-square matrix");
    if f.nrows() == 0 {
        return 0.0;
    }
    let scale = f.amax().max(1.0);
    if (f - f.transpose()).amax() <= 1e-12 * scale {
        SymmetricEigen::new(f.clone())
            .eigenvalues
            .iter()
            .fold(0.0f64, |r, v| r.max(v.abs()))
    } else {
        f.complex_eigenvalues()
            .iter()
            .fold(0.0f64, |r, v| r.max(v.norm()))
    }
}

/// Mean-square stability of the recursion `s ← Fᵀs + c`: stable iff every
/// eigenvalue of `F` lies strictly inside the unit circle.
pub fn ms_stability_check(f: &DMatrix<f64>) -> (bool, f64) {
    let radius = spectral_radius(f);
    (radius < 1.0, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spectral_decompose;
    use approx::assert_relative_eq;

    fn white(m: usize, variance: f64) -> SpectralModel {
        spectral_decompose(&(DMatrix::identity(m, m) * variance)).unwrap()
    }

    #[test]
    fn zero_step_mean_is_constant() {
        let s = white(3, 1.0);
        let w = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let traj = mean_trajectory(&s, &[0.0; 5], &w, 5).unwrap();
        assert_eq!(traj.len(), 6);
        assert!(traj.iter().all(|v| *v == traj[0]));
    }

    #[test]
    fn scalar_mean_halves() {
        let s = white(1, 1.0);
        let w = DVector::from_vec(vec![1.0]);
        let traj = mean_trajectory(&s, &[0.5; 10], &w, 10).unwrap();
        for (i, v) in traj.iter().enumerate() {
            assert_relative_eq!(v[0], 0.5f64.powi(i as i32), max_relative = 1e-15);
        }
    }

    #[test]
    fn mean_at_bound_oscillates() {
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let s = spectral_decompose(&r).unwrap();
        let bound = mean_stability_bound(&s).unwrap();
        let w = DVector::from_vec(vec![1.0, 1.0]);
        let traj = mean_trajectory(&s, &[bound; 8], &w, 8).unwrap();
        for (i, v) in traj.iter().enumerate() {
            // β_max mode: factor 1 − 2 = −1 each step.
            assert_relative_eq!(v[0], if i % 2 == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn mean_trajectory_rejects_length_mismatch() {
        let s = white(2, 1.0);
        let w = DVector::zeros(2);
        assert!(mean_trajectory(&s, &[0.1; 3], &w, 4).is_err());
    }

    #[test]
    fn stability_bounds() {
        assert_eq!(mean_stability_bound(&white(4, 1.0)).unwrap(), 2.0);
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        assert_eq!(mean_stability_bound(&spectral_decompose(&r).unwrap()).unwrap(), 0.5);
        assert_eq!(mean_stability_bound(&white(3, 2.0)).unwrap(), 1.0);
        let zero = spectral_decompose(&DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(mean_stability_bound(&zero), Err(TheoryError::ZeroCovariance));
    }

    #[test]
    fn f_matrix_cases() {
        let l2 = DVector::from_element(2, 1.0);
        assert_eq!(f_matrix(0.0, 0.0, &l2), DMatrix::identity(2, 2));
        let mu = 0.3;
        let f1 = f_matrix(mu, mu * mu, &DVector::from_element(1, 1.0));
        assert_relative_eq!(f1[(0, 0)], 1.0 - 2.0 * mu + 2.0 * mu * mu, max_relative = 1e-15);
        let f = f_matrix(0.1, 0.01, &l2);
        let expected = DMatrix::from_row_slice(2, 2, &[0.82, 0.01, 0.01, 0.82]);
        assert!((f - expected).amax() < 1e-15);
    }

    #[test]
    fn ms_stability_cases() {
        assert_eq!(ms_stability_check(&DMatrix::identity(3, 3)), (false, 1.0));
        let lambda = DVector::from_element(4, 1.0);
        let (ok, r) = ms_stability_check(&f_matrix(0.002, 0.002 * 0.002, &lambda));
        assert!(ok);
        assert_relative_eq!(r, 1.0 - 2.0 * 0.002 + 5.0 * 0.002 * 0.002, max_relative = 1e-12);
        let (ok, r) = ms_stability_check(&f_matrix(0.5, 0.25, &lambda));
        assert!(!ok);
        assert_relative_eq!(r, 1.25, max_relative = 1e-12);
    }

    #[test]
    fn radius_of_nonsymmetric_matrix() {
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.5, 0.0]);
        assert_relative_eq!(spectral_radius(&f), 1.0, max_relative = 1e-12);
    }
}
