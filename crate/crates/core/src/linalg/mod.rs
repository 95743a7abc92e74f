//! Small dense linear algebra: the kernels everything else is built on.

mod eigen;
mod lyapunov;
mod matrix;
mod qr;

pub use eigen::{singular_values, sym_eig, SymEigen};
pub use lyapunov::{check_contractive, lyapunov_stationary};
pub use matrix::{dot, norm2, Matrix};
pub use qr::{orthonormalize, orthonormalize_with, Orthogonalizer};

use serde::Serialize;

use crate::error::{Error, Result};

/// A covariance `Σ = R Λ Rᵀ` together with its eigendecomposition.
///
/// All diagnostics are measured in the eigenbasis `R`, so this is the ground
/// truth a run is compared against.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralTruth {
    pub sigma: Matrix,
    /// `λ₁ ≥ … ≥ λ_m`
    pub eigvals: Vec<f64>,
    /// Orthogonal `R`, columns ordered like `eigvals`.
    pub eigvecs: Matrix,
}

impl SpectralTruth {
    pub fn from_sigma(sigma: Matrix) -> Result<Self> {
        let eig = sym_eig(&sigma)?;
        let truth = Self { sigma, eigvals: eig.values, eigvecs: eig.vectors };
        truth.validate()?;
        Ok(truth)
    }

    /// Stationary covariance of `z ← A z + ε`, `ε ~ N(0, S)`.
    pub fn from_var(a: &Matrix, noise_cov: &Matrix) -> Result<Self> {
        Self::from_sigma(lyapunov_stationary(a, noise_cov)?)
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    /// `λ_r − λ_{r+1}` (1-based `r`).
    pub fn eigengap(&self, r: usize) -> f64 {
        self.eigvals[r - 1] - self.eigvals[r]
    }

    /// `Ū = Rᵀ U`, the frame expressed in the eigenbasis.
    pub fn rotate(&self, u: &Matrix) -> Matrix {
        self.eigvecs.tr_matmul(u)
    }

    fn validate(&self) -> Result<()> {
        let recon = self.eigvecs.congruence_diag(&self.eigvals);
        let scale = self.sigma.frobenius_norm();
        let err = recon.sub(&self.sigma).frobenius_norm();
        if err > 1e-8 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::invalid("sigma", format!("reconstruction error {err:.3e}")));
        }
        let defect = self.eigvecs.orthonormality_defect();
        if defect > 1e-10 {
            return Err(Error::NotOrthonormal(defect));
        }
        Ok(())
    }
}
