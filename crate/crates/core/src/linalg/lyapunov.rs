use super::matrix::Matrix;
use crate::error::{Error, Result};

const SERIES_TOL: f64 = 1e-14;
const DECAY_PROBE: usize = 64;
const MAX_DOUBLINGS: usize = 64;

/// Stationary covariance `Σ = Σ_{i≥0} Aⁱ S (Aᵀ)ⁱ`, the solution of
/// `Σ = A Σ Aᵀ + S` for a contractive `A`.
///
/// The series is summed in doubling blocks (`Σ ← Σ + P Σ Pᵀ`, `P ← P²`), which
/// adds terms `2ʲ..2ʲ⁺¹` at step `j`; summation stops once a block contributes
/// less than `1e-14·‖S‖_F`.
///
/// ```
/// use streampca::linalg::{lyapunov_stationary, Matrix};
/// let sigma = lyapunov_stationary(&Matrix::diag(&[0.5]), &Matrix::diag(&[1.0])).unwrap();
/// assert!((sigma[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
/// ```
pub fn lyapunov_stationary(a: &Matrix, s: &Matrix) -> Result<Matrix> {
    check_inputs(a, s)?;
    let s_norm = s.frobenius_norm();
    if s_norm == 0.0 {
        return Ok(Matrix::zeros(s.rows(), s.cols()));
    }
    let mut sigma = s.symmetrize();
    let mut power = a.clone();
    for _ in 0..MAX_DOUBLINGS {
        let block = power.matmul(&sigma).matmul(&power.transpose());
        let inc = block.frobenius_norm();
        sigma.axpy(1.0, &block);
        if inc < SERIES_TOL * s_norm {
            return Ok(sigma.symmetrize());
        }
        power = power.matmul(&power);
    }
    Err(Error::NotContractive { power: usize::MAX, norm: power.frobenius_norm() })
}

/// Checks that `‖Aᵏ‖_F` is still shrinking between `k = 32` and `k = 64`,
/// which fails for spectral radius ≥ 1.
pub fn check_contractive(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Shape(format!("coefficient matrix must be square, got {:?}", a.shape())));
    }
    a.check_finite()?;
    let mut p = a.clone();
    let mut half = f64::NAN;
    for k in 2..=DECAY_PROBE {
        p = p.matmul(a);
        if k == DECAY_PROBE / 2 {
            half = p.frobenius_norm();
        }
    }
    let full = p.frobenius_norm();
    if !full.is_finite() || (full > 0.0 && full >= half) {
        return Err(Error::NotContractive { power: DECAY_PROBE, norm: full });
    }
    Ok(())
}

fn check_inputs(a: &Matrix, s: &Matrix) -> Result<()> {
    check_contractive(a)?;
    if s.shape() != a.shape() {
        return Err(Error::Shape(format!("S is {:?} but A is {:?}", s.shape(), a.shape())));
    }
    s.check_finite()?;
    let asym = s.asymmetry();
    if asym > 1e-10 {
        return Err(Error::Asymmetric(asym));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficients_give_noise_covariance() {
        let s = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_eq!(lyapunov_stationary(&Matrix::zeros(2, 2), &s).unwrap(), s);
    }

    #[test]
    fn scalar_geometric_series() {
        let sigma = lyapunov_stationary(&Matrix::diag(&[0.5]), &Matrix::diag(&[1.0])).unwrap();
        assert!((sigma[(0, 0)] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn residual_on_non_normal_coefficients() {
        let a = Matrix::from_rows(&[vec![0.5, 0.9], vec![0.0, 0.6]]).unwrap();
        let s = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.5]]).unwrap();
        let sigma = lyapunov_stationary(&a, &s).unwrap();
        let resid = a.matmul(&sigma).matmul(&a.transpose()).add(&s).sub(&sigma);
        assert!(resid.frobenius_norm() <= 1e-10 * s.frobenius_norm());
    }

    #[test]
    fn unit_spectral_radius_is_rejected() {
        let rot = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            lyapunov_stationary(&rot, &Matrix::identity(2)),
            Err(Error::NotContractive { .. })
        ));
        assert!(lyapunov_stationary(&Matrix::diag(&[1.01]), &Matrix::diag(&[1.0])).is_err());
    }

    #[test]
    fn asymmetric_noise_is_rejected() {
        let s = Matrix::from_rows(&[vec![1.0, 0.3], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            lyapunov_stationary(&Matrix::zeros(2, 2), &s),
            Err(Error::Asymmetric(_))
        ));
    }
}
