//! Column orthonormalization, the `Π_Orth` projection of Oja's update.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// A column `j` counts as dependent once its residual after removing the
/// previous columns falls below this fraction of the largest column norm.
const RANK_TOL: f64 = 1e-12;

/// Which orthogonalizer backs [`orthonormalize_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orthogonalizer {
    #[default]
    Householder,
    GramSchmidt,
}

/// Orthonormal basis of the column span of `u` (`m × r`, `m ≥ r`).
///
/// Householder QR with the triangular factor's diagonal made positive, so the
/// result is unique and orthonormal input comes back unchanged.
///
/// ```
/// use streampca::linalg::{orthonormalize, Matrix};
/// let u = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
/// let q = orthonormalize(&u).unwrap();
/// assert!((q[(0, 0)] - 0.6).abs() < 1e-15 && (q[(1, 0)] - 0.8).abs() < 1e-15);
/// ```
pub fn orthonormalize(u: &Matrix) -> Result<Matrix> {
    householder(u)
}

pub fn orthonormalize_with(u: &Matrix, method: Orthogonalizer) -> Result<Matrix> {
    match method {
        Orthogonalizer::Householder => householder(u),
        Orthogonalizer::GramSchmidt => gram_schmidt(u),
    }
}

fn check_shape(u: &Matrix) -> Result<()> {
    let (m, r) = u.shape();
    if r == 0 || m < r {
        return Err(Error::Shape(format!("orthonormalize needs m ≥ r ≥ 1, got {m}x{r}")));
    }
    u.check_finite()
}

fn largest_column_norm(u: &Matrix) -> f64 {
    (0..u.cols())
        .map(|j| (0..u.rows()).map(|i| u[(i, j)] * u[(i, j)]).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn householder(u: &Matrix) -> Result<Matrix> {
    check_shape(u)?;
    let (m, r) = u.shape();
    let scale = largest_column_norm(u);
    let mut a = u.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut diag_sign = vec![1.0; r];

    for k in 0..r {
        let norm = (k..m).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if !(norm > RANK_TOL * scale) {
            return Err(Error::RankDeficient { column: k });
        }
        let x0 = a[(k, k)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        // v = x − αe₁, normalized
        let mut v: Vec<f64> = (k..m).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= vnorm);

        for j in k..r {
            let proj: f64 = v.iter().enumerate().map(|(t, vt)| vt * a[(k + t, j)]).sum();
            for (t, vt) in v.iter().enumerate() {
                a[(k + t, j)] -= 2.0 * vt * proj;
            }
        }
        diag_sign[k] = alpha.signum();
        reflectors.push(v);
    }

    // Q = H₀H₁⋯H_{r−1}[I_r; 0]
    let mut q = Matrix::zeros(m, r);
    for j in 0..r {
        q[(j, j)] = 1.0;
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        for j in 0..r {
            let proj: f64 = v.iter().enumerate().map(|(t, vt)| vt * q[(k + t, j)]).sum();
            if proj != 0.0 {
                for (t, vt) in v.iter().enumerate() {
                    q[(k + t, j)] -= 2.0 * vt * proj;
                }
            }
        }
    }
    for (j, &s) in diag_sign.iter().enumerate() {
        if s < 0.0 {
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
fn gram_schmidt(u: &Matrix) -> Result<Matrix> {
    check_shape(u)?;
    let (m, r) = u.shape();
    let scale = largest_column_norm(u);
    let mut q = u.clone();
    for j in 0..r {
        for _pass in 0..2 {
            for p in 0..j {
                let proj: f64 = (0..m).map(|i| q[(i, p)] * q[(i, j)]).sum();
                for i in 0..m {
                    q[(i, j)] -= proj * q[(i, p)];
                }
            }
        }
        let norm = (0..m).map(|i| q[(i, j)] * q[(i, j)]).sum::<f64>().sqrt();
        if !(norm > RANK_TOL * scale) {
            return Err(Error::RankDeficient { column: j });
        }
        for i in 0..m {
            q[(i, j)] /= norm;
        }
    }
    Ok(q)
}
