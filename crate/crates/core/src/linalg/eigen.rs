//! Symmetric eigendecomposition and singular values by cyclic Jacobi rotations.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const OFF_DIAG_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: Matrix,
}

/// Eigendecomposition `s = V diag(λ) Vᵀ` of a symmetric matrix.
///
/// Each eigenvector is signed so that its first non-negligible entry is
/// positive, which makes the output reproducible.
pub fn sym_eig(s: &Matrix) -> Result<SymEigen> {
    if !s.is_square() {
        return Err(Error::Shape(format!("sym_eig needs a square matrix, got {:?}", s.shape())));
    }
    s.check_finite()?;
    let asym = s.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric(asym));
    }

    let n = s.rows();
    let mut a = s.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();

    let mut converged = n <= 1 || scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        converged = off_diagonal_norm(&a) < OFF_DIAG_TOL * scale;
    }
    if !converged {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = v.select_columns(&order);
    fix_signs(&mut vectors);
    Ok(SymEigen { values, vectors })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// One Jacobi rotation zeroing `a[p][q]`, accumulated into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = a.rows();
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn fix_signs(v: &mut Matrix) {
    let n = v.rows();
    for j in 0..v.cols() {
        let col = v.column(j);
        let big = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-8 * big) {
            if *first < 0.0 {
                for i in 0..n {
                    v[(i, j)] = -v[(i, j)];
                }
            }
        }
    }
}

/// Singular values of `a`, non-increasing, by one-sided Jacobi rotations on
/// the columns of the taller orientation. Small singular values keep full
/// absolute precision, unlike square roots of Gram eigenvalues.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    a.check_finite()?;
    let (r1, r2) = a.shape();
    if r1 == 0 || r2 == 0 {
        return Ok(Vec::new());
    }
    let tall = if r1 >= r2 { a.clone() } else { a.transpose() };
    let (rows, n) = tall.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| tall.column(j)).collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = (dot(&cols[p], &cols[p]), dot(&cols[q], &cols[q]), dot(&cols[p], &cols[q]));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for i in 0..rows {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - sn * y;
                    cols[q][i] = sn * x + c * y;
                }
            }
        }
        if !rotated {
            let mut sv: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
            sv.sort_by(|x, y| y.total_cmp(x));
            return Ok(sv);
        }
    }
    Err(Error::NoConvergence(MAX_SWEEPS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_input() {
        let e = sym_eig(&Matrix::diag(&[2.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        assert_eq!(e.vectors, Matrix::identity(2));
    }

    #[test]
    fn swap_matrix_by_hand() {
        // [[0,1],[1,0]]: λ = ±1 with (1,1)/√2 and (1,−1)/√2
        let e = sym_eig(&Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.values[0] - 1.0).abs() < 1e-15 && (e.values[1] + 1.0).abs() < 1e-15);
        let want = Matrix::from_columns(&[vec![s, s], vec![s, -s]]).unwrap();
        assert!(e.vectors.sub(&want).max_abs() < 1e-15);
    }

    #[test]
    fn ascending_diagonal_is_reordered() {
        let e = sym_eig(&Matrix::diag(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(e.vectors.column(0), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn asymmetric_is_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&a), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn singular_values_by_hand() {
        assert_eq!(singular_values(&Matrix::identity(2)).unwrap(), vec![1.0, 1.0]);
        assert_eq!(singular_values(&Matrix::diag(&[3.0, 0.0])).unwrap(), vec![3.0, 0.0]);
        // AᵀA = [[1,1],[1,2]] has eigenvalues (3 ± √5)/2, i.e. φ² and φ⁻²
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let sv = singular_values(&Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap())
            .unwrap();
        assert!((sv[0] - phi).abs() < 1e-14 && (sv[1] - 1.0 / phi).abs() < 1e-14);
    }

    #[test]
    fn rectangular_singular_values() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0]]).unwrap();
        assert_eq!(singular_values(&a).unwrap(), vec![2.0, 1.0]);
        assert_eq!(singular_values(&a.transpose()).unwrap(), vec![2.0, 1.0]);
    }
}
