use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{singular_values, sym_eig, Matrix, SpectralTruth};

const ORTHONORMAL_TOL: f64 = 1e-8;

/// Principal angles between two column spans and, for frames measured in
/// the eigenbasis, the squared alignments `γ_i²` with the trailing directions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleSet {
    /// Non-decreasing, in `[0, π/2]`.
    pub thetas: Vec<f64>,
    /// `γ_i² = ‖e_iᵀ Ū‖²` for `i = r+1..m`; empty for plain angle queries.
    pub gamma_sq: Vec<f64>,
    /// `‖e_rᵀ Ū‖²`, the alignment with the last wanted direction.
    pub gamma_r_sq: f64,
    /// `‖sin Θ‖_F²`, equal to `Σ_{i>r} γ_i²` for eigenbasis frames.
    pub tail_sum: f64,
}

/// Principal angles `arccos σ_i(UᵀV)` between `span U` (`m×r1`) and `span V`
/// (`m×r2`), `r1 ≤ r2`.
pub fn principal_angles(u: &Matrix, v: &Matrix) -> Result<AngleSet> {
    if u.rows() != v.rows() || u.cols() > v.cols() {
        return Err(Error::Shape(format!("need m×r1 and m×r2 with r1 ≤ r2, got {:?} and {:?}", u.shape(), v.shape())));
    }
    for w in [u, v] {
        let d = w.orthonormality_defect();
        if d > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(d));
        }
    }
    let vtu = v.tr_matmul(u);
    let cos = singular_values(&vtu)?;
    let sin = singular_values(&u.sub(&v.matmul(&vtu)))?;
    let thetas = combine_angles(&cos, &sin, u.cols());
    let tail_sum = thetas.iter().map(|t| t.sin().powi(2)).sum();
    Ok(AngleSet { thetas, gamma_sq: Vec::new(), gamma_r_sq: f64::NAN, tail_sum })
}

/// Angles from descending cosines and sines: `asin` below `π/4`, `acos` above,
/// so small and near-right angles both keep full precision.
fn combine_angles(cos: &[f64], sin: &[f64], count: usize) -> Vec<f64> {
    let mut sin: Vec<f64> = sin.to_vec();
    if sin.len() < count {
        sin.resize(count, 0.0);
    }
    sin.sort_by(f64::total_cmp);
    let mut thetas: Vec<f64> = (0..count)
        .map(|k| {
            let c = cos.get(k).copied().unwrap_or(0.0).clamp(0.0, 1.0);
            match sin.get(k) {
                Some(&s) if c * c >= 0.5 => s.clamp(0.0, 1.0).asin(),
                _ => c.acos(),
            }
        })
        .collect();
    thetas.sort_by(f64::total_cmp);
    thetas
}

/// Alignment of an eigenbasis frame `Ū = RᵀU` with the top-`r` eigenspace.
pub fn gamma_tail(u_bar: &Matrix, r: usize) -> AngleSet {
    let m = u_bar.rows();
    assert!(r >= 1 && r <= m && u_bar.cols() == r, "frame must be m×r");
    let row_sq = |i: usize| u_bar.row(i).iter().map(|x| x * x).sum::<f64>();
    let gamma_sq: Vec<f64> = (r..m).map(row_sq).collect();
    let tail_sum = gamma_sq.iter().sum();
    let cos = singular_values(&u_bar.row_block(0, r)).expect("finite frame");
    let sin = if r < m { singular_values(&u_bar.row_block(r, m)).expect("finite frame") } else { Vec::new() };
    AngleSet { thetas: combine_angles(&cos, &sin, r), gamma_sq, gamma_r_sq: row_sq(r - 1), tail_sum }
}

/// Upper bounds `γ̃_i² = ‖e_iᵀ Ū (E_rᵀŪ)⁻¹‖²` for `i = r+1..m`.
pub fn gamma_tilde(u_bar: &Matrix, r: usize) -> Result<Vec<f64>> {
    let top = u_bar.row_block(0, r);
    let smin = singular_values(&top)?.last().copied().unwrap_or(0.0);
    if !(smin > 1e-10) {
        return Err(Error::SingularTopBlock(smin));
    }
    let inv = invert(&top)?;
    Ok((r..u_bar.rows())
        .map(|i| inv.vecmat(u_bar.row(i)).iter().map(|x| x * x).sum())
        .collect())
}

/// Gauss–Jordan inverse with partial pivoting.
fn invert(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut w = a.clone();
    let mut inv = Matrix::identity(n);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| w[(i, c)].abs().total_cmp(&w[(j, c)].abs())).unwrap();
        if w[(p, c)] == 0.0 {
            return Err(Error::SingularTopBlock(0.0));
        }
        if p != c {
            swap_rows(&mut w, p, c);
            swap_rows(&mut inv, p, c);
        }
        let d = w[(c, c)];
        for j in 0..n {
            w.as_mut_slice()[c * n + j] /= d;
            inv.as_mut_slice()[c * n + j] /= d;
        }
        for i in (0..n).filter(|&i| i != c) {
            let f = w[(i, c)];
            if f != 0.0 {
                for j in 0..n {
                    let (wc, ic) = (w[(c, j)], inv[(c, j)]);
                    w.as_mut_slice()[i * n + j] -= f * wc;
                    inv.as_mut_slice()[i * n + j] -= f * ic;
                }
            }
        }
    }
    Ok(inv)
}

fn swap_rows(a: &mut Matrix, i: usize, j: usize) {
    let n = a.cols();
    let s = a.as_mut_slice();
    for k in 0..n {
        s.swap(i * n + k, j * n + k);
    }
}

/// Rescaled coordinates `ζ_ij = η^{-1/2} e'_jᵀ Q Ūᵀ e_i`, where
/// `Ū(0)ᵀ Λ Ū(0) = Qᵀ Λ̃ Q` diagonalizes the reference frame.
#[derive(Clone, Debug, Serialize)]
pub struct ZetaCoordinates {
    /// Orthogonal `r×r`; row `j` is the `j`-th Ritz vector of `Ū(0)`.
    pub q: Matrix,
    /// `Λ̃`, non-increasing.
    pub ritz_values: Vec<f64>,
    /// `m×r`, entry `(i, j)` is `ζ_{i+1, j+1}`.
    pub zeta: Matrix,
    pub eta: f64,
}

impl ZetaCoordinates {
    /// `ζ_ij` with 1-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.zeta[(i - 1, j - 1)]
    }
}

/// Rotation `Q` (and Ritz values) fixed by the reference frame `Ū(0)`.
pub fn zeta_basis(u_bar0: &Matrix, truth: &SpectralTruth) -> Result<(Matrix, Vec<f64>)> {
    let m = u_bar0.transpose().congruence_diag(&truth.eigvals).symmetrize();
    let eig = sym_eig(&m)?;
    Ok((eig.vectors.transpose(), eig.values))
}

pub fn zeta_transform(u_bar: &Matrix, u_bar0: &Matrix, truth: &SpectralTruth, eta: f64) -> Result<ZetaCoordinates> {
    if u_bar.shape() != u_bar0.shape() || u_bar.rows() != truth.dim() {
        return Err(Error::Shape(format!("frames {:?} and {:?} for m = {}", u_bar.shape(), u_bar0.shape(), truth.dim())));
    }
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    let (q, ritz_values) = zeta_basis(u_bar0, truth)?;
    Ok(zeta_with_basis(u_bar, q, ritz_values, eta))
}

pub(crate) fn zeta_with_basis(u_bar: &Matrix, q: Matrix, ritz_values: Vec<f64>, eta: f64) -> ZetaCoordinates {
    let zeta = u_bar.matmul(&q.transpose()).scale(eta.powf(-0.5));
    ZetaCoordinates { q, ritz_values, zeta, eta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_columns(&[v.to_vec()]).unwrap()
    }

    #[test]
    fn tiny_angles_keep_precision() {
        let eps: f64 = 1e-10;
        let u = Matrix::from_columns(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let v = Matrix::from_columns(&[vec![1.0, 0.0, 0.0], vec![0.0, eps.cos(), eps.sin()]]).unwrap();
        let thetas = principal_angles(&u, &v).unwrap().thetas;
        assert_eq!(thetas[0], 0.0);
        assert!((thetas[1] - eps).abs() < 1e-24);
        let g = gamma_tail(&v, 2);
        assert!((g.thetas[1] - eps).abs() < 1e-24);
    }

    #[test]
    fn angle_examples() {
        let e1 = col(&[1.0, 0.0]);
        assert_eq!(principal_angles(&e1, &e1).unwrap().thetas, vec![0.0]);
        let t = principal_angles(&e1, &col(&[0.0, 1.0])).unwrap().thetas[0];
        assert!((t - FRAC_PI_2).abs() < 1e-12);
        let t = principal_angles(&e1, &col(&[0.3f64.cos(), 0.3f64.sin()])).unwrap().thetas[0];
        assert!((t - 0.3).abs() < 1e-7, "{t}");
        assert!(matches!(principal_angles(&col(&[2.0, 0.0]), &e1), Err(Error::NotOrthonormal(_))));
    }

    #[test]
    fn gamma_tail_examples() {
        let opt = Matrix::identity(4).select_columns(&[0, 1]);
        let a = gamma_tail(&opt, 2);
        assert_eq!(a.tail_sum, 0.0);
        assert_eq!(a.gamma_r_sq, 1.0);
        let saddle = Matrix::identity(4).select_columns(&[0, 2]);
        let a = gamma_tail(&saddle, 2);
        assert_eq!(a.tail_sum, 1.0);
        assert_eq!(a.gamma_sq, vec![1.0, 0.0]);
        assert_eq!(a.gamma_r_sq, 0.0);
    }

    #[test]
    fn gamma_tilde_two_dimensional() {
        let th: f64 = 0.4;
        let u = col(&[th.cos(), th.sin()]);
        let gt = gamma_tilde(&u, 1).unwrap()[0];
        assert!((gt - th.tan().powi(2)).abs() < 1e-14);
        assert!(gt >= gamma_tail(&u, 1).gamma_sq[0]);
        assert_eq!(gamma_tilde(&Matrix::identity(3).select_columns(&[0]), 1).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(gamma_tilde(&col(&[0.0, 1.0]), 1), Err(Error::SingularTopBlock(_))));
    }

    #[test]
    fn inverse_round_trip() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]).unwrap();
        let inv = invert(&a).unwrap();
        assert!(a.matmul(&inv).sub(&Matrix::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn zeta_scalar_case() {
        let truth = SpectralTruth::from_sigma(Matrix::diag(&[3.0, 1.0, 0.5])).unwrap();
        let u0 = col(&[1.0, 0.0, 0.0]);
        let u = col(&[0.8, 0.6, 0.0]);
        let z = zeta_transform(&u, &u0, &truth, 0.01).unwrap();
        assert_eq!(z.q, Matrix::identity(1));
        assert!((z.get(2, 1) - 6.0).abs() < 1e-12);
        assert_eq!(z.get(3, 1), 0.0);
    }
}
