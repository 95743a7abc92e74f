use serde::Serialize;

use super::config::check_index_set;
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, orthonormalize_with, Matrix, Orthogonalizer, SpectralTruth};
use crate::timeseries::StreamRng;

/// The iterate `U_s` with its iteration count `s` and samples consumed `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Frame {
    pub u: Matrix,
    pub s: u64,
    pub k: u64,
}

impl Frame {
    pub fn new(u: Matrix) -> Self {
        Self { u, s: 0, k: 0 }
    }

    pub fn dim(&self) -> usize {
        self.u.rows()
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    /// `Π(U + η·scale·v vᵀ U)` in place.
    pub(crate) fn oja_rank_one(&mut self, v: &[f64], scale: f64, eta: f64, method: Orthogonalizer) -> Result<()> {
        let w = self.u.vecmat(v);
        add_outer(&mut self.u, v, &w, eta * scale);
        self.u = orthonormalize_with(&self.u, method)?;
        self.s += 1;
        Ok(())
    }

    /// `U + η·scale·(v − U w) wᵀ` with `w = Uᵀv`, in place.
    pub(crate) fn gha_rank_one(&mut self, v: &[f64], scale: f64, eta: f64) {
        let w = self.u.vecmat(v);
        let uw = self.u.matvec(&w);
        let resid: Vec<f64> = v.iter().zip(&uw).map(|(a, b)| a - b).collect();
        add_outer(&mut self.u, &resid, &w, eta * scale);
        self.s += 1;
    }
}

fn add_outer(u: &mut Matrix, a: &[f64], b: &[f64], c: f64) {
    let r = b.len();
    let data = u.as_mut_slice();
    for (i, &ai) in a.iter().enumerate() {
        let f = c * ai;
        for (x, &bj) in data[i * r..(i + 1) * r].iter_mut().zip(b) {
            *x += f * bj;
        }
    }
}

/// Orthonormalized `m×r` Gaussian matrix.
pub fn init_random(m: usize, r: usize, seed: u64) -> Result<Frame> {
    if r < 1 || r > m {
        return Err(Error::invalid("r", format!("need 1 ≤ r ≤ m = {m}, got {r}")));
    }
    let mut rng = StreamRng::new(seed);
    let mut g = Matrix::zeros(m, r);
    rng.fill_normal(g.as_mut_slice());
    Ok(Frame::new(orthonormalize(&g)?))
}

/// Frame spanned by the eigenvectors at the given 1-based positions, plus
/// `jitter` times a Gaussian matrix, re-orthonormalized.
pub fn init_at_stationary_point(truth: &SpectralTruth, indices: &[usize], jitter: f64, seed: u64) -> Result<Frame> {
    let m = truth.dim();
    check_index_set(indices, indices.len().max(1), m)?;
    if !(jitter >= 0.0) {
        return Err(Error::invalid("jitter", "must be non-negative"));
    }
    let cols: Vec<usize> = indices.iter().map(|i| i - 1).collect();
    let mut u = truth.eigvecs.select_columns(&cols);
    if jitter > 0.0 {
        let mut rng = StreamRng::new(seed);
        let mut g = Matrix::zeros(m, cols.len());
        rng.fill_normal(g.as_mut_slice());
        u.axpy(jitter, &g);
    }
    Ok(Frame::new(orthonormalize(&u)?))
}

/// `U_{s+1} = Π(U_s + η X U_s)`.
pub fn oja_step(frame: &Frame, x: &Matrix, eta: f64) -> Result<Frame> {
    let u = orthonormalize(&frame.u.add(&x.matmul(&frame.u).scale(eta)))?;
    Ok(Frame { u, s: frame.s + 1, k: frame.k })
}

/// `U_{s+1} = U_s + η (I − U_s U_sᵀ) X U_s`.
pub fn gha_step(frame: &Frame, x: &Matrix, eta: f64) -> Frame {
    let xu = x.matmul(&frame.u);
    let proj = frame.u.matmul(&frame.u.tr_matmul(&xu));
    let u = frame.u.add(&xu.sub(&proj).scale(eta));
    Frame { u, s: frame.s + 1, k: frame.k }
}
