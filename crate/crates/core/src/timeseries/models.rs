use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::rng::StreamRng;
use crate::error::{Error, Result};
use crate::linalg::{check_contractive, lyapunov_stationary, singular_values, Matrix};

/// Gaussian vector autoregression `z_{k+1} = A z_k + ε_k`, `ε_k ~ N(0, Γ)`.
#[derive(Clone, Debug)]
pub struct VarModel {
    a: Matrix,
    noise_cov: Matrix,
    noise_factor: Matrix,
    rho: f64,
}

impl VarModel {
    /// Validates stationarity (`‖A‖₂ < 1`) and that `Γ` is symmetric PSD.
    pub fn new(a: Matrix, noise_cov: Matrix) -> Result<Self> {
        if !a.is_square() || a.shape() != noise_cov.shape() {
            return Err(Error::Shape(format!(
                "A is {:?}, Γ is {:?}; both must be m×m",
                a.shape(),
                noise_cov.shape()
            )));
        }
        let rho = singular_values(&a)?.first().copied().unwrap_or(0.0);
        if rho >= 1.0 {
            return Err(Error::invalid("a", format!("‖A‖₂ = {rho} must be below 1")));
        }
        let asym = noise_cov.asymmetry();
        if asym > 1e-10 {
            return Err(Error::Asymmetric(asym));
        }
        let noise_factor = psd_cholesky(&noise_cov)?;
        Ok(Self { a, noise_cov, noise_factor, rho })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn coefficients(&self) -> &Matrix {
        &self.a
    }

    pub fn noise_cov(&self) -> &Matrix {
        &self.noise_cov
    }

    /// `ρ = ‖A‖₂`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Mixing constant `κ_ρ = 1/(1 − ρ)` for block sizing.
    pub fn kappa(&self) -> f64 {
        1.0 / (1.0 - self.rho)
    }

    pub fn stationary_covariance(&self) -> Result<Matrix> {
        lyapunov_stationary(&self.a, &self.noise_cov)
    }

    /// `z ← A z + L ξ` with `L Lᵀ = Γ`.
    pub(crate) fn advance(&self, z: &mut [f64], rng: &mut StreamRng, scratch: &mut Vec<f64>) {
        let m = self.dim();
        scratch.resize(2 * m, 0.0);
        let (next, xi) = scratch.split_at_mut(m);
        self.a.matvec_into(z, next);
        rng.fill_normal(xi);
        for i in 0..m {
            let row = self.noise_factor.row(i);
            next[i] += row[..=i].iter().zip(&xi[..=i]).map(|(l, x)| l * x).sum::<f64>();
        }
        z.copy_from_slice(next);
    }
}

/// Lower-triangular `L` with `L Lᵀ = Γ` for a PSD `Γ`; pivots that vanish
/// (rank deficiency) leave a zero column.
fn psd_cholesky(g: &Matrix) -> Result<Matrix> {
    let n = g.rows();
    let tol = 1e-12 * g.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let d = g[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if d < -tol {
            return Err(Error::invalid("noise_cov", "matrix is not positive semidefinite"));
        }
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let s = g[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Conditional law of each GVAR coordinate given its natural parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GvarFamily {
    /// Count data, mean `exp(θ)`.
    Poisson,
    /// Binary data, mean `1/(1 + exp(−θ))`.
    Bernoulli,
    /// `N(θ, 1)`; with the same coefficients this is the VAR with `Γ = I`.
    GaussianUnitVariance,
}

/// Generalized VAR: `z^i_{k+1} | z_k ~ p(a_iᵀ z_k)`, coordinates conditionally
/// independent, natural parameter clamped to `[−c, c]`.
#[derive(Clone, Debug)]
pub struct GvarModel {
    coeffs: Matrix,
    family: GvarFamily,
    clip: f64,
}

pub const DEFAULT_NATURAL_PARAM_CLIP: f64 = 5.0;

impl GvarModel {
    pub fn new(coeffs: Matrix, family: GvarFamily, clip: f64) -> Result<Self> {
        if !coeffs.is_square() {
            return Err(Error::Shape(format!("GVAR coefficients must be m×m, got {:?}", coeffs.shape())));
        }
        if !(clip > 0.0) {
            return Err(Error::invalid("natural_param_clip", format!("must be positive, got {clip}")));
        }
        coeffs.check_finite()?;
        Ok(Self { coeffs, family, clip })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn family(&self) -> GvarFamily {
        self.family
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub(crate) fn advance(&self, z: &mut [f64], rng: &mut StreamRng, scratch: &mut Vec<f64>) {
        let m = self.dim();
        scratch.resize(m, 0.0);
        self.coeffs.matvec_into(z, scratch);
        for (zi, &theta) in z.iter_mut().zip(scratch.iter()) {
            let theta = theta.clamp(-self.clip, self.clip);
            *zi = match self.family {
                GvarFamily::Poisson => Poisson::new(theta.exp())
                    .expect("clamped rate is finite and positive")
                    .sample(rng),
                GvarFamily::Bernoulli => {
                    let p = 1.0 / (1.0 + (-theta).exp());
                    if rng.uniform() < p {
                        1.0
                    } else {
                        0.0
                    }
                }
                GvarFamily::GaussianUnitVariance => theta + rng.normal(),
            };
        }
    }
}

/// Strictly increasing coordinate link of the copula model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    Identity,
    Cube,
    Exp,
    /// `2/(1 + e^{−x}) − 1`, a sigmoid rescaled onto `(−1, 1)`.
    ScaledSigmoid,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Cube => x * x * x,
            Transform::Exp => x.exp(),
            Transform::ScaledSigmoid => 2.0 / (1.0 + (-x).exp()) - 1.0,
        }
    }
}

/// Gaussian copula VAR: a latent VAR `w_k` observed through `z^i = f_i(w^i)`.
#[derive(Clone, Debug)]
pub struct CopulaModel {
    skeleton: VarModel,
    transforms: Vec<Transform>,
}

impl CopulaModel {
    pub fn new(skeleton: VarModel, transforms: Vec<Transform>) -> Result<Self> {
        if transforms.len() != skeleton.dim() {
            return Err(Error::Shape(format!(
                "{} transforms for a {}-dimensional skeleton",
                transforms.len(),
                skeleton.dim()
            )));
        }
        Ok(Self { skeleton, transforms })
    }

    pub fn skeleton(&self) -> &VarModel {
        &self.skeleton
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn dim(&self) -> usize {
        self.skeleton.dim()
    }

    pub fn observe(&self, latent: &[f64], out: &mut [f64]) {
        for ((o, &w), f) in out.iter_mut().zip(latent).zip(&self.transforms) {
            *o = f.apply(w);
        }
    }
}

/// Any of the supported ergodic sources.
#[derive(Clone, Debug)]
pub enum Model {
    Var(VarModel),
    Gvar(GvarModel),
    Copula(CopulaModel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Var(m) => m.dim(),
            Model::Gvar(m) => m.dim(),
            Model::Copula(m) => m.dim(),
        }
    }

    pub fn as_var(&self) -> Option<&VarModel> {
        match self {
            Model::Var(m) => Some(m),
            _ => None,
        }
    }

    /// True when the stationary mean is known to be zero (VAR only), so the
    /// single-sample block estimate applies.
    pub fn zero_mean(&self) -> bool {
        matches!(self, Model::Var(_))
    }

    /// Checks the stationarity of the underlying linear recursion where one
    /// exists; the clamped GVAR is ergodic by construction.
    pub fn check_stationary(&self) -> Result<()> {
        match self {
            Model::Var(m) => check_contractive(m.coefficients()),
            Model::Copula(m) => check_contractive(m.skeleton().coefficients()),
            Model::Gvar(_) => Ok(()),
        }
    }
}

impl From<VarModel> for Model {
    fn from(m: VarModel) -> Self {
        Model::Var(m)
    }
}

impl From<GvarModel> for Model {
    fn from(m: GvarModel) -> Self {
        Model::Gvar(m)
    }
}

impl From<CopulaModel> for Model {
    fn from(m: CopulaModel) -> Self {
        Model::Copula(m)
    }
}
