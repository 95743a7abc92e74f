//! Downsampled covariance estimates and Monte Carlo bias probes.
//!
//! Consecutive samples of an ergodic chain are correlated, so the rank-one
//! estimate `z zᵀ` built from the next sample is biased given the past. Taking
//! only every `h`-th sample lets the chain forget its state: for a VAR the
//! conditional bias shrinks like `ρ^{2h}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{singular_values, sym_eig, Matrix};
use crate::timeseries::{SampleSource, StreamHandle, StreamRng, VarModel};

/// How samples are turned into covariance estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct DownsamplePlan {
    /// Block half-length.
    pub h: usize,
    /// Known zero stationary mean: use `z zᵀ` on every `h`-th sample. Otherwise
    /// use half the outer product of a difference of samples `h` apart.
    pub zero_mean: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl DownsamplePlan {
    pub fn new(h: usize, zero_mean: bool) -> Result<Self> {
        if h == 0 {
            return Err(Error::invalid("h", "block size must be at least 1"));
        }
        Ok(Self { h, zero_mean, kappa_rho: None, tau: None })
    }

    /// `h = ⌈κ_ρ ln(1/τ)⌉`, at least 1.
    pub fn from_mixing(kappa_rho: f64, tau: f64, zero_mean: bool) -> Result<Self> {
        if !(kappa_rho > 0.0) || !kappa_rho.is_finite() {
            return Err(Error::invalid("kappa_rho", format!("must be positive, got {kappa_rho}")));
        }
        if !(tau > 0.0) {
            return Err(Error::invalid("tau", format!("must be positive, got {tau}")));
        }
        let h = (kappa_rho * (1.0 / tau).ln()).ceil().max(1.0) as usize;
        Ok(Self { h, zero_mean, kappa_rho: Some(kappa_rho), tau: Some(tau) })
    }

    /// Stream samples consumed per estimate: `h` or `2h`.
    pub fn samples_per_block(&self) -> usize {
        if self.zero_mean {
            self.h
        } else {
            2 * self.h
        }
    }
}

/// Rank-one estimate `X = scale · v vᵀ` kept in factored form.
#[derive(Clone, Debug)]
pub(crate) struct BlockSampler {
    plan: DownsamplePlan,
    v: Vec<f64>,
}

impl BlockSampler {
    pub(crate) fn new(plan: DownsamplePlan, dim: usize) -> Self {
        Self { plan, v: vec![0.0; dim] }
    }

    /// Draws the next block, adding `N(0, ε I)` to each sample used when a
    /// perturbation is given. Returns `(v, scale)` or `None` if the source ran dry.
    pub(crate) fn next<S: SampleSource + ?Sized>(
        &mut self,
        source: &mut S,
        mut perturb: Option<(&mut StreamRng, f64)>,
    ) -> Option<(&[f64], f64)> {
        let h = self.plan.h;
        if self.plan.zero_mean {
            if !source.skip(h - 1) {
                return None;
            }
            self.v.copy_from_slice(source.next_sample()?);
            if let Some((rng, eps)) = perturb.as_mut() {
                add_noise(&mut self.v, rng, *eps);
            }
            Some((&self.v, 1.0))
        } else {
            if !source.skip(h - 1) {
                return None;
            }
            self.v.copy_from_slice(source.next_sample()?);
            if let Some((rng, eps)) = perturb.as_mut() {
                add_noise(&mut self.v, rng, *eps);
            }
            if !source.skip(h - 1) {
                return None;
            }
            let later = source.next_sample()?;
            for (v, z) in self.v.iter_mut().zip(later) {
                *v = z - *v;
            }
            if let Some((rng, eps)) = perturb.as_mut() {
                add_noise(&mut self.v, rng, *eps);
            }
            Some((&self.v, 0.5))
        }
    }
}

fn add_noise(v: &mut [f64], rng: &mut StreamRng, eps: f64) {
    let sd = eps.sqrt();
    for x in v {
        *x += sd * rng.normal();
    }
}

/// Advances `stream` by one block and returns the rank-one estimate `X_s`.
///
/// ```
/// use streampca::estimator::{block_estimate, DownsamplePlan};
/// use streampca::linalg::Matrix;
/// use streampca::timeseries::{SeriesSource};
/// use std::sync::Arc;
///
/// let rows = Arc::new(vec![vec![9.0, 9.0], vec![1.0, 2.0]]);
/// let mut src = SeriesSource::new(rows);
/// let plan = DownsamplePlan::new(2, true).unwrap();
/// let x = block_estimate(&mut src, &plan).unwrap();
/// assert_eq!(x, Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap());
/// ```
pub fn block_estimate<S: SampleSource + ?Sized>(stream: &mut S, plan: &DownsamplePlan) -> Option<Matrix> {
    let mut sampler = BlockSampler::new(*plan, stream.dim());
    let (v, scale) = sampler.next(stream, None)?;
    Some(Matrix::outer(v, scale))
}

/// Exact `E[z_h z_hᵀ | z_0] − Σ = A^h z_0 z_0ᵀ (A^h)ᵀ − Σ_{i≥h} Aⁱ Γ (Aⁱ)ᵀ`.
///
/// The tail equals `A^h Σ (A^h)ᵀ` with `Σ` the stationary covariance.
pub fn var_conditional_bias(model: &VarModel, z0: &[f64], h: usize) -> Result<Matrix> {
    if z0.len() != model.dim() {
        return Err(Error::Shape(format!("z0 has length {}, model dimension is {}", z0.len(), model.dim())));
    }
    let sigma = model.stationary_covariance()?;
    let ah = matrix_power(model.coefficients(), h);
    let mean = ah.matvec(z0);
    let tail = ah.matmul(&sigma).matmul(&ah.transpose());
    Ok(Matrix::outer(&mean, 1.0).sub(&tail).symmetrize())
}

fn matrix_power(a: &Matrix, mut p: usize) -> Matrix {
    let mut result = Matrix::identity(a.rows());
    let mut base = a.clone();
    while p > 0 {
        if p & 1 == 1 {
            result = result.matmul(&base);
        }
        base = base.matmul(&base);
        p >>= 1;
    }
    result
}

#[derive(Clone, Debug, Serialize)]
pub struct BiasPoint {
    pub h: usize,
    /// `‖Σ̂_cond − Σ‖₂` from the Monte Carlo average.
    pub empirical: f64,
    /// `‖E[z_h z_hᵀ | z_0] − Σ‖₂` in closed form.
    pub closed_form: f64,
    /// `‖Ê‖₂` with `Ê = (Σ̂_cond − Σ) Σ⁻¹`; absent when `Σ` is near-singular.
    pub relative_operator_norm: Option<f64>,
    /// Largest entrywise `|empirical − closed form| / SE`.
    pub max_standard_errors: f64,
    /// Largest entrywise Monte Carlo standard error.
    pub max_se: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BiasReport {
    pub z0: Vec<f64>,
    pub n_mc: usize,
    pub seed: u64,
    pub points: Vec<BiasPoint>,
    /// Least-squares slope of `ln ‖bias‖₂` against `h`.
    pub log_slope: f64,
    /// `2 ln ρ`, the predicted asymptotic slope.
    pub predicted_slope: f64,
    pub sigma_near_singular: bool,
}

impl BiasReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Header `h,empirical,closed_form,se,log_slope`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,empirical,closed_form,se,log_slope\n");
        for p in &self.points {
            out.push_str(&format!("{},{:e},{:e},{:e},{:e}\n", p.h, p.empirical, p.closed_form, p.max_se, self.log_slope));
        }
        out
    }

    pub fn all_within(&self, n_se: f64) -> bool {
        self.points.iter().all(|p| p.max_standard_errors <= n_se)
    }
}

/// Replicates simulated per parallel work unit; fixed so results do not
/// depend on the thread count.
const CHUNK: usize = 512;

/// Monte Carlo estimate of `E[z_h z_hᵀ | z_0]` for every `h` in the grid.
///
/// Replicate `i` is one chain started at `z0`, read at each grid point, so all
/// `h` share random numbers. Replicates run in parallel in fixed chunks whose
/// sums are combined in order, making the report independent of scheduling.
pub fn bias_probe(model: &VarModel, h_grid: &[usize], n_mc: usize, z0: &[f64], seed: u64) -> Result<BiasReport> {
    if h_grid.is_empty() {
        return Err(Error::invalid("h_grid", "must not be empty"));
    }
    if h_grid.contains(&0) {
        return Err(Error::invalid("h_grid", "block sizes must be at least 1"));
    }
    if n_mc < 1000 {
        return Err(Error::invalid("n_mc", format!("need at least 1000 replicates, got {n_mc}")));
    }
    let m = model.dim();
    if z0.len() != m {
        return Err(Error::Shape(format!("z0 has length {}, model dimension is {m}", z0.len())));
    }
    let sigma = model.stationary_covariance()?;
    let mut grid: Vec<usize> = h_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let h_max = *grid.last().unwrap();
    let shared = std::sync::Arc::new(crate::timeseries::Model::from(model.clone()));

    let n_chunks = n_mc.div_ceil(CHUNK);
    let partials: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(grid.len(), m);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_mc) {
                let rng = StreamRng::for_replicate(seed, i as u64);
                let mut chain = StreamHandle::with_rng(shared.clone(), rng).starting_at(z0);
                let mut g = 0;
                for step in 1..=h_max {
                    let z = chain.step();
                    if step == grid[g] {
                        acc.add(g, z);
                        g += 1;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = Moments::new(grid.len(), m);
    for p in &partials {
        total.merge(p);
    }

    let eig = sym_eig(&sigma)?;
    let lmax = eig.values.first().copied().unwrap_or(0.0);
    let lmin = eig.values.last().copied().unwrap_or(0.0);
    let near_singular = !(lmin > 1e-10 * lmax);
    let sigma_inv = (!near_singular).then(|| eig.vectors.congruence_diag(&eig.values.iter().map(|l| 1.0 / l).collect::<Vec<_>>()));

    let n = n_mc as f64;
    let mut points = Vec::with_capacity(grid.len());
    for (g, &h) in grid.iter().enumerate() {
        let closed = var_conditional_bias(model, z0, h)?;
        let mut emp = Matrix::zeros(m, m);
        let mut max_se: f64 = 0.0;
        let mut max_ratio: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                let k = a * m + b;
                let mean = total.sum[g][k] / n;
                let var = (total.sumsq[g][k] / n - mean * mean).max(0.0) * n / (n - 1.0);
                let se = (var / n).sqrt();
                let e = mean - sigma[(a, b)];
                emp.as_mut_slice()[k] = e;
                max_se = max_se.max(se);
                let dev = (e - closed[(a, b)]).abs();
                let ratio = if se > 0.0 { dev / se } else if dev > 1e-12 { f64::INFINITY } else { 0.0 };
                max_ratio = max_ratio.max(ratio);
            }
        }
        points.push(BiasPoint {
            h,
            empirical: spectral_norm_sym(&emp)?,
            closed_form: spectral_norm_sym(&closed)?,
            relative_operator_norm: match &sigma_inv {
                Some(inv) => Some(singular_values(&emp.matmul(inv))?[0]),
                None => None,
            },
            max_standard_errors: max_ratio,
            max_se,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.h as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.empirical.max(f64::MIN_POSITIVE).ln()).collect();
    Ok(BiasReport {
        z0: z0.to_vec(),
        n_mc,
        seed,
        points,
        log_slope: least_squares_slope(&xs, &ys),
        predicted_slope: 2.0 * model.rho().ln(),
        sigma_near_singular: near_singular,
    })
}

fn spectral_norm_sym(a: &Matrix) -> Result<f64> {
    Ok(sym_eig(a)?.values.iter().fold(0.0f64, |acc, l| acc.max(l.abs())))
}

/// Slope of the ordinary least-squares line through `(x, y)`; 0 for fewer than two points.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

struct Moments {
    sum: Vec<Vec<f64>>,
    sumsq: Vec<Vec<f64>>,
}

impl Moments {
    fn new(points: usize, m: usize) -> Self {
        Self { sum: vec![vec![0.0; m * m]; points], sumsq: vec![vec![0.0; m * m]; points] }
    }

    fn add(&mut self, g: usize, z: &[f64]) {
        let m = z.len();
        for a in 0..m {
            for b in 0..m {
                let x = z[a] * z[b];
                self.sum[g][a * m + b] += x;
                self.sumsq[g][a * m + b] += x * x;
            }
        }
    }

    fn merge(&mut self, other: &Moments) {
        for (s, o) in self.sum.iter_mut().zip(&other.sum) {
            s.iter_mut().zip(o).for_each(|(a, b)| *a += b);
        }
        for (s, o) in self.sumsq.iter_mut().zip(&other.sumsq) {
            s.iter_mut().zip(o).for_each(|(a, b)| *a += b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::SeriesSource;
    use std::sync::Arc;

    fn series(rows: Vec<Vec<f64>>) -> SeriesSource {
        SeriesSource::new(Arc::new(rows))
    }

    #[test]
    fn zero_mean_block_is_outer_product_of_last_sample() {
        let mut s = series(vec![vec![5.0, 5.0], vec![1.0, 2.0]]);
        let x = block_estimate(&mut s, &DownsamplePlan::new(2, true).unwrap()).unwrap();
        assert_eq!(x.to_rows(), vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(s.remaining(), 0);
    }

    #[test]
    fn differenced_block() {
        let plan = DownsamplePlan::new(1, false).unwrap();
        let mut same = series(vec![vec![3.0, 1.0], vec![3.0, 1.0]]);
        assert_eq!(block_estimate(&mut same, &plan).unwrap(), Matrix::zeros(2, 2));
        let mut s = series(vec![vec![0.0, 7.0], vec![9.0, 9.0], vec![2.0, 7.0], vec![9.0, 9.0]]);
        let plan = DownsamplePlan::new(2, false).unwrap();
        let x = block_estimate(&mut s, &plan).unwrap();
        // samples at positions h and 2h: (9,9) and (9,9) → zero
        assert_eq!(x, Matrix::zeros(2, 2));
        let mut s = series(vec![vec![1.0, 7.0], vec![3.0, 7.0]]);
        let x = block_estimate(&mut s, &DownsamplePlan::new(1, false).unwrap()).unwrap();
        assert_eq!(x.to_rows(), vec![vec![2.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn exhausted_source_yields_nothing() {
        let mut s = series(vec![vec![1.0]]);
        assert!(block_estimate(&mut s, &DownsamplePlan::new(2, true).unwrap()).is_none());
    }

    #[test]
    fn plan_from_mixing_constant() {
        assert_eq!(DownsamplePlan::from_mixing(2.0, 0.01, true).unwrap().h, 10);
        assert_eq!(DownsamplePlan::from_mixing(1.0, 0.9, true).unwrap().h, 1);
        assert_eq!(DownsamplePlan::from_mixing(1.0, 2.0, true).unwrap().h, 1);
        assert!(DownsamplePlan::from_mixing(1.0, 0.0, true).is_err());
        assert!(DownsamplePlan::new(0, true).is_err());
        assert_eq!(DownsamplePlan::new(3, false).unwrap().samples_per_block(), 6);
    }

    #[test]
    fn scalar_bias_closed_form() {
        let model = VarModel::new(Matrix::diag(&[0.5]), Matrix::identity(1)).unwrap();
        for h in [1usize, 2, 3, 7] {
            let b = var_conditional_bias(&model, &[2.0], h).unwrap()[(0, 0)];
            let want = 0.25f64.powi(h as i32) * 8.0 / 3.0;
            assert!((b - want).abs() < 1e-14, "h={h}: {b} vs {want}");
        }
        let far = var_conditional_bias(&model, &[2.0], 64).unwrap();
        assert!(far.frobenius_norm() <= 1e-12);
    }

    #[test]
    fn independent_chain_is_unbiased() {
        let model = VarModel::new(Matrix::zeros(2, 2), Matrix::identity(2)).unwrap();
        assert_eq!(var_conditional_bias(&model, &[3.0, -1.0], 1).unwrap(), Matrix::zeros(2, 2));
    }

    #[test]
    fn matrix_power_by_squaring() {
        let a = Matrix::from_rows(&[vec![0.5, 0.1], vec![0.0, 0.3]]).unwrap();
        let mut direct = Matrix::identity(2);
        for _ in 0..5 {
            direct = direct.matmul(&a);
        }
        assert!(matrix_power(&a, 5).sub(&direct).max_abs() < 1e-15);
        assert_eq!(matrix_power(&a, 0), Matrix::identity(2));
    }

    #[test]
    fn probe_validates_inputs() {
        let model = VarModel::new(Matrix::diag(&[0.5]), Matrix::identity(1)).unwrap();
        assert!(bias_probe(&model, &[], 1000, &[1.0], 0).is_err());
        assert!(bias_probe(&model, &[1], 999, &[1.0], 0).is_err());
        assert!(bias_probe(&model, &[0], 1000, &[1.0], 0).is_err());
    }

    #[test]
    fn probe_is_deterministic_and_csv_shaped() {
        let model = VarModel::new(Matrix::diag(&[0.5]), Matrix::identity(1)).unwrap();
        let a = bias_probe(&model, &[2, 1], 2000, &[2.0], 3).unwrap();
        let b = bias_probe(&model, &[1, 2], 2000, &[2.0], 3).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let csv = a.to_csv();
        assert!(csv.starts_with("h,empirical,closed_form"));
        assert_eq!(csv.lines().count(), 3);
    }
}
