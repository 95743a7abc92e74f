use serde::Serialize;

use super::reference::{ou_moments, OUReference};
use crate::error::{Error, Result};
use crate::estimator::{BlockSampler, DownsamplePlan};
use crate::linalg::{Matrix, SpectralTruth};
use crate::solver::TrajectoryRecord;
use crate::timeseries::SampleSource;

/// Sample mean, unbiased variance, skewness and excess kurtosis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
}

pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let (skew, excess_kurtosis) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
    Moments { mean, var: if n > 1.0 { m2 * n / (n - 1.0) } else { 0.0 }, skew, excess_kurtosis }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsemblePoint {
    pub s: u64,
    pub t: f64,
    pub zeta: Moments,
    pub ou_mean: Option<f64>,
    pub ou_var: Option<f64>,
    pub tail_mean: f64,
    /// 5% and 95% empirical quantiles of `Σ_{i>r} γ_i²`.
    pub tail_lo: f64,
    pub tail_hi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleReport {
    pub pair: (usize, usize),
    pub replicates: usize,
    pub ou: Option<OUReference>,
    pub points: Vec<EnsemblePoint>,
}

impl EnsembleReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Header `t,mean_zeta,var_zeta,ou_mean,ou_var,tail_mean,tail_lo,tail_hi`
    /// (plus skewness and excess kurtosis).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean_zeta,var_zeta,ou_mean,ou_var,tail_mean,tail_lo,tail_hi,skew,excess_kurtosis\n");
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                p.t,
                p.zeta.mean,
                p.zeta.var,
                opt(p.ou_mean),
                opt(p.ou_var),
                p.tail_mean,
                p.tail_lo,
                p.tail_hi,
                p.zeta.skew,
                p.zeta.excess_kurtosis
            ));
        }
        out
    }

    pub fn variances(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.zeta.var).collect()
    }
}

pub const MIN_REPLICATES: usize = 30;

/// Cross-replicate statistics of one tracked `ζ_ij` at each recorded time.
///
/// `pair` must be one of the records' tracked pairs. The O-U overlay is
/// evaluated at `t − t₀`, with `t₀` the first recorded time.
pub fn ensemble_stats(records: &[TrajectoryRecord], pair: (usize, usize), ou: Option<OUReference>) -> Result<EnsembleReport> {
    if records.len() < MIN_REPLICATES {
        return Err(Error::invalid("records", format!("need at least {MIN_REPLICATES} replicates, got {}", records.len())));
    }
    let first = &records[0];
    let p = first
        .tracked_zeta
        .iter()
        .position(|&q| q == pair)
        .ok_or_else(|| Error::invalid("pair", format!("ζ{pair:?} was not tracked")))?;
    for (n, rec) in records.iter().enumerate() {
        let aligned = rec.points.len() == first.points.len()
            && rec.points.iter().zip(&first.points).all(|(a, b)| a.s == b.s)
            && rec.tracked_zeta == first.tracked_zeta;
        if !aligned {
            return Err(Error::MisalignedGrids(format!("replicate {n} differs from replicate 0")));
        }
        if rec.points.iter().any(|pt| pt.diag.is_none()) {
            return Err(Error::invalid("records", "replicates must carry diagnostics"));
        }
    }
    let t0 = first.points[0].t;
    let points = (0..first.points.len())
        .map(|k| {
            let zetas: Vec<f64> = records.iter().map(|r| r.points[k].diag.as_ref().unwrap().zeta[p]).collect();
            let mut tails: Vec<f64> = records.iter().map(|r| r.points[k].diag.as_ref().unwrap().tail_sum).collect();
            tails.sort_by(f64::total_cmp);
            let t = first.points[k].t;
            let (ou_mean, ou_var) = match &ou {
                Some(o) => {
                    let (a, b) = ou_moments(o, t - t0);
                    (Some(a), Some(b))
                }
                None => (None, None),
            };
            EnsemblePoint {
                s: first.points[k].s,
                t,
                zeta: moments(&zetas),
                ou_mean,
                ou_var,
                tail_mean: tails.iter().sum::<f64>() / tails.len() as f64,
                tail_lo: quantile(&tails, 0.05),
                tail_hi: quantile(&tails, 0.95),
            }
        })
        .collect();
    Ok(EnsembleReport { pair, replicates: records.len(), ou, points })
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Diffusion coefficients `G_ij²` at a frame: the variance over fresh blocks of
/// `e_iᵀ (I − ŪŪᵀ) X̄ Ū Qᵀ e'_j`, the noise driving `ζ_ij` per unit time.
///
/// Returns an `m×r` matrix; `q` is the `ζ` rotation of the frame.
pub fn estimate_g_sq<S: SampleSource + ?Sized>(
    source: &mut S,
    plan: DownsamplePlan,
    truth: &SpectralTruth,
    u: &Matrix,
    q: &Matrix,
    n_blocks: usize,
) -> Result<Matrix> {
    let (m, r) = u.shape();
    if n_blocks < 2 {
        return Err(Error::invalid("n_blocks", "need at least two blocks"));
    }
    let ub = truth.rotate(u);
    let ubq = ub.matmul(&q.transpose());
    let mut sampler = BlockSampler::new(plan, m);
    let mut sum = vec![0.0; m * r];
    let mut sumsq = vec![0.0; m * r];
    let mut n = 0usize;
    for _ in 0..n_blocks {
        let Some((v, scale)) = sampler.next(source, None) else { break };
        // X̄ = scale · v̄ v̄ᵀ with v̄ = Rᵀv; the increment is scale · (v̄ − Ū Ūᵀ v̄)(v̄ᵀ Ū Qᵀ)
        let vb = truth.eigvecs.vecmat(v);
        let c = ub.vecmat(&vb);
        let proj = ub.matvec(&c);
        let w = ubq.vecmat(&vb);
        for i in 0..m {
            let a = scale * (vb[i] - proj[i]);
            for j in 0..r {
                let x = a * w[j];
                sum[i * r + j] += x;
                sumsq[i * r + j] += x * x;
            }
        }
        n += 1;
    }
    if n < 2 {
        return Err(Error::invalid("source", "ran dry before two blocks"));
    }
    let nf = n as f64;
    let data = sum.iter().zip(&sumsq).map(|(s, s2)| ((s2 - s * s / nf) / (nf - 1.0)).max(0.0)).collect();
    Matrix::from_row_major(m, r, data)
}

/// Fitted drift `K` of a sampled O-U coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftEstimate {
    /// Pooled lag-one regression coefficient `φ̂`.
    pub phi: f64,
    pub phi_se: f64,
    /// `ln φ̂ / Δt`.
    pub k: f64,
    pub k_se: f64,
    pub pairs: usize,
}

/// Regresses `ζ(t + Δt)` on `ζ(t)` through the origin, pooling all replicates,
/// and converts the slope `φ = e^{KΔt}` into a drift.
pub fn drift_regression(series: &[Vec<f64>], dt: f64) -> Result<DriftEstimate> {
    let (mut sxx, mut sxy, mut pairs) = (0.0, 0.0, 0usize);
    for s in series {
        for w in s.windows(2) {
            sxx += w[0] * w[0];
            sxy += w[0] * w[1];
            pairs += 1;
        }
    }
    if pairs < 3 || !(sxx > 0.0) || !(dt > 0.0) {
        return Err(Error::invalid("series", "need at least three non-degenerate transitions"));
    }
    let phi = sxy / sxx;
    let rss: f64 = series.iter().flat_map(|s| s.windows(2).map(|w| (w[1] - phi * w[0]).powi(2))).sum();
    let phi_se = (rss / (pairs - 1) as f64 / sxx).sqrt();
    if !(phi > 0.0) {
        return Err(Error::invalid("series", format!("lag-one coefficient {phi} is not positive")));
    }
    Ok(DriftEstimate { phi, phi_se, k: phi.ln() / dt, k_se: phi_se / (phi * dt), pairs })
}
