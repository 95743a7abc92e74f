use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs of the three-stage time predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTimeInputs {
    /// `λ₁ ≥ … ≥ λ_m`
    pub eigvals: Vec<f64>,
    pub r: usize,
    pub eta: f64,
    /// Stage threshold `δ²`.
    pub delta_sq: f64,
    /// Escape probability slack `ν` of the first stage.
    pub nu: f64,
    /// Target accuracy `ε` on `Σ_{i>r} γ_i²`.
    pub eps: f64,
    /// Diffusion coefficient `G_rr` of `ζ_rr` near the saddle.
    pub g_rr: f64,
    /// `G_m = max_j Σ_{i>r} G_ij²`.
    pub g_m: f64,
    /// Block size, to convert iterations into samples.
    #[serde(default = "one")]
    pub h: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageTimePrediction {
    pub inputs: StageTimeInputs,
    pub eigengap: f64,
    /// Argument `K` of the first-stage logarithm (before adding 1).
    pub k_escape: f64,
    /// Argument `K′` of the third-stage logarithm.
    pub k_converge: f64,
    pub t1: f64,
    pub t2: f64,
    /// May be negative when the second stage already reaches `ε`.
    pub t3: f64,
    /// `T₁ + T₂ + max(T₃, 0)`.
    pub total: f64,
    pub s1: u64,
    pub s2: u64,
    pub s3: u64,
    pub s_total: u64,
    /// `S · h`.
    pub samples: u64,
    /// Leading-order total `(1/gap) ln(r G_m / (ε gap))`.
    pub asymptotic_total: f64,
}

/// Evaluates the escape, traverse and convergence times of the three stages.
///
/// ```text
/// T₁ = 1/(2 gap) · ln(2 gap η⁻¹ δ² / ([Φ⁻¹((1 − ν/2)/2)]² G_rr²) + 1)
/// T₂ = 1/gap · ln(√(1 − δ²) / δ²)
/// T₃ = 1/(2 gap) · ln(8 gap δ² / (gap ε − 4 η r G_m))
/// ```
pub fn stage_times(inp: &StageTimeInputs) -> Result<StageTimePrediction> {
    let m = inp.eigvals.len();
    if inp.r == 0 || inp.r >= m {
        return Err(Error::invalid("r", format!("need 1 ≤ r < m = {m}, got {}", inp.r)));
    }
    let gap = inp.eigvals[inp.r - 1] - inp.eigvals[inp.r];
    if !(gap > 0.0) {
        return Err(Error::invalid("eigvals", format!("eigengap λ_r − λ_r+1 = {gap} must be positive")));
    }
    if !(inp.eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    if !(inp.delta_sq > 0.0 && inp.delta_sq < 1.0) {
        return Err(Error::invalid("delta_sq", format!("must lie in (0, 1), got {}", inp.delta_sq)));
    }
    if !(inp.nu > 0.0 && inp.nu < 1.0) {
        return Err(Error::invalid("nu", format!("must lie in (0, 1), got {}", inp.nu)));
    }
    if !(inp.g_rr > 0.0) || !(inp.g_m > 0.0) {
        return Err(Error::invalid("g_rr", "diffusion coefficients must be positive"));
    }
    if inp.h == 0 {
        return Err(Error::invalid("h", "block size must be at least 1"));
    }
    let (eta, d2, r) = (inp.eta, inp.delta_sq, inp.r as f64);

    let q = inv_normal_cdf((1.0 - inp.nu / 2.0) / 2.0);
    let k_escape = 2.0 * gap * d2 / (eta * q * q * inp.g_rr * inp.g_rr);
    let t1 = (k_escape + 1.0).ln() / (2.0 * gap);

    let t2 = ((1.0 - d2).sqrt() / d2).ln() / gap;

    let denom = gap * inp.eps - 4.0 * eta * r * inp.g_m;
    if !(denom > 0.0) {
        return Err(Error::Infeasible(denom));
    }
    let k_converge = 8.0 * gap * d2 / denom;
    let t3 = k_converge.ln() / (2.0 * gap);

    let total = t1 + t2 + t3.max(0.0);
    let iters = |t: f64| (t.max(0.0) / eta).round() as u64;
    let (s1, s2, s3) = (iters(t1), iters(t2), iters(t3));
    let s_total = s1 + s2 + s3;
    Ok(StageTimePrediction {
        inputs: inp.clone(),
        eigengap: gap,
        k_escape,
        k_converge,
        t1,
        t2,
        t3,
        total,
        s1,
        s2,
        s3,
        s_total,
        samples: s_total * inp.h as u64,
        asymptotic_total: (r * inp.g_m / (inp.eps * gap)).ln() / gap,
    })
}

/// Operational stage: 3 once the tail mass is below `δ²`, 1 while the last
/// wanted direction is still below `δ²`, 2 in between.
pub fn stage_label(gamma_r_sq: f64, tail_sum: f64, delta_sq: f64) -> u8 {
    if tail_sum <= delta_sq {
        3
    } else if gamma_r_sq < delta_sq {
        1
    } else {
        2
    }
}

/// Inverse standard normal CDF: Acklam's rational approximation polished by
/// one Halley step, accurate to a few ulps.
pub fn inv_normal_cdf(p: f64) -> f64 {
    let x = acklam(p);
    if !x.is_finite() {
        return x;
    }
    let e = 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let tail = |p: f64| {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail(p)
    } else if p > 1.0 - P_LOW {
        -tail(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> StageTimeInputs {
        StageTimeInputs {
            eigvals: vec![3.0, 2.5, 1.0, 0.5],
            r: 2,
            eta: 1e-3,
            delta_sq: 0.5,
            nu: 0.1,
            eps: 0.1,
            g_rr: 1.0,
            g_m: 1.0,
            h: 2,
        }
    }

    #[test]
    fn second_stage_at_half() {
        let p = stage_times(&base()).unwrap();
        let want = (0.5f64.sqrt() * 2.0).ln() / 1.5;
        assert!((p.t2 - want).abs() < 1e-15);
        assert_eq!(p.samples, 2 * p.s_total);
    }

    #[test]
    fn escape_time_vanishes_with_threshold() {
        let mut i = base();
        i.delta_sq = 1e-300;
        let p = stage_times(&i).unwrap();
        assert!(p.t1.abs() < 1e-290);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut i = base();
        i.eps = 4.0 * i.eta * 2.0 / 1.5;
        assert!(matches!(stage_times(&i), Err(Error::Infeasible(_))));
        let mut i = base();
        i.eigvals = vec![1.0, 1.0, 1.0, 0.5];
        assert!(stage_times(&i).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(stage_label(0.9, 0.0, 0.01), 3);
        assert_eq!(stage_label(0.0, 1.0, 0.01), 1);
        assert_eq!(stage_label(0.02, 0.5, 0.01), 2);
    }

    #[test]
    fn quantile_symmetry() {
        for p in [0.001, 0.01, 0.1, 0.3, 0.5] {
            assert!((inv_normal_cdf(p) + inv_normal_cdf(1.0 - p)).abs() < 1e-12);
        }
        assert_eq!(inv_normal_cdf(0.5), 0.0);
    }
}
