use serde::{Deserialize, Serialize};

/// `γ̃_i²(t) = γ̃_i²(0) e^{b_i t}`.
pub fn ode_reference(gamma_tilde0: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    assert_eq!(gamma_tilde0.len(), b.len(), "one rate per coordinate");
    gamma_tilde0.iter().zip(b).map(|(g, bi)| g * (bi * t).exp()).collect()
}

/// Reference rates `b_i = 2(λ_i − λ_r)` for `i = r+1..m`, the boundary of the
/// admissible range.
pub fn default_rates(eigvals: &[f64], r: usize) -> Vec<f64> {
    eigvals[r..].iter().map(|l| 2.0 * (l - eigvals[r - 1])).collect()
}

/// A scalar Ornstein–Uhlenbeck process `dζ = K ζ dt + G dB`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OUReference {
    pub k_drift: f64,
    pub g_diff: f64,
    pub initial: f64,
}

/// Mean `ζ(0) e^{Kt}` and variance `G²/(2K) (e^{2Kt} − 1)` (`G² t` at `K = 0`).
pub fn ou_moments(r: &OUReference, t: f64) -> (f64, f64) {
    let k = r.k_drift;
    let g2 = r.g_diff * r.g_diff;
    let mean = r.initial * (k * t).exp();
    let var = if k == 0.0 { g2 * t } else { g2 * (2.0 * k * t).exp_m1() / (2.0 * k) };
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ode_examples() {
        assert_eq!(ode_reference(&[0.5, 0.2], &[-1.0, 3.0], 0.0), vec![0.5, 0.2]);
        let v = ode_reference(&[0.5], &[-1.0], 2f64.ln())[0];
        assert!((v - 0.25).abs() < 1e-15);
        let b = default_rates(&[3.0, 2.0, 1.0, 0.5], 2);
        assert_eq!(b, vec![-2.0, -3.0]);
        let path: Vec<f64> = (0..10).map(|t| ode_reference(&[1.0], &b[..1], t as f64)[0]).collect();
        assert!(path.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn ou_examples() {
        let r = OUReference { k_drift: -1.0, g_diff: 2f64.sqrt(), initial: 0.7 };
        assert_eq!(ou_moments(&r, 0.0), (0.7, 0.0));
        let (mean, var) = ou_moments(&r, 60.0);
        assert!(mean.abs() < 1e-20 && (var - 1.0).abs() < 1e-12);
        let grow = OUReference { k_drift: 0.5, g_diff: 1.0, initial: 0.0 };
        let (_, v) = ou_moments(&grow, 2.0);
        assert!((v - (2f64.exp() - 1.0)).abs() < 1e-12);
        let flat = OUReference { k_drift: 0.0, g_diff: 3.0, initial: 0.0 };
        assert_eq!(ou_moments(&flat, 2.0).1, 18.0);
        let tiny = OUReference { k_drift: 1e-12, g_diff: 3.0, initial: 0.0 };
        assert!((ou_moments(&tiny, 2.0).1 - 18.0).abs() < 1e-9);
    }
}
