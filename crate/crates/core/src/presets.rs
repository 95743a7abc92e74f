//! Reference models and run configurations used by the experiments.
//!
//! Both models are 16-dimensional Gaussian VARs `A = Vᵀ D V` with a random
//! orthogonal `V` and diagonal noise `S`:
//!
//! - the three-stage model (`D = 0.1·D₀`): three eigenvalues near 3 and the
//!   rest near 1, an eigengap of about 2;
//! - the low-gap model (`D = 0.9·D₀`): strongly dependent samples and an
//!   eigengap of a few thousandths.

use crate::linalg::Matrix;
use crate::solver::{Init, RunConfig, Schedule};
use crate::timeseries::{random_orthogonal, ModelSpec, VarModel};

pub const D0: [f64; 16] = [
    0.68, 0.68, 0.69, 0.70, 0.70, 0.70, 0.72, 0.72, 0.72, 0.72, 0.72, 0.72, 0.80, 0.80, 0.85, 0.90,
];

/// Seed of `V` used when none is given.
pub const DEFAULT_V_SEED: u64 = 2019;

fn conjugated(v_seed: u64, scale: f64, noise: [f64; 16]) -> VarModel {
    let v = random_orthogonal(16, v_seed);
    let d: Vec<f64> = D0.iter().map(|x| scale * x).collect();
    let a = v.transpose().congruence_diag(&d).symmetrize();
    VarModel::new(a, Matrix::diag(&noise)).expect("preset coefficients are contractive")
}

pub fn three_stage_model(v_seed: u64) -> VarModel {
    let mut s = [1.0; 16];
    s[13..].fill(3.0);
    conjugated(v_seed, 0.1, s)
}

pub fn low_gap_model(v_seed: u64) -> VarModel {
    let mut s = [1.45; 16];
    s[13..].fill(1.455);
    conjugated(v_seed, 0.9, s)
}

fn conjugated_spec(v_seed: u64, scale: f64, noise: [f64; 16]) -> ModelSpec {
    let list = |xs: &[f64]| xs.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
    serde_json::from_value(serde_json::json!({
        "kind": "var",
        "bindings": {
            "V": format!("random_orthogonal(16, {v_seed})"),
            "D": format!("scaled({scale}, diag([{}]))", list(&D0)),
        },
        "a": "conjugate(V, D)",
        "noise_cov": format!("diag([{}])", list(&noise)),
    }))
    .expect("preset spec is well formed")
}

/// Config-file form of [`three_stage_model`].
pub fn three_stage_spec(v_seed: u64) -> ModelSpec {
    let mut s = [1.0; 16];
    s[13..].fill(3.0);
    conjugated_spec(v_seed, 0.1, s)
}

/// Config-file form of [`low_gap_model`].
pub fn low_gap_spec(v_seed: u64) -> ModelSpec {
    let mut s = [1.45; 16];
    s[13..].fill(1.455);
    conjugated_spec(v_seed, 0.9, s)
}

/// `η = 3·10⁻⁵`, `h = 4`, `r = 3`, 8·10⁵ samples, started at the saddle
/// spanned by eigenvectors 1, 2 and 4.
pub fn three_stage_config(seed: u64) -> RunConfig {
    let mut c = RunConfig::new(3e-5, 4, 3, 800_000);
    c.init = Init::StationaryPoint { indices: vec![1, 2, 4], jitter: 0.0 };
    c.seed = seed;
    c
}

/// Staircase-annealed run on 5·10⁵ samples with base step `eta0`.
pub fn sweep_config(h: usize, eta0: f64, seed: u64) -> RunConfig {
    let mut c = RunConfig::new(eta0, h, 3, 500_000);
    c.schedule = Schedule::Staircase;
    c.seed = seed;
    c.record_every = 1_000;
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn models_are_stationary() {
        assert!((three_stage_model(1).rho() - 0.09).abs() < 1e-9);
        assert!((low_gap_model(1).rho() - 0.81).abs() < 1e-9);
    }

    #[test]
    fn specs_build_the_presets() {
        use crate::timeseries::Model;
        for (spec, model) in [(three_stage_spec(5), three_stage_model(5)), (low_gap_spec(5), low_gap_model(5))] {
            let (Model::Var(built), want) = (spec.build().unwrap(), model) else { panic!("not a VAR") };
            assert!(built.coefficients().sub(want.coefficients()).max_abs() < 1e-15);
            assert_eq!(built.noise_cov(), want.noise_cov());
        }
    }

    #[test]
    fn configs_validate() {
        three_stage_config(0).validate(16).unwrap();
        sweep_config(4, 0.5, 0).validate(16).unwrap();
    }
}
