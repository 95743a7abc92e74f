//! Measuring a frame against the ground truth, and the closed-form curves
//! the measurements are compared with.
//!
//! A frame `U` is expressed in the eigenbasis as `Ū = RᵀU`. Row `i` of `Ū`
//! holds the alignment with eigenvector `i`: `γ_i² = ‖e_iᵀŪ‖²`. The iterate is
//! optimal when `Σ_{i>r} γ_i² = 0`.

mod angles;
mod ensemble;
mod reference;
mod stages;

pub use angles::{gamma_tail, gamma_tilde, principal_angles, zeta_basis, zeta_transform, AngleSet, ZetaCoordinates};
pub(crate) use angles::zeta_with_basis;
pub use ensemble::{
    drift_regression, ensemble_stats, estimate_g_sq, moments, DriftEstimate, EnsemblePoint, EnsembleReport, Moments,
    MIN_REPLICATES,
};
pub use reference::{default_rates, ode_reference, ou_moments, OUReference};
pub use stages::{inv_normal_cdf, stage_label, stage_times, StageTimeInputs, StageTimePrediction};
