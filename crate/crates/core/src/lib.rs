//! Streaming PCA for stationary time series.
//!
//! Oja's algorithm assumes independent samples. On a geometrically ergodic
//! chain it is run on downsampled blocks instead: every `h`-th sample (or a
//! difference of two samples `h` apart when the mean is unknown) feeds one
//! update. This crate provides the pieces to run and study that iteration:
//!
//! - [`timeseries`]: seeded VAR, generalized VAR and copula generators;
//! - [`estimator`]: block covariance estimates and their bias;
//! - [`solver`]: the iteration itself, with schedules and initializers;
//! - [`diagnostics`]: principal angles, rescaled coordinates, reference
//!   curves, stage-time predictions and ensemble statistics;
//! - [`presets`]: the reference models used by the experiments.

pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod presets;
pub mod solver;
pub mod timeseries;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/downsampling.md")]
    mod downsampling {}
    #[doc = include_str!("../../../book/src/angles.md")]
    mod angles {}
    #[doc = include_str!("../../../book/src/stages.md")]
    mod stages {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/realdata.md")]
    mod realdata {}
}
