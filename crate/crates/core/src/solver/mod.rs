//! The downsampled Oja iteration and its Hebbian variant.
//!
//! Each iteration draws one block estimate `X_s` from the stream and moves
//! the frame towards the top eigenspace:
//!
//! ```text
//! Oja:  U ← Π(U + η X U)
//! GHA:  U ← U + η (I − U Uᵀ) X U
//! ```

mod config;
mod frame;
mod run;

pub use config::{eta_at, AnnealStep, Init, RunConfig, Schedule, Variant};
pub use frame::{gha_step, init_at_stationary_point, init_random, oja_step, Frame};
pub use run::{run, run_model, PointDiagnostics, RecordPoint, TrajectoryRecord};
