//! Reproducible generators for geometrically ergodic sources: Gaussian VAR,
//! generalized (exponential-family) VAR, and Gaussian copula VAR.

mod models;
mod rng;
mod spec;
mod stream;

pub use models::{
    CopulaModel, GvarFamily, GvarModel, Model, Transform, VarModel, DEFAULT_NATURAL_PARAM_CLIP,
};
pub use rng::{replicate_seed, StreamRng};
pub use spec::{eval_matrix, random_orthogonal, MatrixExpr, ModelSpec};
pub use stream::{SampleSource, SeriesSource, StreamHandle};
