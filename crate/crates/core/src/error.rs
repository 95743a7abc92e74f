use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    Asymmetric(f64),

    #[error("column {column} is linearly dependent on the preceding columns")]
    RankDeficient { column: usize },

    #[error("coefficient matrix is not contractive: ‖A^{power}‖_F = {norm:.3e}")]
    NotContractive { power: usize, norm: f64 },

    #[error("eigen solver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("frame columns are not orthonormal (defect {0:.3e})")]
    NotOrthonormal(f64),

    #[error("top block E_rᵀŪ is singular (σ_min = {0:.3e}): frame is at or near a saddle, bound undefined")]
    SingularTopBlock(f64),

    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("ε too small for this η: (λ_r − λ_r+1)·ε − 4ηrG_m = {0:.3e} ≤ 0")]
    Infeasible(f64),

    #[error("recording grids of the replicates do not line up: {0}")]
    MisalignedGrids(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid { field, reason: reason.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
