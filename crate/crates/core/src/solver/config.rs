use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Orthogonalizer;

/// One step of a piecewise-constant schedule: from `from_sample` samples on,
/// the step size is `eta · multiplier`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealStep {
    pub from_sample: u64,
    pub multiplier: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    #[default]
    Constant,
    /// `η₀·h/4000` below 2·10⁴ samples, then `η₀·h/8000` below 5·10⁴,
    /// `η₀·h/48000` below 10⁵ and `η₀·h/120000` afterwards, with `η₀ = eta`.
    Staircase,
    Table { steps: Vec<AnnealStep> },
}

impl Schedule {
    /// The staircase as an explicit table for block size `h`.
    pub fn staircase_table(h: usize) -> Vec<AnnealStep> {
        let h = h as f64;
        [(0, 4000.0), (20_000, 8000.0), (50_000, 48_000.0), (100_000, 120_000.0)]
            .into_iter()
            .map(|(k, d)| AnnealStep { from_sample: k, multiplier: h / d })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if let Schedule::Table { steps } = self {
            if steps.first().map(|s| s.from_sample) != Some(0) {
                return Err(Error::invalid("schedule", "table must start at sample 0"));
            }
            if steps.windows(2).any(|w| w[1].from_sample <= w[0].from_sample) {
                return Err(Error::invalid("schedule", "thresholds must be strictly increasing"));
            }
            if steps.iter().any(|s| !(s.multiplier > 0.0) || !s.multiplier.is_finite()) {
                return Err(Error::invalid("schedule", "multipliers must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Orthonormalized update `Π(U + ηXU)`.
    #[default]
    Oja,
    /// Hebbian update `U + η(I − UUᵀ)XU` without re-orthonormalization.
    Gha,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Init {
    #[default]
    Random,
    /// Eigenvectors at the given 1-based positions, optionally jittered.
    StationaryPoint {
        indices: Vec<usize>,
        #[serde(default)]
        jitter: f64,
    },
}

/// Everything one solver run needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Base step size (`η₀` for annealed schedules).
    pub eta: f64,
    #[serde(default)]
    pub schedule: Schedule,
    /// Block size.
    pub h: usize,
    /// Target rank.
    pub r: usize,
    /// Sample budget.
    pub max_samples: u64,
    #[serde(default)]
    pub seed: u64,
    /// Variance of the isotropic Gaussian added to every sample used.
    #[serde(default)]
    pub perturbation_eps: f64,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub orthogonalizer: Orthogonalizer,
    #[serde(default)]
    pub init: Init,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    /// Use `z zᵀ` on single samples; `None` lets the model decide.
    #[serde(default)]
    pub zero_mean: Option<bool>,
    /// Feed `Σ` itself instead of sampled estimates.
    #[serde(default)]
    pub population: bool,
    /// Stage threshold `δ² = delta_sq_factor · η`.
    #[serde(default = "default_delta_factor")]
    pub delta_sq_factor: f64,
    /// Stop once `Σ_{i>r} γ_i²` stays below this for five consecutive records.
    #[serde(default)]
    pub early_stop: Option<f64>,
    /// `(i, j)` pairs (1-based) whose `ζ_ij` is recorded.
    #[serde(default)]
    pub track_zeta: Vec<(usize, usize)>,
    /// Samples discarded before the first block.
    #[serde(default)]
    pub burn_in: u64,
}

fn default_record_every() -> u64 {
    100
}

fn default_delta_factor() -> f64 {
    100.0
}

impl RunConfig {
    pub fn new(eta: f64, h: usize, r: usize, max_samples: u64) -> Self {
        Self {
            eta,
            schedule: Schedule::Constant,
            h,
            r,
            max_samples,
            seed: 0,
            perturbation_eps: 0.0,
            variant: Variant::Oja,
            orthogonalizer: Orthogonalizer::default(),
            init: Init::Random,
            record_every: default_record_every(),
            zero_mean: None,
            population: false,
            delta_sq_factor: default_delta_factor(),
            early_stop: None,
            track_zeta: Vec::new(),
            burn_in: 0,
        }
    }

    /// Checks the fields against a data dimension `m`.
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid("eta", format!("must be positive, got {}", self.eta)));
        }
        if self.h < 1 {
            return Err(Error::invalid("h", "block size must be at least 1"));
        }
        if self.r < 1 || self.r > m {
            return Err(Error::invalid("r", format!("need 1 ≤ r ≤ m = {m}, got {}", self.r)));
        }
        if !(self.perturbation_eps >= 0.0) {
            return Err(Error::invalid("perturbation_eps", "must be non-negative"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be at least 1"));
        }
        if !(self.delta_sq_factor > 0.0) {
            return Err(Error::invalid("delta_sq_factor", "must be positive"));
        }
        for &(i, j) in &self.track_zeta {
            if i < 1 || i > m || j < 1 || j > self.r {
                return Err(Error::invalid("track_zeta", format!("({i}, {j}) is outside 1..={m} × 1..={}", self.r)));
            }
        }
        if let Init::StationaryPoint { indices, jitter } = &self.init {
            check_index_set(indices, self.r, m)?;
            if !(*jitter >= 0.0) {
                return Err(Error::invalid("init", "jitter must be non-negative"));
            }
        }
        self.schedule.validate()
    }

    /// `δ²` used for stage labels.
    pub fn delta_sq(&self) -> f64 {
        self.delta_sq_factor * self.eta
    }

    /// Step size after `k` samples.
    pub fn eta_at(&self, k: u64) -> f64 {
        let table;
        let steps = match &self.schedule {
            Schedule::Constant => return self.eta,
            Schedule::Staircase => {
                table = Schedule::staircase_table(self.h);
                &table
            }
            Schedule::Table { steps } => steps,
        };
        let idx = steps.partition_point(|s| s.from_sample <= k);
        self.eta * steps[idx.saturating_sub(1)].multiplier
    }
}

/// `k ↦ η(k)` for a config.
pub fn eta_at(config: &RunConfig, k: u64) -> f64 {
    config.eta_at(k)
}

pub(crate) fn check_index_set(indices: &[usize], r: usize, m: usize) -> Result<()> {
    if indices.len() != r {
        return Err(Error::invalid("indices", format!("need {r} indices, got {}", indices.len())));
    }
    let mut seen = vec![false; m];
    for &i in indices {
        if i < 1 || i > m {
            return Err(Error::invalid("indices", format!("{i} is outside 1..={m}")));
        }
        if std::mem::replace(&mut seen[i - 1], true) {
            return Err(Error::invalid("indices", format!("{i} appears twice")));
        }
    }
    Ok(())
}
