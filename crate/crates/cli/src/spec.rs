use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use streampca::solver::RunConfig;
use streampca::timeseries::ModelSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Trajectory,
    BlockSweep,
    OuEnsemble,
    BiasProbe,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub h_grid: Vec<usize>,
    pub eta0_grid: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuSpec {
    /// 1-based `(i, j)` of the coordinate `ζ_ij` to study.
    pub zeta: (usize, usize),
    /// Blocks used to estimate the diffusion coefficient at the start.
    #[serde(default = "default_g_blocks")]
    pub g_blocks: usize,
}

fn default_g_blocks() -> usize {
    50_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSpec {
    pub h_grid: Vec<usize>,
    pub n_mc: usize,
    /// Fixed starting state; all ones when omitted.
    #[serde(default)]
    pub z0: Option<Vec<f64>>,
}

/// A simulated experiment: model, solver template and per-kind settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    pub model: ModelSpec,
    #[serde(default)]
    pub run: Option<RunConfig>,
    #[serde(default = "one")]
    pub replicates: usize,
    /// Base seed; replicate `i` runs with `replicate_seed(seed, i)`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub ou: Option<OuSpec>,
    #[serde(default)]
    pub bias: Option<BiasSpec>,
}

fn one() -> usize {
    1
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("parsing experiment config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Checks the fields every command relies on; `kind` must match when set.
    pub fn check(&self, kind: ExperimentKind) -> Result<()> {
        if let Some(k) = self.kind {
            if k != kind {
                bail!("config declares kind {k:?} but the {kind:?} command was invoked");
            }
        }
        if self.replicates < 1 {
            bail!("invalid replicates: must be at least 1");
        }
        Ok(())
    }

    pub fn run_template(&self) -> Result<&RunConfig> {
        self.run.as_ref().context("missing `run` section")
    }
}

fn default_sentinel() -> f64 {
    -200.0
}

fn default_delimiter() -> char {
    ','
}

fn default_true() -> bool {
    true
}

fn default_rank() -> usize {
    2
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    Zscore,
}

/// A recorded multivariate series in a delimited text file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealDataSpec {
    pub csv: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_true")]
    pub has_header: bool,
    /// Columns to use, by header name or 0-based index; all when omitted.
    #[serde(default)]
    pub columns: Option<Vec<ColumnRef>>,
    /// Rows holding this value in any selected column are dropped.
    #[serde(default = "default_sentinel")]
    pub missing_sentinel: f64,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "default_rank")]
    pub r: usize,
    pub h_grid: Vec<usize>,
    /// Solver template; the staircase schedule with `η₀ = 0.5` when omitted.
    #[serde(default)]
    pub run: Option<RunConfig>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl RealDataSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut spec: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if spec.csv.is_relative() {
            if let Some(dir) = path.parent() {
                spec.csv = dir.join(&spec.csv);
            }
        }
        Ok(spec)
    }
}
