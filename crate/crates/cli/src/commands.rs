use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use streampca::diagnostics::{
    drift_regression, ensemble_stats, estimate_g_sq, stage_times, zeta_basis, DriftEstimate, EnsembleReport,
    OUReference, StageTimeInputs, StageTimePrediction,
};
use streampca::estimator::{bias_probe, BiasReport, DownsamplePlan};
use streampca::linalg::{Matrix, SpectralTruth};
use streampca::solver::{init_at_stationary_point, init_random, run_model, Init, RunConfig, Schedule, TrajectoryRecord};
use streampca::timeseries::{replicate_seed, Model, StreamHandle};

use crate::spec::{ExperimentKind, ExperimentSpec};

/// Tail mass below which a replicate counts as converged in summaries.
pub const CONVERGED_TAIL: f64 = 0.05;

/// Files written by one command, listed in `index.json`.
#[derive(Debug, Default, Serialize)]
pub struct Artifacts {
    pub command: String,
    pub files: Vec<String>,
    #[serde(skip)]
    dir: PathBuf,
}

impl Artifacts {
    pub fn new(command: &str, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { command: command.to_string(), files: Vec::new(), dir: dir.to_path_buf() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn finish(mut self) -> Result<Vec<String>> {
        self.files.push("index.json".to_string());
        let index = serde_json::to_string_pretty(&self)?;
        std::fs::write(self.dir.join("index.json"), index)?;
        Ok(self.files)
    }
}

/// Ground truth of a VAR model; other sources have no closed form.
pub fn truth_of(model: &Model) -> Result<Option<SpectralTruth>> {
    match model.as_var() {
        Some(var) => Ok(Some(SpectralTruth::from_sigma(var.stationary_covariance()?)?)),
        None => Ok(None),
    }
}

/// Runs replicate `i` with seed `replicate_seed(base, i)`, in parallel, results in index order.
pub fn run_replicates(
    model: &Arc<Model>,
    truth: Option<&SpectralTruth>,
    template: &RunConfig,
    replicates: usize,
    base_seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut c = template.clone();
            c.seed = replicate_seed(base_seed, i as u64);
            run_model(model, truth, &c).map_err(anyhow::Error::from)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplicateSummary {
    pub seed: u64,
    pub samples: u64,
    pub iterations: u64,
    pub final_tail: Option<f64>,
    pub stage_path: Vec<u8>,
    pub stages_in_order: bool,
    pub stage1_exit: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectorySummary {
    pub replicates: usize,
    pub stages_in_order: usize,
    pub converged: usize,
    pub converged_threshold: f64,
    pub prediction: Option<StageTimePrediction>,
    pub warnings: Vec<String>,
    pub per_replicate: Vec<ReplicateSummary>,
}

pub struct TrajectoryOutcome {
    pub records: Vec<TrajectoryRecord>,
    pub summary: TrajectorySummary,
}

/// Diffusion coefficients for the stage-time predictor: `G_rr` at the initial
/// frame and `G_m = max_j Σ_{i>r} G_ij²` at the optimum.
pub fn predict_stage_times(
    model: &Arc<Model>,
    truth: &SpectralTruth,
    config: &RunConfig,
    eps: f64,
    seed: u64,
) -> Result<StageTimePrediction> {
    let r = config.r;
    let m = truth.dim();
    let plan = DownsamplePlan::new(config.h, config.zero_mean.unwrap_or(model.zero_mean()))?;
    let init_seed = replicate_seed(seed, u64::MAX);
    let u0 = match &config.init {
        Init::Random => init_random(m, r, init_seed)?.u,
        Init::StationaryPoint { indices, jitter } => init_at_stationary_point(truth, indices, *jitter, init_seed)?.u,
    };
    let blocks = 20_000;
    let (q0, _) = zeta_basis(&truth.rotate(&u0), truth)?;
    let mut stream = StreamHandle::new(model.clone(), replicate_seed(seed, 1 << 40));
    let g0 = estimate_g_sq(&mut stream, plan, truth, &u0, &q0, blocks)?;
    let opt = truth.eigvecs.select_columns(&(0..r).collect::<Vec<_>>());
    let (qo, _) = zeta_basis(&truth.rotate(&opt), truth)?;
    let go = estimate_g_sq(&mut stream, plan, truth, &opt, &qo, blocks)?;
    let g_m = (0..r).map(|j| (r..m).map(|i| go[(i, j)]).sum::<f64>()).fold(0.0, f64::max);
    let inputs = StageTimeInputs {
        eigvals: truth.eigvals.clone(),
        r,
        eta: config.eta,
        delta_sq: config.delta_sq(),
        nu: 0.1,
        eps,
        g_rr: g0[(r - 1, r - 1)].sqrt(),
        g_m,
        h: config.h,
    };
    Ok(stage_times(&inputs)?)
}

pub fn simulate_trajectories(spec: &ExperimentSpec) -> Result<TrajectoryOutcome> {
    spec.check(ExperimentKind::Trajectory)?;
    let model = spec.model.build_shared()?;
    let template = spec.run_template()?;
    template.validate(model.dim())?;
    let truth = truth_of(&model)?;
    let mut warnings = Vec::new();
    let prediction = match (&truth, &template.schedule) {
        (Some(t), Schedule::Constant) if template.r < t.dim() => {
            let eps = template.early_stop.unwrap_or(CONVERGED_TAIL);
            match predict_stage_times(&model, t, template, eps, spec.seed) {
                Ok(p) => Some(p),
                Err(e) => {
                    warnings.push(format!("stage-time prediction unavailable: {e}"));
                    None
                }
            }
        }
        _ => None,
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let records = run_replicates(&model, truth.as_ref(), template, spec.replicates, spec.seed)?;
    let per_replicate: Vec<ReplicateSummary> = records
        .iter()
        .map(|r| ReplicateSummary {
            seed: r.seed,
            samples: r.final_frame.k,
            iterations: r.final_frame.s,
            final_tail: r.final_tail(),
            stage_path: r.stage_path(),
            stages_in_order: r.stages_in_order(),
            stage1_exit: r.stage1_exit(),
        })
        .collect();
    let summary = TrajectorySummary {
        replicates: records.len(),
        stages_in_order: per_replicate.iter().filter(|r| r.stages_in_order).count(),
        converged: per_replicate.iter().filter(|r| r.final_tail.is_some_and(|t| t <= CONVERGED_TAIL)).count(),
        converged_threshold: CONVERGED_TAIL,
        prediction,
        warnings,
        per_replicate,
    };
    Ok(TrajectoryOutcome { records, summary })
}

/// Cross-replicate tail mass per recorded point, when the grids line up.
fn tail_band_csv(records: &[TrajectoryRecord]) -> Option<String> {
    let first = records.first()?;
    let aligned = records.iter().all(|r| {
        r.points.len() == first.points.len()
            && r.points.iter().zip(&first.points).all(|(a, b)| a.s == b.s)
            && r.points.iter().all(|p| p.diag.is_some())
    });
    if !aligned {
        return None;
    }
    let mut out = String::from("s,k,t,tail_mean,tail_min,tail_max\n");
    for (n, p) in first.points.iter().enumerate() {
        let tails: Vec<f64> = records.iter().map(|r| r.points[n].diag.as_ref().unwrap().tail_sum).collect();
        let mean = tails.iter().sum::<f64>() / tails.len() as f64;
        let lo = tails.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tails.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&format!("{},{},{},{mean},{lo},{hi}\n", p.s, p.k, p.t));
    }
    Some(out)
}

pub fn cmd_trajectory(spec: &ExperimentSpec, out: &Path) -> Result<TrajectoryOutcome> {
    let outcome = simulate_trajectories(spec)?;
    let mut art = Artifacts::new("trajectory", out)?;
    for (i, rec) in outcome.records.iter().enumerate() {
        art.write(&format!("trajectory_{i:03}.csv"), &rec.to_csv())?;
    }
    if let Some(csv) = tail_band_csv(&outcome.records) {
        art.write("ensemble.csv", &csv)?;
    }
    art.write("summary.json", &serde_json::to_string_pretty(&outcome.summary)?)?;
    art.finish()?;
    Ok(outcome)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutcome {
    pub h_grid: Vec<usize>,
    pub eta0_grid: Vec<f64>,
    pub replicates: usize,
    /// `mean_tail[a][b]`: mean final `Σ_{i>r} γ_i²` for `h_grid[a]`, `eta0_grid[b]`.
    pub mean_tail: Vec<Vec<f64>>,
    pub sd_tail: Vec<Vec<f64>>,
}

impl SweepOutcome {
    /// `η₀` with the smallest mean final tail, per `h`.
    pub fn best_eta0_per_h(&self) -> Vec<f64> {
        self.mean_tail.iter().map(|row| self.eta0_grid[argmin(row)]).collect()
    }

    /// `h` with the smallest mean final tail in the column of `eta0`.
    pub fn best_h_at(&self, eta0: f64) -> Option<usize> {
        let b = self.eta0_grid.iter().position(|&e| e == eta0)?;
        let col: Vec<f64> = self.mean_tail.iter().map(|row| row[b]).collect();
        Some(self.h_grid[argmin(&col)])
    }

    /// Rows `h`, one column per `η₀`.
    pub fn table_csv(&self) -> String {
        let mut out = String::from("h");
        for e in &self.eta0_grid {
            out.push_str(&format!(",eta0={e}"));
        }
        out.push('\n');
        for (h, row) in self.h_grid.iter().zip(&self.mean_tail) {
            out.push_str(&h.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn cells_csv(&self) -> String {
        let mut out = String::from("h,eta0,mean_tail,sd_tail\n");
        for (a, h) in self.h_grid.iter().enumerate() {
            for (b, e) in self.eta0_grid.iter().enumerate() {
                out.push_str(&format!("{h},{e},{},{}\n", self.mean_tail[a][b], self.sd_tail[a][b]));
            }
        }
        out
    }
}

fn argmin(xs: &[f64]) -> usize {
    xs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0)
}

/// Final tail mass for every `(h, η₀)` cell. Replicate `i` of every cell uses
/// the same seed, so cells are compared on common random numbers.
pub fn simulate_sweep(spec: &ExperimentSpec) -> Result<SweepOutcome> {
    spec.check(ExperimentKind::BlockSweep)?;
    let sweep = spec.sweep.as_ref().context("missing `sweep` section")?;
    if sweep.h_grid.is_empty() || sweep.eta0_grid.is_empty() {
        bail!("invalid sweep: h_grid and eta0_grid must be non-empty");
    }
    let model = spec.model.build_shared()?;
    let truth = truth_of(&model)?.context("the block sweep needs a VAR model (ground truth)")?;
    let template = spec.run_template()?;
    let tasks: Vec<(usize, usize, usize)> = (0..sweep.h_grid.len())
        .flat_map(|a| (0..sweep.eta0_grid.len()).flat_map(move |b| (0..spec.replicates).map(move |i| (a, b, i))))
        .collect();
    let finals: Vec<f64> = tasks
        .par_iter()
        .map(|&(a, b, i)| {
            let mut c = template.clone();
            c.h = sweep.h_grid[a];
            c.eta = sweep.eta0_grid[b];
            c.seed = replicate_seed(spec.seed, i as u64);
            c.record_every = u64::MAX;
            let rec = run_model(&model, Some(&truth), &c)?;
            Ok(rec.final_tail().expect("truth is present"))
        })
        .collect::<Result<_>>()?;
    let n = spec.replicates;
    let (mut mean_tail, mut sd_tail) = (Vec::new(), Vec::new());
    for a in 0..sweep.h_grid.len() {
        let (mut mrow, mut srow) = (Vec::new(), Vec::new());
        for b in 0..sweep.eta0_grid.len() {
            let start = (a * sweep.eta0_grid.len() + b) * n;
            let xs = &finals[start..start + n];
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
            mrow.push(mean);
            srow.push(var.sqrt());
        }
        mean_tail.push(mrow);
        sd_tail.push(srow);
    }
    Ok(SweepOutcome {
        h_grid: sweep.h_grid.clone(),
        eta0_grid: sweep.eta0_grid.clone(),
        replicates: n,
        mean_tail,
        sd_tail,
    })
}

pub fn cmd_block_sweep(spec: &ExperimentSpec, out: &Path) -> Result<SweepOutcome> {
    let outcome = simulate_sweep(spec)?;
    let mut art = Artifacts::new("sweep", out)?;
    art.write("table.csv", &outcome.table_csv())?;
    art.write("cells.csv", &outcome.cells_csv())?;
    art.write("summary.json", &serde_json::to_string_pretty(&outcome)?)?;
    art.finish()?;
    Ok(outcome)
}

#[derive(Clone, Debug, Serialize)]
pub struct OuOutcome {
    pub report: EnsembleReport,
    /// Drift fitted from the recorded paths, for constant step sizes.
    pub drift: Option<DriftEstimate>,
    /// `λ_i − λ̃_j` of the initial frame.
    pub drift_theory: f64,
    /// `[λ_i − λ₁, λ_i − λ_r]`.
    pub drift_bracket: (f64, f64),
    pub g_sq: f64,
    #[serde(skip)]
    pub records: Vec<TrajectoryRecord>,
}

pub fn simulate_ou(spec: &ExperimentSpec) -> Result<OuOutcome> {
    spec.check(ExperimentKind::OuEnsemble)?;
    let ou = spec.ou.as_ref().context("missing `ou` section")?;
    let model = spec.model.build_shared()?;
    let truth = truth_of(&model)?.context("the O-U ensemble needs a VAR model (ground truth)")?;
    let mut template = spec.run_template()?.clone();
    if !template.track_zeta.contains(&ou.zeta) {
        template.track_zeta.push(ou.zeta);
    }
    template.validate(model.dim())?;
    let (i, j) = ou.zeta;
    let r = template.r;

    // The initial frame of replicate 0 fixes Q; with a deterministic
    // initializer every replicate shares it.
    let init_seed = replicate_seed(replicate_seed(spec.seed, 0), u64::MAX);
    let u0 = match &template.init {
        Init::Random => init_random(truth.dim(), r, init_seed)?.u,
        Init::StationaryPoint { indices, jitter } => init_at_stationary_point(&truth, indices, *jitter, init_seed)?.u,
    };
    let (q, ritz) = zeta_basis(&truth.rotate(&u0), &truth)?;
    let plan = DownsamplePlan::new(template.h, template.zero_mean.unwrap_or(model.zero_mean()))?;
    let mut stream = StreamHandle::new(model.clone(), replicate_seed(spec.seed, 1 << 40));
    let g = estimate_g_sq(&mut stream, plan, &truth, &u0, &q, ou.g_blocks)?;
    let g_sq = g[(i - 1, j - 1)];
    let lam = &truth.eigvals;
    let drift_theory = lam[i - 1] - ritz[j - 1];

    let records = run_replicates(&model, Some(&truth), &template, spec.replicates, spec.seed)?;
    let p = template.track_zeta.iter().position(|&x| x == ou.zeta).unwrap();
    let initial = records.iter().map(|r| r.points[0].diag.as_ref().unwrap().zeta[p]).sum::<f64>() / records.len() as f64;
    let reference = OUReference { k_drift: drift_theory, g_diff: g_sq.sqrt(), initial };
    let report = ensemble_stats(&records, ou.zeta, Some(reference))?;
    let drift = match template.schedule {
        Schedule::Constant => {
            let series: Vec<Vec<f64>> = records.iter().map(|r| r.zeta_series(p)).collect();
            drift_regression(&series, template.record_every as f64 * template.eta).ok()
        }
        _ => None,
    };
    Ok(OuOutcome {
        report,
        drift,
        drift_theory,
        drift_bracket: (lam[i - 1] - lam[0], lam[i - 1] - lam[r - 1]),
        g_sq,
        records,
    })
}

pub fn cmd_ou_ensemble(spec: &ExperimentSpec, out: &Path) -> Result<OuOutcome> {
    let outcome = simulate_ou(spec)?;
    let mut art = Artifacts::new("ou", out)?;
    art.write("ensemble.csv", &outcome.report.to_csv())?;
    art.write("summary.json", &serde_json::to_string_pretty(&outcome)?)?;
    art.finish()?;
    Ok(outcome)
}

pub fn simulate_bias(spec: &ExperimentSpec) -> Result<BiasReport> {
    spec.check(ExperimentKind::BiasProbe)?;
    let bias = spec.bias.as_ref().context("missing `bias` section")?;
    if bias.h_grid.is_empty() {
        bail!("invalid h_grid: must not be empty");
    }
    let model = spec.model.build()?;
    let Some(var) = model.as_var() else {
        bail!("closed-form probe is VAR-only");
    };
    let z0 = bias.z0.clone().unwrap_or_else(|| vec![1.0; var.dim()]);
    Ok(bias_probe(var, &bias.h_grid, bias.n_mc, &z0, spec.seed)?)
}

pub fn cmd_bias_probe(spec: &ExperimentSpec, out: &Path) -> Result<BiasReport> {
    let report = simulate_bias(spec)?;
    let mut art = Artifacts::new("bias", out)?;
    art.write("bias.csv", &report.to_csv())?;
    art.write("bias.json", &report.to_json())?;
    art.finish()?;
    Ok(report)
}

/// `m×r` frame spanning the leading `r` eigenvectors.
pub fn top_frame(truth: &SpectralTruth, r: usize) -> Matrix {
    truth.eigvecs.select_columns(&(0..r).collect::<Vec<_>>())
}
