use std::sync::Arc;

use serde::Serialize;

use super::config::{Init, RunConfig, Variant};
use super::frame::{init_at_stationary_point, init_random, Frame};
use crate::diagnostics::{gamma_tail, gamma_tilde, stage_label, zeta_basis, zeta_with_basis};
use crate::error::{Error, Result};
use crate::estimator::{BlockSampler, DownsamplePlan};
use crate::linalg::{orthonormalize, Matrix, SpectralTruth};
use crate::timeseries::{replicate_seed, Model, SampleSource, StreamHandle, StreamRng};

/// Diagnostics of one recorded iterate, measured against the ground truth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointDiagnostics {
    /// `γ_i²` for `i = r+1..m`.
    pub gamma_sq: Vec<f64>,
    pub gamma_r_sq: f64,
    pub tail_sum: f64,
    pub stage: u8,
    /// `γ̃_i²` for `i > r`; absent while the top block is singular.
    pub gamma_tilde_sq: Option<Vec<f64>>,
    /// Tracked `ζ_ij`, in the order of the config.
    pub zeta: Vec<f64>,
    /// `‖UᵀU − I‖_F` of the raw iterate.
    pub orthonormality_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecordPoint {
    /// Iteration.
    pub s: u64,
    /// Samples consumed.
    pub k: u64,
    /// Accumulated time `Σ η`.
    pub t: f64,
    /// Step size of the next iteration.
    pub eta: f64,
    pub diag: Option<PointDiagnostics>,
}

/// Per-iteration diagnostics of one run, sampled every `record_every` iterations.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRecord {
    pub m: usize,
    pub r: usize,
    pub h: usize,
    pub eta: f64,
    pub delta_sq: f64,
    pub seed: u64,
    pub tracked_zeta: Vec<(usize, usize)>,
    pub points: Vec<RecordPoint>,
    pub final_frame: Frame,
}

impl TrajectoryRecord {
    /// CSV with header `s,k,eta,gamma_sq_{r+1..m},sum_tail,stage` and one
    /// `zeta_i_j` column per tracked pair.
    pub fn to_csv(&self) -> String {
        let with_diag = self.points.iter().all(|p| p.diag.is_some());
        let mut out = String::from("s,k,eta");
        if with_diag {
            for i in self.r + 1..=self.m {
                out.push_str(&format!(",gamma_sq_{i}"));
            }
            out.push_str(",sum_tail,stage");
            for (i, j) in &self.tracked_zeta {
                out.push_str(&format!(",zeta_{i}_{j}"));
            }
        }
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!("{},{},{}", p.s, p.k, p.eta));
            if let (true, Some(d)) = (with_diag, &p.diag) {
                for g in &d.gamma_sq {
                    out.push_str(&format!(",{g}"));
                }
                out.push_str(&format!(",{},{}", d.tail_sum, d.stage));
                for z in &d.zeta {
                    out.push_str(&format!(",{z}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn final_point(&self) -> &RecordPoint {
        self.points.last().expect("a record always holds the initial point")
    }

    pub fn final_tail(&self) -> Option<f64> {
        self.final_point().diag.as_ref().map(|d| d.tail_sum)
    }

    pub fn stages(&self) -> Vec<u8> {
        self.points.iter().filter_map(|p| p.diag.as_ref().map(|d| d.stage)).collect()
    }

    /// Stage labels with consecutive repeats collapsed.
    pub fn stage_path(&self) -> Vec<u8> {
        let mut path: Vec<u8> = Vec::new();
        for s in self.stages() {
            if path.last() != Some(&s) {
                path.push(s);
            }
        }
        path
    }

    /// First recorded iteration labelled with each of stages 1, 2 and 3.
    pub fn stage_entries(&self) -> [Option<u64>; 3] {
        let mut first = [None; 3];
        for p in &self.points {
            if let Some(d) = &p.diag {
                first[d.stage as usize - 1].get_or_insert(p.s);
            }
        }
        first
    }

    /// Whether the run starts in stage 1 and enters stage 2 before stage 3.
    ///
    /// Labels flicker while a noisy coordinate sits near its threshold, so
    /// the order is judged by first entries.
    pub fn stages_in_order(&self) -> bool {
        match self.stage_entries() {
            [Some(a), Some(b), Some(c)] => a == self.points[0].s && a < b && b < c,
            _ => false,
        }
    }

    /// First recorded iteration labelled with a stage other than 1.
    pub fn stage1_exit(&self) -> Option<u64> {
        self.points.iter().find(|p| p.diag.as_ref().is_some_and(|d| d.stage != 1)).map(|p| p.s)
    }

    /// Series of the `p`-th tracked `ζ` across recorded points.
    pub fn zeta_series(&self, p: usize) -> Vec<f64> {
        self.points.iter().filter_map(|pt| pt.diag.as_ref().map(|d| d.zeta[p])).collect()
    }
}

/// Derived seeds of a run: stream, initial frame, perturbation.
fn sub_seeds(seed: u64) -> (u64, u64, u64) {
    (seed, replicate_seed(seed, u64::MAX), replicate_seed(seed, u64::MAX - 1))
}

/// Runs the solver on a fresh chain of `model` seeded by `config.seed`.
///
/// The ground truth, when given, is only used for diagnostics, population
/// mode and stationary-point initialization.
pub fn run_model(model: &Arc<Model>, truth: Option<&SpectralTruth>, config: &RunConfig) -> Result<TrajectoryRecord> {
    let mut config = config.clone();
    config.zero_mean.get_or_insert(model.zero_mean());
    let (stream_seed, _, _) = sub_seeds(config.seed);
    let mut stream = StreamHandle::new(model.clone(), stream_seed);
    run(&mut stream, truth, &config)
}

/// Downsampled Oja (or GHA) on `source` until `config.max_samples` samples are consumed.
pub fn run<S: SampleSource + ?Sized>(
    source: &mut S,
    truth: Option<&SpectralTruth>,
    config: &RunConfig,
) -> Result<TrajectoryRecord> {
    let m = source.dim();
    config.validate(m)?;
    if let Some(t) = truth {
        if t.dim() != m {
            return Err(Error::Shape(format!("truth is {}-dimensional, data is {m}-dimensional", t.dim())));
        }
    }
    let (_, init_seed, perturb_seed) = sub_seeds(config.seed);
    let mut frame = match &config.init {
        Init::Random => init_random(m, config.r, init_seed)?,
        Init::StationaryPoint { indices, jitter } => {
            let t = truth.ok_or_else(|| Error::invalid("init", "stationary-point initialization needs the ground truth"))?;
            init_at_stationary_point(t, indices, *jitter, init_seed)?
        }
    };
    let population_x = if config.population {
        let t = truth.ok_or_else(|| Error::invalid("population", "population mode needs the ground truth"))?;
        Some(t.sigma.add(&Matrix::identity(m).scale(config.perturbation_eps)))
    } else {
        None
    };

    let plan = DownsamplePlan::new(config.h, config.zero_mean.unwrap_or(true))?;
    let per_block = plan.samples_per_block() as u64;
    let mut sampler = BlockSampler::new(plan, m);
    let mut perturb_rng = StreamRng::new(perturb_seed);
    if population_x.is_none() && !source.skip(config.burn_in as usize) {
        return Err(Error::invalid("burn_in", "source ran dry during burn-in"));
    }

    let mut recorder = Recorder::new(truth, &frame, config)?;
    let mut t = 0.0;
    recorder.record(&frame, t, config.eta_at(frame.k))?;
    let mut below = 0;
    while frame.k + per_block <= config.max_samples {
        let eta = config.eta_at(frame.k);
        match &population_x {
            Some(x) => {
                frame = match config.variant {
                    Variant::Oja => super::frame::oja_step(&frame, x, eta)?,
                    Variant::Gha => super::frame::gha_step(&frame, x, eta),
                };
            }
            None => {
                let perturb = (config.perturbation_eps > 0.0).then_some((&mut perturb_rng, config.perturbation_eps));
                let Some((v, scale)) = sampler.next(source, perturb) else { break };
                match config.variant {
                    Variant::Oja => frame.oja_rank_one(v, scale, eta, config.orthogonalizer)?,
                    Variant::Gha => frame.gha_rank_one(v, scale, eta),
                }
            }
        }
        frame.k += per_block;
        t += eta;
        if frame.s % config.record_every == 0 {
            let tail = recorder.record(&frame, t, config.eta_at(frame.k))?;
            if let (Some(target), Some(tail)) = (config.early_stop, tail) {
                below = if tail < target { below + 1 } else { 0 };
                if below >= 5 {
                    break;
                }
            }
        }
    }
    if recorder.last_s() != Some(frame.s) {
        recorder.record(&frame, t, config.eta_at(frame.k))?;
    }
    Ok(TrajectoryRecord {
        m,
        r: config.r,
        h: config.h,
        eta: config.eta,
        delta_sq: config.delta_sq(),
        seed: config.seed,
        tracked_zeta: config.track_zeta.clone(),
        points: recorder.points,
        final_frame: frame,
    })
}

struct Recorder<'a> {
    truth: Option<&'a SpectralTruth>,
    r: usize,
    eta: f64,
    delta_sq: f64,
    track: Vec<(usize, usize)>,
    /// `Q` and Ritz values of the initial frame, for `ζ`.
    basis: Option<(Matrix, Vec<f64>)>,
    points: Vec<RecordPoint>,
}

impl<'a> Recorder<'a> {
    fn new(truth: Option<&'a SpectralTruth>, frame: &Frame, config: &RunConfig) -> Result<Self> {
        let basis = match truth {
            Some(t) if !config.track_zeta.is_empty() => Some(zeta_basis(&t.rotate(&frame.u), t)?),
            _ => None,
        };
        Ok(Self {
            truth,
            r: config.r,
            eta: config.eta,
            delta_sq: config.delta_sq(),
            track: config.track_zeta.clone(),
            basis,
            points: Vec::new(),
        })
    }

    fn last_s(&self) -> Option<u64> {
        self.points.last().map(|p| p.s)
    }

    fn record(&mut self, frame: &Frame, t: f64, eta_next: f64) -> Result<Option<f64>> {
        let diag = match self.truth {
            None => None,
            Some(truth) => {
                let defect = frame.u.orthonormality_defect();
                let u = if defect > 1e-12 { orthonormalize(&frame.u)? } else { frame.u.clone() };
                let ub = truth.rotate(&u);
                let angles = gamma_tail(&ub, self.r);
                let zeta = match &self.basis {
                    Some((q, ritz)) => {
                        let z = zeta_with_basis(&ub, q.clone(), ritz.clone(), self.eta);
                        self.track.iter().map(|&(i, j)| z.get(i, j)).collect()
                    }
                    None => Vec::new(),
                };
                Some(PointDiagnostics {
                    stage: stage_label(angles.gamma_r_sq, angles.tail_sum, self.delta_sq),
                    gamma_tilde_sq: gamma_tilde(&ub, self.r).ok(),
                    gamma_sq: angles.gamma_sq,
                    gamma_r_sq: angles.gamma_r_sq,
                    tail_sum: angles.tail_sum,
                    zeta,
                    orthonormality_defect: defect,
                })
            }
        };
        let tail = diag.as_ref().map(|d| d.tail_sum);
        self.points.push(RecordPoint { s: frame.s, k: frame.k, t, eta: eta_next, diag });
        Ok(tail)
    }
}
