use std::sync::Arc;

use super::models::Model;
use super::rng::StreamRng;

/// Anything that yields a sequence of `m`-vectors, one per call.
pub trait SampleSource {
    fn dim(&self) -> usize;

    /// Next sample, or `None` once a finite source is exhausted.
    fn next_sample(&mut self) -> Option<&[f64]>;

    /// Skips `n` samples, stopping early if the source runs dry.
    fn skip(&mut self, n: usize) -> bool {
        for _ in 0..n {
            if self.next_sample().is_none() {
                return false;
            }
        }
        true
    }
}

/// A running chain: model, private RNG and current state.
///
/// Owned by one consumer at a time; separate handles are independent and can
/// live on different threads. The chain starts at `z_0 = 0`.
#[derive(Clone, Debug)]
pub struct StreamHandle {
    model: Arc<Model>,
    rng: StreamRng,
    /// Chain state: `z_k`, or the latent `w_k` for the copula model.
    state: Vec<f64>,
    output: Vec<f64>,
    scratch: Vec<f64>,
    emitted: u64,
}

impl StreamHandle {
    pub fn new(model: impl Into<Arc<Model>>, seed: u64) -> Self {
        Self::with_rng(model.into(), StreamRng::new(seed))
    }

    pub fn with_rng(model: Arc<Model>, rng: StreamRng) -> Self {
        let m = model.dim();
        Self { model, rng, state: vec![0.0; m], output: vec![0.0; m], scratch: Vec::new(), emitted: 0 }
    }

    /// Starts the chain from `z0` instead of the origin. For the copula model
    /// `z0` is the latent state.
    pub fn starting_at(mut self, z0: &[f64]) -> Self {
        assert_eq!(z0.len(), self.state.len(), "initial state has wrong dimension");
        self.state.copy_from_slice(z0);
        self.refresh_output();
        self
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn samples_emitted(&self) -> u64 {
        self.emitted
    }

    pub fn rng(&self) -> &StreamRng {
        &self.rng
    }

    /// Current observation `z_k`.
    pub fn current(&self) -> &[f64] {
        &self.output
    }

    /// Advances one step and returns the new observation.
    pub fn step(&mut self) -> &[f64] {
        match &*self.model {
            Model::Var(m) => m.advance(&mut self.state, &mut self.rng, &mut self.scratch),
            Model::Gvar(m) => m.advance(&mut self.state, &mut self.rng, &mut self.scratch),
            Model::Copula(m) => m.skeleton().advance(&mut self.state, &mut self.rng, &mut self.scratch),
        }
        self.refresh_output();
        self.emitted += 1;
        &self.output
    }

    /// Advances `n_burn` steps, discarding the output.
    pub fn warm_up(mut self, n_burn: usize) -> Self {
        for _ in 0..n_burn {
            self.step();
        }
        self
    }

    /// Latent chain state (equals [`current`](Self::current) except for copulas).
    pub fn latent(&self) -> &[f64] {
        &self.state
    }

    fn refresh_output(&mut self) {
        match &*self.model {
            Model::Copula(m) => m.observe(&self.state, &mut self.output),
            _ => self.output.copy_from_slice(&self.state),
        }
    }
}

impl SampleSource for StreamHandle {
    fn dim(&self) -> usize {
        self.state.len()
    }

    fn next_sample(&mut self) -> Option<&[f64]> {
        Some(self.step())
    }
}

/// A finite, recorded series replayed in order (e.g. rows of a CSV file).
#[derive(Clone, Debug)]
pub struct SeriesSource {
    rows: Arc<Vec<Vec<f64>>>,
    dim: usize,
    cursor: usize,
}

impl SeriesSource {
    pub fn new(rows: Arc<Vec<Vec<f64>>>) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        Self { rows, dim, cursor: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.rows.len() - self.cursor
    }
}

impl SampleSource for SeriesSource {
    fn dim(&self) -> usize {
        self.dim
    }

    fn next_sample(&mut self) -> Option<&[f64]> {
        let row = self.rows.get(self.cursor)?;
        self.cursor += 1;
        Some(row)
    }
}
