use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use streampca::diagnostics::principal_angles;
use streampca::linalg::{sym_eig, Matrix, SpectralTruth};
use streampca::solver::{run, RunConfig, Schedule};
use streampca::timeseries::{replicate_seed, SeriesSource};

use crate::commands::Artifacts;
use crate::spec::{ColumnRef, RealDataSpec};

#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Data rows in the file before missing-value filtering.
    pub rows_read: usize,
}

/// Reads the selected columns, dropping rows with the sentinel (or an empty
/// field) in any of them. Any other non-numeric field is an error.
pub fn load_table(spec: &RealDataSpec) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(u8::try_from(spec.delimiter).context("delimiter must be a single-byte character")?)
        .has_headers(spec.has_header)
        .flexible(true)
        .from_path(&spec.csv)
        .with_context(|| format!("opening {}", spec.csv.display()))?;
    let header: Vec<String> = if spec.has_header {
        reader.headers()?.iter().map(|s| s.trim().to_string()).collect()
    } else {
        Vec::new()
    };
    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r?,
        None => bail!("{} holds no data rows", spec.csv.display()),
    };
    let width = first.len();
    let selected: Vec<usize> = match &spec.columns {
        None => (0..width).collect(),
        Some(cols) => cols
            .iter()
            .map(|c| match c {
                ColumnRef::Index(i) if *i < width => Ok(*i),
                ColumnRef::Index(i) => bail!("column index {i} is out of range (width {width})"),
                ColumnRef::Name(n) => header.iter().position(|h| h == n).with_context(|| format!("no column named `{n}`")),
            })
            .collect::<Result<_>>()?,
    };
    if selected.is_empty() {
        bail!("no columns selected");
    }
    let columns = selected.iter().map(|&i| header.get(i).cloned().unwrap_or_else(|| format!("col{i}"))).collect();

    let mut rows = Vec::new();
    let mut rows_read = 0;
    for (line, rec) in std::iter::once(Ok(first)).chain(records).enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        rows_read += 1;
        let mut row = Vec::with_capacity(selected.len());
        let mut missing = false;
        for &c in &selected {
            let field = rec.get(c).unwrap_or("").trim();
            if field.is_empty() {
                missing = true;
                continue;
            }
            let x: f64 = field
                .replace(',', ".")
                .parse()
                .with_context(|| format!("data row {}: column {c} holds non-numeric `{field}`", line + 1))?;
            if x == spec.missing_sentinel || !x.is_finite() {
                missing = true;
            }
            row.push(x);
        }
        if !missing {
            rows.push(row);
        }
    }
    Ok(Table { columns, rows, rows_read })
}

/// Centers each column and divides by its sample standard deviation.
pub fn zscore(rows: &mut [Vec<f64>]) -> Result<()> {
    let n = rows.len() as f64;
    let m = rows.first().map_or(0, Vec::len);
    for c in 0..m {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
        let sd = (rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if !(sd > 0.0) {
            bail!("column {c} is constant and cannot be standardized");
        }
        for r in rows.iter_mut() {
            r[c] = (r[c] - mean) / sd;
        }
    }
    Ok(())
}

/// `(1/n) Σ z zᵀ` of centered rows.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Matrix {
    let m = rows[0].len();
    let mut s = Matrix::zeros(m, m);
    for r in rows {
        s.axpy(1.0, &Matrix::outer(r, 1.0));
    }
    s.scale(1.0 / rows.len() as f64).symmetrize()
}

/// Projects rows onto `span U` and rotates the projected cloud onto its own
/// principal axes, leading axis first. Each axis is signed so that its
/// largest-magnitude loading is positive.
pub fn project_aligned(rows: &[Vec<f64>], u: &Matrix) -> Result<Vec<Vec<f64>>> {
    let proj: Vec<Vec<f64>> = rows.iter().map(|z| u.vecmat(z)).collect();
    let w = sym_eig(&sample_covariance_raw(&proj))?.vectors;
    Ok(proj.iter().map(|p| w.vecmat(p)).collect())
}

fn sample_covariance_raw(rows: &[Vec<f64>]) -> Matrix {
    let n = rows.len() as f64;
    let m = rows[0].len();
    let mean: Vec<f64> = (0..m).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n).collect();
    let centered: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(x, mu)| x - mu).collect()).collect();
    sample_covariance(&centered)
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockResult {
    pub h: usize,
    pub iterations: u64,
    /// Principal angles between the streaming and batch frames.
    pub angles_to_batch: Vec<f64>,
    pub sin_sq_to_batch: f64,
    #[serde(skip)]
    pub frame: Matrix,
    #[serde(skip)]
    pub projection: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RealDataOutcome {
    pub columns: Vec<String>,
    pub rows_read: usize,
    pub rows_kept: usize,
    pub batch_eigvals: Vec<f64>,
    pub per_h: Vec<BlockResult>,
    #[serde(skip)]
    pub batch_frame: Matrix,
    #[serde(skip)]
    pub batch_projection: Vec<Vec<f64>>,
}

fn default_run(r: usize) -> RunConfig {
    let mut c = RunConfig::new(0.5, 1, r, 0);
    c.schedule = Schedule::Staircase;
    c
}

pub fn analyze(spec: &RealDataSpec) -> Result<RealDataOutcome> {
    if spec.h_grid.is_empty() || spec.h_grid.contains(&0) {
        bail!("invalid h_grid: must be non-empty with entries ≥ 1");
    }
    let table = load_table(spec)?;
    let m = table.columns.len();
    if table.rows.len() < 10 * m {
        bail!("only {} rows survive missing-value filtering; need at least {} (10·m)", table.rows.len(), 10 * m);
    }
    if spec.r < 1 || spec.r > m {
        bail!("invalid r: need 1 ≤ r ≤ m = {m}, got {}", spec.r);
    }
    let mut rows = table.rows;
    zscore(&mut rows)?;
    let batch = SpectralTruth::from_sigma(sample_covariance(&rows))?;
    let batch_frame = batch.eigvecs.select_columns(&(0..spec.r).collect::<Vec<_>>());
    let batch_projection = project_aligned(&rows, &batch_frame)?;
    let rows = Arc::new(rows);
    let template = spec.run.clone().unwrap_or_else(|| default_run(spec.r));

    let per_h = spec
        .h_grid
        .par_iter()
        .map(|&h| {
            let mut c = template.clone();
            c.h = h;
            c.r = spec.r;
            c.max_samples = rows.len() as u64;
            c.zero_mean.get_or_insert(true);
            c.seed = replicate_seed(spec.seed, h as u64);
            c.record_every = u64::MAX;
            let mut source = SeriesSource::new(rows.clone());
            let rec = run(&mut source, Some(&batch), &c)?;
            let frame = rec.final_frame.u.clone();
            let angles = principal_angles(&frame, &batch_frame)?;
            Ok(BlockResult {
                h,
                iterations: rec.final_frame.s,
                angles_to_batch: angles.thetas,
                sin_sq_to_batch: angles.tail_sum,
                projection: project_aligned(&rows, &frame)?,
                frame,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RealDataOutcome {
        columns: table.columns,
        rows_read: table.rows_read,
        rows_kept: rows.len(),
        batch_eigvals: batch.eigvals,
        per_h,
        batch_frame,
        batch_projection,
    })
}

fn xy_csv(points: &[Vec<f64>]) -> String {
    let r = points.first().map_or(0, Vec::len);
    let names = ["x", "y"];
    let header: Vec<String> = (0..r).map(|i| names.get(i).map_or(format!("pc{}", i + 1), |s| s.to_string())).collect();
    let mut out = header.join(",");
    out.push('\n');
    for p in points {
        out.push_str(&p.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn cmd_realdata(spec: &RealDataSpec, out: &Path) -> Result<RealDataOutcome> {
    let outcome = analyze(spec)?;
    let mut art = Artifacts::new("realdata", out)?;
    art.write("batch.csv", &xy_csv(&outcome.batch_projection))?;
    for b in &outcome.per_h {
        art.write(&format!("h_{}.csv", b.h), &xy_csv(&b.projection))?;
    }
    let mut angles = String::from("h,iterations,max_angle,sin_sq_to_batch\n");
    for b in &outcome.per_h {
        let max = b.angles_to_batch.last().copied().unwrap_or(0.0);
        angles.push_str(&format!("{},{},{max},{}\n", b.h, b.iterations, b.sin_sq_to_batch));
    }
    art.write("angles.csv", &angles)?;
    art.write("summary.json", &serde_json::to_string_pretty(&outcome)?)?;
    art.finish()?;
    Ok(outcome)
}
