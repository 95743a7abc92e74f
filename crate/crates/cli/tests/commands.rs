use std::path::{Path, PathBuf};
use std::process::Command;

use streampca::diagnostics::principal_angles;
use streampca::linalg::Matrix;
use streampca::timeseries::{Model, SampleSource, StreamHandle, VarModel};
use streampca_cli::commands::{cmd_bias_probe, cmd_block_sweep, cmd_trajectory, simulate_bias, simulate_trajectories};
use streampca_cli::realdata::analyze;
use streampca_cli::spec::{ExperimentSpec, RealDataSpec};

fn small_spec() -> ExperimentSpec {
    ExperimentSpec::from_json(
        r#"{
            "kind": "trajectory",
            "model": {
                "kind": "var",
                "bindings": { "V": "random_orthogonal(5, 3)" },
                "a": "conjugate(V, diag([0.5, 0.4, 0.3, 0.2, 0.1]))",
                "noise_cov": "diag([4, 3, 1, 1, 1])"
            },
            "run": { "eta": 0.005, "h": 2, "r": 2, "max_samples": 6000, "record_every": 50, "track_zeta": [[3, 1]] },
            "replicates": 3,
            "seed": 9
        }"#,
    )
    .unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cmd_trajectory(&small_spec(), &a).unwrap();
    cmd_trajectory(&small_spec(), &b).unwrap();
    let index: Vec<String> = serde_json::from_slice::<serde_json::Value>(&read(&a, "index.json")).unwrap()["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert!(index.contains(&"trajectory_002.csv".to_string()));
    for name in &index {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = dir.path().join("c");
    pool.install(|| cmd_trajectory(&small_spec(), &c)).unwrap();
    assert_eq!(read(&a, "trajectory_001.csv"), read(&c, "trajectory_001.csv"));
}

#[test]
fn trajectory_csv_round_trips() {
    let out = simulate_trajectories(&small_spec()).unwrap();
    let rec = &out.records[0];
    let text = rec.to_csv();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["s", "k", "eta", "gamma_sq_3", "gamma_sq_4", "gamma_sq_5", "sum_tail", "stage", "zeta_3_1"]);
    let rows: Vec<Vec<f64>> =
        reader.records().map(|r| r.unwrap().iter().map(|f| f.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), rec.points.len());
    for (row, p) in rows.iter().zip(&rec.points) {
        let d = p.diag.as_ref().unwrap();
        let want: Vec<f64> = [p.s as f64, p.k as f64, p.eta]
            .into_iter()
            .chain(d.gamma_sq.iter().copied())
            .chain([d.tail_sum, d.stage as f64])
            .chain(d.zeta.iter().copied())
            .collect();
        for (x, y) in row.iter().zip(&want) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}

#[test]
fn zero_budget_writes_the_initial_point_only() {
    let mut spec = small_spec();
    spec.replicates = 1;
    spec.run.as_mut().unwrap().max_samples = 0;
    let dir = tempfile::tempdir().unwrap();
    cmd_trajectory(&spec, dir.path()).unwrap();
    let text = String::from_utf8(read(dir.path(), "trajectory_000.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn invalid_run_configs_name_the_field() {
    for (patch, field) in [(r#""r": 9"#, "r"), (r#""eta": 0"#, "eta"), (r#""h": 0"#, "h")] {
        let text = format!(
            r#"{{"model": {{"kind": "var", "a": "diag([0.5, 0.5])", "noise_cov": "identity(2)"}},
                "run": {{"eta": 0.01, "h": 1, "r": 1, "max_samples": 100, {patch}}}}}"#
        );
        let text = text.replacen(r#""eta": 0.01, "h": 1, "r": 1, "max_samples": 100, "#, &base_without(field), 1);
        let spec = ExperimentSpec::from_json(&text).unwrap();
        let err = simulate_trajectories(&spec).err().unwrap();
        assert!(format!("{err:#}").contains(&format!("invalid {field}")), "{field}: {err:#}");
    }
    let unknown = r#"{"model": {"kind": "var", "a": "identity(1)", "noise_cov": "identity(1)"}, "runn": {}}"#;
    assert!(ExperimentSpec::from_json(unknown).is_err());
}

/// Run fields other than `field`, so the patched value is the only one present.
fn base_without(field: &str) -> String {
    [("eta", "0.01"), ("h", "1"), ("r", "1"), ("max_samples", "100")]
        .iter()
        .filter(|(k, _)| *k != field)
        .map(|(k, v)| format!(r#""{k}": {v}, "#))
        .collect()
}

#[test]
fn single_cell_sweep() {
    let spec = ExperimentSpec::from_json(
        r#"{
            "model": { "kind": "var", "a": "scaled(0.3, identity(3))", "noise_cov": "diag([3, 1, 0.5])" },
            "run": { "eta": 1.0, "schedule": { "kind": "staircase" }, "h": 1, "r": 1, "max_samples": 4000 },
            "replicates": 2,
            "sweep": { "h_grid": [2], "eta0_grid": [0.5] }
        }"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_block_sweep(&spec, dir.path()).unwrap();
    assert_eq!(out.mean_tail.len(), 1);
    assert_eq!(out.mean_tail[0].len(), 1);
    let table = String::from_utf8(read(dir.path(), "table.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.starts_with("h,eta0=0.5\n2,"));
}

#[test]
fn bias_probe_rejects_non_var_and_empty_grids() {
    let gvar = ExperimentSpec::from_json(
        r#"{"model": {"kind": "gvar", "coeffs": [[0.3]], "family": "poisson"}, "bias": {"h_grid": [1], "n_mc": 1000}}"#,
    )
    .unwrap();
    assert!(simulate_bias(&gvar).unwrap_err().to_string().contains("VAR-only"));
    let empty = ExperimentSpec::from_json(
        r#"{"model": {"kind": "var", "a": [[0.5]], "noise_cov": [[1]]}, "bias": {"h_grid": [], "n_mc": 1000}}"#,
    )
    .unwrap();
    assert!(simulate_bias(&empty).unwrap_err().to_string().contains("h_grid"));
}

#[test]
fn bias_csv_has_one_row_per_block_size() {
    let spec = ExperimentSpec::from_json(
        r#"{"model": {"kind": "var", "a": [[0.7]], "noise_cov": [[1]]}, "seed": 3,
            "bias": {"h_grid": [1, 2, 4, 8], "n_mc": 20000, "z0": [10]}}"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    cmd_bias_probe(&spec, dir.path()).unwrap();
    let text = String::from_utf8(read(dir.path(), "bias.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,empirical,closed_form,se,log_slope"));
    let hs: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(hs, ["1", "2", "4", "8"]);
}

/// Mixed VAR coordinates with a few rows knocked out by the sentinel.
fn write_series(dir: &Path, rows: usize) -> PathBuf {
    let var = VarModel::new(Matrix::diag(&[0.6, 0.3, 0.0]), Matrix::diag(&[9.0, 4.0, 1.0])).unwrap();
    let mut stream = StreamHandle::new(Model::from(var), 12);
    let mut text = String::from("when,x,y,z\n");
    for i in 0..rows {
        let z = stream.next_sample().unwrap().to_vec();
        if i % 97 == 5 {
            text.push_str(&format!("t{i},-200,{},{}\n", z[1], z[2]));
        } else {
            text.push_str(&format!("t{i},{},{},{}\n", z[0] + 0.3 * z[2] + 10.0, z[0] + z[1], z[1] - 0.3 * z[2]));
        }
    }
    let path = dir.join("series.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn realdata_spec(csv: PathBuf) -> RealDataSpec {
    RealDataSpec {
        csv,
        delimiter: ',',
        has_header: true,
        columns: Some(serde_json::from_str(r#"["x", "y", 3]"#).unwrap()),
        missing_sentinel: -200.0,
        normalization: Default::default(),
        r: 2,
        h_grid: vec![1, 4],
        run: None,
        seed: 1,
    }
}

/// Top eigenvectors of a symmetric matrix by power iteration with deflation.
fn power_pairs(s: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = s.len();
    let mut a: Vec<Vec<f64>> = s.to_vec();
    let (mut vals, mut vecs) = (Vec::new(), Vec::new());
    for j in 0..k {
        let mut v: Vec<f64> = (0..m).map(|i| 1.0 + (i + j) as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let w: Vec<f64> = (0..m).map(|i| (0..m).map(|c| a[i][c] * v[c]).sum()).collect();
            let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            lambda = v.iter().zip(&w).map(|(x, y)| x * y).sum();
            v = w.iter().map(|x| x / n).collect();
        }
        for i in 0..m {
            for c in 0..m {
                a[i][c] -= lambda * v[i] * v[c];
            }
        }
        vals.push(lambda);
        vecs.push(v);
    }
    (vals, vecs)
}

#[test]
fn batch_subspace_matches_classical_pca() {
    let dir = tempfile::tempdir().unwrap();
    let spec = realdata_spec(write_series(dir.path(), 40_000));
    let out = analyze(&spec).unwrap();
    assert_eq!(out.rows_read, 40_000);
    assert_eq!(out.rows_kept, 40_000 - 413);
    assert_eq!(out.columns, ["x", "y", "z"]);

    let text = std::fs::read_to_string(&spec.csv).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|f| f.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .filter(|r| !r.contains(&-200.0))
        .collect();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..3).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n).collect();
    let sd: Vec<f64> =
        (0..3).map(|c| (rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()).collect();
    let z: Vec<Vec<f64>> = rows.iter().map(|r| (0..3).map(|c| (r[c] - mean[c]) / sd[c]).collect()).collect();
    let cov: Vec<Vec<f64>> =
        (0..3).map(|i| (0..3).map(|j| z.iter().map(|r| r[i] * r[j]).sum::<f64>() / n).collect()).collect();
    let (vals, vecs) = power_pairs(&cov, 2);
    for (a, b) in vals.iter().zip(&out.batch_eigvals) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    let oracle = Matrix::from_columns(&vecs).unwrap();
    assert!(principal_angles(&out.batch_frame, &oracle).unwrap().tail_sum < 1e-8);

    for b in &out.per_h {
        assert_eq!(b.projection.len(), out.rows_kept);
        assert!(b.sin_sq_to_batch < 0.5, "h = {}: {}", b.h, b.sin_sq_to_batch);
    }
}

#[test]
fn missing_values_and_bad_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gone.csv");
    std::fs::write(&path, "a,b\n-200,1\n2,-200\n-200,-200\n").unwrap();
    let err = analyze(&realdata_spec(path.clone()).with_all_columns()).unwrap_err().to_string();
    assert!(err.contains("rows survive"), "{err}");

    std::fs::write(&path, "a;b\n1,5;2\nx;3\n").unwrap();
    let mut spec = realdata_spec(path).with_all_columns();
    spec.delimiter = ';';
    let err = format!("{:#}", analyze(&spec).unwrap_err());
    assert!(err.contains("non-numeric `x`"), "{err}");
}

trait AllColumns {
    fn with_all_columns(self) -> Self;
}

impl AllColumns for RealDataSpec {
    fn with_all_columns(mut self) -> Self {
        self.columns = None;
        self
    }
}

#[test]
fn binary_runs_a_config_and_reports_bad_ones() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bias.json");
    std::fs::write(
        &config,
        r#"{"kind": "bias-probe", "model": {"kind": "var", "a": [[0.5]], "noise_cov": [[1]]},
            "bias": {"h_grid": [1, 2], "n_mc": 2000}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_streampca"))
        .args(["bias", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--workers", "1", "--seed", "4"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.join("bias.csv").exists() && out.join("index.json").exists());

    let status = Command::new(env!("CARGO_BIN_EXE_streampca"))
        .args(["trajectory", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("other"))
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("declares kind"));
}
