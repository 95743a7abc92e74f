//! Library outputs checked against independent re-computations.

use std::sync::Arc;

use streampca::diagnostics::{inv_normal_cdf, ou_moments, stage_times, OUReference, StageTimeInputs};
use streampca::estimator::{bias_probe, block_estimate, var_conditional_bias, DownsamplePlan};
use streampca::linalg::{sym_eig, Matrix, SpectralTruth};
use streampca::solver::{init_random, run_model, RunConfig};
use streampca::timeseries::{random_orthogonal, Model, SampleSource, StreamHandle, StreamRng, VarModel};

/// `Φ` from the Maclaurin series of `erf`, adequate for `|x| ≤ 3`.
fn normal_cdf_series(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let (mut term, mut sum, mut n) = (z, z, 0.0);
    while term.abs() > 1e-18 * sum.abs().max(1e-300) {
        n += 1.0;
        term *= -z * z / n;
        sum += term / (2.0 * n + 1.0);
    }
    0.5 + sum / std::f64::consts::PI.sqrt()
}

fn inv_normal_bisect(p: f64) -> f64 {
    let (mut lo, mut hi) = (-3.0, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf_series(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn inverse_normal_matches_bisection() {
    assert!((inv_normal_bisect(0.975) - 1.959963984540054).abs() < 1e-13);
    for k in 1..100 {
        let p = 0.01 + 0.98 * k as f64 / 100.0;
        assert!((inv_normal_cdf(p) - inv_normal_bisect(p)).abs() < 1e-13, "p = {p}");
    }
}

#[test]
fn stage_times_match_direct_evaluation() {
    let inp = StageTimeInputs {
        eigvals: vec![3.0, 2.9, 1.0, 0.8],
        r: 2,
        eta: 1e-4,
        delta_sq: 0.01,
        nu: 0.1,
        eps: 0.05,
        g_rr: 1.5,
        g_m: 20.0,
        h: 3,
    };
    let p = stage_times(&inp).unwrap();
    let gap: f64 = 1.9;
    let q = inv_normal_bisect(0.475);
    let t1 = (2.0 * gap * 0.01 / (1e-4 * q * q * 2.25) + 1.0).ln() / (2.0 * gap);
    let t2 = (0.99f64 / 1e-4).ln() / (2.0 * gap);
    let t3 = (8.0 * gap * 0.01 / (gap * 0.05 - 4.0 * 1e-4 * 2.0 * 20.0)).ln() / (2.0 * gap);
    for (got, want) in [(p.t1, t1), (p.t2, t2), (p.t3, t3)] {
        assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
    }
    assert_eq!(p.s1, (t1 / 1e-4).round() as u64);
    assert_eq!(p.samples, p.s_total * 3);
    assert!((p.total - (t1 + t2 + t3.max(0.0))).abs() < 1e-12);
}

/// Euler–Maruyama ensemble of `dζ = Kζ dt + G dB` against the closed-form moments.
#[test]
fn ou_moments_match_simulation() {
    let reference = OUReference { k_drift: -1.0, g_diff: 1.0, initial: 1.0 };
    let (n, dt) = (1000, 1e-3);
    let checkpoints = [500, 1000, 2000];
    let mut rng = StreamRng::new(5);
    let mut paths = vec![1.0f64; n];
    let mut step = 0;
    for &stop in &checkpoints {
        while step < stop {
            for z in paths.iter_mut() {
                *z += reference.k_drift * *z * dt + reference.g_diff * dt.sqrt() * rng.normal();
            }
            step += 1;
        }
        let t = stop as f64 * dt;
        let mean = paths.iter().sum::<f64>() / n as f64;
        let var = paths.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let (m_ref, v_ref) = ou_moments(&reference, t);
        assert!((var / v_ref - 1.0).abs() < 0.1, "t = {t}: {var} vs {v_ref}");
        assert!((mean - m_ref).abs() < 4.0 * (v_ref / n as f64).sqrt(), "t = {t}: {mean} vs {m_ref}");
    }
}

/// Single samples are unbiased; differences `h` apart carry `−a^h σ`.
#[test]
fn block_estimate_means_at_stationarity() {
    let a: f64 = 0.5;
    let model = Arc::new(Model::from(VarModel::new(Matrix::diag(&[a]), Matrix::diag(&[1.0])).unwrap()));
    let sigma = 1.0 / (1.0 - a * a);
    for (zero_mean, want) in [(true, sigma), (false, sigma * (1.0 - a * a))] {
        let plan = DownsamplePlan::new(2, zero_mean).unwrap();
        let mut stream = StreamHandle::new(model.clone(), 17);
        assert!(stream.skip(200));
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| block_estimate(&mut stream, &plan).unwrap()[(0, 0)]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - want).abs() < 4.0 * sd / (n as f64).sqrt(), "zero_mean = {zero_mean}: {mean} vs {want}");
    }
}

#[test]
fn conditional_bias_matches_scalar_formula() {
    let (a, z0) = (0.6f64, 3.0f64);
    let model = VarModel::new(Matrix::diag(&[a]), Matrix::diag(&[1.0])).unwrap();
    let sigma = 1.0 / (1.0 - a * a);
    for h in 1..6 {
        let b = var_conditional_bias(&model, &[z0], h).unwrap()[(0, 0)];
        let want = a.powi(2 * h as i32) * (z0 * z0 - sigma);
        assert!((b - want).abs() < 1e-12, "h = {h}");
    }
    let report = bias_probe(&model, &[1, 2, 3], 50_000, &[z0], 8).unwrap();
    assert!(report.all_within(4.0));
}

#[test]
fn perturbation_recovers_the_span_of_a_degenerate_covariance() {
    let q = random_orthogonal(5, 3);
    let noise = q.transpose().congruence_diag(&[3.0, 2.0, 0.0, 0.0, 0.0]).symmetrize();
    let var = VarModel::new(Matrix::identity(5).scale(0.5), noise).unwrap();
    let sigma = var.stationary_covariance().unwrap();
    let eps = 0.01;
    let bumped = sym_eig(&sigma.add(&Matrix::identity(5).scale(eps))).unwrap();
    let truth = SpectralTruth::from_sigma(sigma).unwrap();
    let model = Arc::new(Model::from(var));
    let mut c = RunConfig::new(5e-3, 1, 2, 20_000);
    c.perturbation_eps = eps;
    c.seed = 2;
    let rec = run_model(&model, Some(&truth), &c).unwrap();
    assert!(rec.final_tail().unwrap() < 0.05, "{:?}", rec.final_tail());
    let top = bumped.vectors.select_columns(&[0, 1]);
    let angles = streampca::diagnostics::principal_angles(&rec.final_frame.u, &top).unwrap();
    assert!(angles.tail_sum < 0.05);
}

#[test]
fn golden_var_trace() {
    let model = VarModel::new(Matrix::identity(2).scale(0.5), Matrix::identity(2)).unwrap();
    let mut stream = StreamHandle::new(Model::from(model), 42);
    let mut rng = StreamRng::new(42);
    let mut z = [0.0f64; 2];
    let mut trace = Vec::new();
    for _ in 0..5 {
        let mut xi = [0.0; 2];
        rng.fill_normal(&mut xi);
        z = [0.5 * z[0] + xi[0], 0.5 * z[1] + xi[1]];
        let got = stream.next_sample().unwrap();
        assert!((got[0] - z[0]).abs() < 1e-15 && (got[1] - z[1]).abs() < 1e-15);
        trace.push(z);
    }
    let frozen = [
        [0.12793483831474636, 0.31669663200296094],
        [-1.031960644691991, 2.083997358092401],
        [-0.9796158853461119, 0.2743221539444295],
        [-1.1035027510917705, 1.1086430694435798],
        [0.21450157833257877, -0.18415114250930575],
    ];
    assert_eq!(trace, frozen);
}

#[test]
fn golden_initial_frame() {
    let f = init_random(4, 2, 7).unwrap();
    let mut rng = StreamRng::new(7);
    let mut g = Matrix::zeros(4, 2);
    rng.fill_normal(g.as_mut_slice());
    let mut cols: Vec<Vec<f64>> = (0..2).map(|j| g.column(j)).collect();
    for j in 0..2 {
        for k in 0..j {
            let d: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
            let prev = cols[k].clone();
            cols[j].iter_mut().zip(&prev).for_each(|(a, b)| *a -= d * b);
        }
        let n = cols[j].iter().map(|a| a * a).sum::<f64>().sqrt();
        cols[j].iter_mut().for_each(|a| *a /= n);
    }
    assert!(f.u.sub(&Matrix::from_columns(&cols).unwrap()).max_abs() < 1e-14);
    let frozen = [
        [-0.1570654476606057, -0.16166069825877555],
        [0.4721332512810662, 0.5502907613650254],
        [0.6038225624006943, -0.7675376452820886],
        [-0.6227511150707022, -0.28623741836037475],
    ];
    for (row, want) in f.u.to_rows().iter().zip(frozen) {
        assert_eq!(row.as_slice(), want.as_slice());
    }
}
