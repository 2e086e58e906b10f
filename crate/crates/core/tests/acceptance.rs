//! Acceptance criteria 1-9. Each test writes one `criterion N [PASS|FAIL]`
//! line straight to stderr so the lines survive output capture.

mod common;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use altikrig::analysis::{
    classify, series_metrics, ClimatologySource, EventClass, FloodReport, SeasonWindow, Source, DROUGHT_THRESHOLD_M,
    FLOOD_THRESHOLD_M,
};
use altikrig::covariance::{build_matrices, process_cov, CovarianceParams};
use altikrig::kriging::{
    anchored_trend, epochs, predict, predict_with, read_series_csv, solve_weights, NeighborhoodSpec,
};
use altikrig::network::read_network;
use altikrig::pipeline::{
    cmd_fit, cmd_predict, cmd_simulate, cmd_validate, fit_covariance, prepare, PredictMode, PredictOptions, Scenario,
};
use altikrig::sim::{covariance_recovery_config, read_targets, recovery_params, simulate};
use altikrig::trend::{build_basis, ConstantMean, TrendFunctions, DEFAULT_KNOT_SPACING_KM};
use altikrig::NetworkLocation;
use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACTNESS_TOL_M: f64 = 1e-8;
const UNBIASEDNESS_TOL: f64 = 1e-8;
const ORACLE_REL_TOL: f64 = 1e-7;
const PSD_REL_TOL: f64 = 1e-9;
const RECOVERY_REL_TOL: f64 = 0.10;
const FLOOD_POD_MIN: f64 = 0.8;
const FLOOD_FAR_MAX: f64 = 0.2;
const SEASON_EPOCHS: usize = 37;
const E2E_SEED: u64 = 1;

fn report(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n} [{}] {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

// ---------------------------------------------------------------- criterion 1

struct Exactness {
    configs: usize,
    predictions: usize,
    failures: usize,
    max_error: f64,
    residuals: Vec<f64>,
    elapsed: Duration,
}

fn exactness_sweep() -> Exactness {
    let start = Instant::now();
    let mut out = Exactness {
        configs: 200,
        predictions: 0,
        failures: 0,
        max_error: 0.0,
        residuals: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for seed in 0..out.configs as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let edges = rng.random_range(3..=12);
        let net = common::random_network(&mut rng, edges);
        let n = rng.random_range(5..=30);
        let obs = common::random_observations(&mut rng, &net, n);
        let params = common::random_params(&mut rng, 0.0);
        let basis = build_basis(&net, DEFAULT_KNOT_SPACING_KM).unwrap();
        let trend: &dyn TrendFunctions = if seed % 2 == 0 { &basis } else { &ConstantMean };
        for (i, o) in obs.iter().enumerate() {
            out.predictions += 1;
            let all: Vec<usize> = (0..obs.len()).collect();
            match predict_with(&net, trend, &params, &obs, all, o.location, o.t_days()) {
                Ok(p) => {
                    out.max_error = out.max_error.max((p.height_m - obs[i].height_m).abs());
                    out.residuals.push(p.unbiasedness_residual);
                }
                Err(_) => out.failures += 1,
            }
        }
    }
    out.elapsed = start.elapsed();
    out
}

#[test]
fn criterion_1_kriging_exactness() {
    let r = exactness_sweep();
    let pass = r.failures == 0 && r.max_error <= EXACTNESS_TOL_M && r.elapsed < Duration::from_secs(10);
    report(
        1,
        pass,
        &format!(
            "kriging exactness: {} configs, {} predictions, {} failed, max |error| {:.2e} m, {:.2?}",
            r.configs, r.predictions, r.failures, r.max_error, r.elapsed
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 3

struct Oracle {
    instances: usize,
    failures: usize,
    max_rel: f64,
    residuals: Vec<f64>,
    elapsed: Duration,
}

/// Weights from the dense bordered system `[S F; F' 0] [l; m] = [c; f]`.
fn bordered_weights(
    s: &DMatrix<f64>,
    f_obs: &DMatrix<f64>,
    c: &DVector<f64>,
    f: &DVector<f64>,
) -> Option<DVector<f64>> {
    let (n, p) = f_obs.shape();
    let mut a = DMatrix::zeros(n + p, n + p);
    a.view_mut((0, 0), (n, n)).copy_from(s);
    a.view_mut((0, n), (n, p)).copy_from(f_obs);
    a.view_mut((n, 0), (p, n)).copy_from(&f_obs.transpose());
    let mut rhs = DVector::zeros(n + p);
    rhs.rows_mut(0, n).copy_from(c);
    rhs.rows_mut(n, p).copy_from(f);
    let x = a.lu().solve(&rhs)?;
    Some(x.rows(0, n).into_owned())
}

fn oracle_sweep() -> Oracle {
    let start = Instant::now();
    let mut out = Oracle {
        instances: 500,
        failures: 0,
        max_rel: 0.0,
        residuals: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for seed in 0..out.instances as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let edges = rng.random_range(1..10);
        let net = common::random_network(&mut rng, edges);
        let n = rng.random_range(2..=12);
        let obs = common::random_observations(&mut rng, &net, n);
        let nugget = rng.random_range(0.01..0.5);
        let params = common::random_params(&mut rng, nugget);
        let m = build_matrices(&net, &obs, &params);
        let p = rng.random_range(1..=3.min(n - 1));
        let t_mean = obs.iter().map(|o| o.t_days()).sum::<f64>() / n as f64;
        let row = |s: NetworkLocation, t: f64| [1.0, net.chainage(s) / 1000.0, (t - t_mean) / 30.0];
        let f_obs = DMatrix::from_fn(n, p, |i, j| row(obs[i].location, obs[i].t_days())[j]);
        let s0 = common::random_location(&mut rng, &net);
        let t0 = t_mean + rng.random_range(-20.0..20.0);
        let f = DVector::from_fn(p, |j, _| row(s0, t0)[j]);
        let c = DVector::from_iterator(
            n,
            obs.iter()
                .map(|o| process_cov(&net, (s0, t0), (o.location, o.t_days()), &params)),
        );
        let mut total = m.sigma_u.clone();
        total.set_diagonal(&(total.diagonal() + &m.sigma_alti));
        match (
            solve_weights(&m.sigma_u, &m.sigma_alti, &f_obs, &c, &f),
            bordered_weights(&total, &f_obs, &c, &f),
        ) {
            (Ok(sol), Some(lb)) => {
                let scale = lb.amax().max(f64::MIN_POSITIVE);
                out.max_rel = out.max_rel.max((&sol.lambda - &lb).amax() / scale);
                out.residuals.push(sol.unbiasedness_residual(&f_obs, &f));
            }
            _ => out.failures += 1,
        }
    }
    out.elapsed = start.elapsed();
    out
}

#[test]
fn criterion_3_oracle_equivalence() {
    let r = oracle_sweep();
    let pass = r.failures == 0 && r.max_rel <= ORACLE_REL_TOL && r.elapsed < Duration::from_secs(30);
    report(
        3,
        pass,
        &format!(
            "bordered-system oracle: {} instances (n <= 12), {} failed, max relative weight difference {:.2e}, {:.2?}",
            r.instances, r.failures, r.max_rel, r.elapsed
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_unbiasedness() {
    let mut residuals = exactness_sweep().residuals;
    residuals.extend(oracle_sweep().residuals);
    let series = season_predictions();
    residuals.extend(series.iter().map(|p| p.1));
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    let pass = !residuals.is_empty() && worst <= UNBIASEDNESS_TOL;
    report(
        2,
        pass,
        &format!(
            "unbiasedness: {} solved systems (exactness, oracle, simulated season), max |F'l - f| {:.2e}",
            residuals.len(),
            worst
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_covariance_psd() {
    let mut worst = f64::INFINITY;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
        let edges = rng.random_range(1..16);
        let net = common::random_network(&mut rng, edges);
        let n = rng.random_range(2..=40);
        let obs = common::random_observations(&mut rng, &net, n);
        let params = common::random_params(&mut rng, 0.0);
        let m = build_matrices(&net, &obs, &params);
        let eig = SymmetricEigen::new(m.sigma_u).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        worst = worst.min(lo / hi.abs().max(f64::MIN_POSITIVE));
    }
    let pass = worst >= -PSD_REL_TOL;
    report(
        4,
        pass,
        &format!("Sigma_U PSD: 100 random networks, min eigenvalue / max eigenvalue {worst:.2e}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_parameter_round_trip() {
    let start = Instant::now();
    let cfg = covariance_recovery_config();
    let sim = simulate(&cfg, E2E_SEED).unwrap();
    let (obs, prep) = prepare(&sim.network, sim.observations, Scenario::WholeBasin);
    let fit = fit_covariance(&sim.network, &obs, Scenario::WholeBasin, prep).unwrap();
    let elapsed = start.elapsed();
    let (t, p) = (recovery_params(), fit.params);
    let errors = [
        ("sigma2_river", (p.sigma2_river - t.sigma2_river) / t.sigma2_river),
        ("rho_river", (p.rho_river - t.rho_river) / t.rho_river),
        ("sigma2_basin", (p.sigma2_basin - t.sigma2_basin) / t.sigma2_basin),
        ("rho_basin", (p.rho_basin - t.rho_basin) / t.rho_basin),
        ("tau", (p.tau - t.tau) / t.tau),
    ];
    let pass =
        obs.len() >= 2000 && errors.iter().all(|e| e.1.abs() <= RECOVERY_REL_TOL) && elapsed < Duration::from_secs(120);
    let detail: Vec<String> = errors.iter().map(|(k, e)| format!("{k} {e:+.3}")).collect();
    report(
        5,
        pass,
        &format!(
            "parameter round-trip: {} observations, relative errors {}, {:.2?}",
            obs.len(),
            detail.join(", "),
            elapsed
        ),
    );
    assert!(pass);
}

// ------------------------------------------------------- end-to-end pipeline

struct PipelineRun {
    _dir: tempfile::TempDir,
    root: PathBuf,
    report: FloodReport,
    elapsed: Duration,
}

fn run_pipeline(root: &Path, seed: u64) -> FloodReport {
    let data = root.join("data");
    cmd_simulate(None, seed, &data).unwrap();
    let obs = data.join("observations.csv");
    cmd_fit(&data, &obs, Scenario::WholeBasin, &root.join("fit")).unwrap();
    let series = root.join("series");
    for mode in [PredictMode::Uk, PredictMode::OkBaseline, PredictMode::Vs] {
        let opts = PredictOptions {
            scenario: Scenario::WholeBasin,
            window: (date(2008, 1, 1), date(2016, 12, 31)),
            step_days: 5,
            mode,
        };
        cmd_predict(
            &data,
            &obs,
            &root.join("fit/params.json"),
            &data.join("targets.csv"),
            &opts,
            &series,
        )
        .unwrap();
    }
    cmd_validate(
        &data,
        &data.join("gauges.csv"),
        &series,
        Some((2008, 2016)),
        ClimatologySource::Gauge,
        &root.join("report"),
    )
    .unwrap()
}

fn first_run() -> &'static PipelineRun {
    static RUN: OnceLock<PipelineRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let report = run_pipeline(dir.path(), E2E_SEED);
        PipelineRun {
            root: dir.path().to_path_buf(),
            _dir: dir,
            report,
            elapsed: start.elapsed(),
        }
    })
}

/// Universal-kriging predictions at kratie over the 2012 flood season as
/// (date, unbiasedness residual), from the first pipeline run's data.
fn season_predictions() -> Vec<(NaiveDate, f64)> {
    let run = first_run();
    let data = run.root.join("data");
    let net = read_network(&data).unwrap();
    let loaded = altikrig::ingest::load_observations(data.join("observations.csv"), &net, None).unwrap();
    let (obs, _) = prepare(&net, loaded.observations, Scenario::WholeBasin);
    let params =
        CovarianceParams::from_json(&std::fs::read_to_string(run.root.join("fit/params.json")).unwrap()).unwrap();
    let basis = build_basis(&net, DEFAULT_KNOT_SPACING_KM).unwrap();
    let trend = anchored_trend(&net, &basis, &obs).unwrap();
    let target = read_targets(data.join("targets.csv"))
        .unwrap()
        .into_iter()
        .find(|t| t.target_id == "kratie")
        .unwrap();
    let s0 = net.location(&target.edge_id, target.offset_km).unwrap();
    SeasonWindow::default()
        .epochs(2012)
        .into_iter()
        .filter_map(|d| {
            predict(&net, &trend, &params, &obs, s0, d, &NeighborhoodSpec::default())
                .ok()
                .map(|p| (d, p.unbiasedness_residual))
        })
        .collect()
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_end_to_end_flood_skill() {
    let run = first_run();
    let targets = read_targets(run.root.join("data/targets.csv")).unwrap().len();
    let uk = run.report.summary(Source::Uk).unwrap();
    let ok = run.report.summary(Source::OkBaseline).unwrap();
    let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.3}"));
    let pass = targets >= 5
        && uk.pod_flood.is_some_and(|p| p >= FLOOD_POD_MIN)
        && uk.far_flood.is_some_and(|f| f <= FLOOD_FAR_MAX)
        && match (ok.pod_flood, uk.pod_flood) {
            (Some(o), Some(u)) => o < u,
            (None, Some(_)) => true,
            _ => false,
        }
        && run.elapsed < Duration::from_secs(300);
    report(
        6,
        pass,
        &format!(
            "end-to-end flood skill (seed {E2E_SEED}, {targets} targets): UK PoD {} FAR {}, OK PoD {} FAR {}, VS PoD {}, {:.2?}",
            fmt(uk.pod_flood),
            fmt(uk.far_flood),
            fmt(ok.pod_flood),
            fmt(ok.far_flood),
            fmt(run.report.summary(Source::Vs).and_then(|s| s.pod_flood)),
            run.elapsed
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_metric_oracles() {
    let gauge: Vec<(NaiveDate, f64)> = (0..40)
        .map(|k| {
            (
                date(2012, 6, 1) + chrono::Duration::days(k),
                5.0 + (k as f64 * 0.3).sin() * 2.0,
            )
        })
        .collect();
    let identical: Vec<(NaiveDate, Option<f64>)> = gauge.iter().map(|&(d, v)| (d, Some(v))).collect();
    let mean = gauge.iter().map(|g| g.1).sum::<f64>() / gauge.len() as f64;
    let mean_predictor: Vec<(NaiveDate, Option<f64>)> = gauge.iter().map(|&(d, _)| (d, Some(mean))).collect();
    let nse_identical = series_metrics(&identical, &gauge).unwrap().nse.unwrap();
    let nse_mean = series_metrics(&mean_predictor, &gauge).unwrap().nse.unwrap();
    let up = f64::from_bits(FLOOD_THRESHOLD_M.to_bits() + 1);
    let down = -f64::from_bits(DROUGHT_THRESHOLD_M.abs().to_bits() + 1);
    let thresholds = classify(FLOOD_THRESHOLD_M) == EventClass::Normal
        && classify(DROUGHT_THRESHOLD_M) == EventClass::Normal
        && classify(up) == EventClass::Flood
        && classify(down) == EventClass::Drought
        && FLOOD_THRESHOLD_M == 0.5
        && DROUGHT_THRESHOLD_M == -0.5;
    let pass = (nse_identical - 1.0).abs() < 1e-12 && nse_mean.abs() < 1e-12 && thresholds;
    report(
        7,
        pass,
        &format!(
            "metric oracles: NSE identical {nse_identical:.12}, NSE mean predictor {nse_mean:.1e}, strict +-0.5 m thresholds {}",
            if thresholds { "ok" } else { "violated" }
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_series_cadence() {
    let run = first_run();
    let data = run.root.join("data");
    let out = tempfile::tempdir().unwrap();
    let opts = PredictOptions {
        scenario: Scenario::WholeBasin,
        window: (date(2012, 6, 1), date(2012, 11, 30)),
        step_days: 5,
        mode: PredictMode::Uk,
    };
    let written = cmd_predict(
        &data,
        &data.join("observations.csv"),
        &run.root.join("fit/params.json"),
        &data.join("targets.csv"),
        &opts,
        out.path(),
    )
    .unwrap();
    let expected = epochs(date(2012, 6, 1), date(2012, 11, 30), 5);
    let mut complete = 0;
    let mut nodata = 0;
    for t in read_targets(data.join("targets.csv")).unwrap() {
        let s = read_series_csv(out.path().join(format!("{}.uk.csv", t.target_id))).unwrap();
        if s.iter().map(|p| p.date).eq(expected.iter().copied()) {
            complete += 1;
        }
        nodata += s.iter().filter(|p| p.height_m.is_none()).count();
    }
    let leap = SeasonWindow::default().epochs(2012).len();
    let common_year = SeasonWindow::default().epochs(2013).len();
    let pass = expected.len() == SEASON_EPOCHS
        && leap == SEASON_EPOCHS
        && common_year == SEASON_EPOCHS
        && written > 0
        && complete == written;
    report(
        8,
        pass,
        &format!(
            "series cadence: {} epochs Jun 1 - Nov 30 every 5 d, {complete}/{written} series complete ({nodata} nodata epochs)",
            expected.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 9

fn csv_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_9_determinism() {
    let a = first_run();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(b.path(), E2E_SEED);
    let files_a = csv_files(&a.root);
    let files_b = csv_files(b.path());
    let differing: Vec<String> = files_a
        .iter()
        .filter(|f| std::fs::read(a.root.join(f)).unwrap() != std::fs::read(b.path().join(f)).ok().unwrap_or_default())
        .map(|f| f.display().to_string())
        .collect();
    let pass = !files_a.is_empty() && files_a == files_b && differing.is_empty();
    report(
        9,
        pass,
        &format!(
            "determinism: {} CSV files from two seed-{E2E_SEED} runs, {} differ {:?}",
            files_a.len(),
            differing.len(),
            differing
        ),
    );
    assert!(pass);
}
