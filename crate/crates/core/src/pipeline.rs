//! End-to-end commands: simulate, fit, predict and validate.
//!
//! Each command reads files, writes files into an output directory and
//! returns a small summary; diagnostics go to standard error via the caller.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    flood_report, AnalysisError, ClimatologySource, FloodReport, LocationSeries, SeasonWindow, Source,
};
use crate::covariance::{
    empirical_covariance, fit_params, CovarianceError, CovarianceParams, FitOptions, LagBins, Residual,
};
use crate::ingest::{
    apply_offsets, estimate_mission_offsets, load_gauges, load_observations, screen_along_track, screen_annual_repeat,
    AnnualRepeatConfig, GaugeSeries, IngestError, Observation, OffsetConfig, OrbitClass,
};
use crate::kriging::{
    anchored_trend, interpolate_series, ok_baseline_series, ols_trend, read_series_csv, trend_value, vs_series,
    write_series_csv, KrigingError, NeighborhoodSpec, SeriesPoint,
};
use crate::network::{read_network, NetworkError, NetworkLocation, RiverNetwork, TribClass};
use crate::sim::{read_targets, simulate, write_simulation, SimError, SimulationConfig, TargetRow};
use crate::trend::{build_basis, TrendError, DEFAULT_KNOT_SPACING_KM};

pub const ALONG_TRACK_K: f64 = 3.0;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error(transparent)]
    Trend(#[from] TrendError),
    #[error(transparent)]
    Kriging(#[from] KrigingError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path, e: impl fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn create_dir(path: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

/// Data scenario: which tributary classes enter the analysis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Whole basin including all tributaries.
    #[default]
    #[serde(rename = "S-I")]
    WholeBasin,
    /// Main stem only.
    #[serde(rename = "S-II")]
    MainStem,
    /// Main stem and major tributaries.
    #[serde(rename = "S-III")]
    MainAndMajor,
}

impl Scenario {
    pub fn admits(self, class: TribClass) -> bool {
        match self {
            Scenario::WholeBasin => true,
            Scenario::MainStem => class == TribClass::MainStem,
            Scenario::MainAndMajor => class != TribClass::MinorTributary,
        }
    }

    /// Tributary variance factors (major, minor).
    pub fn weights(self) -> (f64, f64) {
        (2.0, 4.0)
    }

    pub fn filter(self, net: &RiverNetwork, observations: Vec<Observation>) -> Vec<Observation> {
        observations
            .into_iter()
            .filter(|o| self.admits(net.trib_class(o.location)))
            .collect()
    }
}

impl FromStr for Scenario {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S-I" => Ok(Scenario::WholeBasin),
            "S-II" => Ok(Scenario::MainStem),
            "S-III" => Ok(Scenario::MainAndMajor),
            _ => Err(PipelineError::Usage(format!(
                "unknown scenario {s:?}, expected S-I, S-II or S-III"
            ))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::WholeBasin => "S-I",
            Scenario::MainStem => "S-II",
            Scenario::MainAndMajor => "S-III",
        })
    }
}

/// Counts and offsets from [`prepare`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrepSummary {
    pub input: usize,
    pub upstream_of_dams: usize,
    pub outside_scenario: usize,
    pub along_track_outliers: usize,
    pub annual_repeat_outliers: usize,
    pub reference_mission: Option<String>,
    pub offsets_m: BTreeMap<String, f64>,
    pub without_offset: usize,
    pub kept: usize,
}

/// Short-repeat mission with the most observations, ties by name.
pub fn reference_mission(observations: &[Observation]) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in observations.iter().filter(|o| o.orbit_class == OrbitClass::ShortRepeat) {
        *counts.entry(o.mission.as_str()).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .map(|(m, _)| m.to_string())
}

/// Dam masking, scenario filter, along-track and annual-repeat screening,
/// then inter-mission offsets against the reference mission.
pub fn prepare(
    net: &RiverNetwork,
    observations: Vec<Observation>,
    scenario: Scenario,
) -> (Vec<Observation>, PrepSummary) {
    let mut s = PrepSummary {
        input: observations.len(),
        ..Default::default()
    };
    let obs = net.mask_upstream_of_dams(observations, |o| o.location);
    s.upstream_of_dams = s.input - obs.len();
    let n = obs.len();
    let obs = scenario.filter(net, obs);
    s.outside_scenario = n - obs.len();
    let a = screen_along_track(obs, ALONG_TRACK_K);
    s.along_track_outliers = a.removed.len();
    let b = screen_annual_repeat(net, a.kept, &AnnualRepeatConfig::default());
    s.annual_repeat_outliers = b.removed.len();
    let mut obs = b.kept;
    if let Some(reference) = reference_mission(&obs) {
        let offsets = estimate_mission_offsets(net, &obs, &reference, &OffsetConfig::default());
        let (kept, excluded) = apply_offsets(obs, &offsets);
        s.reference_mission = Some(reference);
        s.offsets_m = offsets.offsets;
        s.without_offset = excluded.len();
        obs = kept;
    }
    s.kept = obs.len();
    (obs, s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    AtBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub scenario: Scenario,
    pub status: FitStatus,
    pub message: Option<String>,
    pub params: CovarianceParams,
    pub weighted_rss: Option<f64>,
    pub iterations: Option<usize>,
    pub bins_used: usize,
    pub residuals: usize,
    pub residual_mean_square: f64,
    pub preparation: PrepSummary,
}

/// Detrended residuals of prepared observations against an OLS spline trend.
pub fn residuals(
    net: &RiverNetwork,
    observations: &[Observation],
    factors: (f64, f64),
) -> Result<Vec<Residual>, PipelineError> {
    let basis = build_basis(net, DEFAULT_KNOT_SPACING_KM)?;
    let trend = ols_trend(net, &basis, observations)?;
    let weight = |c: TribClass| match c {
        TribClass::MainStem => 1.0,
        TribClass::MajorTributary => factors.0,
        TribClass::MinorTributary => factors.1,
    };
    Ok(observations
        .iter()
        .map(|o| Residual {
            location: o.location,
            t_days: o.t_days(),
            value: o.height_m - trend_value(net, &basis, &trend.beta, o.location),
            noise_factor: weight(net.trib_class(o.location)) * o.quality_factor,
        })
        .collect())
}

/// Fits covariance parameters to prepared observations. A fit that ends on
/// a search bound is returned with status `at-bound` rather than failing.
pub fn fit_covariance(
    net: &RiverNetwork,
    observations: &[Observation],
    scenario: Scenario,
    preparation: PrepSummary,
) -> Result<FitReport, PipelineError> {
    let (major, minor) = scenario.weights();
    let res = residuals(net, observations, (major, minor))?;
    let emp = empirical_covariance(net, &res, &LagBins::default())?;
    let initial = CovarianceParams {
        trib_factor_major: major,
        trib_factor_minor: minor,
        ..Default::default()
    };
    let bins_used = emp.non_empty().count();
    let base = |status, message, params, weighted_rss, iterations| FitReport {
        scenario,
        status,
        message,
        params,
        weighted_rss,
        iterations,
        bins_used,
        residuals: res.len(),
        residual_mean_square: emp.mean_square,
        preparation: preparation.clone(),
    };
    match fit_params(&emp, &initial, &FitOptions::default()) {
        Ok(fit) => Ok(base(
            FitStatus::Converged,
            None,
            fit.params,
            Some(fit.weighted_rss),
            Some(fit.iterations),
        )),
        Err(CovarianceError::NonConvergence { reason, best }) => {
            Ok(base(FitStatus::AtBound, Some(reason), *best, None, None))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictMode {
    /// Universal kriging over all prepared observations.
    Uk,
    /// Ordinary kriging of short-repeat anomalies.
    OkBaseline,
    /// Nearest virtual station.
    Vs,
}

impl PredictMode {
    pub fn source(self) -> Source {
        match self {
            PredictMode::Uk => Source::Uk,
            PredictMode::OkBaseline => Source::OkBaseline,
            PredictMode::Vs => Source::Vs,
        }
    }
}

impl FromStr for PredictMode {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uk" => Ok(PredictMode::Uk),
            "ok" | "ok-baseline" => Ok(PredictMode::OkBaseline),
            "vs" => Ok(PredictMode::Vs),
            _ => Err(PipelineError::Usage(format!(
                "unknown mode {s:?}, expected uk, ok or vs"
            ))),
        }
    }
}

/// A named prediction location.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub id: String,
    pub location: NetworkLocation,
}

pub fn resolve_targets(net: &RiverNetwork, rows: &[TargetRow]) -> Result<Vec<Target>, PipelineError> {
    rows.iter()
        .map(|r| {
            Ok(Target {
                id: r.target_id.clone(),
                location: net.location(&r.edge_id, r.offset_km)?,
            })
        })
        .collect()
}

/// Series at every target from prepared observations.
pub fn predict_targets(
    net: &RiverNetwork,
    observations: &[Observation],
    params: &CovarianceParams,
    targets: &[Target],
    window: (NaiveDate, NaiveDate),
    step_days: u32,
    mode: PredictMode,
) -> Result<Vec<(String, Vec<SeriesPoint>)>, PipelineError> {
    let nbhd = NeighborhoodSpec::default();
    let short: Vec<Observation>;
    let basis = build_basis(net, DEFAULT_KNOT_SPACING_KM)?;
    let trend = anchored_trend(net, &basis, observations)?;
    let obs = match mode {
        PredictMode::Uk => observations,
        _ => {
            short = observations
                .iter()
                .filter(|o| o.orbit_class == OrbitClass::ShortRepeat)
                .cloned()
                .collect();
            &short[..]
        }
    };
    Ok(targets
        .iter()
        .map(|t| {
            let series = match mode {
                PredictMode::Uk => interpolate_series(net, &trend, params, obs, t.location, window, step_days, &nbhd),
                PredictMode::OkBaseline => ok_baseline_series(net, params, obs, t.location, window, step_days, &nbhd),
                PredictMode::Vs => vs_series(net, obs, t.location, window, step_days),
            };
            (t.id.clone(), series)
        })
        .collect())
}

pub fn series_file(dir: &Path, target: &str, source: Source) -> PathBuf {
    dir.join(format!("{target}.{}.csv", source.as_str()))
}

/// `simulate`: writes the synthetic network, observations, gauges, truth
/// and targets into `out`, plus the configuration used.
pub fn cmd_simulate(config: Option<&Path>, seed: u64, out: &Path) -> Result<usize, PipelineError> {
    let cfg = match config {
        Some(p) => SimulationConfig::from_json(&read_text(p)?)?,
        None => crate::sim::mekong_like_config(),
    };
    let sim = simulate(&cfg, seed)?;
    write_simulation(&sim, out)?;
    write_text(&out.join("config.json"), &cfg.to_json())?;
    Ok(sim.observations.len())
}

/// `fit`: prepares observations and writes `params.json` and
/// `fit_report.json` into `out`.
pub fn cmd_fit(network: &Path, obs_file: &Path, scenario: Scenario, out: &Path) -> Result<FitReport, PipelineError> {
    let net = read_network(network)?;
    let loaded = load_observations(obs_file, &net, None)?;
    let (obs, prep) = prepare(&net, loaded.observations, scenario);
    let report = fit_covariance(&net, &obs, scenario, prep)?;
    create_dir(out)?;
    write_text(&out.join("params.json"), &report.params.to_json())?;
    let json = serde_json::to_string_pretty(&report).expect("plain data serializes");
    write_text(&out.join("fit_report.json"), &json)?;
    Ok(report)
}

/// Options of `predict` beyond the input files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictOptions {
    pub scenario: Scenario,
    pub window: (NaiveDate, NaiveDate),
    pub step_days: u32,
    pub mode: PredictMode,
}

/// `predict`: writes `<target>.<source>.csv` per target into `out`.
pub fn cmd_predict(
    network: &Path,
    obs_file: &Path,
    params_file: &Path,
    targets_file: &Path,
    opts: &PredictOptions,
    out: &Path,
) -> Result<usize, PipelineError> {
    let net = read_network(network)?;
    let params = CovarianceParams::from_json(&read_text(params_file)?)?;
    let targets = resolve_targets(&net, &read_targets(targets_file)?)?;
    if targets.is_empty() {
        return Ok(0);
    }
    let loaded = load_observations(obs_file, &net, None)?;
    let (obs, _) = prepare(&net, loaded.observations, opts.scenario);
    let series = predict_targets(&net, &obs, &params, &targets, opts.window, opts.step_days, opts.mode)?;
    create_dir(out)?;
    for (id, s) in &series {
        write_series_csv(series_file(out, id, opts.mode.source()), s)?;
    }
    Ok(series.len())
}

/// Flood report over the gauges that have at least one series file in
/// `series_dir`. Years default to every year covered by the gauges.
pub fn validate(
    gauges: &[GaugeSeries],
    series: &BTreeMap<(String, Source), Vec<SeriesPoint>>,
    years: Option<(i32, i32)>,
    mode: ClimatologySource,
) -> Result<FloodReport, PipelineError> {
    let window = SeasonWindow::default();
    let locations: Vec<LocationSeries> = gauges
        .iter()
        .filter_map(|g| {
            let sources: Vec<(Source, &[SeriesPoint])> = series
                .iter()
                .filter(|((id, _), _)| *id == g.gauge_id)
                .map(|((_, src), s)| (*src, &s[..]))
                .collect();
            (!sources.is_empty()).then(|| LocationSeries {
                location: g.gauge_id.clone(),
                gauge: g,
                sources,
            })
        })
        .collect();
    if locations.is_empty() {
        return Err(PipelineError::Usage("no series matches a gauge".into()));
    }
    let (y0, y1) = match years {
        Some(y) => y,
        None => {
            let ys = locations.iter().flat_map(|l| l.gauge.dates.iter().map(|d| d.year()));
            let (lo, hi) = ys.fold((i32::MAX, i32::MIN), |(lo, hi), y| (lo.min(y), hi.max(y)));
            (lo, hi)
        }
    };
    let years: Vec<i32> = (y0..=y1).collect();
    let report = flood_report(&locations, &years, &window, mode)?;
    if report.metrics.iter().all(|m| m.metrics.is_none()) {
        return Err(PipelineError::Analysis(AnalysisError::TooFewEpochs(0)));
    }
    Ok(report)
}

/// Reads every `<gauge>.<source>.csv` in `dir`.
pub fn read_series_dir(dir: &Path) -> Result<BTreeMap<(String, Source), Vec<SeriesPoint>>, PipelineError> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = name.strip_suffix(".csv") else {
            continue;
        };
        let Some((id, src)) = stem.rsplit_once('.') else {
            continue;
        };
        let source = match src {
            "uk" => Source::Uk,
            "ok-baseline" => Source::OkBaseline,
            "vs" => Source::Vs,
            _ => continue,
        };
        out.insert((id.to_string(), source), read_series_csv(&path)?);
    }
    Ok(out)
}

/// `validate`: writes `flood_report.csv` and `flood_summary.json` into `out`.
pub fn cmd_validate(
    network: &Path,
    gauges_file: &Path,
    series_dir: &Path,
    years: Option<(i32, i32)>,
    mode: ClimatologySource,
    out: &Path,
) -> Result<FloodReport, PipelineError> {
    let net = read_network(network)?;
    let gauges = load_gauges(gauges_file, &net)?;
    let series = read_series_dir(series_dir)?;
    let report = validate(&gauges, &series, years, mode)?;
    create_dir(out)?;
    report.write_csv(out.join("flood_report.csv"))?;
    write_text(&out.join("flood_summary.json"), &report.summary_json())?;
    Ok(report)
}
