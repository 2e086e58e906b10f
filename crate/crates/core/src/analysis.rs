//! Flood-season climatology, flood index, event classification and skill
//! scores.
//!
//! The flood index of year `y` at a location is the mean, over the
//! flood-season epochs with data, of the water level minus the day-of-year
//! climatology. Above `+0.5 m` the season is a flood, below `-0.5 m` a
//! drought. Altimetric indices use the gauge climatology unless
//! [`ClimatologySource::Altimetry`] is requested.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::GaugeSeries;
use crate::kriging::{epochs, SeriesPoint};
use crate::stats::mean;

pub const FLOOD_THRESHOLD_M: f64 = 0.5;
pub const DROUGHT_THRESHOLD_M: f64 = -0.5;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("climatology for {month:02}-{day:02} has {years} year(s), need at least 2")]
    InsufficientYears { month: u32, day: u32, years: usize },
    #[error("no data in the flood season of {0}")]
    NoData(i32),
    #[error("epoch {0} is not a climatology day")]
    NotInClimatology(NaiveDate),
    #[error("only {0} common epochs, need at least 3")]
    TooFewEpochs(usize),
    #[error("{0}")]
    Io(String),
}

/// Seasonal window, inclusive, as (month, day) pairs within one year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonWindow {
    pub start: (u32, u32),
    pub end: (u32, u32),
    pub step_days: u32,
}

impl Default for SeasonWindow {
    fn default() -> Self {
        Self {
            start: (6, 1),
            end: (11, 30),
            step_days: 5,
        }
    }
}

impl SeasonWindow {
    pub fn bounds(&self, year: i32) -> (NaiveDate, NaiveDate) {
        let d = |(m, day): (u32, u32)| NaiveDate::from_ymd_opt(year, m, day).expect("valid window");
        (d(self.start), d(self.end))
    }

    /// Epochs of the season in `year`.
    pub fn epochs(&self, year: i32) -> Vec<NaiveDate> {
        let (from, to) = self.bounds(year);
        epochs(from, to, self.step_days)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        let (from, to) = self.bounds(date.year());
        date >= from && date <= to
    }
}

/// Long-term mean level per season epoch, keyed by (month, day).
#[derive(Debug, Clone, PartialEq)]
pub struct Climatology {
    pub values: BTreeMap<(u32, u32), f64>,
}

impl Climatology {
    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.values.get(&(date.month(), date.day())).copied()
    }
}

/// Climatology from dated values: for every season epoch, the mean over the
/// years that have a value on that date. Every epoch needs two years.
pub fn climatology(points: &[(NaiveDate, f64)], window: &SeasonWindow) -> Result<Climatology, AnalysisError> {
    let by_date: BTreeMap<NaiveDate, f64> = points.iter().copied().collect();
    let years: BTreeSet<i32> = by_date.keys().map(|d| d.year()).collect();
    let template = window.epochs(2001);
    let mut values = BTreeMap::new();
    for day in template {
        let key = (day.month(), day.day());
        let found: Vec<f64> = years
            .iter()
            .filter_map(|&y| NaiveDate::from_ymd_opt(y, key.0, key.1))
            .filter_map(|d| by_date.get(&d).copied())
            .collect();
        if found.len() < 2 {
            return Err(AnalysisError::InsufficientYears {
                month: key.0,
                day: key.1,
                years: found.len(),
            });
        }
        values.insert(key, mean(&found).expect("non-empty"));
    }
    Ok(Climatology { values })
}

/// Daily climatology of a gauge over the season, so that series at any
/// epochs inside the season can be compared against it.
pub fn gauge_climatology(gauge: &GaugeSeries, window: &SeasonWindow) -> Result<Climatology, AnalysisError> {
    let daily = SeasonWindow {
        step_days: 1,
        ..*window
    };
    climatology(&gauge.iter().collect::<Vec<_>>(), &daily)
}

/// Flood index of `year`: mean of `value - climatology` over the season
/// epochs of that year with a value.
pub fn flood_index(
    series: &[(NaiveDate, Option<f64>)],
    clim: &Climatology,
    window: &SeasonWindow,
    year: i32,
) -> Result<f64, AnalysisError> {
    let mut diffs = Vec::new();
    for &(date, value) in series {
        if date.year() != year || !window.contains(date) {
            continue;
        }
        let c = clim.get(date).ok_or(AnalysisError::NotInClimatology(date))?;
        if let Some(z) = value {
            diffs.push(z - c);
        }
    }
    mean(&diffs).ok_or(AnalysisError::NoData(year))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventClass {
    Flood,
    Drought,
    Normal,
}

/// Strict thresholds: exactly `+0.5` or `-0.5` is normal.
pub fn classify(index_m: f64) -> EventClass {
    if index_m > FLOOD_THRESHOLD_M {
        EventClass::Flood
    } else if index_m < DROUGHT_THRESHOLD_M {
        EventClass::Drought
    } else {
        EventClass::Normal
    }
}

pub fn classify_events(indices: &[f64]) -> Vec<EventClass> {
    indices.iter().map(|&f| classify(f)).collect()
}

/// 2x2 contingency counts for one event kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contingency {
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
    pub correct_negatives: usize,
}

impl Contingency {
    pub fn add(&mut self, predicted: bool, observed: bool) {
        match (predicted, observed) {
            (true, true) => self.hits += 1,
            (false, true) => self.misses += 1,
            (true, false) => self.false_alarms += 1,
            (false, false) => self.correct_negatives += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.hits + self.misses + self.false_alarms + self.correct_negatives
    }

    /// Probability of detection, `None` without observed events.
    pub fn pod(&self) -> Option<f64> {
        let d = self.hits + self.misses;
        (d > 0).then(|| self.hits as f64 / d as f64)
    }

    /// False alarm ratio, `None` without predicted events.
    pub fn far(&self) -> Option<f64> {
        let d = self.hits + self.false_alarms;
        (d > 0).then(|| self.false_alarms as f64 / d as f64)
    }
}

/// Contingency of `predicted` against `truth` for one event kind, cell by cell.
pub fn pod_far(predicted: &[EventClass], truth: &[EventClass], kind: EventClass) -> Contingency {
    let mut c = Contingency::default();
    for (p, t) in predicted.iter().zip(truth) {
        c.add(*p == kind, *t == kind);
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetrics {
    pub n: usize,
    pub rmse_m: f64,
    /// Squared Pearson correlation.
    pub r2: Option<f64>,
    /// Nash-Sutcliffe efficiency.
    pub nse: Option<f64>,
}

/// Pearson correlation of paired samples; `None` if either has no variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let ma = mean(a)?;
    let mb = mean(b)?;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    let (mut qa, mut qb) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        qa += x * x;
        qb += y * y;
    }
    let eps = 1e-12;
    (saa > eps * qa && sbb > eps * qb).then(|| sab / (saa * sbb).sqrt())
}

/// RMSE, R^2 and NSE of an altimetric series against a gauge on their common
/// epochs.
pub fn series_metrics(
    altimetry: &[(NaiveDate, Option<f64>)],
    gauge: &[(NaiveDate, f64)],
) -> Result<SeriesMetrics, AnalysisError> {
    let g: BTreeMap<NaiveDate, f64> = gauge.iter().copied().collect();
    let (a, gv): (Vec<f64>, Vec<f64>) = altimetry.iter().filter_map(|&(d, v)| Some((v?, *g.get(&d)?))).unzip();
    let n = a.len();
    if n < 3 {
        return Err(AnalysisError::TooFewEpochs(n));
    }
    let ss_res: f64 = a.iter().zip(&gv).map(|(x, y)| (y - x) * (y - x)).sum();
    let gm = mean(&gv).expect("non-empty");
    let ss_tot: f64 = gv.iter().map(|y| (y - gm) * (y - gm)).sum();
    Ok(SeriesMetrics {
        n,
        rmse_m: (ss_res / n as f64).sqrt(),
        r2: pearson(&a, &gv).map(|r| r * r),
        nse: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Gauge,
    Uk,
    OkBaseline,
    Vs,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Gauge => "gauge",
            Source::Uk => "uk",
            Source::OkBaseline => "ok-baseline",
            Source::Vs => "vs",
        }
    }
}

/// Which climatology altimetric indices are measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClimatologySource {
    #[default]
    Gauge,
    /// Each altimetric series against its own climatology (ungauged use).
    Altimetry,
}

/// One row of the report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub location: String,
    pub year: i32,
    pub source: Source,
    pub index_m: Option<f64>,
    pub class: Option<EventClass>,
}

/// Skill of one source against the gauge classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSkill {
    pub source: Source,
    /// Location `None` aggregates over all locations.
    pub location: Option<String>,
    pub flood: Contingency,
    pub drought: Contingency,
    pub pod_flood: Option<f64>,
    pub far_flood: Option<f64>,
    pub pod_drought: Option<f64>,
    pub far_drought: Option<f64>,
    /// Squared correlation between the source and gauge indices.
    pub r2_index: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub location: String,
    pub source: Source,
    pub metrics: Option<SeriesMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodReport {
    pub rows: Vec<IndexRow>,
    pub skill: Vec<SourceSkill>,
    pub metrics: Vec<MetricsRow>,
    pub climatology: ClimatologySource,
}

/// Gauge and altimetric series at one location.
pub struct LocationSeries<'a> {
    pub location: String,
    pub gauge: &'a GaugeSeries,
    pub sources: Vec<(Source, &'a [SeriesPoint])>,
}

fn as_pairs(series: &[SeriesPoint]) -> Vec<(NaiveDate, Option<f64>)> {
    series.iter().map(|p| (p.date, p.height_m)).collect()
}

fn skill(source: Source, location: Option<String>, cells: &[(Option<f64>, Option<f64>)]) -> SourceSkill {
    let mut flood = Contingency::default();
    let mut drought = Contingency::default();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &(truth, predicted) in cells {
        let Some(t) = truth else { continue };
        // a source without an index for the cell detects nothing
        let pc = predicted.map_or(EventClass::Normal, classify);
        let tc = classify(t);
        flood.add(pc == EventClass::Flood, tc == EventClass::Flood);
        drought.add(pc == EventClass::Drought, tc == EventClass::Drought);
        if let Some(p) = predicted {
            xs.push(t);
            ys.push(p);
        }
    }
    SourceSkill {
        source,
        location,
        flood,
        drought,
        pod_flood: flood.pod(),
        far_flood: flood.far(),
        pod_drought: drought.pod(),
        far_drought: drought.far(),
        r2_index: pearson(&xs, &ys).map(|r| r * r),
    }
}

/// Gauge index and source index of one season.
type IndexPair = (Option<f64>, Option<f64>);

/// Indices, event classes and skill for every location, year and source.
/// Cells are the (location, year) pairs where the gauge index exists.
pub fn flood_report(
    locations: &[LocationSeries],
    years: &[i32],
    window: &SeasonWindow,
    mode: ClimatologySource,
) -> Result<FloodReport, AnalysisError> {
    let mut rows = Vec::new();
    let mut metrics = Vec::new();
    let mut cells: BTreeMap<(Source, String), Vec<IndexPair>> = BTreeMap::new();
    for loc in locations {
        let gclim = gauge_climatology(loc.gauge, window)?;
        let gauge_pairs: Vec<(NaiveDate, Option<f64>)> = years
            .iter()
            .flat_map(|&y| window.epochs(y))
            .map(|d| (d, loc.gauge.get(d)))
            .collect();
        let gauge_index: Vec<Option<f64>> = years
            .iter()
            .map(|&y| flood_index(&gauge_pairs, &gclim, window, y).ok())
            .collect();
        for (y, g) in years.iter().zip(&gauge_index) {
            rows.push(IndexRow {
                location: loc.location.clone(),
                year: *y,
                source: Source::Gauge,
                index_m: *g,
                class: g.map(classify),
            });
        }
        let gauge_daily: Vec<(NaiveDate, f64)> = loc.gauge.iter().collect();
        for &(source, series) in &loc.sources {
            let pairs = as_pairs(series);
            let clim = match mode {
                ClimatologySource::Gauge => gclim.clone(),
                ClimatologySource::Altimetry => {
                    let present: Vec<(NaiveDate, f64)> = pairs.iter().filter_map(|&(d, v)| v.map(|v| (d, v))).collect();
                    climatology(&present, window)?
                }
            };
            let entry = cells.entry((source, loc.location.clone())).or_default();
            for (k, &y) in years.iter().enumerate() {
                let idx = match flood_index(&pairs, &clim, window, y) {
                    Ok(v) => Some(v),
                    Err(AnalysisError::NoData(_)) => None,
                    Err(e) => return Err(e),
                };
                rows.push(IndexRow {
                    location: loc.location.clone(),
                    year: y,
                    source,
                    index_m: idx,
                    class: idx.map(classify),
                });
                entry.push((gauge_index[k], idx));
            }
            metrics.push(MetricsRow {
                location: loc.location.clone(),
                source,
                metrics: series_metrics(&pairs, &gauge_daily).ok(),
            });
        }
    }
    let mut skill_rows = Vec::new();
    let sources: BTreeSet<Source> = cells.keys().map(|k| k.0).collect();
    for s in sources {
        let all: Vec<_> = cells
            .iter()
            .filter(|(k, _)| k.0 == s)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        skill_rows.push(skill(s, None, &all));
        for ((src, loc), v) in &cells {
            if *src == s {
                skill_rows.push(skill(s, Some(loc.clone()), v));
            }
        }
    }
    Ok(FloodReport {
        rows,
        skill: skill_rows,
        metrics,
        climatology: mode,
    })
}

impl FloodReport {
    /// Aggregate skill of one source.
    pub fn summary(&self, source: Source) -> Option<&SourceSkill> {
        self.skill.iter().find(|s| s.source == source && s.location.is_none())
    }

    /// Writes `location,year,source,index_m,class`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), AnalysisError> {
        let path = path.as_ref();
        let err = |e: csv::Error| AnalysisError::Io(format!("{}: {e}", path.display()));
        let mut wtr = csv::Writer::from_path(path).map_err(err)?;
        for r in &self.rows {
            wtr.serialize(r).map_err(err)?;
        }
        wtr.flush()
            .map_err(|e| AnalysisError::Io(format!("{}: {e}", path.display())))
    }

    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            climatology: ClimatologySource,
            skill: &'a [SourceSkill],
            metrics: &'a [MetricsRow],
        }
        serde_json::to_string_pretty(&Summary {
            climatology: self.climatology,
            skill: &self.skill,
            metrics: &self.metrics,
        })
        .expect("plain data serializes")
    }
}
