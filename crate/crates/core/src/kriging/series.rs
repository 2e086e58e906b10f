use std::path::Path;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{predict_indexed, NeighborhoodSpec, PredictionFlag, TimeIndex};
use crate::covariance::CovarianceParams;
use crate::ingest::{IngestError, Observation};
use crate::network::{NetworkLocation, RiverNetwork};
use crate::trend::TrendFunctions;

pub const SERIES_HEADER: [&str; 5] = ["date", "height_m", "sigma_m", "n_obs", "flag"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesFlag {
    Ok,
    Nodata,
    ClippedVariance,
}

/// One epoch of an interpolated series. No-data epochs keep their date and
/// carry no height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub date: NaiveDate,
    pub height_m: Option<f64>,
    pub sigma_m: Option<f64>,
    pub n_obs: usize,
    pub flag: SeriesFlag,
}

impl SeriesPoint {
    pub fn nodata(date: NaiveDate) -> Self {
        Self {
            date,
            height_m: None,
            sigma_m: None,
            n_obs: 0,
            flag: SeriesFlag::Nodata,
        }
    }
}

/// `from, from + step, ...` up to and including `to`.
pub fn epochs(from: NaiveDate, to: NaiveDate, step_days: u32) -> Vec<NaiveDate> {
    let step = Duration::days(step_days.max(1) as i64);
    std::iter::successors(Some(from), |&d| Some(d + step))
        .take_while(|&d| d <= to)
        .collect()
}

/// Kriged series at `s0` over `[from, to]` every `step_days` days. Epochs
/// without a solvable neighbourhood are kept and flagged `nodata`.
#[allow(clippy::too_many_arguments)]
pub fn interpolate_series<T: TrendFunctions + ?Sized>(
    net: &RiverNetwork,
    trend: &T,
    params: &CovarianceParams,
    observations: &[Observation],
    s0: NetworkLocation,
    (from, to): (NaiveDate, NaiveDate),
    step_days: u32,
    nbhd: &NeighborhoodSpec,
) -> Vec<SeriesPoint> {
    let index = TimeIndex::new(observations);
    epochs(from, to, step_days)
        .into_par_iter()
        .map(|date| {
            match predict_indexed(
                net,
                trend,
                params,
                observations,
                &index,
                s0,
                crate::day_number(date),
                nbhd,
            ) {
                Ok(p) => SeriesPoint {
                    date,
                    height_m: Some(p.height_m),
                    sigma_m: Some(p.sigma_m()),
                    n_obs: p.n(),
                    flag: match p.flag {
                        PredictionFlag::Ok => SeriesFlag::Ok,
                        PredictionFlag::ClippedVariance => SeriesFlag::ClippedVariance,
                    },
                },
                Err(_) => SeriesPoint::nodata(date),
            }
        })
        .collect()
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_series_csv(path: impl AsRef<Path>, series: &[SeriesPoint]) -> Result<(), IngestError> {
    let path = path.as_ref();
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    wtr.write_record(SERIES_HEADER).map_err(|e| io_err(path, e))?;
    for p in series {
        wtr.serialize(p).map_err(|e| io_err(path, e))?;
    }
    wtr.flush().map_err(|e| io_err(path, e))
}

pub fn read_series_csv(path: impl AsRef<Path>) -> Result<Vec<SeriesPoint>, IngestError> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    if header.iter().ne(SERIES_HEADER) {
        return Err(IngestError::Header {
            path: path.display().to_string(),
            expected: SERIES_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<SeriesPoint>().enumerate() {
        out.push(row.map_err(|e| IngestError::Row {
            path: path.display().to_string(),
            line: k as u64 + 2,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
