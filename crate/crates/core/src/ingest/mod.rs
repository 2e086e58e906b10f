//! Observation and gauge files, outlier screening, and inter-mission datum
//! alignment.
//!
//! Heights arriving here are already retracked and corrected. Screening only
//! ever removes rows; [`apply_offsets`] is the one place heights change.

mod io;
mod offsets;
mod screen;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NetworkError, NetworkLocation};

pub use io::{
    load_gauges, load_observations, write_gauges, write_observations, LoadedObservations, RejectedRow, GAUGE_HEADER,
    OBSERVATION_HEADER,
};
pub use offsets::{apply_offsets, estimate_mission_offsets, MissionOffsets, OffsetConfig};
pub use screen::{screen_along_track, screen_annual_repeat, AnnualRepeatConfig, Screened};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: malformed header, expected `{expected}`, found `{found}`")]
    Header {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path} line {line}: {message}")]
    Row { path: String, line: u64, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("gauge `{gauge}` has non-increasing dates at {date}")]
    GaugeOrder { gauge: String, date: NaiveDate },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitClass {
    ShortRepeat,
    LongRepeat,
    NonRepeat,
}

/// A single altimetric water-level measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub location: NetworkLocation,
    pub date: NaiveDate,
    pub height_m: f64,
    pub mission: String,
    pub orbit_class: OrbitClass,
    pub track_id: String,
    pub along_track_std_m: Option<f64>,
    /// Per-mission accuracy factor (>= 1) scaling the observation-error variance.
    pub quality_factor: f64,
}

impl Observation {
    pub fn t_days(&self) -> f64 {
        crate::day_number(self.date)
    }
}

/// Daily in-situ series at one location.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSeries {
    pub gauge_id: String,
    pub location: NetworkLocation,
    pub dates: Vec<NaiveDate>,
    pub heights_m: Vec<f64>,
}

impl GaugeSeries {
    pub fn new(
        gauge_id: impl Into<String>,
        location: NetworkLocation,
        mut points: Vec<(NaiveDate, f64)>,
    ) -> Result<Self, IngestError> {
        let gauge_id = gauge_id.into();
        points.sort_by_key(|p| p.0);
        if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(IngestError::GaugeOrder {
                gauge: gauge_id,
                date: w[1].0,
            });
        }
        let (dates, heights_m) = points.into_iter().unzip();
        Ok(Self {
            gauge_id,
            location,
            dates,
            heights_m,
        })
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.dates.binary_search(&date).ok().map(|i| self.heights_m[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.dates.iter().copied().zip(self.heights_m.iter().copied())
    }
}
