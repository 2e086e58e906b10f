//! Multi-mission altimetric water levels on river networks.
//!
//! `altikrig` fuses irregular water-level observations from several
//! altimeter missions into dense time series at arbitrary river locations.
//! The interpolator is universal kriging: the mean water level along each
//! river is a cubic B-spline in chainage with unknown coefficients, and the
//! residual follows a separable space-time covariance whose spatial part
//! combines a flow-connected (tail-up) river-distance element with a
//! sub-basin element. Interpolated series feed a flood index that flags
//! flood and drought seasons and scores them against gauges.
//!
//! Modules, bottom up:
//!
//! - [`network`]: reach tree, chainage, flow connectivity, dam masking
//! - [`covariance`]: covariance model, matrix assembly, empirical binning and fitting
//! - [`trend`]: B-spline trend basis and design matrices
//! - [`kriging`]: weight solver, point prediction, regular series
//! - [`ingest`]: observation files, outlier screening, inter-mission offsets
//! - [`sim`]: synthetic networks, truth fields and mission sampling
//! - [`analysis`]: climatology, flood index, event skill, series metrics
//! - [`pipeline`]: the end-to-end commands wired by the `altikrig` binary

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod covariance;
pub mod ingest;
pub mod kriging;
pub mod network;
pub mod pipeline;
pub mod sim;
mod stats;
pub mod trend;

use chrono::NaiveDate;

pub use covariance::CovarianceParams;
pub use ingest::{Observation, OrbitClass};
pub use kriging::{KrigingPrediction, NeighborhoodSpec};
pub use network::{NetworkLocation, RiverDistance, RiverNetwork, TribClass};
pub use trend::TrendBasis;

/// Days since 1970-01-01, the time axis used by every covariance evaluation.
pub fn day_number(date: NaiveDate) -> f64 {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
    (date - epoch).num_days() as f64
}
