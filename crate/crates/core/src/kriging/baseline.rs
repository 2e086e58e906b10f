//! Comparison products built from short-repeat virtual stations only.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::series::{epochs, interpolate_series, SeriesFlag, SeriesPoint};
use super::NeighborhoodSpec;
use crate::covariance::CovarianceParams;
use crate::ingest::{Observation, OrbitClass};
use crate::network::{NetworkLocation, RiverNetwork};
use crate::stats::mean;
use crate::trend::ConstantMean;

/// A fixed short-repeat crossing and its long-term mean height.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualStation {
    pub location: NetworkLocation,
    pub mean_m: f64,
    /// Indices of the member observations in the input slice.
    pub members: Vec<usize>,
}

/// Groups short-repeat observations by identical location.
pub fn virtual_stations(observations: &[Observation]) -> Vec<VirtualStation> {
    let mut groups: BTreeMap<(usize, u64), Vec<usize>> = BTreeMap::new();
    for (i, o) in observations.iter().enumerate() {
        if o.orbit_class == OrbitClass::ShortRepeat {
            groups
                .entry((o.location.edge, o.location.offset_km.to_bits()))
                .or_default()
                .push(i);
        }
    }
    groups
        .into_values()
        .map(|members| {
            let heights: Vec<f64> = members.iter().map(|&i| observations[i].height_m).collect();
            VirtualStation {
                location: observations[members[0]].location,
                mean_m: mean(&heights).expect("non-empty group"),
                members,
            }
        })
        .collect()
}

/// Mean water level at `s0` interpolated linearly in chainage between the
/// nearest flow-connected stations up- and downstream. With stations on one
/// side only, the nearest one is used.
fn target_mean(net: &RiverNetwork, stations: &[VirtualStation], s0: NetworkLocation) -> Option<f64> {
    let c0 = net.chainage(s0);
    let mut up: Option<(f64, f64)> = None;
    let mut down: Option<(f64, f64)> = None;
    for vs in stations {
        let Some(d) = net.river_distance(s0, vs.location).km() else {
            continue;
        };
        let side = if net.chainage(vs.location) >= c0 {
            &mut up
        } else {
            &mut down
        };
        if side.is_none_or(|(best, _)| d < best) {
            *side = Some((d, vs.mean_m));
        }
    }
    match (up, down) {
        (Some((du, mu)), Some((dd, md))) if du + dd > 0.0 => Some((mu * dd + md * du) / (du + dd)),
        (Some((_, m)), _) | (None, Some((_, m))) => Some(m),
        (None, None) => None,
    }
}

/// Ordinary-kriging baseline: short-repeat data only, per-station mean
/// removal, constant-mean kriging of the anomalies, and the station means
/// interpolated to the target added back.
#[allow(clippy::too_many_arguments)]
pub fn ok_baseline_series(
    net: &RiverNetwork,
    params: &CovarianceParams,
    observations: &[Observation],
    s0: NetworkLocation,
    window: (NaiveDate, NaiveDate),
    step_days: u32,
    nbhd: &NeighborhoodSpec,
) -> Vec<SeriesPoint> {
    let stations = virtual_stations(observations);
    let Some(level) = target_mean(net, &stations, s0) else {
        return epochs(window.0, window.1, step_days)
            .into_iter()
            .map(SeriesPoint::nodata)
            .collect();
    };
    let anomalies: Vec<Observation> = stations
        .iter()
        .flat_map(|vs| {
            vs.members.iter().map(move |&i| Observation {
                height_m: observations[i].height_m - vs.mean_m,
                ..observations[i].clone()
            })
        })
        .collect();
    let mut series = interpolate_series(net, &ConstantMean, params, &anomalies, s0, window, step_days, nbhd);
    for p in &mut series {
        if let Some(h) = p.height_m.as_mut() {
            *h += level;
        }
    }
    series
}

/// Series of the nearest flow-connected virtual station, shifted by the
/// difference between the target and station mean levels. An epoch takes
/// the closest station observation within half a step, else no data.
pub fn vs_series(
    net: &RiverNetwork,
    observations: &[Observation],
    s0: NetworkLocation,
    window: (NaiveDate, NaiveDate),
    step_days: u32,
) -> Vec<SeriesPoint> {
    let stations = virtual_stations(observations);
    let nearest = stations
        .iter()
        .filter_map(|vs| net.river_distance(s0, vs.location).km().map(|d| (d, vs)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, vs)| vs);
    let (Some(vs), Some(level)) = (nearest, target_mean(net, &stations, s0)) else {
        return epochs(window.0, window.1, step_days)
            .into_iter()
            .map(SeriesPoint::nodata)
            .collect();
    };
    let half = step_days as f64 / 2.0;
    epochs(window.0, window.1, step_days)
        .into_iter()
        .map(|date| {
            let t = crate::day_number(date);
            let best = vs
                .members
                .iter()
                .map(|&i| &observations[i])
                .filter(|o| (o.t_days() - t).abs() <= half)
                .min_by(|a, b| {
                    (a.t_days() - t)
                        .abs()
                        .total_cmp(&(b.t_days() - t).abs())
                        .then(a.date.cmp(&b.date))
                });
            match best {
                Some(o) => SeriesPoint {
                    date,
                    height_m: Some(o.height_m - vs.mean_m + level),
                    sigma_m: None,
                    n_obs: 1,
                    flag: SeriesFlag::Ok,
                },
                None => SeriesPoint::nodata(date),
            }
        })
        .collect()
}
