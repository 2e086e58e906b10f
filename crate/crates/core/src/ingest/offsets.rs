use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};

use super::Observation;
use crate::network::RiverNetwork;
use crate::stats::median;

/// Co-location window used to compare a mission against the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetConfig {
    pub max_chainage_km: f64,
    /// Half-width of the day-of-year window, any year.
    pub max_days: f64,
}

impl Default for OffsetConfig {
    fn default() -> Self {
        Self {
            max_chainage_km: 10.0,
            max_days: 10.0,
        }
    }
}

/// Per-mission radial offsets relative to a reference mission.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MissionOffsets {
    pub reference: String,
    pub offsets: BTreeMap<String, f64>,
    /// Missions without any co-location with the reference.
    pub undefined: Vec<String>,
}

/// Estimates each mission's height offset against `reference` as the median,
/// over its co-located observations, of (mission height - median reference
/// height in the co-location cell). A cell is the set of reference
/// observations on the same edge within `max_chainage_km` chainage and
/// within `max_days` day-of-year of the mission observation, in any year.
pub fn estimate_mission_offsets(
    net: &RiverNetwork,
    observations: &[Observation],
    reference: &str,
    cfg: &OffsetConfig,
) -> MissionOffsets {
    let mut refs: Vec<(&Observation, f64)> = observations
        .iter()
        .filter(|o| o.mission == reference)
        .map(|o| (o, net.chainage(o.location)))
        .collect();
    refs.sort_by(|a, b| a.0.location.edge.cmp(&b.0.location.edge).then(a.1.total_cmp(&b.1)));

    let missions: BTreeSet<&str> = observations.iter().map(|o| o.mission.as_str()).collect();
    let mut out = MissionOffsets {
        reference: reference.to_string(),
        ..Default::default()
    };
    for mission in missions {
        if mission == reference {
            out.offsets.insert(mission.to_string(), 0.0);
            continue;
        }
        let mut diffs = Vec::new();
        for o in observations.iter().filter(|o| o.mission == mission) {
            let c = net.chainage(o.location);
            let key = (o.location.edge, c - cfg.max_chainage_km);
            let lo = refs.partition_point(|r| (r.0.location.edge, r.1) < key);
            let cell: Vec<f64> = refs[lo..]
                .iter()
                .take_while(|r| r.0.location.edge == o.location.edge && r.1 <= c + cfg.max_chainage_km)
                .filter(|r| doy_distance(r.0.date, o.date) <= cfg.max_days)
                .map(|r| r.0.height_m)
                .collect();
            if let Some(m) = median(&cell) {
                diffs.push(o.height_m - m);
            }
        }
        match median(&diffs) {
            Some(off) => {
                out.offsets.insert(mission.to_string(), off);
            }
            None => out.undefined.push(mission.to_string()),
        }
    }
    out
}

/// Circular day-of-year distance.
fn doy_distance(a: NaiveDate, b: NaiveDate) -> f64 {
    let d = (a.ordinal0() as f64 - b.ordinal0() as f64).abs();
    d.min(365.0 - d).max(0.0)
}

/// Subtracts each mission's offset. Observations of missions with an
/// undefined offset are returned separately and excluded.
pub fn apply_offsets(observations: Vec<Observation>, offsets: &MissionOffsets) -> (Vec<Observation>, Vec<Observation>) {
    let mut kept = Vec::with_capacity(observations.len());
    let mut excluded = Vec::new();
    for mut o in observations {
        match offsets.offsets.get(&o.mission) {
            Some(off) => {
                o.height_m -= off;
                kept.push(o);
            }
            None => excluded.push(o),
        }
    }
    (kept, excluded)
}
