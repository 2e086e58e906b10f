use std::collections::{BTreeMap, HashMap};

use super::{Observation, OrbitClass};
use crate::network::{RiverDistance, RiverNetwork};
use crate::stats::median;

/// Observations split by a screening rule. Heights are never altered.
#[derive(Debug, Clone, Default)]
pub struct Screened {
    pub kept: Vec<Observation>,
    pub removed: Vec<Observation>,
}

/// Removes observations whose along-track standard deviation exceeds `k`
/// times the median along-track std of their mission. Rows without an
/// along-track std are kept.
///
/// The rule is re-applied until nothing more is removed, so the result is a
/// fixed point and screening twice changes nothing.
pub fn screen_along_track(observations: Vec<Observation>, k: f64) -> Screened {
    let mut kept = observations;
    let mut removed = Vec::new();
    loop {
        let mut per_mission: HashMap<&str, Vec<f64>> = HashMap::new();
        for o in &kept {
            if let Some(s) = o.along_track_std_m {
                per_mission.entry(o.mission.as_str()).or_default().push(s);
            }
        }
        let limits: HashMap<String, f64> = per_mission
            .into_iter()
            .filter_map(|(m, v)| median(&v).map(|med| (m.to_string(), k * med)))
            .collect();

        let (keep, drop): (Vec<_>, Vec<_>) =
            kept.into_iter()
                .partition(|o| match (o.along_track_std_m, limits.get(&o.mission)) {
                    (Some(s), Some(&limit)) => s <= limit,
                    _ => true,
                });
        kept = keep;
        if drop.is_empty() {
            break;
        }
        removed.extend(drop);
    }
    Screened { kept, removed }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnualRepeatConfig {
    /// Other-track neighbours must be flow-connected within this distance (km).
    pub vicinity_km: f64,
    /// ... and within this many days.
    pub vicinity_days: f64,
    /// Maximum tolerated deviation from the comparison-group median (m).
    pub threshold_m: f64,
}

impl Default for AnnualRepeatConfig {
    fn default() -> Self {
        Self {
            vicinity_km: 20.0,
            vicinity_days: 10.0,
            threshold_m: 3.0,
        }
    }
}

/// Screens long-repeat observations against their comparison group: every
/// observation of the same track (the repeat cycles a year apart) plus
/// observations of other tracks in close spatial and temporal vicinity. An
/// observation is removed when it deviates from the group median (itself
/// included) by more than the threshold. Observations without any comparison
/// partner are kept. Other orbit classes pass through untouched.
///
/// Like [`screen_along_track`], iterates to a fixed point.
pub fn screen_annual_repeat(net: &RiverNetwork, observations: Vec<Observation>, cfg: &AnnualRepeatConfig) -> Screened {
    let (mut long, others): (Vec<_>, Vec<_>) = observations
        .into_iter()
        .enumerate()
        .partition(|(_, o)| o.orbit_class == OrbitClass::LongRepeat);
    let mut removed = Vec::new();

    loop {
        let mut by_track: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
        for (i, (_, o)) in long.iter().enumerate() {
            by_track
                .entry((o.mission.as_str(), o.track_id.as_str()))
                .or_default()
                .push(i);
        }
        let mut by_time: Vec<usize> = (0..long.len()).collect();
        by_time.sort_by(|&a, &b| long[a].1.date.cmp(&long[b].1.date));
        let rank: Vec<usize> = {
            let mut r = vec![0; long.len()];
            for (pos, &i) in by_time.iter().enumerate() {
                r[i] = pos;
            }
            r
        };

        let flagged: Vec<bool> = (0..long.len())
            .map(|i| {
                let o = &long[i].1;
                let mut group: Vec<f64> = by_track[&(o.mission.as_str(), o.track_id.as_str())]
                    .iter()
                    .map(|&j| long[j].1.height_m)
                    .collect();
                let t = o.t_days();
                let near = |j: usize| {
                    let p = &long[j].1;
                    p.track_id != o.track_id
                        && matches!(net.river_distance(o.location, p.location),
                            RiverDistance::Connected(d) if d <= cfg.vicinity_km)
                };
                for &j in by_time[rank[i] + 1..].iter() {
                    if long[j].1.t_days() - t > cfg.vicinity_days {
                        break;
                    }
                    if near(j) {
                        group.push(long[j].1.height_m);
                    }
                }
                for &j in by_time[..rank[i]].iter().rev() {
                    if t - long[j].1.t_days() > cfg.vicinity_days {
                        break;
                    }
                    if near(j) {
                        group.push(long[j].1.height_m);
                    }
                }
                if group.len() < 2 {
                    return false;
                }
                let m = median(&group).unwrap();
                (o.height_m - m).abs() > cfg.threshold_m
            })
            .collect();

        if !flagged.iter().any(|&f| f) {
            break;
        }
        let mut next = Vec::with_capacity(long.len());
        for (item, f) in long.into_iter().zip(flagged) {
            if f {
                removed.push(item);
            } else {
                next.push(item);
            }
        }
        long = next;
    }

    // restore input order
    let mut kept: Vec<(usize, Observation)> = others.into_iter().chain(long).collect();
    kept.sort_by_key(|(i, _)| *i);
    removed.sort_by_key(|(i, _)| *i);
    Screened {
        kept: kept.into_iter().map(|(_, o)| o).collect(),
        removed: removed.into_iter().map(|(_, o)| o).collect(),
    }
}
