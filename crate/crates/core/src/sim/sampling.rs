use std::collections::HashSet;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Crossings, GaugeConfig, MissionConfig, SimError, Truth};
use crate::ingest::{GaugeSeries, Observation};
use crate::network::{NetworkLocation, RiverNetwork};

const MISSION_STREAM: u64 = 16;
const GAUGE_STREAM: u64 = 8;
/// Along-track std multiplier of contaminated rows.
pub const CONTAMINATION_FACTOR: f64 = 20.0;

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

fn random_location(net: &RiverNetwork, cum: &[f64], rng: &mut ChaCha8Rng) -> NetworkLocation {
    let total = *cum.last().expect("network has edges");
    let u = rng.random_range(0.0..total);
    let edge = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
    let before = if edge == 0 { 0.0 } else { cum[edge - 1] };
    NetworkLocation {
        edge,
        offset_km: (u - before).clamp(0.0, net.edge(edge).length_km),
    }
}

/// Fixed stations every `spacing` km of chainage along each river, starting
/// half a spacing above the river's lowest point.
fn spaced_stations(net: &RiverNetwork, spacing: f64) -> Vec<NetworkLocation> {
    let mut out = Vec::new();
    for river in net.rivers().keys() {
        let (lo, hi) = net.river_chainage_range(river).expect("river has edges");
        let mut c = lo + spacing / 2.0;
        while c < hi {
            out.extend(net.river_location(river, c));
            c += spacing;
        }
    }
    out
}

/// Observations of every mission over its active period within `era`. Output is sorted
/// by mission, date, edge and offset.
pub fn sample_missions(
    truth: &Truth,
    missions: &[MissionConfig],
    era: (NaiveDate, NaiveDate),
    seed: u64,
) -> Result<Vec<Observation>, SimError> {
    let net = truth.net;
    let cum: Vec<f64> = net
        .edges()
        .iter()
        .scan(0.0, |acc, e| {
            *acc += e.length_km;
            Some(*acc)
        })
        .collect();
    let mut out = Vec::new();
    for (mi, m) in missions.iter().enumerate() {
        let mut rng = stream(seed, MISSION_STREAM + mi as u64);
        let start = m.active_from.max(era.0);
        let span = (m.active_to.min(era.1) - start).num_days();
        // (location, date, track id)
        let mut passes: Vec<(NetworkLocation, NaiveDate, String)> = Vec::new();
        let repeating = |rng: &mut ChaCha8Rng, stations: Vec<NetworkLocation>, r: u32, tag: &str| {
            let mut out = Vec::new();
            for (k, s) in stations.into_iter().enumerate() {
                let phase = rng.random_range(0..r as i64);
                let track = format!("{}-{tag}{k}", m.name);
                let mut d = phase;
                while d <= span {
                    out.push((truth.snap(s), start + Duration::days(d), track.clone()));
                    d += r as i64;
                }
            }
            out
        };
        match (&m.crossings, m.repeat_days) {
            (Crossings::Sites { sites }, Some(r)) => {
                let stations = sites.iter().map(|s| s.resolve(net)).collect::<Result<Vec<_>, _>>()?;
                passes = repeating(&mut rng, stations, r, "vs");
            }
            (Crossings::Spaced { spacing_km }, Some(r)) => {
                passes = repeating(&mut rng, spaced_stations(net, *spacing_km), r, "vs");
            }
            (Crossings::Random { per_cycle }, Some(r)) => {
                let stations = (0..*per_cycle).map(|_| random_location(net, &cum, &mut rng)).collect();
                passes = repeating(&mut rng, stations, r, "c");
            }
            (Crossings::Random { per_cycle }, None) => {
                let count = (*per_cycle as f64 * (span + 1).max(0) as f64 / 365.25).round() as usize;
                let mut seen = HashSet::new();
                while passes.len() < count {
                    let s = truth.snap(random_location(net, &cum, &mut rng));
                    let date = start + Duration::days(rng.random_range(0..=span));
                    if seen.insert((s.edge, s.offset_km.to_bits(), date)) {
                        let k = passes.len();
                        passes.push((s, date, format!("{}-p{k}", m.name)));
                    }
                }
            }
            _ => {
                return Err(SimError::Config(format!(
                    "mission {}: fixed stations need a repeat period",
                    m.name
                )))
            }
        }
        let rate = truth.cfg.outlier_rate;
        let magnitude = truth.cfg.outlier_magnitude_m;
        for (s, date, track_id) in passes {
            let noise: f64 = rng.sample(StandardNormal);
            let outlier = rate > 0.0 && rng.random_bool(rate);
            let mut h = truth.level(s, date) + m.bias_m + m.noise_std_m * noise;
            let mut std = m.along_track_std_m.map(|v| v * rng.random_range(0.8..1.2));
            if outlier {
                h += if rng.random_bool(0.5) { magnitude } else { -magnitude };
                std = std.map(|v| v * CONTAMINATION_FACTOR);
            }
            out.push(Observation {
                location: s,
                date,
                height_m: h,
                mission: m.name.clone(),
                orbit_class: m.orbit_class,
                track_id,
                along_track_std_m: std,
                quality_factor: m.quality_factor,
            });
        }
    }
    out.sort_by(|a, b| {
        a.mission
            .cmp(&b.mission)
            .then(a.date.cmp(&b.date))
            .then(a.location.edge.cmp(&b.location.edge))
            .then(a.location.offset_km.total_cmp(&b.location.offset_km))
    });
    Ok(out)
}

/// Daily gauge series: truth plus Gaussian noise.
pub fn sample_gauges(
    truth: &Truth,
    gauges: &[GaugeConfig],
    (from, to): (NaiveDate, NaiveDate),
    seed: u64,
) -> Result<Vec<GaugeSeries>, SimError> {
    let mut rng = stream(seed, GAUGE_STREAM);
    let mut out = Vec::with_capacity(gauges.len());
    for g in gauges {
        let s = g.site.resolve(truth.net)?;
        let points = from
            .iter_days()
            .take_while(|d| *d <= to)
            .map(|d| {
                let e: f64 = rng.sample(StandardNormal);
                (d, truth.level(s, d) + g.noise_std_m * e)
            })
            .collect();
        out.push(GaugeSeries::new(g.gauge_id.clone(), s, points)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::OrbitClass;
    use crate::sim::tests::chain;
    use crate::sim::{truth_level, Profile, Seasonal, SiteRef, TruthConfig};

    fn truth_cfg(rate: f64) -> TruthConfig {
        TruthConfig {
            profile: Profile {
                base_m: 10.0,
                slope_m_per_km: 0.05,
                curvature_m_per_km2: 0.0,
            },
            seasonal: Seasonal {
                amplitude_m: 3.0,
                peak_doy: 240.0,
            },
            events: vec![],
            outlier_rate: rate,
            outlier_magnitude_m: 5.0,
            residual: None,
            attenuation_per_km: 0.0,
        }
    }

    fn mission(crossings: Crossings, repeat: Option<u32>, noise: f64, days: i64) -> MissionConfig {
        let from = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
        MissionConfig {
            name: "m".into(),
            orbit_class: if repeat == Some(35) {
                OrbitClass::ShortRepeat
            } else {
                OrbitClass::NonRepeat
            },
            repeat_days: repeat,
            crossings,
            noise_std_m: noise,
            bias_m: 0.0,
            active_from: from,
            active_to: from + Duration::days(days - 1),
            quality_factor: 1.0,
            along_track_std_m: Some(0.2),
        }
    }

    fn era() -> (NaiveDate, NaiveDate) {
        (
            NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        )
    }

    #[test]
    fn schedule_count_at_one_station() {
        let net = chain();
        let cfg = truth_cfg(0.0);
        let truth = Truth {
            net: &net,
            cfg: &cfg,
            field: None,
        };
        let vs = Crossings::Sites {
            sites: vec![SiteRef {
                edge_id: "e".into(),
                offset_km: 200.0,
            }],
        };
        for seed in 0..20 {
            let obs = sample_missions(&truth, &[mission(vs.clone(), Some(35), 0.3, 350)], era(), seed).unwrap();
            assert_eq!(obs.len(), 10);
        }
    }

    #[test]
    fn noise_free_heights_are_truth() {
        let net = chain();
        let cfg = truth_cfg(0.0);
        let truth = Truth {
            net: &net,
            cfg: &cfg,
            field: None,
        };
        let obs = sample_missions(
            &truth,
            &[mission(Crossings::Random { per_cycle: 200 }, None, 0.0, 730)],
            era(),
            3,
        )
        .unwrap();
        assert_eq!(obs.len(), 400);
        for o in &obs {
            assert_eq!(o.height_m, truth_level(&net, &cfg, o.location, o.date));
        }
    }

    #[test]
    fn realized_noise_and_unique_non_repeat_points() {
        let net = chain();
        let cfg = truth_cfg(0.0);
        let truth = Truth {
            net: &net,
            cfg: &cfg,
            field: None,
        };
        let obs = sample_missions(
            &truth,
            &[mission(Crossings::Random { per_cycle: 2100 }, None, 0.4, 1826)],
            era(),
            5,
        )
        .unwrap();
        assert!(obs.len() >= 10_000);
        let resid: Vec<f64> = obs
            .iter()
            .map(|o| o.height_m - truth_level(&net, &cfg, o.location, o.date))
            .collect();
        let sd = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
        assert!((sd - 0.4).abs() < 0.04, "{sd}");
        let keys: HashSet<_> = obs
            .iter()
            .map(|o| (o.location.edge, o.location.offset_km.to_bits(), o.date))
            .collect();
        assert_eq!(keys.len(), obs.len());
    }

    #[test]
    fn contaminated_rows_carry_large_stds() {
        let net = chain();
        let cfg = truth_cfg(0.1);
        let truth = Truth {
            net: &net,
            cfg: &cfg,
            field: None,
        };
        let obs = sample_missions(
            &truth,
            &[mission(Crossings::Random { per_cycle: 1000 }, None, 0.0, 365)],
            era(),
            8,
        )
        .unwrap();
        let bad: Vec<_> = obs.iter().filter(|o| o.along_track_std_m.unwrap() > 1.0).collect();
        assert!(bad.len() > 50 && bad.len() < 150, "{}", bad.len());
        for o in bad {
            assert!(((o.height_m - truth_level(&net, &cfg, o.location, o.date)).abs() - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_output() {
        let net = chain();
        let cfg = truth_cfg(0.05);
        let truth = Truth {
            net: &net,
            cfg: &cfg,
            field: None,
        };
        let m = [
            mission(Crossings::Spaced { spacing_km: 70.0 }, Some(35), 0.3, 700),
            mission(Crossings::Random { per_cycle: 300 }, None, 0.5, 700),
        ];
        let a = sample_missions(&truth, &m, era(), 42).unwrap();
        let b = sample_missions(&truth, &m, era(), 42).unwrap();
        let c = sample_missions(&truth, &m, era(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
