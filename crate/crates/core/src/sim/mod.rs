//! Synthetic truth fields and mission sampling.
//!
//! A truth field is a deterministic part (a mean profile in chainage, a
//! seasonal cycle and translating flood/drought pulses) plus an optional
//! stochastic residual drawn from a [`CovarianceParams`] model. Missions
//! sample it on fixed virtual stations or pseudo-random crossings.
//!
//! Random numbers come from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! a 64-bit seed; the residual field, every mission and the gauges each
//! draw from their own ChaCha stream, so output depends only on the seed
//! and the configuration.

mod field;
mod presets;
mod sampling;

use std::f64::consts::TAU;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covariance::CovarianceParams;
use crate::ingest::{GaugeSeries, IngestError, Observation, OrbitClass};
use crate::network::{EdgeRecord, NetworkError, NetworkLocation, NodeRecord, RiverNetwork};

pub use field::ResidualField;
pub use presets::{
    covariance_recovery_config, mekong_like_config, mekong_like_network, recovery_network, recovery_params,
};
pub use sampling::{sample_gauges, sample_missions};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("residual field: spatial covariance is not positive definite")]
    Field,
    #[error("config file: {0}")]
    Json(#[from] serde_json::Error),
}

/// A location given by edge id and offset (km).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteRef {
    pub edge_id: String,
    pub offset_km: f64,
}

impl SiteRef {
    pub fn resolve(&self, net: &RiverNetwork) -> Result<NetworkLocation, SimError> {
        Ok(net.location(&self.edge_id, self.offset_km)?)
    }
}

/// Mean water level as a quadratic in chainage `c`: `base + slope c + curvature c^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub base_m: f64,
    pub slope_m_per_km: f64,
    pub curvature_m_per_km2: f64,
}

/// `amplitude cos(2 pi (doy - peak_doy) / 365.25)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seasonal {
    pub amplitude_m: f64,
    pub peak_doy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Flood,
    Drought,
}

/// A raised-cosine pulse `amplitude sin^2(pi u / duration)`, `0 <= u <= duration`,
/// starting at the origin on `onset_doy` of `year` and translating downstream
/// at `celerity`. Droughts carry the negative sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloodEvent {
    pub kind: EventKind,
    pub year: i32,
    pub amplitude_m: f64,
    pub onset_doy: u32,
    pub duration_days: f64,
    pub origin: SiteRef,
    pub celerity_km_per_day: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub profile: Profile,
    pub seasonal: Seasonal,
    pub events: Vec<FloodEvent>,
    /// Fraction of observations replaced by outliers.
    pub outlier_rate: f64,
    pub outlier_magnitude_m: f64,
    /// Stochastic residual added to the deterministic part.
    pub residual: Option<CovarianceParams>,
    /// Pulse amplitude decay per km travelled.
    #[serde(default)]
    pub attenuation_per_km: f64,
}

/// Where a mission crosses the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Crossings {
    /// Fixed virtual stations.
    Sites { sites: Vec<SiteRef> },
    /// Virtual stations every `spacing_km` of chainage along each river.
    Spaced { spacing_km: f64 },
    /// Pseudo-random crossings: per repeat cycle, or per year without repeat.
    Random { per_cycle: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub name: String,
    pub orbit_class: OrbitClass,
    pub repeat_days: Option<u32>,
    pub crossings: Crossings,
    pub noise_std_m: f64,
    /// Radial datum offset added to every height.
    #[serde(default)]
    pub bias_m: f64,
    pub active_from: NaiveDate,
    pub active_to: NaiveDate,
    pub quality_factor: f64,
    /// Nominal along-track standard deviation reported with each row.
    pub along_track_std_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeConfig {
    pub gauge_id: String,
    pub site: SiteRef,
    pub noise_std_m: f64,
}

/// A complete synthetic world: network, truth, missions and gauges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub era_from: NaiveDate,
    pub era_to: NaiveDate,
    /// Resolution of the residual field along each edge (km).
    pub site_spacing_km: f64,
    pub truth: TruthConfig,
    pub missions: Vec<MissionConfig>,
    pub gauges: Vec<GaugeConfig>,
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn validate(&self, net: &RiverNetwork) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.era_to < self.era_from {
            return bad("era_to precedes era_from".into());
        }
        if !(self.site_spacing_km > 0.0) {
            return bad(format!("site_spacing_km = {}", self.site_spacing_km));
        }
        let t = &self.truth;
        if !(t.seasonal.amplitude_m >= 0.0) {
            return bad("seasonal amplitude must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&t.outlier_rate) || !(t.outlier_magnitude_m >= 0.0) {
            return bad("outlier rate must lie in [0, 1] and magnitude be >= 0".into());
        }
        if !(t.attenuation_per_km >= 0.0) {
            return bad("attenuation_per_km must be >= 0".into());
        }
        if let Some(p) = &t.residual {
            p.validate().map_err(|e| SimError::Config(format!("residual: {e}")))?;
        }
        for e in &t.events {
            if !(e.amplitude_m >= 0.0 && e.duration_days > 0.0 && e.celerity_km_per_day > 0.0) {
                return bad(format!(
                    "event in {}: amplitude >= 0, duration > 0, celerity > 0",
                    e.year
                ));
            }
            if NaiveDate::from_yo_opt(e.year, e.onset_doy).is_none() {
                return bad(format!("event in {}: onset_doy {}", e.year, e.onset_doy));
            }
            e.origin.resolve(net)?;
        }
        for m in &self.missions {
            if m.repeat_days == Some(0) {
                return bad(format!("mission {}: repeat_days must be positive", m.name));
            }
            if !(m.noise_std_m >= 0.0 && m.quality_factor >= 1.0) {
                return bad(format!("mission {}: noise >= 0 and quality_factor >= 1", m.name));
            }
            if m.active_from < self.era_from || m.active_to > self.era_to || m.active_to < m.active_from {
                return bad(format!("mission {}: active period outside the era", m.name));
            }
            match &m.crossings {
                Crossings::Sites { sites } => {
                    for s in sites {
                        s.resolve(net)?;
                    }
                }
                Crossings::Spaced { spacing_km } if !(*spacing_km > 0.0) => {
                    return bad(format!("mission {}: spacing_km must be positive", m.name));
                }
                _ => {}
            }
            if m.repeat_days.is_none() && matches!(m.crossings, Crossings::Sites { .. } | Crossings::Spaced { .. }) {
                return bad(format!("mission {}: fixed stations need a repeat period", m.name));
            }
        }
        for g in &self.gauges {
            g.site.resolve(net)?;
            if !(g.noise_std_m >= 0.0) {
                return bad(format!("gauge {}: noise must be >= 0", g.gauge_id));
            }
        }
        Ok(())
    }
}

fn seasonal_term(s: &Seasonal, date: NaiveDate) -> f64 {
    s.amplitude_m * (TAU * (date.ordinal() as f64 - s.peak_doy) / 365.25).cos()
}

fn profile_term(p: &Profile, chainage: f64) -> f64 {
    p.base_m + p.slope_m_per_km * chainage + p.curvature_m_per_km2 * chainage * chainage
}

/// Pulse contribution of one event at `s` on `date`.
pub fn event_term(
    net: &RiverNetwork,
    cfg: &TruthConfig,
    event: &FloodEvent,
    s: NetworkLocation,
    date: NaiveDate,
) -> f64 {
    let Ok(origin) = event.origin.resolve(net) else {
        return 0.0;
    };
    let Some(dist) = net.downstream_distance(origin, s) else {
        return 0.0;
    };
    let onset = NaiveDate::from_yo_opt(event.year, event.onset_doy).expect("validated onset");
    let u = crate::day_number(date) - crate::day_number(onset) - dist / event.celerity_km_per_day;
    if !(0.0..=event.duration_days).contains(&u) {
        return 0.0;
    }
    let sign = match event.kind {
        EventKind::Flood => 1.0,
        EventKind::Drought => -1.0,
    };
    let shape = (std::f64::consts::PI * u / event.duration_days).sin().powi(2);
    sign * event.amplitude_m * (-cfg.attenuation_per_km * dist).exp() * shape
}

/// Deterministic truth: mean profile + seasonal cycle + event pulses.
pub fn truth_level(net: &RiverNetwork, cfg: &TruthConfig, s: NetworkLocation, date: NaiveDate) -> f64 {
    profile_term(&cfg.profile, net.chainage(s))
        + seasonal_term(&cfg.seasonal, date)
        + cfg.events.iter().map(|e| event_term(net, cfg, e, s, date)).sum::<f64>()
}

/// Truth field including the stochastic residual, if any.
pub struct Truth<'a> {
    pub net: &'a RiverNetwork,
    pub cfg: &'a TruthConfig,
    pub field: Option<ResidualField>,
}

impl Truth<'_> {
    pub fn level(&self, s: NetworkLocation, date: NaiveDate) -> f64 {
        let r = self.field.as_ref().map_or(0.0, |f| f.value(s, date));
        truth_level(self.net, self.cfg, s, date) + r
    }

    /// Snaps a location to the residual-field site grid when a field exists.
    pub fn snap(&self, s: NetworkLocation) -> NetworkLocation {
        self.field.as_ref().map_or(s, |f| f.snap(s))
    }
}

/// One row of `truth.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub edge_id: String,
    pub offset_km: f64,
    pub date: NaiveDate,
    pub height_m: f64,
}

/// One row of `targets.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub target_id: String,
    pub edge_id: String,
    pub offset_km: f64,
}

/// Everything produced by [`simulate`].
pub struct Simulation {
    pub network: RiverNetwork,
    pub observations: Vec<Observation>,
    pub gauges: Vec<GaugeSeries>,
    /// Daily truth at every gauge site.
    pub truth: Vec<TruthRow>,
    pub targets: Vec<TargetRow>,
}

pub fn simulate(cfg: &SimulationConfig, seed: u64) -> Result<Simulation, SimError> {
    let net = RiverNetwork::build(cfg.nodes.clone(), cfg.edges.clone())?;
    cfg.validate(&net)?;
    let field = match &cfg.truth.residual {
        Some(p) => Some(ResidualField::simulate(
            &net,
            p,
            cfg.site_spacing_km,
            (cfg.era_from, cfg.era_to),
            seed,
        )?),
        None => None,
    };
    let truth = Truth {
        net: &net,
        cfg: &cfg.truth,
        field,
    };
    let observations = sample_missions(&truth, &cfg.missions, (cfg.era_from, cfg.era_to), seed)?;
    let gauges = sample_gauges(&truth, &cfg.gauges, (cfg.era_from, cfg.era_to), seed)?;
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for g in &cfg.gauges {
        let s = g.site.resolve(&net)?;
        targets.push(TargetRow {
            target_id: g.gauge_id.clone(),
            edge_id: g.site.edge_id.clone(),
            offset_km: g.site.offset_km,
        });
        for date in cfg.era_from.iter_days().take_while(|d| *d <= cfg.era_to) {
            rows.push(TruthRow {
                edge_id: g.site.edge_id.clone(),
                offset_km: g.site.offset_km,
                date,
                height_m: truth.level(s, date),
            });
        }
    }
    drop(truth);
    Ok(Simulation {
        network: net,
        observations,
        gauges,
        truth: rows,
        targets,
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), SimError> {
    let err = |e: csv::Error| {
        SimError::Ingest(IngestError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    };
    let mut wtr = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        wtr.serialize(r).map_err(err)?;
    }
    wtr.flush().map_err(|e| err(e.into()))
}

pub fn read_targets(path: impl AsRef<Path>) -> Result<Vec<TargetRow>, SimError> {
    let path = path.as_ref();
    let err = |e: csv::Error| {
        SimError::Ingest(IngestError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    };
    let mut rdr = csv::Reader::from_path(path).map_err(err)?;
    rdr.deserialize().collect::<Result<Vec<TargetRow>, _>>().map_err(err)
}

/// Writes `nodes.csv`, `edges.csv`, `observations.csv`, `gauges.csv`,
/// `truth.csv` and `targets.csv` into `dir`.
pub fn write_simulation(sim: &Simulation, dir: impl AsRef<Path>) -> Result<(), SimError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| {
        SimError::Ingest(IngestError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })
    })?;
    crate::network::write_network(&sim.network, dir)?;
    crate::ingest::write_observations(dir.join("observations.csv"), &sim.network, &sim.observations)?;
    crate::ingest::write_gauges(dir.join("gauges.csv"), &sim.network, &sim.gauges)?;
    write_rows(&dir.join("truth.csv"), &sim.truth)?;
    write_rows(&dir.join("targets.csv"), &sim.targets)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NodeKind, TribClass};
    use chrono::Duration;

    pub(crate) fn chain() -> RiverNetwork {
        let node = |id: &str, y: f64, kind| NodeRecord {
            node_id: id.into(),
            x_km: 0.0,
            y_km: y,
            kind,
            sub_basin_id: "b".into(),
        };
        RiverNetwork::build(
            vec![node("s", 500.0, NodeKind::Source), node("m", 0.0, NodeKind::Mouth)],
            vec![EdgeRecord {
                edge_id: "e".into(),
                up_node: "s".into(),
                down_node: "m".into(),
                length_km: 500.0,
                river_id: "r".into(),
                trib_class: TribClass::MainStem,
                catchment_weight: 1.0,
            }],
        )
        .unwrap()
    }

    fn cfg(events: Vec<FloodEvent>) -> TruthConfig {
        TruthConfig {
            profile: Profile {
                base_m: 10.0,
                slope_m_per_km: 0.1,
                curvature_m_per_km2: 0.0,
            },
            seasonal: Seasonal {
                amplitude_m: 4.0,
                peak_doy: 100.0,
            },
            events,
            outlier_rate: 0.0,
            outlier_magnitude_m: 0.0,
            residual: None,
            attenuation_per_km: 0.0,
        }
    }

    fn flood(amplitude: f64) -> FloodEvent {
        FloodEvent {
            kind: EventKind::Flood,
            year: 2011,
            amplitude_m: amplitude,
            onset_doy: 200,
            duration_days: 40.0,
            origin: SiteRef {
                edge_id: "e".into(),
                offset_km: 100.0,
            },
            celerity_km_per_day: 50.0,
        }
    }

    #[test]
    fn seasonal_zero_crossing_leaves_profile() {
        let net = chain();
        let mut c = cfg(vec![]);
        // a quarter period after the peak
        c.seasonal.peak_doy = 100.0 - 365.25 / 4.0 + 0.0;
        let s = NetworkLocation {
            edge: 0,
            offset_km: 300.0,
        };
        let date = NaiveDate::from_yo_opt(2010, 100).unwrap();
        let h = truth_level(&net, &c, s, date);
        assert!((h - (10.0 + 0.1 * 200.0)).abs() < 1e-12, "{h}");
    }

    #[test]
    fn pulse_peak_at_origin_and_downstream_shift() {
        let net = chain();
        let c = cfg(vec![flood(3.0)]);
        let origin = NetworkLocation {
            edge: 0,
            offset_km: 100.0,
        };
        let peak = NaiveDate::from_yo_opt(2011, 220).unwrap();
        let base = truth_level(&net, &cfg(vec![]), origin, peak);
        assert!((truth_level(&net, &c, origin, peak) - base - 3.0).abs() < 1e-12);

        let down = NetworkLocation {
            edge: 0,
            offset_km: 200.0,
        };
        let shifted = peak + Duration::days(2);
        let pulse = |s, d| truth_level(&net, &c, s, d) - truth_level(&net, &cfg(vec![]), s, d);
        assert!((pulse(down, shifted) - 3.0).abs() < 1e-12);
        assert!(pulse(down, peak) < 3.0);
        // nothing upstream of the origin
        let up = NetworkLocation {
            edge: 0,
            offset_km: 50.0,
        };
        assert_eq!(pulse(up, peak), 0.0);
    }

    #[test]
    fn drought_is_negative() {
        let net = chain();
        let mut e = flood(2.0);
        e.kind = EventKind::Drought;
        let c = cfg(vec![e]);
        let origin = NetworkLocation {
            edge: 0,
            offset_km: 100.0,
        };
        let peak = NaiveDate::from_yo_opt(2011, 220).unwrap();
        let base = truth_level(&net, &cfg(vec![]), origin, peak);
        assert!((truth_level(&net, &c, origin, peak) - base + 2.0).abs() < 1e-12);
    }

    #[test]
    fn missing_key_is_named() {
        let json = mekong_like_config().to_json();
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v.as_object_mut().unwrap().remove("era_from");
        let err = SimulationConfig::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("era_from"), "{err}");
    }

    #[test]
    fn presets_validate() {
        for c in [mekong_like_config(), covariance_recovery_config()] {
            let net = RiverNetwork::build(c.nodes.clone(), c.edges.clone()).unwrap();
            c.validate(&net).unwrap();
        }
    }
}
