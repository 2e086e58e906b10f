//! Ready-made synthetic worlds.

use chrono::NaiveDate;

use super::{
    Crossings, EventKind, FloodEvent, GaugeConfig, MissionConfig, Profile, Seasonal, SimulationConfig, SiteRef,
    TruthConfig,
};
use crate::covariance::CovarianceParams;
use crate::ingest::OrbitClass;
use crate::network::{EdgeRecord, NodeKind, NodeRecord, TribClass};

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid preset date")
}

fn site(edge_id: &str, offset_km: f64) -> SiteRef {
    SiteRef {
        edge_id: edge_id.into(),
        offset_km,
    }
}

/// A Mekong-like tree: a 2000 km main stem with two major tributaries (one
/// fed by a minor tributary), four minor tributaries and a dam on one of
/// them. Chainage of the main-stem nodes from the mouth: 0, 200, 450, 700,
/// 1000, 1300, 1600, 2000 km.
pub fn mekong_like_network() -> (Vec<NodeRecord>, Vec<EdgeRecord>) {
    let node = |id: &str, x: f64, y: f64, kind: NodeKind, basin: &str| NodeRecord {
        node_id: id.into(),
        x_km: x,
        y_km: y,
        kind,
        sub_basin_id: basin.into(),
    };
    use NodeKind::*;
    let nodes = vec![
        node("mouth", 0.0, 0.0, Mouth, "lower"),
        node("c1", 30.0, 180.0, Confluence, "lower"),
        node("c2", -20.0, 420.0, GaugeSite, "middle"),
        node("c3", -60.0, 650.0, Confluence, "middle"),
        node("c4", -150.0, 900.0, Confluence, "laos"),
        node("c5", -300.0, 1150.0, Confluence, "laos"),
        node("c6", -450.0, 1400.0, Confluence, "upper"),
        node("src", -500.0, 1750.0, Source, "upper"),
        node("ou-src", -350.0, 1650.0, Source, "upper"),
        node("ngum-src", -420.0, 1300.0, Source, "laos"),
        node("ngum-dam", -360.0, 1220.0, Dam, "laos"),
        node("theun-src", -20.0, 1050.0, Source, "laos"),
        node("mun-src", -600.0, 700.0, Source, "mun"),
        node("mun-c", -350.0, 690.0, Confluence, "mun"),
        node("chi-src", -550.0, 950.0, Source, "mun"),
        node("se-src", 300.0, 450.0, Source, "3s"),
    ];
    let edge = |id: &str, up: &str, down: &str, len: f64, river: &str, class: TribClass, w: f64| EdgeRecord {
        edge_id: id.into(),
        up_node: up.into(),
        down_node: down.into(),
        length_km: len,
        river_id: river.into(),
        trib_class: class,
        catchment_weight: w,
    };
    use TribClass::*;
    let edges = vec![
        edge("main-1", "src", "c6", 400.0, "mekong", MainStem, 8.0),
        edge("main-2", "c6", "c5", 300.0, "mekong", MainStem, 9.0),
        edge("main-3", "c5", "c4", 300.0, "mekong", MainStem, 10.5),
        edge("main-4", "c4", "c3", 300.0, "mekong", MainStem, 11.5),
        edge("main-5", "c3", "c2", 250.0, "mekong", MainStem, 16.5),
        edge("main-6", "c2", "c1", 250.0, "mekong", MainStem, 16.5),
        edge("main-7", "c1", "mouth", 200.0, "mekong", MainStem, 20.5),
        edge("ou-1", "ou-src", "c6", 300.0, "nam-ou", MinorTributary, 1.0),
        edge("ngum-1", "ngum-src", "ngum-dam", 150.0, "nam-ngum", MinorTributary, 1.5),
        edge("ngum-2", "ngum-dam", "c5", 120.0, "nam-ngum", MinorTributary, 1.5),
        edge("theun-1", "theun-src", "c4", 200.0, "nam-theun", MinorTributary, 1.0),
        edge("mun-1", "mun-src", "mun-c", 350.0, "mun", MajorTributary, 3.0),
        edge("chi-1", "chi-src", "mun-c", 300.0, "chi", MinorTributary, 2.0),
        edge("mun-2", "mun-c", "c3", 250.0, "mun", MajorTributary, 5.0),
        edge("sekong-1", "se-src", "c1", 450.0, "sekong", MajorTributary, 4.0),
    ];
    (nodes, edges)
}

fn gauges() -> Vec<GaugeConfig> {
    [
        ("chiang-saen", "main-1", 150.0),
        ("luang-prabang", "main-2", 150.0),
        ("vientiane", "main-3", 150.0),
        ("nakhon-phanom", "main-4", 150.0),
        ("pakse", "main-5", 125.0),
        ("stung-treng", "main-6", 125.0),
        ("kratie", "main-7", 100.0),
        ("ubon", "mun-2", 125.0),
    ]
    .into_iter()
    .map(|(id, e, off)| GaugeConfig {
        gauge_id: id.into(),
        site: site(e, off),
        noise_std_m: 0.02,
    })
    .collect()
}

#[allow(clippy::too_many_arguments)]
fn mission(
    name: &str,
    orbit_class: OrbitClass,
    repeat_days: Option<u32>,
    crossings: Crossings,
    noise_std_m: f64,
    bias_m: f64,
    (active_from, active_to): (NaiveDate, NaiveDate),
    quality_factor: f64,
) -> MissionConfig {
    MissionConfig {
        name: name.into(),
        orbit_class,
        repeat_days,
        crossings,
        noise_std_m,
        bias_m,
        active_from,
        active_to,
        quality_factor,
        along_track_std_m: Some(0.15),
    }
}

/// Nine flood seasons (2008-2016) on the Mekong-like network with floods in
/// 2011 and 2013 and droughts in 2010 and 2015. The mission timeline has a
/// short-repeat gap between the end of the 35-day mission (October 2010)
/// and the start of its successor (March 2013), bridged only by a 10-day
/// mission at three stations and a long-repeat mission with dense crossings.
pub fn mekong_like_config() -> SimulationConfig {
    let (nodes, edges) = mekong_like_network();
    let origins = ["main-1", "mun-1", "chi-1", "sekong-1", "ou-1", "ngum-1", "theun-1"];
    let mut events = Vec::new();
    for (kind, year) in [
        (EventKind::Drought, 2010),
        (EventKind::Flood, 2011),
        (EventKind::Flood, 2013),
        (EventKind::Drought, 2015),
    ] {
        for o in origins {
            events.push(FloodEvent {
                kind,
                year,
                amplitude_m: 3.5,
                onset_doy: 180,
                duration_days: 110.0,
                origin: site(o, 0.0),
                celerity_km_per_day: 100.0,
            });
        }
    }
    use OrbitClass::*;
    let missions = vec![
        mission(
            "envisat",
            ShortRepeat,
            Some(35),
            Crossings::Spaced { spacing_km: 70.0 },
            0.35,
            0.0,
            (date(2008, 1, 1), date(2010, 10, 21)),
            1.0,
        ),
        mission(
            "jason-2",
            ShortRepeat,
            Some(10),
            Crossings::Sites {
                sites: vec![site("main-4", 50.0), site("main-6", 200.0), site("mun-2", 140.0)],
            },
            0.4,
            0.15,
            (date(2008, 7, 12), date(2016, 12, 31)),
            1.5,
        ),
        mission(
            "cryosat-2",
            LongRepeat,
            Some(369),
            Crossings::Random { per_cycle: 1000 },
            0.45,
            0.25,
            (date(2010, 7, 16), date(2016, 12, 31)),
            1.5,
        ),
        mission(
            "saral",
            ShortRepeat,
            Some(35),
            Crossings::Spaced { spacing_km: 70.0 },
            0.3,
            -0.2,
            (date(2013, 3, 14), date(2016, 7, 3)),
            1.0,
        ),
        mission(
            "saral-dp",
            NonRepeat,
            None,
            Crossings::Random { per_cycle: 800 },
            0.4,
            -0.2,
            (date(2016, 7, 4), date(2016, 12, 31)),
            1.5,
        ),
    ];
    SimulationConfig {
        nodes,
        edges,
        era_from: date(2008, 1, 1),
        era_to: date(2016, 12, 31),
        site_spacing_km: 5.0,
        truth: TruthConfig {
            profile: Profile {
                base_m: 8.0,
                slope_m_per_km: 0.02,
                curvature_m_per_km2: 5e-6,
            },
            seasonal: Seasonal {
                amplitude_m: 4.0,
                peak_doy: 245.0,
            },
            events,
            outlier_rate: 0.02,
            outlier_magnitude_m: 6.0,
            residual: Some(CovarianceParams {
                sigma2_river: 0.15,
                rho_river: 200.0,
                sigma2_basin: 0.1,
                rho_basin: 400.0,
                tau: 15.0,
                nugget: 0.0,
                trib_factor_major: 1.0,
                trib_factor_minor: 1.0,
            }),
            attenuation_per_km: 0.0,
        },
        missions,
        gauges: gauges(),
    }
}

/// A fishbone of 20 main-stem segments of 150 km. At every confluence a
/// tributary joins, alternating sides: a 75 km trunk fed by headwater
/// branches of 75 km and 120 km, all three in one sub-basin. Each main-stem segment
/// drains its own sub-basin.
pub fn recovery_network() -> (Vec<NodeRecord>, Vec<EdgeRecord>) {
    const SEGMENTS: usize = 20;
    const SEGMENT_KM: f64 = 150.0;
    const REACH_KM: f64 = 75.0;
    let node = |id: String, x: f64, y: f64, kind: NodeKind, basin: String| NodeRecord {
        node_id: id,
        x_km: x,
        y_km: y,
        kind,
        sub_basin_id: basin,
    };
    let edge = |id: String, up: String, down: String, len: f64, river: String, class: TribClass, w: f64| EdgeRecord {
        edge_id: id,
        up_node: up,
        down_node: down,
        length_km: len,
        river_id: river,
        trib_class: class,
        catchment_weight: w,
    };
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for k in 0..=SEGMENTS {
        let kind = match k {
            0 => NodeKind::Mouth,
            SEGMENTS => NodeKind::Source,
            _ => NodeKind::Confluence,
        };
        nodes.push(node(
            format!("n{k}"),
            0.0,
            k as f64 * SEGMENT_KM,
            kind,
            format!("main-{k}"),
        ));
    }
    for k in 1..SEGMENTS {
        let side = if k % 2 == 0 { 1.0 } else { -1.0 };
        let y = k as f64 * SEGMENT_KM;
        let basin = format!("trib-{k}");
        let (j, a, b) = (format!("j{k}"), format!("a{k}"), format!("b{k}"));
        nodes.push(node(
            j.clone(),
            side * 60.0,
            y + 45.0,
            NodeKind::Confluence,
            basin.clone(),
        ));
        nodes.push(node(a.clone(), side * 170.0, y + 30.0, NodeKind::Source, basin.clone()));
        nodes.push(node(b.clone(), side * 60.0, y + 120.0, NodeKind::Source, basin));
        let river = format!("r{k}");
        edges.push(edge(
            format!("trib-{k}"),
            j.clone(),
            format!("n{k}"),
            REACH_KM,
            river.clone(),
            TribClass::MajorTributary,
            2.0,
        ));
        edges.push(edge(
            format!("trib-{k}a"),
            a,
            j.clone(),
            120.0,
            format!("{river}a"),
            TribClass::MinorTributary,
            1.0,
        ));
        edges.push(edge(
            format!("trib-{k}b"),
            b,
            j,
            REACH_KM,
            river,
            TribClass::MajorTributary,
            1.0,
        ));
    }
    for k in 1..=SEGMENTS {
        let weight = 1.0 + 2.0 * (SEGMENTS - k) as f64;
        edges.push(edge(
            format!("main-{k}"),
            format!("n{k}"),
            format!("n{}", k - 1),
            SEGMENT_KM,
            "main".into(),
            TribClass::MainStem,
            weight,
        ));
    }
    (nodes, edges)
}

/// Residual-only world for recovering covariance parameters: twenty years
/// on [`recovery_network`] with a quadratic mean profile, no seasonal cycle
/// or events, and a known residual model.
pub fn covariance_recovery_config() -> SimulationConfig {
    let (nodes, edges) = recovery_network();
    use OrbitClass::*;
    SimulationConfig {
        nodes,
        edges,
        era_from: date(2000, 1, 1),
        era_to: date(2019, 12, 31),
        site_spacing_km: 5.0,
        truth: TruthConfig {
            profile: Profile {
                base_m: 8.0,
                slope_m_per_km: 0.1,
                curvature_m_per_km2: 2e-5,
            },
            seasonal: Seasonal {
                amplitude_m: 0.0,
                peak_doy: 245.0,
            },
            events: Vec::new(),
            outlier_rate: 0.0,
            outlier_magnitude_m: 0.0,
            residual: Some(recovery_params()),
            attenuation_per_km: 0.0,
        },
        missions: vec![
            mission(
                "vs-10d",
                ShortRepeat,
                Some(10),
                Crossings::Spaced { spacing_km: 50.0 },
                0.2,
                0.0,
                (date(2000, 1, 1), date(2019, 12, 31)),
                1.0,
            ),
            mission(
                "drift",
                NonRepeat,
                None,
                Crossings::Random { per_cycle: 3000 },
                0.2,
                0.0,
                (date(2000, 1, 1), date(2019, 12, 31)),
                1.0,
            ),
        ],
        gauges: Vec::new(),
    }
}

/// Residual model of [`covariance_recovery_config`].
pub fn recovery_params() -> CovarianceParams {
    CovarianceParams {
        sigma2_river: 1.0,
        rho_river: 60.0,
        sigma2_basin: 0.5,
        rho_basin: 250.0,
        tau: 5.0,
        nugget: 0.04,
        trib_factor_major: 1.0,
        trib_factor_minor: 1.0,
    }
}
