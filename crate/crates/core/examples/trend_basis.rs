//! Per-river cubic B-spline trend: builds the basis, prints its blocks and
//! fits it by least squares to noise-free levels of a quadratic profile.
//!
//! ```text
//! cargo run --example trend_basis [knot-spacing-km]
//! ```

use altikrig::kriging::{ols_trend, trend_value};
use altikrig::network::RiverNetwork;
use altikrig::sim::{mekong_like_network, truth_level, Profile, Seasonal, TruthConfig};
use altikrig::trend::build_basis;
use altikrig::{Observation, OrbitClass};
use chrono::NaiveDate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spacing: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100.0);
    let (nodes, edges) = mekong_like_network();
    let net = RiverNetwork::build(nodes, edges)?;
    let basis = build_basis(&net, spacing)?;
    println!("{} functions at {spacing} km knot spacing", basis.len());
    for b in basis.summary() {
        println!("  {:<10} {:3} functions", b.river_id, b.count);
    }

    let truth = TruthConfig {
        profile: Profile {
            base_m: 8.0,
            slope_m_per_km: 0.02,
            curvature_m_per_km2: 5e-6,
        },
        seasonal: Seasonal {
            amplitude_m: 0.0,
            peak_doy: 245.0,
        },
        events: Vec::new(),
        outlier_rate: 0.0,
        outlier_magnitude_m: 0.0,
        residual: None,
        attenuation_per_km: 0.0,
    };
    let date = NaiveDate::from_ymd_opt(2012, 1, 1).unwrap();
    let mut obs = Vec::new();
    for (i, e) in net.edges().iter().enumerate() {
        let n = (e.length_km / 10.0).ceil() as usize;
        for k in 0..n {
            let location = altikrig::NetworkLocation {
                edge: i,
                offset_km: (k as f64 + 0.5) * e.length_km / n as f64,
            };
            obs.push(Observation {
                location,
                date,
                height_m: truth_level(&net, &truth, location, date),
                mission: "survey".into(),
                orbit_class: OrbitClass::NonRepeat,
                track_id: format!("p{}", obs.len()),
                along_track_std_m: None,
                quality_factor: 1.0,
            });
        }
    }
    let fit = ols_trend(&net, &basis, &obs)?;
    let worst = obs
        .iter()
        .map(|o| (o.height_m - trend_value(&net, &basis, &fit.beta, o.location)).abs())
        .fold(0.0, f64::max);
    println!("{} points, largest misfit {worst:.2e} m", obs.len());
    Ok(())
}
