//! Compares the three data scenarios: whole basin, main stem only, and main
//! stem with major tributaries. Each is prepared, fitted and kriged at the
//! main-stem gauges.
//!
//! ```text
//! cargo run --release --example scenario_comparison [seed]
//! ```

use altikrig::analysis::series_metrics;
use altikrig::pipeline::{fit_covariance, predict_targets, prepare, resolve_targets, PredictMode, Scenario};
use altikrig::sim::{mekong_like_config, simulate};
use altikrig::TribClass;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let cfg = mekong_like_config();
    let sim = simulate(&cfg, seed)?;
    let net = &sim.network;
    let targets: Vec<_> = resolve_targets(net, &sim.targets)?
        .into_iter()
        .filter(|t| net.trib_class(t.location) == TribClass::MainStem)
        .collect();

    for scenario in [Scenario::WholeBasin, Scenario::MainStem, Scenario::MainAndMajor] {
        let (obs, prep) = prepare(net, sim.observations.clone(), scenario);
        let fit = fit_covariance(net, &obs, scenario, prep)?;
        let p = &fit.params;
        println!(
            "{scenario}: {} obs, {:?}, sigma2 {:.2}/{:.2} m2, ranges {:.0}/{:.0} km, tau {:.1} d, factors {}/{}",
            obs.len(),
            fit.status,
            p.sigma2_river,
            p.sigma2_basin,
            p.rho_river,
            p.rho_basin,
            p.tau,
            p.trib_factor_major,
            p.trib_factor_minor
        );
        let series = predict_targets(net, &obs, p, &targets, (cfg.era_from, cfg.era_to), 5, PredictMode::Uk)?;
        for (id, points) in series {
            let gauge = sim.gauges.iter().find(|g| g.gauge_id == id).expect("target is a gauge");
            let alt: Vec<_> = points.iter().map(|q| (q.date, q.height_m)).collect();
            let daily: Vec<_> = gauge.iter().collect();
            if let Ok(m) = series_metrics(&alt, &daily) {
                println!(
                    "  {id:<14} rmse {:.3} m  r2 {}",
                    m.rmse_m,
                    m.r2.map_or("-".into(), |r| format!("{r:.3}"))
                );
            }
        }
    }
    Ok(())
}
