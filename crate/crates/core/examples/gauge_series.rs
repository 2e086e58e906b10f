//! Dense five-day series at every gauge from universal kriging, the
//! short-repeat ordinary-kriging baseline and the nearest virtual station,
//! scored against the gauges.
//!
//! ```text
//! cargo run --release --example gauge_series [seed] [out-dir]
//! ```

use altikrig::analysis::series_metrics;
use altikrig::kriging::write_series_csv;
use altikrig::pipeline::{
    fit_covariance, predict_targets, prepare, resolve_targets, series_file, PredictMode, Scenario,
};
use altikrig::sim::{mekong_like_config, simulate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let out = args.next();

    let cfg = mekong_like_config();
    let sim = simulate(&cfg, seed)?;
    let net = &sim.network;
    let (obs, prep) = prepare(net, sim.observations.clone(), Scenario::WholeBasin);
    let params = fit_covariance(net, &obs, Scenario::WholeBasin, prep)?.params;
    let targets = resolve_targets(net, &sim.targets)?;

    println!(
        "{:<14} {:<12} {:>5} {:>7} {:>6} {:>6}",
        "gauge", "source", "n", "rmse", "r2", "nse"
    );
    for mode in [PredictMode::Uk, PredictMode::OkBaseline, PredictMode::Vs] {
        let series = predict_targets(net, &obs, &params, &targets, (cfg.era_from, cfg.era_to), 5, mode)?;
        for (id, points) in &series {
            let gauge = sim
                .gauges
                .iter()
                .find(|g| &g.gauge_id == id)
                .expect("target is a gauge");
            let alt: Vec<_> = points.iter().map(|p| (p.date, p.height_m)).collect();
            let daily: Vec<_> = gauge.iter().collect();
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
            match series_metrics(&alt, &daily) {
                Ok(m) => println!(
                    "{id:<14} {:<12} {:>5} {:>7.3} {:>6} {:>6}",
                    mode.source().as_str(),
                    m.n,
                    m.rmse_m,
                    fmt(m.r2),
                    fmt(m.nse)
                ),
                Err(e) => println!("{id:<14} {:<12} {e}", mode.source().as_str()),
            }
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                write_series_csv(series_file(dir.as_ref(), id, mode.source()), points)?;
            }
        }
    }
    Ok(())
}
