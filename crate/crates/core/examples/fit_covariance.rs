//! Recovers known covariance parameters from a simulated residual field:
//! detrend, bin the residual products, fit the model curves.
//!
//! ```text
//! cargo run --release --example fit_covariance [seed] [years]
//! ```

use altikrig::covariance::PairKind;
use altikrig::pipeline::{fit_covariance, prepare, residuals, Scenario};
use altikrig::sim::{covariance_recovery_config, recovery_params, simulate};
use chrono::{Datelike, NaiveDate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let mut cfg = covariance_recovery_config();
    if let Some(years) = args.next() {
        let years: i32 = years.parse()?;
        cfg.era_to = NaiveDate::from_ymd_opt(cfg.era_from.year() + years - 1, 12, 31).unwrap();
        for m in &mut cfg.missions {
            m.active_to = cfg.era_to;
        }
    }
    let sim = simulate(&cfg, seed)?;
    let (obs, prep) = prepare(&sim.network, sim.observations, Scenario::WholeBasin);
    println!("{} observations, {} .. {}", obs.len(), cfg.era_from, cfg.era_to);

    let report = fit_covariance(&sim.network, &obs, Scenario::WholeBasin, prep)?;
    let truth = recovery_params();
    let p = report.params;
    println!("status {:?}, {} bins", report.status, report.bins_used);
    println!("{:<13} {:>9} {:>9} {:>8}", "parameter", "true", "fitted", "rel err");
    for (name, t, f) in [
        ("sigma2_river", truth.sigma2_river, p.sigma2_river),
        ("rho_river", truth.rho_river, p.rho_river),
        ("sigma2_basin", truth.sigma2_basin, p.sigma2_basin),
        ("rho_basin", truth.rho_basin, p.rho_basin),
        ("tau", truth.tau, p.tau),
    ] {
        println!("{name:<13} {t:>9.3} {f:>9.3} {:>+8.3}", (f - t) / t);
    }

    // a few flow-connected bins at short time lag against both curves
    let res = residuals(&sim.network, &obs, (1.0, 1.0))?;
    let emp = altikrig::covariance::empirical_covariance(&sim.network, &res, &Default::default())?;
    println!("\nflow-connected, time bin 0");
    for b in emp
        .non_empty()
        .filter(|b| b.kind == PairKind::FlowConnected && b.time_bin == 0)
    {
        println!(
            "  {:6.1} km  {:7} pairs  empirical {:6.3}  true {:6.3}  fitted {:6.3}",
            b.mean_river_km,
            b.pairs,
            b.mean_product,
            b.model(&truth),
            b.model(&p)
        );
    }
    Ok(())
}
