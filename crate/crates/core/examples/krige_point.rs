//! One universal-kriging prediction at a gauge, with its neighbourhood,
//! weights, variance and the unbiasedness check, against the simulated truth.
//!
//! ```text
//! cargo run --release --example krige_point [yyyy-mm-dd] [gauge]
//! ```

use altikrig::kriging::{anchored_trend, predict, NeighborhoodSpec};
use altikrig::pipeline::{fit_covariance, prepare, Scenario};
use altikrig::sim::{mekong_like_config, simulate};
use chrono::NaiveDate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let date: NaiveDate = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(NaiveDate::from_ymd_opt(2011, 9, 15).unwrap());
    let gauge = args.next().unwrap_or_else(|| "kratie".into());

    let cfg = mekong_like_config();
    let sim = simulate(&cfg, 1)?;
    let net = &sim.network;
    let target = sim
        .targets
        .iter()
        .find(|t| t.target_id == gauge)
        .ok_or("unknown gauge")?;
    let s0 = net.location(&target.edge_id, target.offset_km)?;

    let (obs, prep) = prepare(net, sim.observations.clone(), Scenario::WholeBasin);
    let params = fit_covariance(net, &obs, Scenario::WholeBasin, prep)?.params;
    let basis = altikrig::trend::build_basis(net, altikrig::trend::DEFAULT_KNOT_SPACING_KM)?;
    let trend = anchored_trend(net, &basis, &obs)?;
    let p = predict(net, &trend, &params, &obs, s0, date, &NeighborhoodSpec::default())?;

    let truth = sim
        .truth
        .iter()
        .find(|r| r.edge_id == target.edge_id && r.offset_km == target.offset_km && r.date == date)
        .map(|r| r.height_m);
    println!("{gauge} on {date}");
    println!("  predicted  {:.3} m +- {:.3}", p.height_m, p.sigma_m());
    if let Some(t) = truth {
        println!("  truth      {t:.3} m (error {:+.3})", p.height_m - t);
    }
    println!("  {} observations, condition {:.2e}", p.n(), p.condition);
    println!("  unbiasedness residual {:.2e}", p.unbiasedness_residual);
    println!("  trend columns held fixed: {}", p.fixed_columns.len());
    println!("  weights sum {:.6}", p.weights.iter().sum::<f64>());

    let mut heaviest: Vec<(usize, f64)> = p.used.iter().copied().zip(p.weights.iter().copied()).collect();
    heaviest.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    println!("  largest weights:");
    for (i, w) in heaviest.into_iter().take(5) {
        let o = &obs[i];
        println!(
            "    {w:+.3}  {:<10} {}  {} @ {:.1} km  {:.2} m",
            o.mission,
            o.date,
            net.edge(o.location.edge).edge_id,
            o.location.offset_km,
            o.height_m
        );
    }
    Ok(())
}
