//! Runs the observation preparation chain on simulated data: dam masking,
//! along-track and annual-repeat screening, then datum offsets against the
//! reference mission. Offsets are compared with the simulated biases.
//!
//! ```text
//! cargo run --release --example screen_and_align [seed]
//! ```

use altikrig::pipeline::{prepare, Scenario};
use altikrig::sim::{mekong_like_config, simulate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let cfg = mekong_like_config();
    let sim = simulate(&cfg, seed)?;
    let (kept, summary) = prepare(&sim.network, sim.observations, Scenario::WholeBasin);

    println!("input                  {:6}", summary.input);
    println!("upstream of dams       {:6}", summary.upstream_of_dams);
    println!("along-track outliers   {:6}", summary.along_track_outliers);
    println!("annual-repeat outliers {:6}", summary.annual_repeat_outliers);
    println!("without offset         {:6}", summary.without_offset);
    println!("kept                   {:6}", kept.len());

    let reference = summary.reference_mission.clone().unwrap_or_default();
    let ref_bias = cfg
        .missions
        .iter()
        .find(|m| m.name == reference)
        .map_or(0.0, |m| m.bias_m);
    println!("\nreference mission: {reference}");
    println!("{:<10} {:>10} {:>10}", "mission", "estimated", "simulated");
    for (mission, offset) in &summary.offsets_m {
        let bias = cfg
            .missions
            .iter()
            .find(|m| &m.name == mission)
            .map_or(f64::NAN, |m| m.bias_m);
        println!("{mission:<10} {offset:>10.3} {:>10.3}", bias - ref_bias);
    }
    Ok(())
}
