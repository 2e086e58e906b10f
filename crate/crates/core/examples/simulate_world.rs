//! Simulates the Mekong-like synthetic world and summarises what each
//! mission delivered. Pass an output directory to write the CSV files.
//!
//! ```text
//! cargo run --release --example simulate_world [seed] [out-dir]
//! ```

use std::collections::BTreeMap;

use altikrig::sim::{mekong_like_config, simulate, write_simulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let cfg = mekong_like_config();
    let sim = simulate(&cfg, seed)?;

    let mut per_mission: BTreeMap<&str, (usize, chrono::NaiveDate, chrono::NaiveDate)> = BTreeMap::new();
    for o in &sim.observations {
        let e = per_mission.entry(&o.mission).or_insert((0, o.date, o.date));
        e.0 += 1;
        e.1 = e.1.min(o.date);
        e.2 = e.2.max(o.date);
    }
    println!("seed {seed}: {} observations", sim.observations.len());
    for (m, (n, from, to)) in per_mission {
        println!("  {m:<10} {n:6}  {from} .. {to}");
    }
    println!(
        "{} gauges, {} truth rows, {} targets",
        sim.gauges.len(),
        sim.truth.len(),
        sim.targets.len()
    );

    if let Some(dir) = args.next() {
        write_simulation(&sim, &dir)?;
        std::fs::write(std::path::Path::new(&dir).join("config.json"), cfg.to_json())?;
        println!("wrote {dir}");
    }
    Ok(())
}
