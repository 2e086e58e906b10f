//! Builds the Mekong-like reach tree and queries its geometry: chainage,
//! river distance, tail-up flow weights, sub-basin distance and dam masking.
//!
//! ```text
//! cargo run --example network_tour [out-dir]
//! ```

use altikrig::network::{write_network, RiverNetwork};
use altikrig::sim::mekong_like_network;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (nodes, edges) = mekong_like_network();
    let net = RiverNetwork::build(nodes, edges)?;
    println!("{} nodes, {} edges", net.nodes().len(), net.edges().len());
    for (river, edges) in net.rivers() {
        let (lo, hi) = net.river_chainage_range(river).unwrap();
        println!("  {river:<10} {} edges, chainage {lo:7.1}..{hi:7.1} km", edges.len());
    }

    let kratie = net.location("main-7", 100.0)?;
    let pakse = net.location("main-5", 125.0)?;
    let ubon = net.location("mun-2", 125.0)?;
    let sekong = net.location("sekong-1", 200.0)?;
    for (name, a, b) in [
        ("pakse -> kratie", pakse, kratie),
        ("ubon -> kratie", ubon, kratie),
        ("ubon <> sekong", ubon, sekong),
    ] {
        let river = net
            .river_distance(a, b)
            .km()
            .map_or("unconnected".to_string(), |d| format!("{d:.1} km"));
        let weight = net.flow_weight(a, b).map_or("-".to_string(), |w| format!("{w:.3}"));
        println!(
            "{name:<16} river {river:<12} flow weight {weight:<6} basin {:.1} km",
            net.basin_distance(a, b)
        );
    }

    let dammed = net.location("ngum-1", 50.0)?;
    println!(
        "ngum-1 @ 50 km reaches the mouth freely: {}; kratie: {}",
        net.reaches_mouth_freely(dammed),
        net.reaches_mouth_freely(kratie)
    );

    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir)?;
        write_network(&net, &dir)?;
        println!("wrote nodes.csv and edges.csv to {dir}");
    }
    Ok(())
}
