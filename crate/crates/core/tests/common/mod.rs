#![allow(dead_code)]

use altikrig::covariance::CovarianceParams;
use altikrig::network::{EdgeRecord, NodeKind, NodeRecord, RiverNetwork, TribClass};
use altikrig::{NetworkLocation, Observation, OrbitClass};
use chrono::{Duration, NaiveDate};
use rand::Rng;

/// Random tree grown from the mouth. Each new node drains into a random
/// earlier node; sources carry a random weight and every other edge the
/// sum of its inflows.
pub fn random_network<R: Rng>(rng: &mut R, n_edges: usize) -> RiverNetwork {
    let mut pos = vec![(0.0f64, 0.0f64)];
    let mut basin = vec!["b0".to_string()];
    let mut parent = vec![usize::MAX];
    let mut river = vec![String::new()];
    let mut inflows = vec![0usize];
    let mut class = vec![TribClass::MainStem];
    for k in 1..=n_edges {
        let p = rng.random_range(0..k);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let step = rng.random_range(40.0..220.0);
        pos.push((pos[p].0 + step * angle.cos(), pos[p].1 + step * angle.sin()));
        basin.push(if rng.random_bool(0.4) {
            format!("b{k}")
        } else {
            basin[p].clone()
        });
        let (r, c) = if k == 1 {
            ("r1".to_string(), TribClass::MainStem)
        } else if inflows[p] == 0 {
            (river[p].clone(), class[p])
        } else if rng.random_bool(0.5) {
            (format!("r{k}"), TribClass::MajorTributary)
        } else {
            (format!("r{k}"), TribClass::MinorTributary)
        };
        inflows[p] += 1;
        parent.push(p);
        river.push(r);
        class.push(c);
        inflows.push(0);
    }
    let mut weight = vec![0.0; n_edges + 1];
    for k in (1..=n_edges).rev() {
        if inflows[k] == 0 {
            weight[k] = rng.random_range(0.5..2.0);
        }
        let w = weight[k];
        if parent[k] != 0 {
            weight[parent[k]] += w;
        }
    }
    let nodes = (0..=n_edges)
        .map(|k| NodeRecord {
            node_id: format!("n{k}"),
            x_km: pos[k].0,
            y_km: pos[k].1,
            kind: match (k, inflows[k]) {
                (0, _) => NodeKind::Mouth,
                (_, 0) => NodeKind::Source,
                _ => NodeKind::Confluence,
            },
            sub_basin_id: basin[k].clone(),
        })
        .collect();
    let edges = (1..=n_edges)
        .map(|k| {
            let p = parent[k];
            let d = (pos[k].0 - pos[p].0).hypot(pos[k].1 - pos[p].1);
            EdgeRecord {
                edge_id: format!("e{k}"),
                up_node: format!("n{k}"),
                down_node: format!("n{p}"),
                length_km: d * rng.random_range(1.0..1.4),
                river_id: river[k].clone(),
                trib_class: class[k],
                catchment_weight: weight[k],
            }
        })
        .collect();
    RiverNetwork::build(nodes, edges).expect("random tree is valid")
}

pub fn random_location<R: Rng>(rng: &mut R, net: &RiverNetwork) -> NetworkLocation {
    let edge = rng.random_range(0..net.edges().len());
    NetworkLocation {
        edge,
        offset_km: rng.random_range(0.0..net.edge(edge).length_km),
    }
}

pub fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 6, 1).unwrap()
}

/// `n` observations at distinct space-time points within 60 days.
pub fn random_observations<R: Rng>(rng: &mut R, net: &RiverNetwork, n: usize) -> Vec<Observation> {
    let mut out: Vec<Observation> = Vec::with_capacity(n);
    while out.len() < n {
        let location = random_location(rng, net);
        let date = base_date() + Duration::days(rng.random_range(0..60));
        if out.iter().any(|o| o.location == location && o.date == date) {
            continue;
        }
        let class = match rng.random_range(0..3) {
            0 => OrbitClass::ShortRepeat,
            1 => OrbitClass::LongRepeat,
            _ => OrbitClass::NonRepeat,
        };
        out.push(Observation {
            location,
            date,
            height_m: 10.0 + rng.random_range(-3.0..3.0) + 0.002 * net.chainage(location),
            mission: format!("m{}", rng.random_range(0..3)),
            orbit_class: class,
            track_id: format!("t{}", out.len()),
            along_track_std_m: None,
            quality_factor: rng.random_range(1.0..2.0),
        });
    }
    out
}

pub fn random_params<R: Rng>(rng: &mut R, nugget: f64) -> CovarianceParams {
    CovarianceParams {
        sigma2_river: rng.random_range(0.1..2.0),
        rho_river: rng.random_range(30.0..400.0),
        sigma2_basin: rng.random_range(0.0..1.0),
        rho_basin: rng.random_range(50.0..600.0),
        tau: rng.random_range(3.0..40.0),
        nugget,
        trib_factor_major: rng.random_range(1.0..3.0),
        trib_factor_minor: rng.random_range(1.0..5.0),
    }
}
