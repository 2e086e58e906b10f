//! River network topology: a directed reach tree draining to a single mouth.
//!
//! Locations are addressed as an edge plus an offset (km) measured from the
//! edge's upstream node. Chainage is the along-river distance to the mouth.
//! Dam nodes sever flow connectivity without removing topology, so one
//! network file serves both dammed and undammed analyses.

mod io;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{read_network, write_network};

/// Tolerance used when checking catchment-weight additivity at confluences.
const ADDITIVITY_RTOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown node `{node}`")]
    UnknownNode { edge: String, node: String },
    #[error("unknown edge id `{0}`")]
    UnknownEdge(String),
    #[error("edge `{edge}` has non-positive or non-finite length {length}")]
    InvalidLength { edge: String, length: f64 },
    #[error("edge `{edge}` has negative or non-finite catchment weight {weight}")]
    InvalidWeight { edge: String, weight: f64 },
    #[error("node `{0}` has more than one downstream edge")]
    MultipleDownstream(String),
    #[error("network has {0} mouths (nodes without a downstream edge), expected exactly one")]
    MouthCount(usize),
    #[error("cycle detected through node `{0}`")]
    Cycle(String),
    #[error("weight non-additive at node `{node}`: downstream {downstream}, sum of upstream {upstream}")]
    NonAdditiveWeight {
        node: String,
        downstream: f64,
        upstream: f64,
    },
    #[error("offset {offset} km outside edge `{edge}` of length {length} km")]
    OffsetOutOfRange { edge: String, offset: f64, length: f64 },
    #[error("network file error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Source,
    Confluence,
    Mouth,
    Dam,
    GaugeSite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TribClass {
    MainStem,
    MajorTributary,
    MinorTributary,
}

/// One row of `nodes.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: String,
    pub x_km: f64,
    pub y_km: f64,
    pub kind: NodeKind,
    pub sub_basin_id: String,
}

/// One row of `edges.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub edge_id: String,
    pub up_node: String,
    pub down_node: String,
    pub length_km: f64,
    pub river_id: String,
    pub trib_class: TribClass,
    pub catchment_weight: f64,
}

/// A point on the network: edge index plus offset (km) from the edge's upstream node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkLocation {
    pub edge: usize,
    pub offset_km: f64,
}

/// Result of an along-river distance query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiverDistance {
    Connected(f64),
    Unconnected,
}

impl RiverDistance {
    pub fn km(self) -> Option<f64> {
        match self {
            RiverDistance::Connected(d) => Some(d),
            RiverDistance::Unconnected => None,
        }
    }
}

/// Validated, immutable river network.
#[derive(Debug, Clone)]
pub struct RiverNetwork {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    node_index: HashMap<String, usize>,
    edge_index: HashMap<String, usize>,
    edge_up: Vec<usize>,
    edge_down: Vec<usize>,
    mouth: usize,
    node_dist: Vec<f64>,
    // number of dam nodes on the path from the node to the mouth, node included
    node_dams: Vec<u32>,
    // Euler tour of the edge tree rooted at the mouth; an edge is downstream of
    // another iff its interval encloses the other's
    edge_tin: Vec<u32>,
    edge_tout: Vec<u32>,
    edge_basin: Vec<usize>,
    basin_ids: Vec<String>,
    basin_centroids: Vec<(f64, f64)>,
}

impl RiverNetwork {
    /// Validates node and edge records and precomputes chainage, dam counts and
    /// sub-basin centroids.
    pub fn build(nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Result<Self, NetworkError> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.node_id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateNode(n.node_id.clone()));
            }
        }

        let mut edge_index = HashMap::with_capacity(edges.len());
        let mut edge_up = Vec::with_capacity(edges.len());
        let mut edge_down = Vec::with_capacity(edges.len());
        let mut down_edge_of: Vec<Option<usize>> = vec![None; nodes.len()];
        let mut inflows: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];

        for (i, e) in edges.iter().enumerate() {
            if edge_index.insert(e.edge_id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateEdge(e.edge_id.clone()));
            }
            let lookup = |id: &str| {
                node_index.get(id).copied().ok_or_else(|| NetworkError::UnknownNode {
                    edge: e.edge_id.clone(),
                    node: id.to_string(),
                })
            };
            let up = lookup(&e.up_node)?;
            let down = lookup(&e.down_node)?;
            if !(e.length_km.is_finite() && e.length_km > 0.0) {
                return Err(NetworkError::InvalidLength {
                    edge: e.edge_id.clone(),
                    length: e.length_km,
                });
            }
            if !(e.catchment_weight.is_finite() && e.catchment_weight >= 0.0) {
                return Err(NetworkError::InvalidWeight {
                    edge: e.edge_id.clone(),
                    weight: e.catchment_weight,
                });
            }
            if down_edge_of[up].replace(i).is_some() {
                return Err(NetworkError::MultipleDownstream(e.up_node.clone()));
            }
            inflows[down].push(i);
            edge_up.push(up);
            edge_down.push(down);
        }

        let mouths: Vec<usize> = (0..nodes.len()).filter(|&n| down_edge_of[n].is_none()).collect();
        if mouths.len() != 1 {
            return Err(NetworkError::MouthCount(mouths.len()));
        }
        let mouth = mouths[0];

        // distance to mouth by walking down; every node has at most one
        // downstream edge so a walk longer than the node count is a cycle
        let mut node_dist = vec![f64::NAN; nodes.len()];
        node_dist[mouth] = 0.0;
        for start in 0..nodes.len() {
            if !node_dist[start].is_nan() {
                continue;
            }
            let mut path = Vec::new();
            let mut cur = start;
            while node_dist[cur].is_nan() {
                if path.len() > nodes.len() {
                    return Err(NetworkError::Cycle(nodes[start].node_id.clone()));
                }
                path.push(cur);
                let e = down_edge_of[cur].expect("only the mouth lacks a downstream edge");
                cur = edge_down[e];
            }
            for &n in path.iter().rev() {
                let e = down_edge_of[n].unwrap();
                node_dist[n] = node_dist[edge_down[e]] + edges[e].length_km;
            }
        }

        for (n, ins) in inflows.iter().enumerate() {
            let Some(out) = down_edge_of[n] else { continue };
            if ins.is_empty() {
                continue;
            }
            let upstream: f64 = ins.iter().map(|&e| edges[e].catchment_weight).sum();
            let downstream = edges[out].catchment_weight;
            if (downstream - upstream).abs() > ADDITIVITY_RTOL * downstream.abs().max(1.0) {
                return Err(NetworkError::NonAdditiveWeight {
                    node: nodes[n].node_id.clone(),
                    downstream,
                    upstream,
                });
            }
        }

        // dam counts, processed in order of increasing distance to the mouth
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&a, &b| node_dist[a].total_cmp(&node_dist[b]));
        let mut node_dams = vec![0u32; nodes.len()];
        for &n in &order {
            let below = down_edge_of[n].map_or(0, |e| node_dams[edge_down[e]]);
            node_dams[n] = below + u32::from(nodes[n].kind == NodeKind::Dam);
        }

        // Euler tour over edges, children are the inflows at the upstream node
        let mut edge_tin = vec![0u32; edges.len()];
        let mut edge_tout = vec![0u32; edges.len()];
        let mut clock = 0u32;
        let mut stack: Vec<(usize, bool)> = inflows[mouth].iter().rev().map(|&e| (e, false)).collect();
        while let Some((e, done)) = stack.pop() {
            if done {
                edge_tout[e] = clock;
                clock += 1;
                continue;
            }
            edge_tin[e] = clock;
            clock += 1;
            stack.push((e, true));
            for &child in inflows[edge_up[e]].iter().rev() {
                stack.push((child, false));
            }
        }

        let node_weight = |n: usize| match down_edge_of[n] {
            Some(e) => edges[e].catchment_weight,
            None => inflows[n].iter().map(|&e| edges[e].catchment_weight).sum(),
        };
        let mut basin_acc: BTreeMap<&str, (f64, f64, f64, f64, f64, usize)> = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            let w = node_weight(i);
            let acc = basin_acc.entry(n.sub_basin_id.as_str()).or_default();
            acc.0 += w * n.x_km;
            acc.1 += w * n.y_km;
            acc.2 += w;
            acc.3 += n.x_km;
            acc.4 += n.y_km;
            acc.5 += 1;
        }
        let basin_ids: Vec<String> = basin_acc.keys().map(|s| s.to_string()).collect();
        let basin_centroids: Vec<(f64, f64)> = basin_acc
            .values()
            .map(|&(wx, wy, w, x, y, count)| {
                if w > 0.0 {
                    (wx / w, wy / w)
                } else {
                    (x / count as f64, y / count as f64)
                }
            })
            .collect();
        let edge_basin = edge_up
            .iter()
            .map(|&up| {
                basin_ids
                    .binary_search(&nodes[up].sub_basin_id)
                    .expect("every node sub-basin is registered")
            })
            .collect();

        Ok(Self {
            nodes,
            edges,
            node_index,
            edge_index,
            edge_up,
            edge_down,
            mouth,
            node_dist,
            node_dams,
            edge_tin,
            edge_tout,
            edge_basin,
            basin_ids,
            basin_centroids,
        })
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn edge(&self, edge: usize) -> &EdgeRecord {
        &self.edges[edge]
    }

    pub fn edge_by_id(&self, id: &str) -> Option<usize> {
        self.edge_index.get(id).copied()
    }

    pub fn node_by_id(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn mouth(&self) -> usize {
        self.mouth
    }

    pub fn edge_up_node(&self, edge: usize) -> usize {
        self.edge_up[edge]
    }

    pub fn edge_down_node(&self, edge: usize) -> usize {
        self.edge_down[edge]
    }

    /// Along-river distance from the node to the mouth (km).
    pub fn distance_to_mouth(&self, node: usize) -> f64 {
        self.node_dist[node]
    }

    /// Builds a validated location from an edge id and offset.
    pub fn location(&self, edge_id: &str, offset_km: f64) -> Result<NetworkLocation, NetworkError> {
        let edge = self
            .edge_by_id(edge_id)
            .ok_or_else(|| NetworkError::UnknownEdge(edge_id.to_string()))?;
        self.check_location(NetworkLocation { edge, offset_km })
    }

    pub fn check_location(&self, loc: NetworkLocation) -> Result<NetworkLocation, NetworkError> {
        let e = self
            .edges
            .get(loc.edge)
            .ok_or_else(|| NetworkError::UnknownEdge(format!("#{}", loc.edge)))?;
        if !(loc.offset_km.is_finite() && loc.offset_km >= 0.0 && loc.offset_km <= e.length_km) {
            return Err(NetworkError::OffsetOutOfRange {
                edge: e.edge_id.clone(),
                offset: loc.offset_km,
                length: e.length_km,
            });
        }
        Ok(loc)
    }

    /// Distance to the mouth of a location (km).
    pub fn chainage(&self, loc: NetworkLocation) -> f64 {
        let e = &self.edges[loc.edge];
        self.node_dist[self.edge_down[loc.edge]] + (e.length_km - loc.offset_km)
    }

    pub fn trib_class(&self, loc: NetworkLocation) -> TribClass {
        self.edges[loc.edge].trib_class
    }

    pub fn river_id(&self, loc: NetworkLocation) -> &str {
        &self.edges[loc.edge].river_id
    }

    /// True if `lower` lies on the downstream path of `upper`, dams ignored.
    fn is_downstream_edge(&self, upper: usize, lower: usize) -> bool {
        self.edge_tin[lower] <= self.edge_tin[upper] && self.edge_tout[upper] <= self.edge_tout[lower]
    }

    /// Orders a pair as (upstream, downstream) when one lies on the other's
    /// flow path, ignoring dams.
    fn flow_order(&self, a: NetworkLocation, b: NetworkLocation) -> Option<(NetworkLocation, NetworkLocation)> {
        if a.edge == b.edge {
            return Some(if a.offset_km <= b.offset_km { (a, b) } else { (b, a) });
        }
        if self.is_downstream_edge(a.edge, b.edge) {
            Some((a, b))
        } else if self.is_downstream_edge(b.edge, a.edge) {
            Some((b, a))
        } else {
            None
        }
    }

    fn dams_between(&self, upper: NetworkLocation, lower: NetworkLocation) -> u32 {
        if upper.edge == lower.edge {
            0
        } else {
            self.node_dams[self.edge_down[upper.edge]] - self.node_dams[self.edge_down[lower.edge]]
        }
    }

    /// Flow-connected distance. Connected means one location lies on the
    /// other's downstream path with no dam in between.
    pub fn river_distance(&self, a: NetworkLocation, b: NetworkLocation) -> RiverDistance {
        match self.flow_order(a, b) {
            Some((up, low)) if self.dams_between(up, low) == 0 => {
                RiverDistance::Connected((self.chainage(up) - self.chainage(low)).abs())
            }
            _ => RiverDistance::Unconnected,
        }
    }

    /// Distance from `from` down to `to` if `to` is on the downstream path of
    /// `from` (or equal to it). Dams are ignored: water passes them.
    pub fn downstream_distance(&self, from: NetworkLocation, to: NetworkLocation) -> Option<f64> {
        match self.flow_order(from, to) {
            Some((up, _)) if up == from => Some(self.chainage(from) - self.chainage(to)),
            _ => None,
        }
    }

    /// Tail-up weight `sqrt(W_up / W_down)` for a flow-connected pair, using the
    /// catchment weights of the edges holding the upstream and downstream
    /// location. Returns `None` for pairs that are not flow-connected.
    pub fn flow_weight(&self, a: NetworkLocation, b: NetworkLocation) -> Option<f64> {
        let (up, low) = self.flow_order(a, b)?;
        if self.dams_between(up, low) > 0 {
            return None;
        }
        if up.edge == low.edge {
            return Some(1.0);
        }
        let w_up = self.edges[up.edge].catchment_weight;
        let w_down = self.edges[low.edge].catchment_weight;
        Some(if w_down > 0.0 { (w_up / w_down).sqrt() } else { 0.0 })
    }

    pub fn sub_basin(&self, loc: NetworkLocation) -> &str {
        &self.basin_ids[self.edge_basin[loc.edge]]
    }

    /// Catchment-weighted centroid of a sub-basin's nodes.
    pub fn sub_basin_centroid(&self, sub_basin_id: &str) -> Option<(f64, f64)> {
        self.basin_ids
            .binary_search_by(|b| b.as_str().cmp(sub_basin_id))
            .ok()
            .map(|i| self.basin_centroids[i])
    }

    /// Euclidean distance between the centroids of the sub-basins holding
    /// `a` and `b`; zero within one sub-basin.
    pub fn basin_distance(&self, a: NetworkLocation, b: NetworkLocation) -> f64 {
        let (ba, bb) = (self.edge_basin[a.edge], self.edge_basin[b.edge]);
        if ba == bb {
            return 0.0;
        }
        let (xa, ya) = self.basin_centroids[ba];
        let (xb, yb) = self.basin_centroids[bb];
        (xa - xb).hypot(ya - yb)
    }

    /// True if the path from the location to the mouth crosses no dam.
    pub fn reaches_mouth_freely(&self, loc: NetworkLocation) -> bool {
        self.node_dams[self.edge_down[loc.edge]] == 0
    }

    /// Drops every item whose location lies upstream of a dam.
    pub fn mask_upstream_of_dams<T, F>(&self, items: Vec<T>, location: F) -> Vec<T>
    where
        F: Fn(&T) -> NetworkLocation,
    {
        items
            .into_iter()
            .filter(|item| self.reaches_mouth_freely(location(item)))
            .collect()
    }

    /// Edges grouped by river id, in river-id order.
    pub fn rivers(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut out: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            out.entry(e.river_id.as_str()).or_default().push(i);
        }
        out
    }

    /// Chainage interval `[min, max]` covered by a river's edges.
    pub fn river_chainage_range(&self, river_id: &str) -> Option<(f64, f64)> {
        let mut range: Option<(f64, f64)> = None;
        for (i, e) in self.edges.iter().enumerate().filter(|(_, e)| e.river_id == river_id) {
            let lo = self.node_dist[self.edge_down[i]];
            let hi = lo + e.length_km;
            range = Some(match range {
                None => (lo, hi),
                Some((a, b)) => (a.min(lo), b.max(hi)),
            });
        }
        range
    }

    /// Location on a river at a given chainage, if the river covers it.
    pub fn river_location(&self, river_id: &str, chainage: f64) -> Option<NetworkLocation> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.river_id == river_id)
            .find_map(|(i, e)| {
                let lo = self.node_dist[self.edge_down[i]];
                (chainage >= lo && chainage <= lo + e.length_km).then(|| NetworkLocation {
                    edge: i,
                    offset_km: (lo + e.length_km - chainage).clamp(0.0, e.length_km),
                })
            })
    }
}
