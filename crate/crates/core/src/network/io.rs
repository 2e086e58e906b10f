use std::path::Path;

use super::{EdgeRecord, NetworkError, NodeRecord, RiverNetwork};

pub const NODES_FILE: &str = "nodes.csv";
pub const EDGES_FILE: &str = "edges.csv";

fn read_table<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, NetworkError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| NetworkError::Io(format!("{}: {e}", path.display())))?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| NetworkError::Io(format!("{} line {}: {e}", path.display(), i + 2))))
        .collect()
}

fn write_table<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), NetworkError> {
    let io_err = |e: csv::Error| NetworkError::Io(format!("{}: {e}", path.display()));
    let mut wtr = csv::Writer::from_path(path).map_err(io_err)?;
    for row in rows {
        wtr.serialize(row).map_err(io_err)?;
    }
    wtr.flush()
        .map_err(|e| NetworkError::Io(format!("{}: {e}", path.display())))
}

/// Reads `nodes.csv` and `edges.csv` from a directory and builds the network.
pub fn read_network(dir: impl AsRef<Path>) -> Result<RiverNetwork, NetworkError> {
    let dir = dir.as_ref();
    let nodes: Vec<NodeRecord> = read_table(&dir.join(NODES_FILE))?;
    let edges: Vec<EdgeRecord> = read_table(&dir.join(EDGES_FILE))?;
    RiverNetwork::build(nodes, edges)
}

/// Writes the network's node and edge tables into a directory.
pub fn write_network(net: &RiverNetwork, dir: impl AsRef<Path>) -> Result<(), NetworkError> {
    let dir = dir.as_ref();
    write_table(&dir.join(NODES_FILE), net.nodes())?;
    write_table(&dir.join(EDGES_FILE), net.edges())
}
