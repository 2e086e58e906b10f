use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{GaugeSeries, IngestError, Observation, OrbitClass};
use crate::network::RiverNetwork;

pub const OBSERVATION_HEADER: [&str; 9] = [
    "mission",
    "orbit_class",
    "track_id",
    "edge_id",
    "offset_km",
    "date",
    "height_m",
    "along_track_std_m",
    "quality_factor",
];

pub const GAUGE_HEADER: [&str; 5] = ["gauge_id", "edge_id", "offset_km", "date", "height_m"];

#[derive(Debug, Serialize, Deserialize)]
struct ObservationRow {
    mission: String,
    orbit_class: OrbitClass,
    track_id: String,
    edge_id: String,
    offset_km: f64,
    date: NaiveDate,
    height_m: f64,
    along_track_std_m: Option<f64>,
    quality_factor: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GaugeRow {
    gauge_id: String,
    edge_id: String,
    offset_km: f64,
    date: NaiveDate,
    height_m: f64,
}

/// A row that parsed but failed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedObservations {
    pub observations: Vec<Observation>,
    pub rejected: Vec<RejectedRow>,
}

fn open(path: &Path, expected: &[&str]) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let p = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| IngestError::Io {
        path: p.clone(),
        message: e.to_string(),
    })?;
    let headers = rdr.headers().map_err(|e| IngestError::Io {
        path: p.clone(),
        message: e.to_string(),
    })?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(IngestError::Header {
            path: p,
            expected: expected.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(rdr)
}

fn row_error(path: &Path, err: csv::Error) -> IngestError {
    let line = err.position().map_or(0, |p| p.line());
    IngestError::Row {
        path: path.display().to_string(),
        line,
        message: err.to_string(),
    }
}

/// Loads `observations.csv`. Rows that parse but violate an observation
/// invariant (non-finite height, quality factor below one, unknown edge,
/// offset outside the edge, date outside `era`) are reported, not loaded.
pub fn load_observations(
    path: impl AsRef<Path>,
    net: &RiverNetwork,
    era: Option<(NaiveDate, NaiveDate)>,
) -> Result<LoadedObservations, IngestError> {
    let path = path.as_ref();
    let mut rdr = open(path, &OBSERVATION_HEADER)?;
    let mut out = LoadedObservations::default();
    for result in rdr.deserialize::<ObservationRow>() {
        let row = result.map_err(|e| row_error(path, e))?;
        // header is line 1
        let line = out.observations.len() as u64 + out.rejected.len() as u64 + 2;
        let reject = |reason: String| RejectedRow { line, reason };

        if !row.height_m.is_finite() {
            out.rejected.push(reject(format!("non-finite height {}", row.height_m)));
            continue;
        }
        if !(row.quality_factor >= 1.0 && row.quality_factor.is_finite()) {
            out.rejected
                .push(reject(format!("quality factor {} below 1", row.quality_factor)));
            continue;
        }
        if let Some(s) = row.along_track_std_m {
            if !(s.is_finite() && s >= 0.0) {
                out.rejected.push(reject(format!("invalid along-track std {s}")));
                continue;
            }
        }
        if let Some((from, to)) = era {
            if row.date < from || row.date > to {
                out.rejected
                    .push(reject(format!("date {} outside era {from}..{to}", row.date)));
                continue;
            }
        }
        let location = match net.location(&row.edge_id, row.offset_km) {
            Ok(l) => l,
            Err(e) => {
                out.rejected.push(reject(e.to_string()));
                continue;
            }
        };
        out.observations.push(Observation {
            location,
            date: row.date,
            height_m: row.height_m,
            mission: row.mission,
            orbit_class: row.orbit_class,
            track_id: row.track_id,
            along_track_std_m: row.along_track_std_m,
            quality_factor: row.quality_factor,
        });
    }
    Ok(out)
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, IngestError> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| IngestError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl Iterator<Item = T>) -> Result<(), IngestError> {
    let io_err = |e: String| IngestError::Io {
        path: path.display().to_string(),
        message: e,
    };
    let mut wtr = writer(path)?;
    // explicit header so that an empty table still carries one
    wtr.write_record(header).map_err(|e| io_err(e.to_string()))?;
    for row in rows {
        wtr.serialize(row).map_err(|e| io_err(e.to_string()))?;
    }
    wtr.flush().map_err(|e| io_err(e.to_string()))
}

pub fn write_observations(
    path: impl AsRef<Path>,
    net: &RiverNetwork,
    observations: &[Observation],
) -> Result<(), IngestError> {
    let rows = observations.iter().map(|o| ObservationRow {
        mission: o.mission.clone(),
        orbit_class: o.orbit_class,
        track_id: o.track_id.clone(),
        edge_id: net.edge(o.location.edge).edge_id.clone(),
        offset_km: o.location.offset_km,
        date: o.date,
        height_m: o.height_m,
        along_track_std_m: o.along_track_std_m,
        quality_factor: o.quality_factor,
    });
    write_rows(path.as_ref(), &OBSERVATION_HEADER, rows)
}

/// Loads `gauges.csv` into one series per gauge id, ordered by id.
pub fn load_gauges(path: impl AsRef<Path>, net: &RiverNetwork) -> Result<Vec<GaugeSeries>, IngestError> {
    let path = path.as_ref();
    let mut rdr = open(path, &GAUGE_HEADER)?;
    let mut groups: BTreeMap<String, (crate::NetworkLocation, Vec<(NaiveDate, f64)>)> = BTreeMap::new();
    for (i, result) in rdr.deserialize::<GaugeRow>().enumerate() {
        let row = result.map_err(|e| row_error(path, e))?;
        let location = net
            .location(&row.edge_id, row.offset_km)
            .map_err(|e| IngestError::Row {
                path: path.display().to_string(),
                line: i as u64 + 2,
                message: e.to_string(),
            })?;
        groups
            .entry(row.gauge_id)
            .or_insert_with(|| (location, Vec::new()))
            .1
            .push((row.date, row.height_m));
    }
    groups
        .into_iter()
        .map(|(id, (loc, points))| GaugeSeries::new(id, loc, points))
        .collect()
}

pub fn write_gauges(path: impl AsRef<Path>, net: &RiverNetwork, gauges: &[GaugeSeries]) -> Result<(), IngestError> {
    let rows = gauges.iter().flat_map(|g| {
        let edge_id = net.edge(g.location.edge).edge_id.clone();
        g.iter().map(move |(date, h)| GaugeRow {
            gauge_id: g.gauge_id.clone(),
            edge_id: edge_id.clone(),
            offset_km: g.location.offset_km,
            date,
            height_m: h,
        })
    });
    write_rows(path.as_ref(), &GAUGE_HEADER, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{EdgeRecord, NodeKind, NodeRecord, TribClass};

    fn net() -> RiverNetwork {
        RiverNetwork::build(
            vec![
                NodeRecord {
                    node_id: "s".into(),
                    x_km: 0.0,
                    y_km: 10.0,
                    kind: NodeKind::Source,
                    sub_basin_id: "b".into(),
                },
                NodeRecord {
                    node_id: "m".into(),
                    x_km: 0.0,
                    y_km: 0.0,
                    kind: NodeKind::Mouth,
                    sub_basin_id: "b".into(),
                },
            ],
            vec![EdgeRecord {
                edge_id: "e".into(),
                up_node: "s".into(),
                down_node: "m".into(),
                length_km: 10.0,
                river_id: "r".into(),
                trib_class: TribClass::MainStem,
                catchment_weight: 1.0,
            }],
        )
        .unwrap()
    }

    const HEADER: &str =
        "mission,orbit_class,track_id,edge_id,offset_km,date,height_m,along_track_std_m,quality_factor\n";

    #[test]
    fn empty_file_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.csv");
        std::fs::write(&p, HEADER).unwrap();
        let loaded = load_observations(&p, &net(), None).unwrap();
        assert!(loaded.observations.is_empty());
        assert!(loaded.rejected.is_empty());
    }

    #[test]
    fn non_finite_height_rejected_others_kept() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.csv");
        let body = format!(
            "{HEADER}env,short-repeat,t1,e,1.5,2010-06-01,12.5,0.2,1\n\
             env,short-repeat,t1,e,1.5,2010-07-06,NaN,0.2,1\n\
             cs2,long-repeat,t9,e,11.0,2010-07-06,3.0,,1\n\
             cs2,non-repeat,t9,e,2.0,2010-07-06,3.0,,1.5\n"
        );
        std::fs::write(&p, body).unwrap();
        let loaded = load_observations(&p, &net(), None).unwrap();
        assert_eq!(loaded.observations.len(), 2);
        assert_eq!(loaded.rejected.iter().map(|r| r.line).collect::<Vec<_>>(), vec![3, 4]);
        assert_eq!(loaded.observations[1].along_track_std_m, None);
        assert_eq!(loaded.observations[1].quality_factor, 1.5);
    }

    #[test]
    fn malformed_header_and_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.csv");
        std::fs::write(&p, "mission,track\n").unwrap();
        assert!(matches!(
            load_observations(&p, &net(), None),
            Err(IngestError::Header { .. })
        ));

        std::fs::write(&p, format!("{HEADER}env,short-repeat,t1,e,1.5,2010-06-01,abc,0.2,1\n")).unwrap();
        let err = load_observations(&p, &net(), None).unwrap_err();
        assert!(matches!(err, IngestError::Row { line: 2, .. }), "{err}");
    }

    #[test]
    fn era_filter() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.csv");
        std::fs::write(&p, format!("{HEADER}env,short-repeat,t1,e,1.5,2001-06-01,1,0.2,1\n")).unwrap();
        let era = (
            NaiveDate::from_ymd_opt(2008, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2016, 12, 31).unwrap(),
        );
        let loaded = load_observations(&p, &net(), Some(era)).unwrap();
        assert_eq!(loaded.rejected.len(), 1);
    }

    #[test]
    fn gauges_group_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        std::fs::write(
            &p,
            "gauge_id,edge_id,offset_km,date,height_m\ng2,e,5,2010-06-02,2\ng1,e,1,2010-06-02,1.5\ng1,e,1,2010-06-01,1\n",
        )
        .unwrap();
        let gauges = load_gauges(&p, &net()).unwrap();
        assert_eq!(gauges.len(), 2);
        assert_eq!(gauges[0].gauge_id, "g1");
        assert_eq!(gauges[0].heights_m, vec![1.0, 1.5]);

        std::fs::write(
            &p,
            "gauge_id,edge_id,offset_km,date,height_m\ng,e,5,2010-06-02,2\ng,e,5,2010-06-02,3\n",
        )
        .unwrap();
        assert!(matches!(load_gauges(&p, &net()), Err(IngestError::GaugeOrder { .. })));
    }
}
