//! Versioned on-disk snapshots of street graphs and prepared transit lines,
//! so ingestion and timetable estimation run once per region.
//!
//! Graph layout (little endian): magic `ACCGRAPH`, format version `u32`,
//! profile as length-prefixed JSON, node count `u64` then `(lat f64, lon f64,
//! osm_id i64)` per node, edge count `u64` then `(from u32, to u32,
//! length_m f64, travel_time_s f64)` per edge.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::GeoPoint;
use crate::profile::ModeProfile;
use crate::routing::{Edge, RoutingError, StreetGraph};
use crate::transit::BusLine;

pub const GRAPH_MAGIC: &[u8; 8] = b"ACCGRAPH";
pub const GRAPH_FORMAT_VERSION: u32 = 1;
pub const TRANSIT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("not a graph cache (bad magic header)")]
    Magic,
    #[error("graph cache format version {found}, expected {expected}; re-run ingest-osm")]
    GraphVersion { found: u32, expected: u32 },
    #[error("transit cache format version {found}, expected {expected}; re-run prepare-transit")]
    TransitVersion { found: u32, expected: u32 },
    #[error("corrupt cache: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Graph(#[from] RoutingError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_graph<W: Write>(mut w: W, g: &StreetGraph) -> Result<(), CacheError> {
    w.write_all(GRAPH_MAGIC)?;
    w.write_u32::<LittleEndian>(GRAPH_FORMAT_VERSION)?;
    let profile = serde_json::to_vec(g.profile())?;
    w.write_u64::<LittleEndian>(profile.len() as u64)?;
    w.write_all(&profile)?;
    w.write_u64::<LittleEndian>(g.node_count() as u64)?;
    for (p, id) in g.nodes().iter().zip(g.osm_ids()) {
        w.write_f64::<LittleEndian>(p.lat())?;
        w.write_f64::<LittleEndian>(p.lon())?;
        w.write_i64::<LittleEndian>(*id)?;
    }
    w.write_u64::<LittleEndian>(g.edges().len() as u64)?;
    for e in g.edges() {
        w.write_u32::<LittleEndian>(e.from)?;
        w.write_u32::<LittleEndian>(e.to)?;
        w.write_f64::<LittleEndian>(e.length_m)?;
        w.write_f64::<LittleEndian>(e.travel_time_s)?;
    }
    w.flush()?;
    Ok(())
}

fn count<R: Read>(r: &mut R, what: &str, limit: u64) -> Result<usize, CacheError> {
    let n = r.read_u64::<LittleEndian>()?;
    if n > limit {
        return Err(CacheError::Corrupt(format!("{what} count {n} is implausible")));
    }
    Ok(n as usize)
}

pub fn read_graph<R: Read>(mut r: R) -> Result<StreetGraph, CacheError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != GRAPH_MAGIC {
        return Err(CacheError::Magic);
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != GRAPH_FORMAT_VERSION {
        return Err(CacheError::GraphVersion {
            found: version,
            expected: GRAPH_FORMAT_VERSION,
        });
    }
    let len = count(&mut r, "profile byte", 1 << 20)?;
    let mut profile = vec![0u8; len];
    r.read_exact(&mut profile)?;
    let profile: ModeProfile = serde_json::from_slice(&profile)?;
    let n = count(&mut r, "node", u32::MAX as u64)?;
    let mut nodes = Vec::with_capacity(n.min(1 << 24));
    let mut osm_ids = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let lat = r.read_f64::<LittleEndian>()?;
        let lon = r.read_f64::<LittleEndian>()?;
        nodes.push(GeoPoint::new(lat, lon).map_err(|e| CacheError::Corrupt(e.to_string()))?);
        osm_ids.push(r.read_i64::<LittleEndian>()?);
    }
    let m = count(&mut r, "edge", u32::MAX as u64 * 16)?;
    let mut edges = Vec::with_capacity(m.min(1 << 24));
    for _ in 0..m {
        edges.push(Edge {
            from: r.read_u32::<LittleEndian>()?,
            to: r.read_u32::<LittleEndian>()?,
            length_m: r.read_f64::<LittleEndian>()?,
            travel_time_s: r.read_f64::<LittleEndian>()?,
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(CacheError::Corrupt("trailing bytes after edge table".into()));
    }
    Ok(StreetGraph::new(profile, nodes, osm_ids, edges)?)
}

/// A line dropped during preparation and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedLine {
    pub line_id: String,
    pub reason: String,
}

/// Timed bus lines ready for indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitCache {
    pub format_version: u32,
    pub multiplier: f64,
    pub lines: Vec<BusLine>,
    pub excluded: Vec<ExcludedLine>,
}

impl TransitCache {
    pub fn new(multiplier: f64, lines: Vec<BusLine>, excluded: Vec<ExcludedLine>) -> Self {
        TransitCache {
            format_version: TRANSIT_FORMAT_VERSION,
            multiplier,
            lines,
            excluded,
        }
    }
}

pub fn write_transit<W: Write>(mut w: W, cache: &TransitCache) -> Result<(), CacheError> {
    serde_json::to_writer_pretty(&mut w, cache)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_transit<R: Read>(r: R) -> Result<TransitCache, CacheError> {
    let value: serde_json::Value = serde_json::from_reader(r)?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| CacheError::Corrupt("transit cache has no format_version".into()))?;
    if found != TRANSIT_FORMAT_VERSION as u64 {
        return Err(CacheError::TransitVersion {
            found: found as u32,
            expected: TRANSIT_FORMAT_VERSION,
        });
    }
    Ok(serde_json::from_value(value)?)
}
