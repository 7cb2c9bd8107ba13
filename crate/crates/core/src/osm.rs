//! OSM XML ingestion and per-mode street graph extraction.
//!
//! Extraction merges chains of degree-2 nodes into single edges. A node is
//! kept in the graph when it ends a way, is used by more than one way (or
//! twice by the same way), or splits a closed way in two. Everything else is
//! interior to exactly one way and is folded into the surrounding edge.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::Serialize;
use thiserror::Error;

use crate::geodesy::{haversine_m, GeoError, GeoPoint};
use crate::profile::{Direction, ModeProfile};
use crate::routing::{Edge, NodeIndex, RoutingError, StreetGraph};

/// Distinct nodes at identical coordinates still get a strictly positive
/// segment length.
const MIN_SEGMENT_M: f64 = 0.01;

#[derive(Debug, Error)]
pub enum OsmError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed XML at line {line}: {message}")]
    Xml { line: usize, message: String },
    #[error("line {line}: element <{element}> is missing attribute '{attribute}'")]
    MissingAttribute {
        line: usize,
        element: &'static str,
        attribute: &'static str,
    },
    #[error("line {line}: bad value '{value}' for attribute '{attribute}'")]
    BadAttribute {
        line: usize,
        attribute: &'static str,
        value: String,
    },
    #[error("line {line}: node {id} has invalid coordinates: {source}")]
    Coordinates { line: usize, id: i64, source: GeoError },
    #[error("way {way_id} references missing node {node_id}")]
    DanglingNode { way_id: i64, node_id: i64 },
    #[error("no routable ways for the {0} profile")]
    EmptyGraph(crate::profile::Mode),
    #[error(transparent)]
    Graph(#[from] RoutingError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsmWay {
    pub id: i64,
    pub nodes: Vec<i64>,
    pub tags: BTreeMap<String, String>,
}

/// Nodes and highway ways of an OSM extract.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawOsmData {
    pub nodes: BTreeMap<i64, GeoPoint>,
    pub ways: Vec<OsmWay>,
}

impl RawOsmData {
    /// Checks that every way's node references resolve.
    pub fn validate(&self) -> Result<(), OsmError> {
        for way in &self.ways {
            if let Some(&missing) = way.nodes.iter().find(|n| !self.nodes.contains_key(n)) {
                return Err(OsmError::DanglingNode {
                    way_id: way.id,
                    node_id: missing,
                });
            }
        }
        Ok(())
    }
}

pub fn parse_osm_xml<R: Read>(mut input: R) -> Result<RawOsmData, OsmError> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    parse_osm_bytes(&buf)
}

fn line_at(data: &[u8], pos: u64) -> usize {
    let end = (pos as usize).min(data.len());
    1 + data[..end].iter().filter(|&&b| b == b'\n').count()
}

enum Open {
    None,
    Node,
    Way(OsmWay),
    Relation,
}

/// Parses an OSM XML document. Element order is not assumed: node
/// references are resolved after the whole document has been read.
pub fn parse_osm_bytes(data: &[u8]) -> Result<RawOsmData, OsmError> {
    let mut reader = Reader::from_reader(data);
    let mut raw = RawOsmData::default();
    let mut open = Open::None;
    let mut scratch = Vec::new();
    loop {
        let event = reader.read_event_into(&mut scratch).map_err(|e| OsmError::Xml {
            line: line_at(data, reader.error_position()),
            message: e.to_string(),
        })?;
        let line = line_at(data, reader.buffer_position());
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                match e.name().as_ref() {
                    b"node" => {
                        let id = int_attr(e, "node", "id", line)?;
                        let lat = float_attr(e, "node", "lat", line)?;
                        let lon = float_attr(e, "node", "lon", line)?;
                        let p = GeoPoint::new(lat, lon).map_err(|source| OsmError::Coordinates { line, id, source })?;
                        raw.nodes.insert(id, p);
                        if !is_empty {
                            open = Open::Node;
                        }
                    }
                    b"way" => {
                        let way = OsmWay {
                            id: int_attr(e, "way", "id", line)?,
                            nodes: Vec::new(),
                            tags: BTreeMap::new(),
                        };
                        if is_empty {
                            finish_way(&mut raw, way);
                        } else {
                            open = Open::Way(way);
                        }
                    }
                    b"relation" => {
                        if !is_empty {
                            open = Open::Relation;
                        }
                    }
                    b"nd" => {
                        if let Open::Way(way) = &mut open {
                            way.nodes.push(int_attr(e, "nd", "ref", line)?);
                        }
                    }
                    b"tag" => {
                        if let Open::Way(way) = &mut open {
                            let k = str_attr(e, "tag", "k", line)?;
                            let v = str_attr(e, "tag", "v", line)?;
                            way.tags.insert(k, v);
                        }
                    }
                    _ => {}
                }
            }
            Event::End(ref e) => match e.name().as_ref() {
                b"way" => {
                    if let Open::Way(way) = std::mem::replace(&mut open, Open::None) {
                        finish_way(&mut raw, way);
                    }
                }
                b"node" | b"relation" => open = Open::None,
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
        scratch.clear();
    }
    if matches!(open, Open::Way(_) | Open::Node | Open::Relation) {
        return Err(OsmError::Xml {
            line: line_at(data, data.len() as u64),
            message: "unexpected end of document".into(),
        });
    }
    raw.validate()?;
    Ok(raw)
}

fn finish_way(raw: &mut RawOsmData, way: OsmWay) {
    if way.tags.contains_key("highway") {
        raw.ways.push(way);
    }
}

fn attr(e: &BytesStart<'_>, element: &'static str, name: &'static str, line: usize) -> Result<String, OsmError> {
    for a in e.attributes() {
        let a = a.map_err(|err| OsmError::Xml {
            line,
            message: err.to_string(),
        })?;
        if a.key.as_ref() == name.as_bytes() {
            return a
                .unescape_value()
                .map(|v| v.into_owned())
                .map_err(|err| OsmError::Xml {
                    line,
                    message: err.to_string(),
                });
        }
    }
    Err(OsmError::MissingAttribute {
        line,
        element,
        attribute: name,
    })
}

fn str_attr(e: &BytesStart<'_>, element: &'static str, name: &'static str, line: usize) -> Result<String, OsmError> {
    attr(e, element, name, line)
}

fn int_attr(e: &BytesStart<'_>, element: &'static str, name: &'static str, line: usize) -> Result<i64, OsmError> {
    let v = attr(e, element, name, line)?;
    v.trim().parse().map_err(|_| OsmError::BadAttribute {
        line,
        attribute: name,
        value: v,
    })
}

fn float_attr(e: &BytesStart<'_>, element: &'static str, name: &'static str, line: usize) -> Result<f64, OsmError> {
    let v = attr(e, element, name, line)?;
    v.trim().parse().map_err(|_| OsmError::BadAttribute {
        line,
        attribute: name,
        value: v,
    })
}

struct UsableWay<'a> {
    way: &'a OsmWay,
    nodes: Vec<i64>,
    speed_mps: f64,
    direction: Direction,
}

fn usable_ways<'a>(raw: &'a RawOsmData, profile: &ModeProfile) -> Vec<UsableWay<'a>> {
    raw.ways
        .iter()
        .filter_map(|way| {
            let kmh = profile.speed_kmh(&way.tags)?;
            let mut nodes = way.nodes.clone();
            nodes.dedup();
            (nodes.len() >= 2).then(|| UsableWay {
                way,
                nodes,
                speed_mps: kmh / 3.6,
                direction: profile.direction(&way.tags, way.id),
            })
        })
        .collect()
}

fn arcs_per_segment(d: Direction) -> usize {
    usize::from(d.forward()) + usize::from(d.backward())
}

/// Extracts the compressed street graph for `profile`.
pub fn extract_street_graph(raw: &RawOsmData, profile: &ModeProfile) -> Result<StreetGraph, OsmError> {
    extract(raw, profile, true)
}

/// Extracts one graph node per routable OSM node, with no chain merging.
pub fn extract_uncompressed(raw: &RawOsmData, profile: &ModeProfile) -> Result<StreetGraph, OsmError> {
    extract(raw, profile, false)
}

fn extract(raw: &RawOsmData, profile: &ModeProfile, compress: bool) -> Result<StreetGraph, OsmError> {
    raw.validate()?;
    let ways = usable_ways(raw, profile);

    let mut uses: HashMap<i64, u32> = HashMap::new();
    for w in &ways {
        for &n in &w.nodes {
            *uses.entry(n).or_default() += 1;
        }
    }

    struct ProtoEdge {
        from: i64,
        to: i64,
        length_m: f64,
        travel_time_s: f64,
        direction: Direction,
    }
    let mut proto = Vec::new();
    for w in &ways {
        let last = w.nodes.len() - 1;
        let closed = w.nodes[0] == w.nodes[last];
        let keep = |i: usize| {
            !compress || i == 0 || i == last || uses[&w.nodes[i]] >= 2 || (closed && i == last / 2)
        };
        let mut start = 0usize;
        let mut length_m = 0.0;
        let mut travel_time_s = 0.0;
        for i in 1..=last {
            let a = raw.nodes[&w.nodes[i - 1]];
            let b = raw.nodes[&w.nodes[i]];
            let seg = haversine_m(a, b).max(MIN_SEGMENT_M);
            length_m += seg;
            travel_time_s += seg / w.speed_mps;
            if keep(i) {
                if w.nodes[start] != w.nodes[i] {
                    proto.push(ProtoEdge {
                        from: w.nodes[start],
                        to: w.nodes[i],
                        length_m,
                        travel_time_s,
                        direction: w.direction,
                    });
                } else {
                    log::debug!("way {}: dropping self-loop at node {}", w.way.id, w.nodes[i]);
                }
                start = i;
                length_m = 0.0;
                travel_time_s = 0.0;
            }
        }
    }

    let mut ids: Vec<i64> = proto.iter().flat_map(|e| [e.from, e.to]).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(OsmError::EmptyGraph(profile.mode));
    }
    let index_of: HashMap<i64, NodeIndex> = ids.iter().enumerate().map(|(i, &id)| (id, i as NodeIndex)).collect();
    let mut edges = Vec::with_capacity(proto.len() * 2);
    for e in &proto {
        let (from, to) = (index_of[&e.from], index_of[&e.to]);
        if e.direction.forward() {
            edges.push(Edge {
                from,
                to,
                length_m: e.length_m,
                travel_time_s: e.travel_time_s,
            });
        }
        if e.direction.backward() {
            edges.push(Edge {
                from: to,
                to: from,
                length_m: e.length_m,
                travel_time_s: e.travel_time_s,
            });
        }
    }
    let nodes = ids.iter().map(|id| raw.nodes[id]).collect();
    Ok(StreetGraph::new(profile.clone(), nodes, ids, edges)?)
}

/// Node and edge counts before and after extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompressionReport {
    /// Distinct OSM nodes on ways the profile may use.
    pub raw_node_count: usize,
    pub graph_node_count: usize,
    /// Directed segments between consecutive nodes of usable ways.
    pub raw_edge_count: usize,
    pub graph_edge_count: usize,
    pub node_ratio: f64,
    pub edge_ratio: f64,
}

pub fn compression_report(raw: &RawOsmData, graph: &StreetGraph) -> CompressionReport {
    let ways = usable_ways(raw, graph.profile());
    let mut routable: Vec<i64> = ways.iter().flat_map(|w| w.nodes.iter().copied()).collect();
    routable.sort_unstable();
    routable.dedup();
    let raw_edge_count: usize = ways
        .iter()
        .map(|w| (w.nodes.len() - 1) * arcs_per_segment(w.direction))
        .sum();
    let ratio = |part: usize, whole: usize| if whole == 0 { 0.0 } else { part as f64 / whole as f64 };
    CompressionReport {
        raw_node_count: routable.len(),
        graph_node_count: graph.node_count(),
        raw_edge_count,
        graph_edge_count: graph.edge_count(),
        node_ratio: ratio(graph.node_count(), routable.len()),
        edge_ratio: ratio(graph.edge_count(), raw_edge_count),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Mode;

    const TWO_NODES: &str = r#"<?xml version="1.0"?>
<osm version="0.6">
  <node id="1" lat="-34.60" lon="-58.40"/>
  <node id="2" lat="-34.60" lon="-58.39"/>
  <way id="10">
    <nd ref="1"/>
    <nd ref="2"/>
    <tag k="highway" v="residential"/>
  </way>
</osm>"#;

    fn chain(oneway: Option<&str>) -> String {
        let tag = oneway.map(|v| format!(r#"<tag k="oneway" v="{v}"/>"#)).unwrap_or_default();
        format!(
            r#"<osm>
  <way id="5"><nd ref="1"/><nd ref="2"/><nd ref="3"/><tag k="highway" v="residential"/>{tag}</way>
  <node id="1" lat="0.0" lon="0.000"/>
  <node id="2" lat="0.0" lon="0.001"/>
  <node id="3" lat="0.0" lon="0.002"/>
</osm>"#
        )
    }

    #[test]
    fn minimal_document() {
        let raw = parse_osm_bytes(TWO_NODES.as_bytes()).unwrap();
        assert_eq!(raw.nodes.len(), 2);
        assert_eq!(raw.ways.len(), 1);
        assert_eq!(raw.ways[0].nodes, vec![1, 2]);
    }

    #[test]
    fn non_highway_way_dropped_and_relations_skipped() {
        let doc = r#"<osm>
  <node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.1"/>
  <way id="3"><nd ref="1"/><nd ref="2"/><tag k="building" v="yes"/></way>
  <relation id="4"><member type="way" ref="3" role=""/><tag k="type" v="multipolygon"/></relation>
</osm>"#;
        let raw = parse_osm_bytes(doc.as_bytes()).unwrap();
        assert_eq!(raw.nodes.len(), 2);
        assert!(raw.ways.is_empty());
    }

    #[test]
    fn ways_before_nodes_are_accepted() {
        let raw = parse_osm_bytes(chain(None).as_bytes()).unwrap();
        assert_eq!(raw.ways.len(), 1);
        assert_eq!(raw.nodes.len(), 3);
    }

    #[test]
    fn dangling_reference_names_the_way() {
        let doc = r#"<osm><node id="1" lat="0" lon="0"/>
<way id="77"><nd ref="1"/><nd ref="9"/><tag k="highway" v="path"/></way></osm>"#;
        match parse_osm_bytes(doc.as_bytes()) {
            Err(OsmError::DanglingNode { way_id: 77, node_id: 9 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_xml_reports_line() {
        let doc = "<osm>\n<node id=\"1\" lat=\"0\" lon=\"0\"/>\n<way id=\"2\">\n</node>\n</osm>";
        match parse_osm_bytes(doc.as_bytes()) {
            Err(OsmError::Xml { line, .. }) => assert!(line >= 3, "line {line}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_coordinates_rejected() {
        let doc = r#"<osm><node id="1" lat="95" lon="0"/></osm>"#;
        assert!(matches!(parse_osm_bytes(doc.as_bytes()), Err(OsmError::Coordinates { id: 1, .. })));
    }

    #[test]
    fn chain_is_compressed() {
        let raw = parse_osm_bytes(chain(None).as_bytes()).unwrap();
        let g = extract_street_graph(&raw, &ModeProfile::foot()).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 2);
        let ab = haversine_m(raw.nodes[&1], raw.nodes[&2]);
        let bc = haversine_m(raw.nodes[&2], raw.nodes[&3]);
        assert_eq!(g.edges()[0].length_m, ab + bc);
        let report = compression_report(&raw, &g);
        assert_eq!(report.raw_node_count, 3);
        assert_eq!(report.raw_edge_count, 4);
        assert_eq!(report.node_ratio, 2.0 / 3.0);
        assert_eq!(report.edge_ratio, 0.5);
    }

    #[test]
    fn uncompressed_ratio_is_one() {
        let raw = parse_osm_bytes(chain(None).as_bytes()).unwrap();
        let g = extract_uncompressed(&raw, &ModeProfile::foot()).unwrap();
        let report = compression_report(&raw, &g);
        assert_eq!((report.node_ratio, report.edge_ratio), (1.0, 1.0));
    }

    #[test]
    fn oneway_depends_on_profile() {
        let raw = parse_osm_bytes(chain(Some("yes")).as_bytes()).unwrap();
        let car = extract_street_graph(&raw, &ModeProfile::car()).unwrap();
        assert_eq!(car.edge_count(), 1);
        assert_eq!((car.edges()[0].from, car.edges()[0].to), (0, 1));
        let foot = extract_street_graph(&raw, &ModeProfile::foot()).unwrap();
        assert_eq!(foot.edge_count(), 2);

        let raw = parse_osm_bytes(chain(Some("-1")).as_bytes()).unwrap();
        let car = extract_street_graph(&raw, &ModeProfile::car()).unwrap();
        assert_eq!((car.edges()[0].from, car.edges()[0].to), (1, 0));
    }

    #[test]
    fn shared_node_is_never_merged() {
        let doc = r#"<osm>
  <node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.001"/><node id="3" lat="0" lon="0.002"/>
  <node id="4" lat="0.001" lon="0.001"/>
  <way id="1"><nd ref="1"/><nd ref="2"/><nd ref="3"/><tag k="highway" v="residential"/></way>
  <way id="2"><nd ref="2"/><nd ref="4"/><tag k="highway" v="residential"/></way>
</osm>"#;
        let raw = parse_osm_bytes(doc.as_bytes()).unwrap();
        let g = extract_street_graph(&raw, &ModeProfile::car()).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 6);
    }

    #[test]
    fn closed_way_keeps_a_split_node() {
        let doc = r#"<osm>
  <node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.001"/>
  <node id="3" lat="0.001" lon="0.001"/><node id="4" lat="0.001" lon="0"/>
  <way id="1"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><nd ref="1"/><tag k="highway" v="service"/></way>
</osm>"#;
        let raw = parse_osm_bytes(doc.as_bytes()).unwrap();
        let g = extract_street_graph(&raw, &ModeProfile::car()).unwrap();
        assert_eq!(g.node_count(), 2);
        let total: f64 = g.edges().iter().filter(|e| e.from == 0).map(|e| e.length_m).sum();
        let perimeter = 2.0 * haversine_m(raw.nodes[&1], raw.nodes[&2]) + 2.0 * haversine_m(raw.nodes[&2], raw.nodes[&3]);
        assert!((total - perimeter).abs() < 1e-6);
    }

    #[test]
    fn no_routable_ways_is_an_error() {
        let raw = parse_osm_bytes(TWO_NODES.replace("residential", "footway").as_bytes()).unwrap();
        assert!(matches!(
            extract_street_graph(&raw, &ModeProfile::car()),
            Err(OsmError::EmptyGraph(Mode::Car))
        ));
    }

    #[test]
    fn reparse_is_deterministic() {
        let a = extract_street_graph(&parse_osm_bytes(chain(None).as_bytes()).unwrap(), &ModeProfile::bike()).unwrap();
        let b = extract_street_graph(&parse_osm_bytes(chain(None).as_bytes()).unwrap(), &ModeProfile::bike()).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.nodes(), b.nodes());
    }
}
