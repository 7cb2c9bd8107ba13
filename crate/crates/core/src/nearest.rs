//! Nearest opportunity per origin with geodesic candidate pruning.
//!
//! For each origin only the `K` geodesically closest destinations are routed
//! on the network, with a single one-to-many search, and the cheapest of
//! those is reported. With `K` equal to the number of destinations the
//! answer is exact; for smaller `K` it is exact whenever the network-nearest
//! destination is among the `K` straight-line nearest.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::GeoPoint;
use crate::profile::Mode;
use crate::routing::{NodeIndex, RouteMetric, Router, RoutingError, StreetGraph};
use crate::spatial::QuadTree;
use crate::transit::{reachable_lines, Itinerary, TransitError, TransitNetwork};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_WALK_RADIUS_M: f64 = 500.0;

#[derive(Debug, Error)]
pub enum NearestError {
    #[error("opportunity set is empty")]
    EmptySet,
    #[error("duplicate destination id {0}")]
    DuplicateDest(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("failed to start worker pool: {0}")]
    Pool(String),
    #[error("input line {line}: {message}")]
    Input { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Transit(#[from] TransitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelMode {
    Foot,
    Bike,
    Car,
    PublicTransport,
}

impl TravelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TravelMode::Foot => "foot",
            TravelMode::Bike => "bike",
            TravelMode::Car => "car",
            TravelMode::PublicTransport => "public_transport",
        }
    }

    /// The street profile this mode routes on; walking for public transport.
    pub fn street_mode(self) -> Mode {
        match self {
            TravelMode::Foot | TravelMode::PublicTransport => Mode::Foot,
            TravelMode::Bike => Mode::Bike,
            TravelMode::Car => Mode::Car,
        }
    }
}

impl fmt::Display for TravelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TravelMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "foot" => Ok(TravelMode::Foot),
            "bike" | "bicycle" => Ok(TravelMode::Bike),
            "car" => Ok(TravelMode::Car),
            "public_transport" | "transit" | "bus" => Ok(TravelMode::PublicTransport),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opportunity {
    pub dest_id: String,
    pub location: GeoPoint,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// Destinations sorted by id, with a geodesic index.
#[derive(Debug, Clone)]
pub struct OpportunitySet {
    entries: Vec<Opportunity>,
    index: QuadTree,
}

impl OpportunitySet {
    pub fn new(mut entries: Vec<Opportunity>) -> Result<Self, NearestError> {
        entries.sort_by(|a, b| a.dest_id.cmp(&b.dest_id));
        if let Some(w) = entries.windows(2).find(|w| w[0].dest_id == w[1].dest_id) {
            return Err(NearestError::DuplicateDest(w[0].dest_id.clone()));
        }
        let index = QuadTree::build(entries.iter().enumerate().map(|(i, e)| (e.location, i)).collect());
        Ok(OpportunitySet { entries, index })
    }

    pub fn entries(&self) -> &[Opportunity] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Position in [`OpportunitySet::entries`].
    pub entry: usize,
    pub geodesic_m: f64,
}

/// The `k` destinations closest to `p` in straight-line distance, ascending,
/// ties broken by destination id.
pub fn knn_geodesic(p: GeoPoint, set: &OpportunitySet, k: usize) -> Result<Vec<Candidate>, NearestError> {
    if set.is_empty() {
        return Err(NearestError::EmptySet);
    }
    if k == 0 {
        return Err(NearestError::Config("K must be at least 1".into()));
    }
    Ok(set
        .index
        .k_nearest(p, k)
        .into_iter()
        .map(|n| Candidate {
            entry: n.id,
            geodesic_m: n.distance_m,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearestConfig {
    pub k: usize,
    pub mode: TravelMode,
    pub metric: RouteMetric,
    /// Walking radius to bus stops; only used for public transport.
    pub walk_radius_m: f64,
}

impl Default for NearestConfig {
    fn default() -> Self {
        NearestConfig {
            k: DEFAULT_K,
            mode: TravelMode::Foot,
            metric: RouteMetric::Time,
            walk_radius_m: DEFAULT_WALK_RADIUS_M,
        }
    }
}

impl NearestConfig {
    pub fn validate(&self) -> Result<(), NearestError> {
        if self.k == 0 {
            return Err(NearestError::Config("K must be at least 1".into()));
        }
        if self.mode == TravelMode::PublicTransport {
            if !(self.walk_radius_m.is_finite() && self.walk_radius_m > 0.0) {
                return Err(NearestError::Config(format!(
                    "walk radius must be positive, got {}",
                    self.walk_radius_m
                )));
            }
            if self.metric != RouteMetric::Time {
                return Err(NearestError::Config("public transport only supports the time_s metric".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Unreachable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Unreachable => "unreachable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    pub id: String,
    pub location: GeoPoint,
}

/// One origin's answer.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessibilityResult {
    pub origin_id: String,
    pub origin: GeoPoint,
    pub mode: TravelMode,
    pub metric: RouteMetric,
    pub status: Status,
    pub dest_id: Option<String>,
    pub travel_time_s: Option<f64>,
    /// Network distance; street modes only.
    pub distance_m: Option<f64>,
    /// Public transport only.
    pub itinerary: Option<Itinerary>,
    /// Straight-line distance from the origin to its snapped graph node.
    pub snap_distance_m: f64,
    /// Number of destinations routed on the network for this origin.
    pub evaluated: usize,
}

impl AccessibilityResult {
    /// The minimized quantity: seconds or meters per the metric.
    pub fn value(&self) -> Option<f64> {
        match self.metric {
            RouteMetric::Time => self.travel_time_s,
            RouteMetric::Distance => self.distance_m,
        }
    }

    fn unreachable(origin: &Origin, cfg: &NearestConfig, snap_distance_m: f64, evaluated: usize) -> Self {
        AccessibilityResult {
            origin_id: origin.id.clone(),
            origin: origin.location,
            mode: cfg.mode,
            metric: cfg.metric,
            status: Status::Unreachable,
            dest_id: None,
            travel_time_s: None,
            distance_m: None,
            itinerary: None,
            snap_distance_m,
            evaluated,
        }
    }
}

enum Network<'a> {
    Street {
        graph: &'a StreetGraph,
        dest_nodes: Vec<NodeIndex>,
    },
    Transit(&'a TransitNetwork<'a>),
}

/// Read-only state for answering nearest-opportunity queries in one mode.
pub struct NearestEngine<'a> {
    set: &'a OpportunitySet,
    cfg: NearestConfig,
    network: Network<'a>,
}

impl<'a> NearestEngine<'a> {
    /// Engine for foot, bike or car on `graph`.
    pub fn street(set: &'a OpportunitySet, cfg: NearestConfig, graph: &'a StreetGraph) -> Result<Self, NearestError> {
        cfg.validate()?;
        if cfg.mode == TravelMode::PublicTransport {
            return Err(NearestError::Config("public transport needs a transit network".into()));
        }
        if graph.profile().mode != cfg.mode.street_mode() {
            return Err(NearestError::Config(format!(
                "mode {} given a {} graph",
                cfg.mode,
                graph.profile().mode
            )));
        }
        if set.is_empty() {
            return Err(NearestError::EmptySet);
        }
        let dest_nodes = set
            .entries
            .iter()
            .map(|e| graph.snap(e.location))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(NearestEngine {
            set,
            cfg,
            network: Network::Street { graph, dest_nodes },
        })
    }

    pub fn transit(
        set: &'a OpportunitySet,
        cfg: NearestConfig,
        network: &'a TransitNetwork<'a>,
    ) -> Result<Self, NearestError> {
        cfg.validate()?;
        if cfg.mode != TravelMode::PublicTransport {
            return Err(NearestError::Config(format!("mode {} is not public transport", cfg.mode)));
        }
        if set.is_empty() {
            return Err(NearestError::EmptySet);
        }
        Ok(NearestEngine {
            set,
            cfg,
            network: Network::Transit(network),
        })
    }

    pub fn config(&self) -> &NearestConfig {
        &self.cfg
    }

    /// The graph searches run on (the foot graph for public transport).
    pub fn graph(&self) -> &'a StreetGraph {
        match &self.network {
            Network::Street { graph, .. } => graph,
            Network::Transit(net) => net.foot(),
        }
    }

    pub fn router(&self) -> Router<'a> {
        Router::new(self.graph())
    }

    pub fn nearest(&self, router: &mut Router<'_>, origin: &Origin) -> Result<AccessibilityResult, NearestError> {
        let candidates = knn_geodesic(origin.location, self.set, self.cfg.k)?;
        match &self.network {
            Network::Street { graph, dest_nodes } => self.nearest_street(router, graph, dest_nodes, origin, &candidates),
            Network::Transit(net) => self.nearest_transit(router, net, origin, &candidates),
        }
    }

    fn nearest_street(
        &self,
        router: &mut Router<'_>,
        graph: &StreetGraph,
        dest_nodes: &[NodeIndex],
        origin: &Origin,
        candidates: &[Candidate],
    ) -> Result<AccessibilityResult, NearestError> {
        let (src, snap_distance_m) = graph.snap_with_distance(origin.location)?;
        let targets: Vec<NodeIndex> = candidates.iter().map(|c| dest_nodes[c.entry]).collect();
        let costs = router.shortest_cost(src, &targets, self.cfg.metric)?;
        let best = candidates
            .iter()
            .zip(&costs)
            .filter_map(|(c, r)| r.as_ref().map(|r| (c.entry, r)))
            .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost).then(a.0.cmp(&b.0)));
        let Some((entry, r)) = best else {
            return Ok(AccessibilityResult::unreachable(origin, &self.cfg, snap_distance_m, candidates.len()));
        };
        let (time, distance) = match self.cfg.metric {
            RouteMetric::Time => (r.cost, r.secondary),
            RouteMetric::Distance => (r.secondary, r.cost),
        };
        Ok(AccessibilityResult {
            origin_id: origin.id.clone(),
            origin: origin.location,
            mode: self.cfg.mode,
            metric: self.cfg.metric,
            status: Status::Ok,
            dest_id: Some(self.set.entries[entry].dest_id.clone()),
            travel_time_s: Some(time),
            distance_m: Some(distance),
            itinerary: None,
            snap_distance_m,
            evaluated: candidates.len(),
        })
    }

    fn nearest_transit(
        &self,
        router: &mut Router<'_>,
        net: &TransitNetwork<'_>,
        origin: &Origin,
        candidates: &[Candidate],
    ) -> Result<AccessibilityResult, NearestError> {
        let (_, snap_distance_m) = net.foot().snap_with_distance(origin.location)?;
        let radius = self.cfg.walk_radius_m;
        let reach_p = reachable_lines(origin.location, net.index(), radius)?;
        let mut best: Option<(f64, usize, Itinerary)> = None;
        for c in candidates {
            let q = self.set.entries[c.entry].location;
            let reach_q = reachable_lines(q, net.index(), radius)?;
            let itinerary = net.plan(router, origin.location, q, &reach_p, &reach_q)?;
            let total = itinerary.total_s();
            if !total.is_finite() {
                continue;
            }
            let better = match &best {
                Some((t, e, _)) => total < *t || (total == *t && c.entry < *e),
                None => true,
            };
            if better {
                best = Some((total, c.entry, itinerary));
            }
        }
        let Some((total, entry, itinerary)) = best else {
            return Ok(AccessibilityResult::unreachable(origin, &self.cfg, snap_distance_m, candidates.len()));
        };
        Ok(AccessibilityResult {
            origin_id: origin.id.clone(),
            origin: origin.location,
            mode: self.cfg.mode,
            metric: self.cfg.metric,
            status: Status::Ok,
            dest_id: Some(self.set.entries[entry].dest_id.clone()),
            travel_time_s: Some(total),
            distance_m: None,
            itinerary: Some(itinerary),
            snap_distance_m,
            evaluated: candidates.len(),
        })
    }
}

/// Single-origin street-mode query.
pub fn nearest_by_network(
    p: GeoPoint,
    set: &OpportunitySet,
    cfg: NearestConfig,
    graph: &StreetGraph,
) -> Result<AccessibilityResult, NearestError> {
    let engine = NearestEngine::street(set, cfg, graph)?;
    engine.nearest(&mut engine.router(), &Origin { id: String::new(), location: p })
}

/// Single-origin public-transport query.
pub fn nearest_by_transit(
    p: GeoPoint,
    set: &OpportunitySet,
    cfg: NearestConfig,
    network: &TransitNetwork<'_>,
) -> Result<AccessibilityResult, NearestError> {
    let engine = NearestEngine::transit(set, cfg, network)?;
    engine.nearest(&mut engine.router(), &Origin { id: String::new(), location: p })
}

/// One result per origin, in input order, on `workers` threads (all
/// available cores when `None`). The output does not depend on the worker
/// count. A failing origin is reported as unreachable rather than aborting
/// the batch.
pub fn batch_compute(
    origins: &[Origin],
    engine: &NearestEngine<'_>,
    workers: Option<usize>,
) -> Result<Vec<AccessibilityResult>, NearestError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(NearestError::Config("worker count must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| NearestError::Pool(e.to_string()))?;
    let ids: HashSet<&str> = origins.iter().map(|o| o.id.as_str()).collect();
    if ids.len() != origins.len() {
        log::warn!("origin ids are not unique");
    }
    Ok(pool.install(|| {
        origins
            .par_iter()
            .map_init(
                || engine.router(),
                |router, origin| match engine.nearest(router, origin) {
                    Ok(r) => r,
                    Err(e) => {
                        log::warn!("origin {}: {e}", origin.id);
                        let snap = engine.graph().snap_with_distance(origin.location).map_or(0.0, |s| s.1);
                        AccessibilityResult::unreachable(origin, engine.config(), snap, 0)
                    }
                },
            )
            .collect()
    }))
}

struct PointColumns {
    id: usize,
    lat: usize,
    lon: usize,
}

fn point_columns(headers: &csv::StringRecord, id_names: &[&str]) -> Result<PointColumns, NearestError> {
    let find = |names: &[&str]| {
        names
            .iter()
            .find_map(|n| headers.iter().position(|h| h.trim() == *n))
            .ok_or_else(|| NearestError::Input {
                line: 1,
                message: format!("missing column {}", names.join(" or ")),
            })
    };
    Ok(PointColumns {
        id: find(id_names)?,
        lat: find(&["lat"])?,
        lon: find(&["lon"])?,
    })
}

fn parse_point(record: &csv::StringRecord, cols: &PointColumns) -> Result<(String, GeoPoint), NearestError> {
    let line = record.position().map_or(0, |p| p.line());
    let field = |i: usize| record.get(i).unwrap_or("").trim();
    let num = |i: usize, name: &str| {
        field(i).parse::<f64>().map_err(|_| NearestError::Input {
            line,
            message: format!("bad {name} '{}'", field(i)),
        })
    };
    let location = GeoPoint::new(num(cols.lat, "lat")?, num(cols.lon, "lon")?).map_err(|e| NearestError::Input {
        line,
        message: e.to_string(),
    })?;
    let id = field(cols.id);
    if id.is_empty() {
        return Err(NearestError::Input {
            line,
            message: "empty id".into(),
        });
    }
    Ok((id.to_string(), location))
}

/// Origins from a CSV with `id`, `lat` and `lon` columns; other columns are
/// ignored.
pub fn read_origins_csv<R: std::io::Read>(reader: R) -> Result<Vec<Origin>, NearestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let cols = point_columns(rdr.headers()?, &["id", "origin_id"])?;
    rdr.records()
        .map(|rec| {
            let (id, location) = parse_point(&rec?, &cols)?;
            Ok(Origin { id, location })
        })
        .collect()
}

/// Destinations from a CSV with `dest_id` (or `id`), `lat` and `lon`
/// columns; other columns become metadata.
pub fn read_opportunities_csv<R: std::io::Read>(reader: R) -> Result<OpportunitySet, NearestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = point_columns(&headers, &["dest_id", "id"])?;
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (dest_id, location) = parse_point(&rec, &cols)?;
        let metadata = headers
            .iter()
            .zip(rec.iter())
            .enumerate()
            .filter(|(i, _)| ![cols.id, cols.lat, cols.lon].contains(i))
            .map(|(_, (h, v))| (h.to_string(), v.to_string()))
            .collect();
        entries.push(Opportunity {
            dest_id,
            location,
            metadata,
        });
    }
    OpportunitySet::new(entries)
}
