//! Street graph and Dijkstra-based routing: snapping, one-to-many costs,
//! origin/destination tables and multi-waypoint routes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{haversine_m, GeoPoint};
use crate::profile::ModeProfile;
use crate::spatial::QuadTree;

pub type NodeIndex = u32;

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("edge {from}->{to} has invalid weights (length {length_m}, time {travel_time_s})")]
    BadWeight {
        from: NodeIndex,
        to: NodeIndex,
        length_m: f64,
        travel_time_s: f64,
    },
    #[error("node index {0} out of range")]
    NodeOutOfRange(NodeIndex),
    #[error("node table and OSM id table differ in length")]
    IdTableLength,
    #[error("a route needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("origin and destination lists must be non-empty")]
    EmptyTable,
}

/// Which edge weight Dijkstra minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RouteMetric {
    #[serde(rename = "distance_m")]
    Distance,
    #[serde(rename = "time_s")]
    Time,
}

impl RouteMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            RouteMetric::Distance => "distance_m",
            RouteMetric::Time => "time_s",
        }
    }
}

impl std::str::FromStr for RouteMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "distance_m" | "distance" => Ok(RouteMetric::Distance),
            "time_s" | "time" => Ok(RouteMetric::Time),
            other => Err(format!("unknown metric '{other}' (expected distance_m or time_s)")),
        }
    }
}

impl std::fmt::Display for RouteMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A directed edge with both weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: NodeIndex,
    pub to: NodeIndex,
    pub length_m: f64,
    pub travel_time_s: f64,
}

impl Edge {
    fn weight(&self, metric: RouteMetric) -> (f64, f64) {
        match metric {
            RouteMetric::Distance => (self.length_m, self.travel_time_s),
            RouteMetric::Time => (self.travel_time_s, self.length_m),
        }
    }
}

/// Cost of a reached destination. `None` in the surrounding `Option` marks
/// an unreachable one.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteResult {
    /// Minimized cost: meters or seconds according to the metric.
    pub cost: f64,
    /// The other measure accumulated along the same path.
    pub secondary: f64,
    pub path: Option<Vec<NodeIndex>>,
}

#[derive(Debug, Clone)]
struct Adjacency {
    first: Vec<u32>,
    edges: Vec<Edge>,
}

impl Adjacency {
    fn build(node_count: usize, mut edges: Vec<Edge>, key: fn(&Edge) -> NodeIndex) -> Self {
        edges.sort_by(|a, b| {
            key(a)
                .cmp(&key(b))
                .then(a.from.cmp(&b.from))
                .then(a.to.cmp(&b.to))
                .then(a.length_m.total_cmp(&b.length_m))
                .then(a.travel_time_s.total_cmp(&b.travel_time_s))
        });
        let mut first = vec![0u32; node_count + 1];
        for e in &edges {
            first[key(e) as usize + 1] += 1;
        }
        for i in 0..node_count {
            first[i + 1] += first[i];
        }
        Adjacency { first, edges }
    }

    #[inline]
    fn of(&self, node: NodeIndex) -> &[Edge] {
        let n = node as usize;
        &self.edges[self.first[n] as usize..self.first[n + 1] as usize]
    }
}

/// Immutable per-mode street graph with dense node indices.
#[derive(Debug, Clone)]
pub struct StreetGraph {
    profile: ModeProfile,
    nodes: Vec<GeoPoint>,
    osm_ids: Vec<i64>,
    forward: Adjacency,
    backward: Adjacency,
    index: QuadTree,
    ids_sorted: bool,
}

impl StreetGraph {
    pub fn new(
        profile: ModeProfile,
        nodes: Vec<GeoPoint>,
        osm_ids: Vec<i64>,
        edges: Vec<Edge>,
    ) -> Result<Self, RoutingError> {
        if osm_ids.len() != nodes.len() {
            return Err(RoutingError::IdTableLength);
        }
        let n = nodes.len();
        for e in &edges {
            for idx in [e.from, e.to] {
                if idx as usize >= n {
                    return Err(RoutingError::NodeOutOfRange(idx));
                }
            }
            let ok = |w: f64| w.is_finite() && w > 0.0;
            if !ok(e.length_m) || !ok(e.travel_time_s) {
                return Err(RoutingError::BadWeight {
                    from: e.from,
                    to: e.to,
                    length_m: e.length_m,
                    travel_time_s: e.travel_time_s,
                });
            }
        }
        let index = QuadTree::build(nodes.iter().copied().enumerate().map(|(i, p)| (p, i)).collect());
        let ids_sorted = osm_ids.windows(2).all(|w| w[0] < w[1]);
        Ok(StreetGraph {
            ids_sorted,
            profile,
            forward: Adjacency::build(n, edges.clone(), |e| e.from),
            backward: Adjacency::build(n, edges, |e| e.to),
            nodes,
            osm_ids,
            index,
        })
    }

    pub fn profile(&self) -> &ModeProfile {
        &self.profile
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.forward.edges.len()
    }

    pub fn node(&self, idx: NodeIndex) -> GeoPoint {
        self.nodes[idx as usize]
    }

    pub fn nodes(&self) -> &[GeoPoint] {
        &self.nodes
    }

    pub fn osm_ids(&self) -> &[i64] {
        &self.osm_ids
    }

    pub fn node_by_osm_id(&self, osm_id: i64) -> Option<NodeIndex> {
        let found = if self.ids_sorted {
            self.osm_ids.binary_search(&osm_id).ok()
        } else {
            self.osm_ids.iter().position(|&id| id == osm_id)
        };
        found.map(|i| i as NodeIndex)
    }

    /// Edges sorted by source node, then target.
    pub fn edges(&self) -> &[Edge] {
        &self.forward.edges
    }

    pub fn out_edges(&self, node: NodeIndex) -> &[Edge] {
        self.forward.of(node)
    }

    pub fn in_edges(&self, node: NodeIndex) -> &[Edge] {
        self.backward.of(node)
    }

    /// Highest speed of any edge, in m/s.
    pub fn max_speed_mps(&self) -> f64 {
        self.forward
            .edges
            .iter()
            .map(|e| e.length_m / e.travel_time_s)
            .fold(0.0, f64::max)
    }

    /// Nearest graph node to `p`; ties go to the lowest node index.
    pub fn snap(&self, p: GeoPoint) -> Result<NodeIndex, RoutingError> {
        self.snap_with_distance(p).map(|(n, _)| n)
    }

    pub fn snap_with_distance(&self, p: GeoPoint) -> Result<(NodeIndex, f64), RoutingError> {
        self.index
            .nearest(p)
            .map(|hit| (hit.id as NodeIndex, hit.distance_m))
            .ok_or(RoutingError::EmptyGraph)
    }
}

/// Direction in which a search expands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchDirection {
    /// From the source along edge directions (one-to-many).
    Forward,
    /// Against edge directions, so costs are from each target to the source
    /// (many-to-one).
    Backward,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    node: NodeIndex,
}

impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.node.cmp(&self.node))
    }
}

const NO_PRED: u32 = u32::MAX;

/// Reusable Dijkstra state for one graph. Each worker owns one.
pub struct Router<'g> {
    graph: &'g StreetGraph,
    cost: Vec<f64>,
    secondary: Vec<f64>,
    pred: Vec<u32>,
    stamp: Vec<u32>,
    settled: Vec<u32>,
    target: Vec<u32>,
    epoch: u32,
    heap: BinaryHeap<HeapItem>,
    settled_count: usize,
}

impl<'g> Router<'g> {
    pub fn new(graph: &'g StreetGraph) -> Self {
        let n = graph.node_count();
        Router {
            graph,
            cost: vec![f64::INFINITY; n],
            secondary: vec![0.0; n],
            pred: vec![NO_PRED; n],
            stamp: vec![0; n],
            settled: vec![0; n],
            target: vec![0; n],
            epoch: 0,
            heap: BinaryHeap::new(),
            settled_count: 0,
        }
    }

    pub fn graph(&self) -> &'g StreetGraph {
        self.graph
    }

    /// Nodes settled by the most recent search.
    pub fn last_settled_count(&self) -> usize {
        self.settled_count
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.settled.fill(0);
            self.target.fill(0);
            self.epoch = 1;
        }
        self.heap.clear();
        self.settled_count = 0;
    }

    #[inline]
    fn cost_of(&self, n: usize) -> f64 {
        if self.stamp[n] == self.epoch {
            self.cost[n]
        } else {
            f64::INFINITY
        }
    }

    /// Costs from `src` to every node of `dsts` (aligned with `dsts`),
    /// stopping as soon as all of them are settled.
    pub fn one_to_many(
        &mut self,
        src: NodeIndex,
        dsts: &[NodeIndex],
        metric: RouteMetric,
        direction: SearchDirection,
        with_paths: bool,
    ) -> Result<Vec<Option<RouteResult>>, RoutingError> {
        let n = self.graph.node_count();
        for &idx in std::iter::once(&src).chain(dsts) {
            if idx as usize >= n {
                return Err(RoutingError::NodeOutOfRange(idx));
            }
        }
        self.next_epoch();
        let epoch = self.epoch;
        let mut remaining = 0usize;
        for &d in dsts {
            if self.target[d as usize] != epoch {
                self.target[d as usize] = epoch;
                remaining += 1;
            }
        }
        let s = src as usize;
        self.stamp[s] = epoch;
        self.cost[s] = 0.0;
        self.secondary[s] = 0.0;
        self.pred[s] = NO_PRED;
        self.heap.push(HeapItem { cost: 0.0, node: src });

        let adjacency = match direction {
            SearchDirection::Forward => &self.graph.forward,
            SearchDirection::Backward => &self.graph.backward,
        };
        while remaining > 0 {
            let Some(HeapItem { cost, node }) = self.heap.pop() else {
                break;
            };
            let u = node as usize;
            if self.settled[u] == epoch {
                continue;
            }
            self.settled[u] = epoch;
            self.settled_count += 1;
            if self.target[u] == epoch {
                remaining -= 1;
            }
            let sec_u = self.secondary[u];
            for e in adjacency.of(node) {
                let v = match direction {
                    SearchDirection::Forward => e.to,
                    SearchDirection::Backward => e.from,
                } as usize;
                if self.settled[v] == epoch {
                    continue;
                }
                let (w, w2) = e.weight(metric);
                let candidate = cost + w;
                if candidate < self.cost_of(v) {
                    self.stamp[v] = epoch;
                    self.cost[v] = candidate;
                    self.secondary[v] = sec_u + w2;
                    self.pred[v] = node;
                    self.heap.push(HeapItem {
                        cost: candidate,
                        node: v as NodeIndex,
                    });
                }
            }
        }

        Ok(dsts
            .iter()
            .map(|&d| {
                let di = d as usize;
                if self.settled[di] != epoch {
                    return None;
                }
                let path = with_paths.then(|| {
                    let mut path = vec![d];
                    let mut cur = d;
                    while self.pred[cur as usize] != NO_PRED {
                        cur = self.pred[cur as usize];
                        path.push(cur);
                    }
                    if direction == SearchDirection::Forward {
                        path.reverse();
                    }
                    path
                });
                Some(RouteResult {
                    cost: self.cost[di],
                    secondary: self.secondary[di],
                    path,
                })
            })
            .collect())
    }

    pub fn shortest_cost(
        &mut self,
        src: NodeIndex,
        dsts: &[NodeIndex],
        metric: RouteMetric,
    ) -> Result<Vec<Option<RouteResult>>, RoutingError> {
        self.one_to_many(src, dsts, metric, SearchDirection::Forward, false)
    }
}

/// One-to-many Dijkstra from `src`; entry `i` of the result belongs to
/// `dsts[i]` and is `None` when that node is unreachable.
pub fn shortest_cost(
    g: &StreetGraph,
    src: NodeIndex,
    dsts: &[NodeIndex],
    metric: RouteMetric,
) -> Result<Vec<Option<RouteResult>>, RoutingError> {
    Router::new(g).shortest_cost(src, dsts, metric)
}

/// Like [`shortest_cost`] but also returns node paths.
pub fn shortest_paths(
    g: &StreetGraph,
    src: NodeIndex,
    dsts: &[NodeIndex],
    metric: RouteMetric,
) -> Result<Vec<Option<RouteResult>>, RoutingError> {
    Router::new(g).one_to_many(src, dsts, metric, SearchDirection::Forward, true)
}

/// Origin/destination matrix; row `i` is one one-to-many search from the
/// snapped origin `i`. Rows run in parallel and are assembled by index.
pub fn table(
    g: &StreetGraph,
    origins: &[GeoPoint],
    destinations: &[GeoPoint],
    metric: RouteMetric,
) -> Result<Vec<Vec<Option<RouteResult>>>, RoutingError> {
    if origins.is_empty() || destinations.is_empty() {
        return Err(RoutingError::EmptyTable);
    }
    let dst_nodes = destinations
        .iter()
        .map(|&p| g.snap(p))
        .collect::<Result<Vec<_>, _>>()?;
    let src_nodes = origins
        .iter()
        .map(|&p| g.snap(p))
        .collect::<Result<Vec<_>, _>>()?;
    src_nodes
        .par_iter()
        .map_init(|| Router::new(g), |router, &src| router.shortest_cost(src, &dst_nodes, metric))
        .collect()
}

/// Per-leg costs for an ordered waypoint list.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSummary {
    pub legs: Vec<Option<RouteResult>>,
    /// `(cost, secondary)` summed over legs, or `None` if any leg is unreachable.
    pub total: Option<(f64, f64)>,
}

pub fn route(g: &StreetGraph, waypoints: &[GeoPoint], metric: RouteMetric) -> Result<RouteSummary, RoutingError> {
    route_with(&mut Router::new(g), waypoints, metric)
}

pub fn route_with(
    router: &mut Router<'_>,
    waypoints: &[GeoPoint],
    metric: RouteMetric,
) -> Result<RouteSummary, RoutingError> {
    if waypoints.len() < 2 {
        return Err(RoutingError::TooFewWaypoints(waypoints.len()));
    }
    let g = router.graph();
    let snapped = waypoints
        .iter()
        .map(|&p| g.snap(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut legs = Vec::with_capacity(snapped.len() - 1);
    for pair in snapped.windows(2) {
        let leg = router.shortest_cost(pair[0], &pair[1..2], metric)?.pop().flatten();
        legs.push(leg);
    }
    let total = legs.iter().try_fold((0.0, 0.0), |(c, s), leg| {
        leg.as_ref().map(|r| (c + r.cost, s + r.secondary))
    });
    Ok(RouteSummary { legs, total })
}

/// Straight-line distance between a point and its snapped node.
pub fn snap_distance_m(g: &StreetGraph, p: GeoPoint, node: NodeIndex) -> f64 {
    haversine_m(p, g.node(node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ModeProfile;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn edge(from: u32, to: u32, len: f64) -> Edge {
        Edge {
            from,
            to,
            length_m: len,
            travel_time_s: len / 2.0,
        }
    }

    /// 0 -> 1 -> 2, 0 -> 2 long, 3 isolated.
    fn small() -> StreetGraph {
        let nodes = vec![pt(0.0, 0.0), pt(0.0, 0.001), pt(0.0, 0.002), pt(1.0, 1.0)];
        StreetGraph::new(
            ModeProfile::car(),
            nodes,
            vec![10, 20, 30, 40],
            vec![edge(0, 1, 100.0), edge(1, 2, 100.0), edge(0, 2, 250.0)],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_weights() {
        let err = StreetGraph::new(ModeProfile::car(), vec![pt(0.0, 0.0); 2], vec![1, 2], vec![edge(0, 1, 0.0)]);
        assert!(matches!(err, Err(RoutingError::BadWeight { .. })));
        let err = StreetGraph::new(ModeProfile::car(), vec![pt(0.0, 0.0); 2], vec![1, 2], vec![edge(0, 5, 1.0)]);
        assert_eq!(err.unwrap_err(), RoutingError::NodeOutOfRange(5));
    }

    #[test]
    fn self_path_costs_zero() {
        let g = small();
        let r = shortest_cost(&g, 1, &[1], RouteMetric::Distance).unwrap();
        assert_eq!(r[0].as_ref().unwrap().cost, 0.0);
    }

    #[test]
    fn unreachable_is_none() {
        let g = small();
        let r = shortest_cost(&g, 0, &[3, 2], RouteMetric::Distance).unwrap();
        assert!(r[0].is_none());
        assert_eq!(r[1].as_ref().unwrap().cost, 200.0);
        // Direction matters: 2 has no outgoing edges.
        assert!(shortest_cost(&g, 2, &[0], RouteMetric::Distance).unwrap()[0].is_none());
    }

    #[test]
    fn secondary_and_path() {
        let g = small();
        let r = shortest_paths(&g, 0, &[2], RouteMetric::Time).unwrap();
        let r = r[0].as_ref().unwrap();
        assert_eq!(r.cost, 100.0);
        assert_eq!(r.secondary, 200.0);
        assert_eq!(r.path.as_deref(), Some(&[0, 1, 2][..]));
    }

    #[test]
    fn backward_search_gives_costs_to_source() {
        let g = small();
        let r = Router::new(&g)
            .one_to_many(2, &[0, 1, 3], RouteMetric::Distance, SearchDirection::Backward, true)
            .unwrap();
        assert_eq!(r[0].as_ref().unwrap().cost, 200.0);
        assert_eq!(r[0].as_ref().unwrap().path.as_deref(), Some(&[0, 1, 2][..]));
        assert_eq!(r[1].as_ref().unwrap().cost, 100.0);
        assert!(r[2].is_none());
    }

    #[test]
    fn snap_ties_prefer_lowest_index() {
        let nodes = vec![pt(0.0, -0.001), pt(0.0, 0.001), pt(0.0, 0.001)];
        let g = StreetGraph::new(ModeProfile::foot(), nodes, vec![1, 2, 3], vec![]).unwrap();
        assert_eq!(g.snap(pt(0.0, 0.0)).unwrap(), 0);
        assert_eq!(g.snap(pt(0.0, 0.001)).unwrap(), 1);
    }

    #[test]
    fn snap_on_empty_graph_fails() {
        let g = StreetGraph::new(ModeProfile::foot(), vec![], vec![], vec![]).unwrap();
        assert_eq!(g.snap(pt(0.0, 0.0)), Err(RoutingError::EmptyGraph));
    }

    #[test]
    fn route_needs_two_waypoints() {
        let g = small();
        assert_eq!(
            route(&g, &[pt(0.0, 0.0)], RouteMetric::Time).unwrap_err(),
            RoutingError::TooFewWaypoints(1)
        );
    }

    #[test]
    fn route_same_point_single_zero_leg() {
        let g = small();
        let s = route(&g, &[pt(0.0, 0.0), pt(0.0, 0.0)], RouteMetric::Time).unwrap();
        assert_eq!(s.legs.len(), 1);
        assert_eq!(s.total, Some((0.0, 0.0)));
    }

    #[test]
    fn unreachable_leg_marks_route() {
        let g = small();
        let s = route(&g, &[pt(0.0, 0.0), pt(0.0, 0.002), pt(1.0, 1.0)], RouteMetric::Distance).unwrap();
        assert!(s.legs[0].is_some());
        assert!(s.legs[1].is_none());
        assert_eq!(s.total, None);
    }

    #[test]
    fn table_single_point() {
        let g = small();
        let t = table(&g, &[pt(0.0, 0.0)], &[pt(0.0, 0.0)], RouteMetric::Time).unwrap();
        assert_eq!(t[0][0].as_ref().unwrap().cost, 0.0);
        assert_eq!(table(&g, &[], &[pt(0.0, 0.0)], RouteMetric::Time), Err(RoutingError::EmptyTable));
    }

    #[test]
    fn disconnected_origin_row_unreachable() {
        let g = small();
        let t = table(&g, &[pt(1.0, 1.0)], &[pt(0.0, 0.0), pt(0.0, 0.002)], RouteMetric::Time).unwrap();
        assert!(t[0].iter().all(Option::is_none));
    }

    #[test]
    fn router_reuse_gives_same_answers() {
        let g = small();
        let mut r = Router::new(&g);
        let a = r.shortest_cost(0, &[2], RouteMetric::Distance).unwrap();
        let _ = r.shortest_cost(1, &[2], RouteMetric::Distance).unwrap();
        let b = r.shortest_cost(0, &[2], RouteMetric::Distance).unwrap();
        assert_eq!(a, b);
    }
}
