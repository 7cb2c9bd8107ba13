//! Independent oracles shared by the integration and acceptance suites.
//! Nothing here calls the engine's search, snapping or planning code.

#![allow(dead_code)]

use std::collections::HashMap;

use access_core::geodesy::{haversine_m, GeoPoint};
use access_core::nearest::OpportunitySet;
use access_core::osm::{extract_street_graph, extract_uncompressed, RawOsmData};
use access_core::profile::ModeProfile;
use access_core::routing::{RouteMetric, StreetGraph};
use access_core::synth::{generate_city, CityParams, SynthCity};
use access_core::transit::BusLine;
use petgraph::graph::{DiGraph, NodeIndex};

pub fn pt(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}

/// Nearest node by full scan; ties go to the lowest index.
pub fn linear_snap(g: &StreetGraph, p: GeoPoint) -> u32 {
    let mut best = (f64::INFINITY, 0u32);
    for (i, n) in g.nodes().iter().enumerate() {
        let d = haversine_m(p, *n);
        if d < best.0 {
            best = (d, i as u32);
        }
    }
    best.1
}

fn weight(length_m: f64, travel_time_s: f64, metric: RouteMetric) -> f64 {
    match metric {
        RouteMetric::Distance => length_m,
        RouteMetric::Time => travel_time_s,
    }
}

/// The street graph as a petgraph graph, optionally with edges reversed.
pub fn to_petgraph(g: &StreetGraph, metric: RouteMetric, reversed: bool) -> DiGraph<(), f64> {
    let mut pg = DiGraph::with_capacity(g.node_count(), g.edge_count());
    for _ in 0..g.node_count() {
        pg.add_node(());
    }
    for e in g.edges() {
        let (a, b) = if reversed { (e.to, e.from) } else { (e.from, e.to) };
        pg.add_edge(NodeIndex::new(a as usize), NodeIndex::new(b as usize), weight(e.length_m, e.travel_time_s, metric));
    }
    pg
}

/// Full single-source costs by petgraph's Dijkstra.
pub fn all_costs(pg: &DiGraph<(), f64>, src: u32) -> Vec<Option<f64>> {
    let map = petgraph::algo::dijkstra(pg, NodeIndex::new(src as usize), None, |e| *e.weight());
    (0..pg.node_count()).map(|i| map.get(&NodeIndex::new(i)).copied()).collect()
}

/// Minimum over all simple paths from `src`, by depth-first enumeration.
/// Branches are cut only when they cannot improve on a path already found
/// to the same node, so the result is the exact minimum path sum.
pub fn dfs_costs(g: &StreetGraph, src: u32, metric: RouteMetric) -> Vec<Option<f64>> {
    let n = g.node_count();
    let mut best = vec![f64::INFINITY; n];
    let mut on_path = vec![false; n];
    fn go(g: &StreetGraph, v: u32, cost: f64, metric: RouteMetric, best: &mut [f64], on_path: &mut [bool]) {
        if cost >= best[v as usize] {
            return;
        }
        best[v as usize] = cost;
        on_path[v as usize] = true;
        for e in g.out_edges(v) {
            if !on_path[e.to as usize] {
                go(g, e.to, cost + weight(e.length_m, e.travel_time_s, metric), metric, best, on_path);
            }
        }
        on_path[v as usize] = false;
    }
    go(g, src, 0.0, metric, &mut best, &mut on_path);
    best.into_iter().map(|c| c.is_finite().then_some(c)).collect()
}

/// Count of simple paths and their minimum cost from `src` to `dst`,
/// enumerating every simple path without pruning.
pub fn enumerate_paths(g: &StreetGraph, src: u32, dst: u32, metric: RouteMetric) -> (usize, f64) {
    fn go(g: &StreetGraph, v: u32, dst: u32, cost: f64, metric: RouteMetric, on: &mut [bool], acc: &mut (usize, f64)) {
        if v == dst {
            acc.0 += 1;
            acc.1 = acc.1.min(cost);
            return;
        }
        on[v as usize] = true;
        for e in g.out_edges(v) {
            if !on[e.to as usize] {
                go(g, e.to, dst, cost + weight(e.length_m, e.travel_time_s, metric), metric, on, acc);
            }
        }
        on[v as usize] = false;
    }
    let mut acc = (0, f64::INFINITY);
    go(g, src, dst, 0.0, metric, &mut vec![false; g.node_count()], &mut acc);
    acc
}

/// Network-nearest destination over every destination: `(entry, cost)`,
/// ties to the lowest entry.
pub fn street_oracle(g: &StreetGraph, pg: &DiGraph<(), f64>, p: GeoPoint, dest_nodes: &[u32]) -> Option<(usize, f64)> {
    let costs = all_costs(pg, linear_snap(g, p));
    let mut best: Option<(usize, f64)> = None;
    for (entry, &node) in dest_nodes.iter().enumerate() {
        if let Some(c) = costs[node as usize] {
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((entry, c));
            }
        }
    }
    best
}

pub fn dest_nodes(g: &StreetGraph, set: &OpportunitySet) -> Vec<u32> {
    set.entries().iter().map(|e| linear_snap(g, e.location)).collect()
}

/// Closest stop of `line` strictly within `radius_m` of `p`, by scan.
pub fn closest_stop(line: &BusLine, p: GeoPoint, radius_m: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, s) in line.stops().iter().enumerate() {
        let d = haversine_m(p, s.location);
        if d < radius_m && best.is_none_or(|(b, _)| d < b) {
            best = Some((d, i));
        }
    }
    best.map(|b| b.1)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleTrip {
    Ride { line_id: String, board: usize, alight: usize, total: f64 },
    Walk(Option<f64>),
}

impl OracleTrip {
    pub fn total(&self) -> Option<f64> {
        match self {
            OracleTrip::Ride { total, .. } => Some(*total),
            OracleTrip::Walk(w) => *w,
        }
    }
}

/// Foot graph prepared for transit oracles: forward and reversed petgraph
/// views with per-source cost caches.
pub struct FootOracle<'g> {
    pub g: &'g StreetGraph,
    fwd: DiGraph<(), f64>,
    rev: DiGraph<(), f64>,
    fwd_cache: HashMap<u32, Vec<Option<f64>>>,
    rev_cache: HashMap<u32, Vec<Option<f64>>>,
}

impl<'g> FootOracle<'g> {
    pub fn new(g: &'g StreetGraph) -> Self {
        FootOracle {
            g,
            fwd: to_petgraph(g, RouteMetric::Time, false),
            rev: to_petgraph(g, RouteMetric::Time, true),
            fwd_cache: HashMap::new(),
            rev_cache: HashMap::new(),
        }
    }

    pub fn from(&mut self, src: u32) -> &[Option<f64>] {
        let pg = &self.fwd;
        self.fwd_cache.entry(src).or_insert_with(|| all_costs(pg, src))
    }

    /// Costs from every node to `dst`, accumulated from `dst` outward.
    pub fn to(&mut self, dst: u32) -> &[Option<f64>] {
        let pg = &self.rev;
        self.rev_cache.entry(dst).or_insert_with(|| all_costs(pg, dst))
    }

    /// Exhaustive single-ride enumeration over every line that has a stop
    /// within the radius of both points, boarding at the stop nearest `p`
    /// and alighting at the stop nearest `q`; lines are in id order and
    /// ties keep the first.
    pub fn plan(&mut self, lines: &[BusLine], p: GeoPoint, q: GeoPoint, radius_m: f64) -> OracleTrip {
        let sp = linear_snap(self.g, p);
        let sq = linear_snap(self.g, q);
        let mut best: Option<OracleTrip> = None;
        for line in lines {
            let (Some(b), Some(a)) = (closest_stop(line, p, radius_m), closest_stop(line, q, radius_m)) else {
                continue;
            };
            let t = line.timetable().unwrap();
            let ride = t[a] - t[b];
            if ride < 0.0 {
                continue;
            }
            let nb = linear_snap(self.g, line.stops()[b].location);
            let na = linear_snap(self.g, line.stops()[a].location);
            let Some(walk_to) = self.from(sp)[nb as usize] else { continue };
            let Some(walk_from) = self.to(sq)[na as usize] else { continue };
            let total = walk_to + ride + walk_from;
            if best.as_ref().is_none_or(|t| total < t.total().unwrap()) {
                best = Some(OracleTrip::Ride {
                    line_id: line.line_id().to_string(),
                    board: b,
                    alight: a,
                    total,
                });
            }
        }
        best.unwrap_or_else(|| OracleTrip::Walk(self.from(sp)[sq as usize]))
    }
}

/// Default synthetic city with the given size and seed.
pub fn city(rows: usize, cols: usize, seed: u64) -> SynthCity {
    generate_city(&CityParams {
        rows,
        cols,
        seed,
        ..CityParams::default()
    })
}

pub fn foot_graph(city: &SynthCity) -> StreetGraph {
    extract_street_graph(&city.raw, &ModeProfile::foot()).unwrap()
}

/// Plain grid city with five estimated lines: three generated lines plus
/// two of them reversed, so some rides run against a line's direction.
pub struct TransitFixture {
    pub city: SynthCity,
    pub foot: StreetGraph,
    pub lines: Vec<BusLine>,
}

pub fn transit_fixture(rows: usize, cols: usize, spacing_m: f64, stop_every: usize) -> TransitFixture {
    let city = generate_city(&CityParams::plain_grid(rows, cols, spacing_m));
    let foot = foot_graph(&city);
    let car = extract_street_graph(&city.raw, &ModeProfile::car()).unwrap();
    let mut untimed = city.bus_lines(3, stop_every);
    let back: Vec<BusLine> = untimed[..2].iter().map(|l| l.reversed(format!("{}:1:p0", l.route_id()))).collect();
    untimed.extend(back);
    let lines = untimed
        .iter()
        .map(|l| access_core::transit::estimate_timetable(l, &car, 1.0).unwrap())
        .collect();
    TransitFixture { city, foot, lines }
}

/// Way A-B-C-D crossed at C by a one-way way C-E-F; counted by hand.
pub const T_JUNCTION: &str = r#"<osm>
  <node id="1" lat="-34.6000" lon="-58.4000"/>
  <node id="2" lat="-34.6000" lon="-58.3990"/>
  <node id="3" lat="-34.6000" lon="-58.3980"/>
  <node id="4" lat="-34.6000" lon="-58.3970"/>
  <node id="5" lat="-34.5990" lon="-58.3980"/>
  <node id="6" lat="-34.5980" lon="-58.3980"/>
  <way id="10"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><tag k="highway" v="residential"/></way>
  <way id="11"><nd ref="3"/><nd ref="5"/><nd ref="6"/><tag k="highway" v="residential"/><tag k="oneway" v="yes"/></way>
</osm>"#;

/// Compares shortest costs between every pair of nodes kept by the
/// compressed graph against the uncompressed graph, for both metrics.
/// Returns the number of finite pairs compared and the worst relative error.
pub fn apsp_check(raw: &RawOsmData, profile: &ModeProfile) -> Result<(usize, f64), String> {
    let full = extract_uncompressed(raw, profile).map_err(|e| e.to_string())?;
    let comp = extract_street_graph(raw, profile).map_err(|e| e.to_string())?;
    let map: Vec<u32> = comp
        .osm_ids()
        .iter()
        .map(|id| full.node_by_osm_id(*id).ok_or(format!("node {id} missing from raw graph")))
        .collect::<Result<_, _>>()?;
    let (mut compared, mut worst) = (0, 0.0f64);
    for metric in [RouteMetric::Distance, RouteMetric::Time] {
        let pf = to_petgraph(&full, metric, false);
        let pc = to_petgraph(&comp, metric, false);
        for s in 0..comp.node_count() as u32 {
            let cf = all_costs(&pf, map[s as usize]);
            let cc = all_costs(&pc, s);
            for t in 0..comp.node_count() {
                match (cc[t], cf[map[t] as usize]) {
                    (Some(a), Some(b)) => {
                        worst = worst.max((a - b).abs() / b.max(1e-12));
                        compared += 1;
                    }
                    (None, None) => {}
                    other => return Err(format!("reachability differs between {s} and {t}: {other:?}")),
                }
            }
        }
    }
    Ok((compared, worst))
}
