//! Bus lines: GTFS ingestion, timetable estimation from car routing,
//! per-line stop indexes, reachable-line search and the single-ride planner.
//!
//! A line is one branch of one route in one direction, so it is a directed
//! path of stops. Its timetable holds cumulative seconds from the first
//! stop; the ride between two stops is a subtraction, and a negative result
//! means the trip runs against the line's direction.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::GeoPoint;
use crate::routing::{route_with, NodeIndex, RouteMetric, Router, RoutingError, SearchDirection, StreetGraph};
use crate::spatial::{QuadTree, SpatialError};

/// Marker for a ride that runs against the line's direction.
pub const INFEASIBLE: f64 = f64::INFINITY;

#[derive(Debug, Error)]
pub enum TransitError {
    #[error("GTFS feed is missing {0}")]
    MissingFile(PathBuf),
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("stop {stop_id}: {message}")]
    BadStop { stop_id: String, message: String },
    #[error("trip {trip_id} references unknown stop {stop_id}")]
    UnknownStop { trip_id: String, stop_id: String },
    #[error("line {line_id}: {message}")]
    BadLine { line_id: String, message: String },
    #[error("line {0} has no timetable")]
    NoTimetable(String),
    #[error("duplicate line id {0}")]
    DuplicateLine(String),
    #[error("stop index {index} out of range for line {line_id} with {len} stops")]
    StopIndex { line_id: String, index: usize, len: usize },
    #[error("line {line_id}: no car route between stops {leg} and {}", leg + 1)]
    Unreachable { line_id: String, leg: usize },
    #[error("bus time multiplier must be positive, got {0}")]
    Multiplier(f64),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub stop_id: String,
    pub location: GeoPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimetableSource {
    GtfsStopTimes,
    Estimated,
}

/// Directed stop sequence with an optional cumulative timetable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LineRecord", into = "LineRecord")]
pub struct BusLine {
    line_id: String,
    route_id: String,
    stops: Vec<Stop>,
    timetable: Option<Vec<f64>>,
    source: Option<TimetableSource>,
}

#[derive(Serialize, Deserialize)]
struct LineRecord {
    line_id: String,
    route_id: String,
    stops: Vec<Stop>,
    #[serde(default)]
    timetable: Option<Vec<f64>>,
    #[serde(default)]
    timetable_source: Option<TimetableSource>,
}

impl TryFrom<LineRecord> for BusLine {
    type Error = TransitError;
    fn try_from(r: LineRecord) -> Result<Self, TransitError> {
        let line = BusLine::new(r.line_id, r.route_id, r.stops)?;
        match (r.timetable, r.timetable_source) {
            (Some(t), Some(s)) => line.with_timetable(t, s),
            (None, None) => Ok(line),
            _ => Err(TransitError::BadLine {
                line_id: line.line_id,
                message: "timetable and timetable_source must appear together".into(),
            }),
        }
    }
}

impl From<BusLine> for LineRecord {
    fn from(l: BusLine) -> Self {
        LineRecord {
            line_id: l.line_id,
            route_id: l.route_id,
            stops: l.stops,
            timetable: l.timetable,
            timetable_source: l.source,
        }
    }
}

impl BusLine {
    pub fn new(line_id: impl Into<String>, route_id: impl Into<String>, stops: Vec<Stop>) -> Result<Self, TransitError> {
        let line_id = line_id.into();
        if stops.len() < 2 {
            return Err(TransitError::BadLine {
                line_id,
                message: format!("needs at least 2 stops, has {}", stops.len()),
            });
        }
        Ok(BusLine {
            line_id,
            route_id: route_id.into(),
            stops,
            timetable: None,
            source: None,
        })
    }

    /// Attaches a cumulative timetable: same length as the stops, starting
    /// at 0 and never decreasing.
    pub fn with_timetable(mut self, timetable: Vec<f64>, source: TimetableSource) -> Result<Self, TransitError> {
        let bad = |message: String| TransitError::BadLine {
            line_id: self.line_id.clone(),
            message,
        };
        if timetable.len() != self.stops.len() {
            return Err(bad(format!(
                "timetable has {} entries for {} stops",
                timetable.len(),
                self.stops.len()
            )));
        }
        if timetable[0] != 0.0 {
            return Err(bad("timetable must start at 0".into()));
        }
        if timetable.iter().any(|t| !t.is_finite()) || timetable.windows(2).any(|w| w[1] < w[0]) {
            return Err(bad("timetable must be finite and non-decreasing".into()));
        }
        self.timetable = Some(timetable);
        self.source = Some(source);
        Ok(self)
    }

    pub fn line_id(&self) -> &str {
        &self.line_id
    }

    pub fn route_id(&self) -> &str {
        &self.route_id
    }

    pub fn stops(&self) -> &[Stop] {
        &self.stops
    }

    pub fn timetable(&self) -> Option<&[f64]> {
        self.timetable.as_deref()
    }

    pub fn timetable_source(&self) -> Option<TimetableSource> {
        self.source
    }

    /// Same stops in the opposite order, timetable dropped.
    pub fn reversed(&self, line_id: impl Into<String>) -> BusLine {
        let mut stops = self.stops.clone();
        stops.reverse();
        BusLine {
            line_id: line_id.into(),
            route_id: self.route_id.clone(),
            stops,
            timetable: None,
            source: None,
        }
    }
}

/// Seconds riding `line` from stop `board` to stop `alight`, or
/// [`INFEASIBLE`] when `alight` comes before `board` in time.
pub fn bus_travel_time(line: &BusLine, board: usize, alight: usize) -> Result<f64, TransitError> {
    let timetable = line
        .timetable()
        .ok_or_else(|| TransitError::NoTimetable(line.line_id.clone()))?;
    for index in [board, alight] {
        if index >= timetable.len() {
            return Err(TransitError::StopIndex {
                line_id: line.line_id.clone(),
                index,
                len: timetable.len(),
            });
        }
    }
    let time = timetable[alight] - timetable[board];
    if time < 0.0 {
        return Ok(INFEASIBLE);
    }
    Ok(time)
}

// ---------------------------------------------------------------------------
// GTFS

#[derive(Debug, Clone, PartialEq)]
pub struct GtfsFeed {
    pub stops: Vec<Stop>,
    pub lines: Vec<BusLine>,
}

#[derive(Deserialize)]
struct StopRow {
    stop_id: String,
    stop_name: Option<String>,
    stop_lat: Option<f64>,
    stop_lon: Option<f64>,
}

#[derive(Deserialize)]
struct RouteRow {
    route_id: String,
}

#[derive(Deserialize)]
struct TripRow {
    route_id: String,
    trip_id: String,
    direction_id: Option<String>,
    shape_id: Option<String>,
}

#[derive(Deserialize)]
struct StopTimeRow {
    trip_id: String,
    arrival_time: Option<String>,
    departure_time: Option<String>,
    stop_id: String,
    stop_sequence: u32,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, TransitError> {
    let file = File::open(path).map_err(|_| TransitError::MissingFile(path.to_path_buf()))?;
    let csv_err = |source| TransitError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    reader.deserialize().map(|r| r.map_err(csv_err)).collect()
}

/// Parses `HH:MM:SS` into seconds after midnight. Hours past 23 are valid
/// for trips running over midnight.
pub fn parse_gtfs_time(value: &str) -> Option<u32> {
    let mut parts = value.trim().split(':');
    let h: u32 = parts.next()?.parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    let s: u32 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || m >= 60 || s >= 60 {
        return None;
    }
    Some(h * 3600 + m * 60 + s)
}

/// Reads `stops.txt`, `routes.txt`, `trips.txt` and, if present,
/// `stop_times.txt`.
///
/// Trips are grouped into lines by route, direction and branch (the
/// `shape_id` when given, otherwise the stop pattern). Each line takes its
/// stops from the group's trip with the most stops (ties: smallest
/// `trip_id`). If every stop of that trip has a time, the line gets a GTFS
/// timetable; otherwise it is left for estimation.
pub fn parse_gtfs(dir: &Path) -> Result<GtfsFeed, TransitError> {
    let stop_rows: Vec<StopRow> = read_rows(&dir.join("stops.txt"))?;
    let route_rows: Vec<RouteRow> = read_rows(&dir.join("routes.txt"))?;
    let trip_rows: Vec<TripRow> = read_rows(&dir.join("trips.txt"))?;
    let stop_times_path = dir.join("stop_times.txt");
    let stop_time_rows: Vec<StopTimeRow> = if stop_times_path.exists() {
        read_rows(&stop_times_path)?
    } else {
        log::warn!("{} not found; no trip has a stop sequence", stop_times_path.display());
        Vec::new()
    };

    let mut stops = Vec::with_capacity(stop_rows.len());
    let mut stop_lookup: HashMap<String, usize> = HashMap::new();
    for row in stop_rows {
        let (Some(lat), Some(lon)) = (row.stop_lat, row.stop_lon) else {
            log::warn!("stop {} has no coordinates; skipped", row.stop_id);
            continue;
        };
        let location = GeoPoint::new(lat, lon).map_err(|e| TransitError::BadStop {
            stop_id: row.stop_id.clone(),
            message: e.to_string(),
        })?;
        if stop_lookup.insert(row.stop_id.clone(), stops.len()).is_some() {
            return Err(TransitError::BadStop {
                stop_id: row.stop_id,
                message: "duplicate stop_id".into(),
            });
        }
        stops.push(Stop {
            stop_id: row.stop_id,
            location,
            name: row.stop_name.filter(|n| !n.is_empty()),
        });
    }

    let routes: HashSet<String> = route_rows.into_iter().map(|r| r.route_id).collect();
    let mut trips: BTreeMap<String, TripRow> = BTreeMap::new();
    for trip in trip_rows {
        if !routes.contains(&trip.route_id) {
            log::warn!("trip {} references unknown route {}; skipped", trip.trip_id, trip.route_id);
            continue;
        }
        trips.insert(trip.trip_id.clone(), trip);
    }

    let mut calls: BTreeMap<String, Vec<StopTimeRow>> = BTreeMap::new();
    for row in stop_time_rows {
        if !trips.contains_key(&row.trip_id) {
            log::warn!("stop_times row for unknown trip {}; skipped", row.trip_id);
            continue;
        }
        if !stop_lookup.contains_key(&row.stop_id) {
            return Err(TransitError::UnknownStop {
                trip_id: row.trip_id,
                stop_id: row.stop_id,
            });
        }
        calls.entry(row.trip_id.clone()).or_default().push(row);
    }
    for rows in calls.values_mut() {
        rows.sort_by_key(|r| r.stop_sequence);
    }

    // (route, direction) -> branch key -> trip ids (ascending).
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Branch {
        Shape(String),
        Pattern(Vec<String>),
    }
    let mut groups: BTreeMap<(String, String), BTreeMap<Branch, Vec<String>>> = BTreeMap::new();
    for (trip_id, trip) in &trips {
        let Some(rows) = calls.get(trip_id) else {
            log::warn!("trip {trip_id} has no stop_times; skipped");
            continue;
        };
        let branch = match trip.shape_id.as_deref().filter(|s| !s.is_empty()) {
            Some(shape) => Branch::Shape(shape.to_string()),
            None => Branch::Pattern(rows.iter().map(|r| r.stop_id.clone()).collect()),
        };
        let direction = trip.direction_id.clone().filter(|d| !d.is_empty()).unwrap_or_else(|| "0".into());
        groups
            .entry((trip.route_id.clone(), direction))
            .or_default()
            .entry(branch)
            .or_default()
            .push(trip_id.clone());
    }

    let mut lines = Vec::new();
    for ((route_id, direction), branches) in groups {
        // Pattern branches are labelled by the order of their first trip id.
        let mut pattern_order: Vec<&String> = branches
            .iter()
            .filter(|(b, _)| matches!(b, Branch::Pattern(_)))
            .map(|(_, ids)| &ids[0])
            .collect();
        pattern_order.sort();
        for (branch, trip_ids) in &branches {
            let label = match branch {
                Branch::Shape(s) => s.clone(),
                Branch::Pattern(_) => {
                    let pos = pattern_order.iter().position(|t| *t == &trip_ids[0]).unwrap_or(0);
                    format!("p{pos}")
                }
            };
            let line_id = format!("{route_id}:{direction}:{label}");
            // Most stops wins; trip_ids are sorted so the first maximum is the smallest id.
            let rep = trip_ids
                .iter()
                .fold(None::<&String>, |best, t| match best {
                    Some(b) if calls[b].len() >= calls[t].len() => Some(b),
                    _ => Some(t),
                })
                .expect("non-empty group");
            let rows = &calls[rep];
            let line_stops: Vec<Stop> = rows.iter().map(|r| stops[stop_lookup[&r.stop_id]].clone()).collect();
            let line = match BusLine::new(line_id.clone(), route_id.clone(), line_stops) {
                Ok(line) => line,
                Err(e) => {
                    log::warn!("{e}; skipped");
                    continue;
                }
            };
            let times: Option<Vec<u32>> = rows
                .iter()
                .map(|r| {
                    r.arrival_time
                        .as_deref()
                        .or(r.departure_time.as_deref())
                        .and_then(parse_gtfs_time)
                })
                .collect();
            let line = match times {
                Some(times) => {
                    let t0 = times[0];
                    let offsets = times.iter().map(|&t| t as f64 - t0 as f64).collect();
                    match line.clone().with_timetable(offsets, TimetableSource::GtfsStopTimes) {
                        Ok(timed) => timed,
                        Err(e) => {
                            log::warn!("trip {rep}: {e}; timetable will be estimated");
                            line
                        }
                    }
                }
                None => line,
            };
            lines.push(line);
        }
    }
    lines.sort_by(|a, b| a.line_id.cmp(&b.line_id));
    Ok(GtfsFeed { stops, lines })
}

// ---------------------------------------------------------------------------
// Timetable estimation

/// Timetable from driving the line's stops in order on the car graph,
/// scaled by `multiplier`.
pub fn estimate_timetable(line: &BusLine, car_graph: &StreetGraph, multiplier: f64) -> Result<BusLine, TransitError> {
    estimate_with(&mut Router::new(car_graph), line, multiplier)
}

fn estimate_with(router: &mut Router<'_>, line: &BusLine, multiplier: f64) -> Result<BusLine, TransitError> {
    if !(multiplier.is_finite() && multiplier > 0.0) {
        return Err(TransitError::Multiplier(multiplier));
    }
    let points: Vec<GeoPoint> = line.stops.iter().map(|s| s.location).collect();
    let summary = route_with(router, &points, RouteMetric::Time)?;
    let mut cumulative = 0.0;
    let mut timetable = Vec::with_capacity(points.len());
    timetable.push(0.0);
    for (leg, result) in summary.legs.iter().enumerate() {
        let result = result.as_ref().ok_or_else(|| TransitError::Unreachable {
            line_id: line.line_id.clone(),
            leg,
        })?;
        cumulative += result.cost;
        timetable.push(multiplier * cumulative);
    }
    let mut out = line.clone();
    out.timetable = None;
    out.source = None;
    out.with_timetable(timetable, TimetableSource::Estimated)
}

/// A line dropped during estimation, with the reason.
pub type EstimationFailure = (String, TransitError);

/// Estimates every line that lacks a timetable, in parallel. Lines whose
/// estimation fails are returned separately with the reason.
pub fn estimate_missing(
    lines: Vec<BusLine>,
    car_graph: &StreetGraph,
    multiplier: f64,
) -> Result<(Vec<BusLine>, Vec<EstimationFailure>), TransitError> {
    if !(multiplier.is_finite() && multiplier > 0.0) {
        return Err(TransitError::Multiplier(multiplier));
    }
    let results: Vec<Result<BusLine, EstimationFailure>> = lines
        .into_par_iter()
        .map_init(
            || Router::new(car_graph),
            |router, line| {
                if line.timetable.is_some() {
                    return Ok(line);
                }
                estimate_with(router, &line, multiplier).map_err(|e| (line.line_id.clone(), e))
            },
        )
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(line) => ok.push(line),
            Err((id, e)) => {
                log::warn!("line {id} excluded: {e}");
                failed.push((id, e));
            }
        }
    }
    Ok((ok, failed))
}

// ---------------------------------------------------------------------------
// Reachable lines

/// Timed lines sorted by id, each with a quadtree over its stops.
#[derive(Debug, Clone, Default)]
pub struct TransitIndex {
    lines: Vec<BusLine>,
    trees: Vec<QuadTree>,
}

/// Builds one stop quadtree per line. Every line must carry a timetable.
pub fn index_lines(mut lines: Vec<BusLine>) -> Result<TransitIndex, TransitError> {
    lines.sort_by(|a, b| a.line_id.cmp(&b.line_id));
    for pair in lines.windows(2) {
        if pair[0].line_id == pair[1].line_id {
            return Err(TransitError::DuplicateLine(pair[0].line_id.clone()));
        }
    }
    if let Some(untimed) = lines.iter().find(|l| l.timetable.is_none()) {
        return Err(TransitError::NoTimetable(untimed.line_id.clone()));
    }
    let trees = lines
        .iter()
        .map(|l| QuadTree::build(l.stops.iter().enumerate().map(|(i, s)| (s.location, i)).collect()))
        .collect();
    Ok(TransitIndex { lines, trees })
}

impl TransitIndex {
    pub fn lines(&self) -> &[BusLine] {
        &self.lines
    }

    pub fn line(&self, i: usize) -> &BusLine {
        &self.lines[i]
    }

    pub fn tree(&self, i: usize) -> &QuadTree {
        &self.trees[i]
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// A line with a stop strictly within the walking radius, and its closest stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachableLine {
    /// Position in [`TransitIndex::lines`].
    pub line: usize,
    pub stop_index: usize,
    pub walk_distance_m: f64,
}

/// For each line with a stop closer than `radius_m` to `p`, that line's
/// closest stop. Sorted by line id.
pub fn reachable_lines(p: GeoPoint, index: &TransitIndex, radius_m: f64) -> Result<Vec<ReachableLine>, TransitError> {
    let mut out = Vec::new();
    for (line, tree) in index.trees.iter().enumerate() {
        if let Some(hit) = tree.nearest_within(p, radius_m)? {
            out.push(ReachableLine {
                line,
                stop_index: hit.id,
                walk_distance_m: hit.distance_m,
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Single-ride planner

#[derive(Debug, Clone, PartialEq)]
pub struct BusRide {
    pub line_id: String,
    pub board_index: usize,
    pub board_stop_id: String,
    pub alight_index: usize,
    pub alight_stop_id: String,
    pub walk_to_s: f64,
    pub ride_s: f64,
    pub walk_from_s: f64,
}

/// Walk, one bus ride, walk; or walking the whole way. Waiting at the stop
/// is not counted.
#[derive(Debug, Clone, PartialEq)]
pub enum Itinerary {
    /// `walk_s` is infinite when the foot network has no path.
    WalkOnly { walk_s: f64 },
    BusRide(BusRide),
}

impl Itinerary {
    pub fn total_s(&self) -> f64 {
        match self {
            Itinerary::WalkOnly { walk_s } => *walk_s,
            Itinerary::BusRide(r) => r.walk_to_s + r.ride_s + r.walk_from_s,
        }
    }

    pub fn is_bus(&self) -> bool {
        matches!(self, Itinerary::BusRide(_))
    }
}

/// Shared read-only planner state: the foot graph, the line index and each
/// stop's snapped foot node.
pub struct TransitNetwork<'a> {
    foot: &'a StreetGraph,
    index: &'a TransitIndex,
    stop_nodes: Vec<Vec<NodeIndex>>,
}

impl<'a> TransitNetwork<'a> {
    pub fn new(foot: &'a StreetGraph, index: &'a TransitIndex) -> Result<Self, TransitError> {
        let stop_nodes = index
            .lines
            .iter()
            .map(|l| l.stops.iter().map(|s| foot.snap(s.location)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TransitNetwork { foot, index, stop_nodes })
    }

    pub fn foot(&self) -> &'a StreetGraph {
        self.foot
    }

    pub fn index(&self) -> &'a TransitIndex {
        self.index
    }

    /// Best single-ride itinerary from `p` to `q`.
    ///
    /// Every line reachable from both points is tried, boarding at the stop
    /// closest to `p` and alighting at the stop closest to `q`; each walk leg
    /// is a foot-network time. Rides against the line direction, or with an
    /// unwalkable leg, are discarded. With no usable line the itinerary is
    /// the foot-network walk from `p` to `q`.
    pub fn plan(
        &self,
        router: &mut Router<'_>,
        p: GeoPoint,
        q: GeoPoint,
        reach_p: &[ReachableLine],
        reach_q: &[ReachableLine],
    ) -> Result<Itinerary, TransitError> {
        let from_q: HashMap<usize, &ReachableLine> = reach_q.iter().map(|r| (r.line, r)).collect();
        let mut rides = Vec::new();
        for rp in reach_p {
            let Some(rq) = from_q.get(&rp.line) else { continue };
            let ride = bus_travel_time(&self.index.lines[rp.line], rp.stop_index, rq.stop_index)?;
            if ride.is_finite() {
                rides.push((rp.line, rp.stop_index, rq.stop_index, ride));
            }
        }

        let src = self.foot.snap(p)?;
        let dst = self.foot.snap(q)?;
        let mut best: Option<BusRide> = None;
        if !rides.is_empty() {
            let boards: Vec<NodeIndex> = rides.iter().map(|r| self.stop_nodes[r.0][r.1]).collect();
            let alights: Vec<NodeIndex> = rides.iter().map(|r| self.stop_nodes[r.0][r.2]).collect();
            let to_board = router.one_to_many(src, &boards, RouteMetric::Time, SearchDirection::Forward, false)?;
            let from_alight = router.one_to_many(dst, &alights, RouteMetric::Time, SearchDirection::Backward, false)?;
            let mut best_total = f64::INFINITY;
            for (i, &(line, board, alight, ride)) in rides.iter().enumerate() {
                let (Some(walk_to), Some(walk_from)) = (&to_board[i], &from_alight[i]) else {
                    continue;
                };
                let total = walk_to.cost + ride + walk_from.cost;
                // Rides are in line-id order, so strict < keeps the first id on ties.
                if total < best_total {
                    best_total = total;
                    let l = &self.index.lines[line];
                    best = Some(BusRide {
                        line_id: l.line_id.clone(),
                        board_index: board,
                        board_stop_id: l.stops[board].stop_id.clone(),
                        alight_index: alight,
                        alight_stop_id: l.stops[alight].stop_id.clone(),
                        walk_to_s: walk_to.cost,
                        ride_s: ride,
                        walk_from_s: walk_from.cost,
                    });
                }
            }
        }
        if let Some(ride) = best {
            return Ok(Itinerary::BusRide(ride));
        }
        let walk = router.one_to_many(src, &[dst], RouteMetric::Time, SearchDirection::Forward, false)?;
        Ok(Itinerary::WalkOnly {
            walk_s: walk[0].as_ref().map_or(f64::INFINITY, |r| r.cost),
        })
    }
}

/// One-off convenience wrapper around [`TransitNetwork::plan`].
pub fn plan_single_ride(
    p: GeoPoint,
    q: GeoPoint,
    reach_p: &[ReachableLine],
    reach_q: &[ReachableLine],
    foot: &StreetGraph,
    index: &TransitIndex,
) -> Result<Itinerary, TransitError> {
    let network = TransitNetwork::new(foot, index)?;
    network.plan(&mut Router::new(foot), p, q, reach_p, reach_q)
}
