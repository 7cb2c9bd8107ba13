//! Point quadtree over geographic coordinates.
//!
//! Built once and then queried read-only: bounded nearest-neighbour search
//! (returns nothing when no point lies strictly closer than the radius),
//! radius queries, and exact k-nearest queries. Every query prunes subtrees
//! with a conservative box-to-point lower bound, so results always match a
//! linear scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::geodesy::{haversine_m, rect_lower_bound_m, GeoPoint};

pub const DEFAULT_CAPACITY: usize = 16;
pub const DEFAULT_MAX_DEPTH: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum SpatialError {
    #[error("search radius must be positive, got {0}")]
    Radius(f64),
    #[error("quadtree capacity must be positive")]
    Capacity,
}

/// A stored point found by a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub point: GeoPoint,
    pub distance_m: f64,
}

/// Counters filled in by the `*_counted` query variants.
#[derive(Debug, Default, Clone, Copy)]
pub struct QueryStats {
    pub nodes_visited: usize,
}

#[derive(Debug, Clone, Copy)]
struct BBox {
    min_lat: f64,
    max_lat: f64,
    min_lon: f64,
    max_lon: f64,
}

impl BBox {
    fn lower_bound(&self, p: GeoPoint) -> f64 {
        rect_lower_bound_m(p, self.min_lat, self.max_lat, self.min_lon, self.max_lon)
    }

    fn contains(&self, p: GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat())
            && (self.min_lon..=self.max_lon).contains(&p.lon())
    }

    fn quadrants(&self) -> (f64, f64, [BBox; 4]) {
        let mid_lat = 0.5 * (self.min_lat + self.max_lat);
        let mid_lon = 0.5 * (self.min_lon + self.max_lon);
        let b = |min_lat, max_lat, min_lon, max_lon| BBox {
            min_lat,
            max_lat,
            min_lon,
            max_lon,
        };
        (
            mid_lat,
            mid_lon,
            [
                b(self.min_lat, mid_lat, self.min_lon, mid_lon),
                b(self.min_lat, mid_lat, mid_lon, self.max_lon),
                b(mid_lat, self.max_lat, self.min_lon, mid_lon),
                b(mid_lat, self.max_lat, mid_lon, self.max_lon),
            ],
        )
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf(Vec<u32>),
    Internal([u32; 4]),
}

#[derive(Debug, Clone)]
struct Node {
    bbox: BBox,
    depth: usize,
    kind: NodeKind,
}

#[derive(Debug, Clone)]
pub struct QuadTree {
    entries: Vec<(GeoPoint, usize)>,
    nodes: Vec<Node>,
    capacity: usize,
    max_depth: usize,
}

impl Default for QuadTree {
    fn default() -> Self {
        QuadTree::build(Vec::new())
    }
}

impl QuadTree {
    pub fn build(points: Vec<(GeoPoint, usize)>) -> Self {
        Self::with_params(points, DEFAULT_CAPACITY, DEFAULT_MAX_DEPTH)
            .expect("default capacity is positive")
    }

    pub fn with_params(
        points: Vec<(GeoPoint, usize)>,
        capacity: usize,
        max_depth: usize,
    ) -> Result<Self, SpatialError> {
        if capacity == 0 {
            return Err(SpatialError::Capacity);
        }
        let mut tree = QuadTree {
            entries: points,
            nodes: Vec::new(),
            capacity,
            max_depth,
        };
        if !tree.entries.is_empty() {
            let mut bbox = BBox {
                min_lat: f64::INFINITY,
                max_lat: f64::NEG_INFINITY,
                min_lon: f64::INFINITY,
                max_lon: f64::NEG_INFINITY,
            };
            for (p, _) in &tree.entries {
                bbox.min_lat = bbox.min_lat.min(p.lat());
                bbox.max_lat = bbox.max_lat.max(p.lat());
                bbox.min_lon = bbox.min_lon.min(p.lon());
                bbox.max_lon = bbox.max_lon.max(p.lon());
            }
            let all: Vec<u32> = (0..tree.entries.len() as u32).collect();
            tree.build_node(all, bbox, 0);
        }
        Ok(tree)
    }

    fn build_node(&mut self, members: Vec<u32>, bbox: BBox, depth: usize) -> u32 {
        let slot = self.nodes.len() as u32;
        if members.len() <= self.capacity || depth >= self.max_depth {
            self.nodes.push(Node {
                bbox,
                depth,
                kind: NodeKind::Leaf(members),
            });
            return slot;
        }
        self.nodes.push(Node {
            bbox,
            depth,
            kind: NodeKind::Internal([0; 4]),
        });
        let (mid_lat, mid_lon, boxes) = bbox.quadrants();
        let mut parts: [Vec<u32>; 4] = Default::default();
        for m in members {
            let p = self.entries[m as usize].0;
            let q = usize::from(p.lat() >= mid_lat) * 2 + usize::from(p.lon() >= mid_lon);
            parts[q].push(m);
        }
        let mut children = [0u32; 4];
        for (q, part) in parts.into_iter().enumerate() {
            children[q] = self.build_node(part, boxes[q], depth + 1);
        }
        self.nodes[slot as usize].kind = NodeKind::Internal(children);
        slot
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Every stored `(point, id)` pair, in input order.
    pub fn entries(&self) -> &[(GeoPoint, usize)] {
        &self.entries
    }

    /// Closest stored point strictly within `radius_m`; ties go to the lowest id.
    pub fn nearest_within(&self, p: GeoPoint, radius_m: f64) -> Result<Option<Neighbor>, SpatialError> {
        self.nearest_within_counted(p, radius_m, &mut QueryStats::default())
    }

    pub fn nearest_within_counted(
        &self,
        p: GeoPoint,
        radius_m: f64,
        stats: &mut QueryStats,
    ) -> Result<Option<Neighbor>, SpatialError> {
        check_radius(radius_m)?;
        Ok(self.nearest_bounded(p, radius_m, stats))
    }

    /// Closest stored point with no distance limit.
    pub fn nearest(&self, p: GeoPoint) -> Option<Neighbor> {
        self.nearest_bounded(p, f64::INFINITY, &mut QueryStats::default())
    }

    fn nearest_bounded(&self, p: GeoPoint, bound: f64, stats: &mut QueryStats) -> Option<Neighbor> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<Neighbor> = None;
        let mut best_d = bound;
        let mut stack = vec![(self.nodes[0].bbox.lower_bound(p), 0u32)];
        while let Some((lb, slot)) = stack.pop() {
            if lb >= best_d {
                continue;
            }
            stats.nodes_visited += 1;
            match &self.nodes[slot as usize].kind {
                NodeKind::Leaf(members) => {
                    for &m in members {
                        let (q, id) = self.entries[m as usize];
                        let d = haversine_m(p, q);
                        let better = match best {
                            Some(b) => d < b.distance_m || (d == b.distance_m && id < b.id),
                            None => d < bound,
                        };
                        if better {
                            best = Some(Neighbor {
                                id,
                                point: q,
                                distance_m: d,
                            });
                            // Keep equal-distance candidates reachable for the id tie-break.
                            best_d = d;
                        }
                    }
                }
                NodeKind::Internal(children) => {
                    let mut kids: Vec<(f64, u32)> = children
                        .iter()
                        .map(|&c| (self.nodes[c as usize].bbox.lower_bound(p), c))
                        .collect();
                    // Farthest pushed first so the closest box is explored next.
                    kids.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
                    stack.extend(kids);
                }
            }
        }
        best
    }

    /// All stored points strictly within `radius_m`, ascending by distance then id.
    pub fn within_radius(&self, p: GeoPoint, radius_m: f64) -> Result<Vec<Neighbor>, SpatialError> {
        check_radius(radius_m)?;
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return Ok(out);
        }
        let mut stack = vec![0u32];
        while let Some(slot) = stack.pop() {
            let node = &self.nodes[slot as usize];
            if node.bbox.lower_bound(p) >= radius_m {
                continue;
            }
            match &node.kind {
                NodeKind::Leaf(members) => {
                    for &m in members {
                        let (q, id) = self.entries[m as usize];
                        let d = haversine_m(p, q);
                        if d < radius_m {
                            out.push(Neighbor {
                                id,
                                point: q,
                                distance_m: d,
                            });
                        }
                    }
                }
                NodeKind::Internal(children) => stack.extend_from_slice(children),
            }
        }
        out.sort_by(neighbor_order);
        Ok(out)
    }

    /// The `k` stored points closest to `p`, ascending by distance then id.
    pub fn k_nearest(&self, p: GeoPoint, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        // Max-heap of the current best k; its top is the worst kept candidate.
        let mut kept: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
        let mut frontier: BinaryHeap<Frontier> = BinaryHeap::new();
        frontier.push(Frontier {
            lb: self.nodes[0].bbox.lower_bound(p),
            slot: 0,
        });
        while let Some(Frontier { lb, slot }) = frontier.pop() {
            if kept.len() == k && lb > kept.peek().map_or(f64::INFINITY, |r| r.0.distance_m) {
                break;
            }
            match &self.nodes[slot as usize].kind {
                NodeKind::Leaf(members) => {
                    for &m in members {
                        let (q, id) = self.entries[m as usize];
                        kept.push(Ranked(Neighbor {
                            id,
                            point: q,
                            distance_m: haversine_m(p, q),
                        }));
                        if kept.len() > k {
                            kept.pop();
                        }
                    }
                }
                NodeKind::Internal(children) => {
                    for &c in children {
                        frontier.push(Frontier {
                            lb: self.nodes[c as usize].bbox.lower_bound(p),
                            slot: c,
                        });
                    }
                }
            }
        }
        let mut out: Vec<Neighbor> = kept.into_iter().map(|r| r.0).collect();
        out.sort_by(neighbor_order);
        out
    }

    /// Checks the structural invariants; used by tests.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![0usize; self.entries.len()];
        for (slot, node) in self.nodes.iter().enumerate() {
            match &node.kind {
                NodeKind::Leaf(members) => {
                    if members.len() > self.capacity && node.depth < self.max_depth {
                        return Err(format!("leaf {slot} over capacity"));
                    }
                    for &m in members {
                        if !node.bbox.contains(self.entries[m as usize].0) {
                            return Err(format!("leaf {slot} holds a point outside its box"));
                        }
                        seen[m as usize] += 1;
                    }
                }
                NodeKind::Internal(children) => {
                    let (_, _, boxes) = node.bbox.quadrants();
                    for (c, expected) in children.iter().zip(boxes) {
                        let b = self.nodes[*c as usize].bbox;
                        if b.min_lat != expected.min_lat
                            || b.max_lat != expected.max_lat
                            || b.min_lon != expected.min_lon
                            || b.max_lon != expected.max_lon
                        {
                            return Err(format!("children of {slot} do not partition it"));
                        }
                    }
                }
            }
        }
        if seen.iter().any(|&c| c != 1) {
            return Err("some entry is not stored exactly once".into());
        }
        Ok(())
    }
}

fn check_radius(radius_m: f64) -> Result<(), SpatialError> {
    if radius_m > 0.0 {
        Ok(())
    } else {
        Err(SpatialError::Radius(radius_m))
    }
}

fn neighbor_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance_m.total_cmp(&b.distance_m).then(a.id.cmp(&b.id))
}

struct Ranked(Neighbor);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        neighbor_order(&self.0, &other.0)
    }
}

struct Frontier {
    lb: f64,
    slot: u32,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    // Reversed: BinaryHeap pops the smallest lower bound first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.lb.total_cmp(&self.lb).then(other.slot.cmp(&self.slot))
    }
}
