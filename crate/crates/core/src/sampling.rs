//! Population-weighted origin sampling inside district polygons.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geodesy::GeoPoint;

/// Attempts per requested point before a polygon is declared degenerate.
pub const REJECTION_BUDGET_PER_POINT: usize = 10_000;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("district {district}: {message}")]
    Polygon { district: String, message: String },
    #[error("total population is zero")]
    ZeroPopulation,
    #[error("duplicate district id {0}")]
    DuplicateDistrict(String),
    #[error("district {district}: no interior point found after {attempts} attempts (degenerate polygon?)")]
    Degenerate { district: String, attempts: usize },
    #[error("invalid GeoJSON: {0}")]
    GeoJson(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One polygon of a district: an outer ring and optional holes. Rings are
/// closed (first vertex repeated at the end).
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonPart {
    pub outer: Vec<GeoPoint>,
    pub holes: Vec<Vec<GeoPoint>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistrictPolygon {
    district_id: String,
    parts: Vec<PolygonPart>,
    population: u64,
}

fn signed_area(ring: &[GeoPoint]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].lon() * w[1].lat() - w[1].lon() * w[0].lat())
        .sum::<f64>()
        * 0.5
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn xy(p: GeoPoint) -> (f64, f64) {
    (p.lon(), p.lat())
}

/// True when segments `ab` and `cd` cross at a single interior point.
fn properly_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn check_ring(ring: &[GeoPoint]) -> Result<(), String> {
    if ring.len() < 4 {
        return Err(format!("ring has {} vertices, needs at least 4", ring.len()));
    }
    if ring[0] != ring[ring.len() - 1] {
        return Err("ring is not closed".into());
    }
    let n = ring.len() - 1;
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if properly_cross(xy(ring[i]), xy(ring[i + 1]), xy(ring[j]), xy(ring[j + 1])) {
                return Err(format!("ring self-intersects between edges {i} and {j}"));
            }
        }
    }
    Ok(())
}

impl DistrictPolygon {
    /// Validates the rings and orients outer rings counterclockwise and
    /// holes clockwise.
    pub fn new(district_id: impl Into<String>, mut parts: Vec<PolygonPart>, population: u64) -> Result<Self, SamplingError> {
        let district_id = district_id.into();
        let bad = |message: String| SamplingError::Polygon {
            district: district_id.clone(),
            message,
        };
        if parts.is_empty() {
            return Err(bad("no polygons".into()));
        }
        for part in &mut parts {
            check_ring(&part.outer).map_err(&bad)?;
            if signed_area(&part.outer) < 0.0 {
                part.outer.reverse();
            }
            for hole in &mut part.holes {
                check_ring(hole).map_err(&bad)?;
                if signed_area(hole) > 0.0 {
                    hole.reverse();
                }
            }
        }
        Ok(DistrictPolygon {
            district_id,
            parts,
            population,
        })
    }

    pub fn district_id(&self) -> &str {
        &self.district_id
    }

    pub fn parts(&self) -> &[PolygonPart] {
        &self.parts
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    /// Strict interior test; points on any ring boundary are outside.
    pub fn contains(&self, p: GeoPoint) -> bool {
        self.parts.iter().any(|part| {
            ring_contains(&part.outer, p) && !part.holes.iter().any(|h| on_boundary(h, p) || ring_contains(h, p))
        })
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in self.parts.iter().flat_map(|part| &part.outer) {
            b.0 = b.0.min(p.lat());
            b.1 = b.1.max(p.lat());
            b.2 = b.2.min(p.lon());
            b.3 = b.3.max(p.lon());
        }
        b
    }
}

fn on_boundary(ring: &[GeoPoint], p: GeoPoint) -> bool {
    let q = xy(p);
    ring.windows(2).any(|w| {
        let (a, b) = (xy(w[0]), xy(w[1]));
        cross(a, b, q) == 0.0
            && q.0 >= a.0.min(b.0)
            && q.0 <= a.0.max(b.0)
            && q.1 >= a.1.min(b.1)
            && q.1 <= a.1.max(b.1)
    })
}

/// Ray casting with the boundary counted as outside.
fn ring_contains(ring: &[GeoPoint], p: GeoPoint) -> bool {
    if on_boundary(ring, p) {
        return false;
    }
    let (x, y) = xy(p);
    let mut inside = false;
    for w in ring.windows(2) {
        let (xi, yi) = xy(w[0]);
        let (xj, yj) = xy(w[1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
    }
    inside
}

/// Stable per-district seed derived from the run seed and the district id.
pub fn district_seed(seed: u64, district_id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(district_id.as_bytes());
    h.finalize().into()
}

/// Splits `total_n` among districts in proportion to population using
/// largest-remainder apportionment. Equal remainders are ordered by a
/// seed-derived key.
pub fn allocate_counts(districts: &[DistrictPolygon], total_n: usize, seed: u64) -> Result<BTreeMap<String, usize>, SamplingError> {
    let mut seen = HashSet::new();
    for d in districts {
        if !seen.insert(d.district_id.as_str()) {
            return Err(SamplingError::DuplicateDistrict(d.district_id.clone()));
        }
    }
    let total_pop: u128 = districts.iter().map(|d| d.population as u128).sum();
    if total_pop == 0 {
        return Err(SamplingError::ZeroPopulation);
    }
    let n = total_n as u128;
    let mut counts: Vec<usize> = Vec::with_capacity(districts.len());
    let mut order: Vec<(u128, [u8; 32], usize)> = Vec::with_capacity(districts.len());
    for (i, d) in districts.iter().enumerate() {
        let share = n * d.population as u128;
        counts.push((share / total_pop) as usize);
        order.push((share % total_pop, district_seed(seed, &d.district_id), i));
    }
    let leftover = total_n - counts.iter().sum::<usize>();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, _, i) in order.iter().take(leftover) {
        counts[i] += 1;
    }
    Ok(districts
        .iter()
        .zip(counts)
        .map(|(d, c)| (d.district_id.clone(), c))
        .collect())
}

/// `count` points uniformly distributed (in degrees) over the polygon's
/// interior, by rejection from its bounding box.
pub fn sample_in_polygon(poly: &DistrictPolygon, count: usize, seed: u64) -> Result<Vec<GeoPoint>, SamplingError> {
    sample_with_rng(poly, count, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn sample_with_rng(poly: &DistrictPolygon, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<GeoPoint>, SamplingError> {
    let (min_lat, max_lat, min_lon, max_lon) = poly.bounds();
    let budget = REJECTION_BUDGET_PER_POINT.saturating_mul(count);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        if attempts >= budget {
            return Err(SamplingError::Degenerate {
                district: poly.district_id.clone(),
                attempts,
            });
        }
        attempts += 1;
        let lat = if max_lat > min_lat { rng.random_range(min_lat..max_lat) } else { min_lat };
        let lon = if max_lon > min_lon { rng.random_range(min_lon..max_lon) } else { min_lon };
        let p = GeoPoint::new(lat, lon).expect("inside a valid bounding box");
        if poly.contains(p) {
            out.push(p);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledOrigin {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub district_id: String,
}

/// Allocates `total_n` points across districts and samples each district
/// with its own derived seed. Ids run from 0 in district input order.
pub fn sample_districts(districts: &[DistrictPolygon], total_n: usize, seed: u64) -> Result<Vec<SampledOrigin>, SamplingError> {
    let counts = allocate_counts(districts, total_n, seed)?;
    let per_district: Vec<Vec<GeoPoint>> = districts
        .par_iter()
        .map(|d| {
            let mut rng = ChaCha8Rng::from_seed(district_seed(seed, &d.district_id));
            sample_with_rng(d, counts[&d.district_id], &mut rng)
        })
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(total_n);
    for (d, points) in districts.iter().zip(per_district) {
        for p in points {
            out.push(SampledOrigin {
                id: out.len().to_string(),
                lat: p.lat(),
                lon: p.lon(),
                district_id: d.district_id.clone(),
            });
        }
    }
    Ok(out)
}

pub fn write_origins_csv<W: Write>(writer: W, origins: &[SampledOrigin]) -> Result<(), SamplingError> {
    let mut w = csv::Writer::from_writer(writer);
    for o in origins {
        w.serialize(o)?;
    }
    w.flush()?;
    Ok(())
}

fn ring_from_json(value: &Value) -> Result<Vec<GeoPoint>, String> {
    value
        .as_array()
        .ok_or("ring is not an array")?
        .iter()
        .map(|pos| {
            let pos = pos.as_array().filter(|p| p.len() >= 2).ok_or("position is not [lon, lat]")?;
            let lon = pos[0].as_f64().ok_or("non-numeric longitude")?;
            let lat = pos[1].as_f64().ok_or("non-numeric latitude")?;
            GeoPoint::new(lat, lon).map_err(|e| e.to_string())
        })
        .collect()
}

fn polygon_from_json(value: &Value) -> Result<PolygonPart, String> {
    let rings = value.as_array().ok_or("polygon is not an array of rings")?;
    let (outer, holes) = rings.split_first().ok_or("polygon has no rings")?;
    Ok(PolygonPart {
        outer: ring_from_json(outer)?,
        holes: holes.iter().map(ring_from_json).collect::<Result<_, _>>()?,
    })
}

/// Reads a GeoJSON FeatureCollection of Polygon / MultiPolygon features
/// carrying `district_id` and `population` properties.
pub fn read_districts_geojson<R: Read>(reader: R) -> Result<Vec<DistrictPolygon>, SamplingError> {
    let doc: Value = serde_json::from_reader(reader)?;
    let err = |m: String| SamplingError::GeoJson(m);
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(err("top level must be a FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| err("missing features array".into()))?;
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let props = f
            .get("properties")
            .ok_or_else(|| err(format!("feature {i} has no properties")))?;
        let district_id = match props.get("district_id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(err(format!("feature {i} lacks a district_id property"))),
        };
        let population = props
            .get("population")
            .and_then(|p| p.as_u64().or_else(|| p.as_f64().filter(|v| *v >= 0.0 && v.fract() == 0.0).map(|v| v as u64)))
            .ok_or_else(|| err(format!("district {district_id}: population must be a non-negative integer")))?;
        let geometry = f
            .get("geometry")
            .ok_or_else(|| err(format!("district {district_id}: no geometry")))?;
        let coords = geometry
            .get("coordinates")
            .ok_or_else(|| err(format!("district {district_id}: geometry has no coordinates")))?;
        let parts = match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![polygon_from_json(coords)],
            Some("MultiPolygon") => coords
                .as_array()
                .ok_or_else(|| err(format!("district {district_id}: bad MultiPolygon")))?
                .iter()
                .map(polygon_from_json)
                .collect(),
            other => return Err(err(format!("district {district_id}: unsupported geometry {other:?}"))),
        };
        let parts = parts
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|m| err(format!("district {district_id}: {m}")))?;
        out.push(DistrictPolygon::new(district_id, parts, population)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(coords: &[(f64, f64)]) -> Vec<GeoPoint> {
        let mut r: Vec<GeoPoint> = coords.iter().map(|&(lon, lat)| GeoPoint::new(lat, lon).unwrap()).collect();
        r.push(r[0]);
        r
    }

    fn square(id: &str, pop: u64) -> DistrictPolygon {
        let outer = ring(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        DistrictPolygon::new(id, vec![PolygonPart { outer, holes: vec![] }], pop).unwrap()
    }

    fn l_shape() -> DistrictPolygon {
        // Unit square minus its upper-right quarter.
        let outer = ring(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 0.5), (0.5, 1.0), (0.0, 1.0)]);
        DistrictPolygon::new("L", vec![PolygonPart { outer, holes: vec![] }], 1).unwrap()
    }

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn symmetric_allocation() {
        let d = [square("a", 100), square("b", 100)];
        let c = allocate_counts(&d, 10, 1).unwrap();
        assert_eq!((c["a"], c["b"]), (5, 5));
    }

    #[test]
    fn largest_remainder() {
        let d = [square("a", 999), square("b", 1)];
        let c = allocate_counts(&d, 10, 1).unwrap();
        assert_eq!((c["a"], c["b"]), (10, 0));
    }

    #[test]
    fn allocation_errors() {
        assert!(matches!(allocate_counts(&[square("a", 0)], 10, 1), Err(SamplingError::ZeroPopulation)));
        assert!(matches!(
            allocate_counts(&[square("a", 1), square("a", 2)], 10, 1),
            Err(SamplingError::DuplicateDistrict(_))
        ));
    }

    #[test]
    fn remainder_ties_follow_seed() {
        let d: Vec<DistrictPolygon> = (0..3).map(|i| square(&format!("d{i}"), 1)).collect();
        let mut winners = HashSet::new();
        for seed in 0..20 {
            let c = allocate_counts(&d, 4, seed).unwrap();
            assert_eq!(c.values().sum::<usize>(), 4);
            assert_eq!(allocate_counts(&d, 4, seed).unwrap(), c);
            winners.insert(c.iter().find(|(_, &v)| v == 2).unwrap().0.clone());
        }
        assert!(winners.len() > 1);
    }

    #[test]
    fn unit_square_containment() {
        let sq = square("s", 1);
        let pts = sample_in_polygon(&sq, 100, 4).unwrap();
        assert_eq!(pts.len(), 100);
        assert!(pts.iter().all(|p| sq.contains(*p)));
    }

    #[test]
    fn l_shape_notch_stays_empty() {
        let l = l_shape();
        let pts = sample_in_polygon(&l, 2000, 9).unwrap();
        assert!(pts.iter().all(|p| !(p.lat() > 0.5 && p.lon() > 0.5)));
    }

    #[test]
    fn boundary_is_outside() {
        let sq = square("s", 1);
        assert!(!sq.contains(pt(0.0, 0.5)));
        assert!(!sq.contains(pt(1.0, 1.0)));
        assert!(sq.contains(pt(0.5, 0.5)));
    }

    #[test]
    fn holes_are_excluded() {
        let outer = ring(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let hole = ring(&[(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75)]);
        let d = DistrictPolygon::new("h", vec![PolygonPart { outer, holes: vec![hole] }], 1).unwrap();
        assert!(!d.contains(pt(0.5, 0.5)));
        assert!(d.contains(pt(0.1, 0.1)));
        let pts = sample_in_polygon(&d, 500, 2).unwrap();
        assert!(pts.iter().all(|p| !(p.lat() > 0.25 && p.lat() < 0.75 && p.lon() > 0.25 && p.lon() < 0.75)));
    }

    #[test]
    fn clockwise_ring_is_normalized() {
        let outer = ring(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)]);
        let d = DistrictPolygon::new("cw", vec![PolygonPart { outer, holes: vec![] }], 1).unwrap();
        assert!(signed_area(&d.parts()[0].outer) > 0.0);
    }

    #[test]
    fn invalid_rings_rejected() {
        let bowtie = ring(&[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]);
        assert!(DistrictPolygon::new("x", vec![PolygonPart { outer: bowtie, holes: vec![] }], 1).is_err());
        let mut open = ring(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]);
        open.pop();
        open.push(pt(0.5, 0.0));
        assert!(DistrictPolygon::new("x", vec![PolygonPart { outer: open, holes: vec![] }], 1).is_err());
    }

    #[test]
    fn degenerate_polygon_exhausts_budget() {
        let flat = ring(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let d = DistrictPolygon::new("flat", vec![PolygonPart { outer: flat, holes: vec![] }], 1).unwrap();
        match sample_in_polygon(&d, 3, 1) {
            Err(SamplingError::Degenerate { attempts, .. }) => assert_eq!(attempts, 30_000),
            other => panic!("unexpected {other:?}"),
        }
        assert!(sample_in_polygon(&d, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let sq = square("s", 1);
        assert_eq!(sample_in_polygon(&sq, 50, 7).unwrap(), sample_in_polygon(&sq, 50, 7).unwrap());
        assert_ne!(sample_in_polygon(&sq, 50, 7).unwrap(), sample_in_polygon(&sq, 50, 8).unwrap());
    }

    #[test]
    fn geojson_reading() {
        let doc = r#"{"type":"FeatureCollection","features":[
          {"type":"Feature","properties":{"district_id":"north","population":120},
           "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
          {"type":"Feature","properties":{"district_id":7,"population":80.0},
           "geometry":{"type":"MultiPolygon","coordinates":[[[[2,0],[3,0],[3,1],[2,1],[2,0]]],[[[4,0],[5,0],[5,1],[4,0]]]]}}
        ]}"#;
        let d = read_districts_geojson(doc.as_bytes()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[1].district_id(), "7");
        assert_eq!(d[1].parts().len(), 2);
        assert_eq!(d[1].population(), 80);

        let missing = doc.replace("\"population\":120", "\"pop\":120");
        assert!(matches!(read_districts_geojson(missing.as_bytes()), Err(SamplingError::GeoJson(_))));
    }

    #[test]
    fn sample_districts_ids_and_counts() {
        let d = [square("a", 3), square("b", 1)];
        let o = sample_districts(&d, 8, 3).unwrap();
        assert_eq!(o.len(), 8);
        assert_eq!(o.iter().filter(|x| x.district_id == "a").count(), 6);
        assert_eq!(o[0].id, "0");
        assert_eq!(o[7].id, "7");
        let mut buf = Vec::new();
        write_origins_csv(&mut buf, &o).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("id,lat,lon,district_id\n"));
    }
}
