//! Seeded synthetic fixtures: a street grid city as OSM data, random points,
//! bus lines along grid streets, GTFS feeds and district polygons. Used by
//! the test suites and for desk-scale workload runs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::geodesy::GeoPoint;
use crate::osm::{OsmWay, RawOsmData};
use crate::transit::{BusLine, Stop};

const M_PER_DEG_LAT: f64 = 111_195.0;
const SHAPE_NODE_BASE: i64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct CityParams {
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
    /// Intersection displacement as a fraction of the spacing.
    pub jitter: f64,
    /// Probability that a block segment is missing.
    pub removal_prob: f64,
    /// Probability that a block segment carries an intermediate shape node.
    pub shape_node_prob: f64,
    /// Every n-th row (offset 2) is one-way; 0 disables one-way streets.
    pub oneway_every: usize,
    /// Every n-th column (offset 3) is a footway; 0 disables footways.
    pub footway_every: usize,
    /// South-west corner.
    pub origin: GeoPoint,
    pub seed: u64,
}

impl Default for CityParams {
    fn default() -> Self {
        CityParams {
            rows: 45,
            cols: 45,
            spacing_m: 100.0,
            jitter: 0.2,
            removal_prob: 0.05,
            shape_node_prob: 0.3,
            oneway_every: 5,
            footway_every: 7,
            origin: GeoPoint::new(-34.62, -58.46).expect("valid"),
            seed: 1,
        }
    }
}

impl CityParams {
    /// Regular two-way residential grid without jitter, gaps or shape nodes.
    pub fn plain_grid(rows: usize, cols: usize, spacing_m: f64) -> Self {
        CityParams {
            rows,
            cols,
            spacing_m,
            jitter: 0.0,
            removal_prob: 0.0,
            shape_node_prob: 0.0,
            oneway_every: 0,
            footway_every: 0,
            ..CityParams::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCity {
    pub raw: RawOsmData,
    pub params: CityParams,
    /// OSM id of the intersection at `[row][col]`.
    pub intersections: Vec<Vec<i64>>,
}

fn offset(origin: GeoPoint, north_m: f64, east_m: f64) -> GeoPoint {
    let lat = origin.lat() + north_m / M_PER_DEG_LAT;
    let lon = origin.lon() + east_m / (M_PER_DEG_LAT * origin.lat().to_radians().cos());
    GeoPoint::new(lat, lon).expect("synthetic city stays within coordinate bounds")
}

pub fn generate_city(params: &CityParams) -> SynthCity {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut raw = RawOsmData::default();
    let jitter_m = params.jitter * params.spacing_m;
    let mut intersections = vec![vec![0i64; params.cols]; params.rows];
    for (r, row) in intersections.iter_mut().enumerate() {
        for (c, slot) in row.iter_mut().enumerate() {
            let id = 1 + (r * params.cols + c) as i64;
            let (dn, de) = if jitter_m > 0.0 {
                (rng.random_range(-jitter_m..jitter_m), rng.random_range(-jitter_m..jitter_m))
            } else {
                (0.0, 0.0)
            };
            let p = offset(params.origin, r as f64 * params.spacing_m + dn, c as f64 * params.spacing_m + de);
            raw.nodes.insert(id, p);
            *slot = id;
        }
    }

    let mut next_shape = SHAPE_NODE_BASE;
    let mut next_way = 1i64;
    // Streets: rows run east-west, columns north-south.
    let streets: Vec<(bool, usize)> = (0..params.rows)
        .map(|r| (true, r))
        .chain((0..params.cols).map(|c| (false, c)))
        .collect();
    for (is_row, k) in streets {
        let len = if is_row { params.cols } else { params.rows };
        let at = |i: usize| if is_row { intersections[k][i] } else { intersections[i][k] };
        let mut tags = BTreeMap::new();
        let footway = !is_row && params.footway_every > 0 && k % params.footway_every == 3;
        let highway = if footway {
            "footway"
        } else if k % 5 == 0 {
            "primary"
        } else {
            "residential"
        };
        tags.insert("highway".to_string(), highway.to_string());
        let oneway = is_row && params.oneway_every > 0 && k % params.oneway_every == 2;
        if oneway {
            tags.insert("oneway".to_string(), "yes".to_string());
        }
        tags.insert("name".to_string(), format!("{} {k}", if is_row { "Row" } else { "Column" }));

        let mut current: Vec<i64> = vec![at(0)];
        let mut pieces: Vec<Vec<i64>> = Vec::new();
        for i in 1..len {
            if rng.random_bool(params.removal_prob) {
                if current.len() > 1 {
                    pieces.push(std::mem::take(&mut current));
                }
                current = vec![at(i)];
                continue;
            }
            if rng.random_bool(params.shape_node_prob) {
                let a = raw.nodes[&at(i - 1)];
                let b = raw.nodes[&at(i)];
                let bend = rng.random_range(-0.1..0.1) * params.spacing_m / M_PER_DEG_LAT;
                let mid = GeoPoint::new(
                    (a.lat() + b.lat()) / 2.0 + if is_row { bend } else { 0.0 },
                    (a.lon() + b.lon()) / 2.0 + if is_row { 0.0 } else { bend },
                )
                .expect("midpoint of valid points");
                raw.nodes.insert(next_shape, mid);
                current.push(next_shape);
                next_shape += 1;
            }
            current.push(at(i));
        }
        if current.len() > 1 {
            pieces.push(current);
        }
        for mut nodes in pieces {
            // Alternate one-way directions between rows.
            if oneway && (k / params.oneway_every.max(1)) % 2 == 1 {
                nodes.reverse();
            }
            raw.ways.push(OsmWay {
                id: next_way,
                nodes,
                tags: tags.clone(),
            });
            next_way += 1;
        }
    }
    SynthCity {
        raw,
        params: params.clone(),
        intersections,
    }
}

impl SynthCity {
    /// `(min_lat, max_lat, min_lon, max_lon)` over all nodes.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in self.raw.nodes.values() {
            b.0 = b.0.min(p.lat());
            b.1 = b.1.max(p.lat());
            b.2 = b.2.min(p.lon());
            b.3 = b.3.max(p.lon());
        }
        b
    }

    pub fn intersection(&self, row: usize, col: usize) -> GeoPoint {
        self.raw.nodes[&self.intersections[row][col]]
    }

    /// Untimed bus lines: even-numbered lines run along rows, odd-numbered
    /// along columns, with a stop at every `stop_every`-th intersection.
    pub fn bus_lines(&self, n_lines: usize, stop_every: usize) -> Vec<BusLine> {
        let p = &self.params;
        let stop_every = stop_every.max(1);
        (0..n_lines)
            .map(|i| {
                let along_row = i % 2 == 0;
                let (len, span) = if along_row { (p.cols, p.rows) } else { (p.rows, p.cols) };
                let k = (i / 2 + 1) * span / (n_lines / 2 + 2);
                let stops: Vec<Stop> = (0..len)
                    .step_by(stop_every)
                    .map(|j| {
                        let (r, c) = if along_row { (k, j) } else { (j, k) };
                        Stop {
                            stop_id: format!("st_{r}_{c}"),
                            location: self.intersection(r, c),
                            name: None,
                        }
                    })
                    .collect();
                let route = format!("L{i}");
                BusLine::new(format!("{route}:0:p0"), route, stops).expect("synthetic line has at least two stops")
            })
            .collect()
    }
}

/// `n` points uniform in the bounding box `(min_lat, max_lat, min_lon, max_lon)`.
pub fn random_points(bbox: (f64, f64, f64, f64), n: usize, seed: u64) -> Vec<GeoPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            GeoPoint::new(rng.random_range(bbox.0..=bbox.1), rng.random_range(bbox.2..=bbox.3))
                .expect("inside a valid bounding box")
        })
        .collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Serializes as OSM XML with ways written before nodes, the ordering a
/// two-pass reader must cope with.
pub fn write_osm_xml<W: Write>(raw: &RawOsmData, mut w: W) -> io::Result<()> {
    writeln!(w, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>")?;
    writeln!(w, "<osm version=\"0.6\" generator=\"synth\">")?;
    for way in &raw.ways {
        writeln!(w, "  <way id=\"{}\">", way.id)?;
        for n in &way.nodes {
            writeln!(w, "    <nd ref=\"{n}\"/>")?;
        }
        for (k, v) in &way.tags {
            writeln!(w, "    <tag k=\"{}\" v=\"{}\"/>", xml_escape(k), xml_escape(v))?;
        }
        writeln!(w, "  </way>")?;
    }
    for (id, p) in &raw.nodes {
        writeln!(w, "  <node id=\"{id}\" lat=\"{}\" lon=\"{}\"/>", p.lat(), p.lon())?;
    }
    writeln!(w, "</osm>")?;
    w.flush()
}

fn gtfs_clock(seconds: f64) -> String {
    let s = 8 * 3600 + seconds.round() as u64;
    format!("{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60)
}

/// Writes a minimal GTFS feed with one trip per line. Line ids of the form
/// `route:direction:branch` become trips with that direction and a shape
/// id equal to the branch. Stop times carry clock values only when
/// `with_times` is set and the line is timed.
pub fn write_gtfs(dir: &Path, lines: &[BusLine], with_times: bool) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut stops: BTreeMap<&str, &Stop> = BTreeMap::new();
    for line in lines {
        for s in line.stops() {
            stops.entry(&s.stop_id).or_insert(s);
        }
    }
    let mut f = String::from("stop_id,stop_name,stop_lat,stop_lon\n");
    for (id, s) in &stops {
        f.push_str(&format!("{id},{},{},{}\n", s.name.as_deref().unwrap_or(""), s.location.lat(), s.location.lon()));
    }
    fs::write(dir.join("stops.txt"), f)?;

    let mut routes: Vec<&str> = lines.iter().map(|l| l.route_id()).collect();
    routes.sort();
    routes.dedup();
    let mut f = String::from("route_id,route_short_name,route_type\n");
    for r in routes {
        f.push_str(&format!("{r},{r},3\n"));
    }
    fs::write(dir.join("routes.txt"), f)?;

    let mut trips = String::from("route_id,service_id,trip_id,direction_id,shape_id\n");
    let mut times = String::from("trip_id,arrival_time,departure_time,stop_id,stop_sequence\n");
    for line in lines {
        let mut parts = line.line_id().split(':');
        let direction = parts.nth(1).unwrap_or("0");
        let shape = parts.next().filter(|s| !s.starts_with('p')).unwrap_or("");
        let trip_id = format!("t_{}", line.line_id().replace(':', "_"));
        trips.push_str(&format!("{},wk,{trip_id},{direction},{shape}\n", line.route_id()));
        for (i, s) in line.stops().iter().enumerate() {
            let clock = match (with_times, line.timetable()) {
                (true, Some(t)) => gtfs_clock(t[i]),
                _ => String::new(),
            };
            times.push_str(&format!("{trip_id},{clock},{clock},{},{}\n", s.stop_id, i + 1));
        }
    }
    fs::write(dir.join("trips.txt"), trips)?;
    fs::write(dir.join("stop_times.txt"), times)
}

/// A `nx` by `ny` grid of rectangular districts over the bounding box as a
/// GeoJSON FeatureCollection, with populations `1000 * (i + 1)`.
pub fn grid_districts(bbox: (f64, f64, f64, f64), nx: usize, ny: usize) -> Value {
    let (min_lat, max_lat, min_lon, max_lon) = bbox;
    let dlat = (max_lat - min_lat) / ny as f64;
    let dlon = (max_lon - min_lon) / nx as f64;
    let mut features = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (s, w) = (min_lat + j as f64 * dlat, min_lon + i as f64 * dlon);
            let (n, e) = (s + dlat, w + dlon);
            let idx = j * nx + i;
            features.push(json!({
                "type": "Feature",
                "properties": {"district_id": format!("D{idx}"), "population": 1000 * (idx + 1)},
                "geometry": {"type": "Polygon", "coordinates": [[[w, s], [e, s], [e, n], [w, n], [w, s]]]},
            }));
        }
    }
    json!({"type": "FeatureCollection", "features": features})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osm::{extract_street_graph, parse_osm_bytes};
    use crate::profile::ModeProfile;
    use crate::transit::parse_gtfs;

    #[test]
    fn plain_grid_counts() {
        let city = generate_city(&CityParams::plain_grid(5, 5, 100.0));
        assert_eq!(city.raw.nodes.len(), 25);
        assert_eq!(city.raw.ways.len(), 10);
        let g = extract_street_graph(&city.raw, &ModeProfile::foot()).unwrap();
        assert_eq!(g.node_count(), 25);
        assert_eq!(g.edge_count(), 2 * 2 * 5 * 4);
    }

    #[test]
    fn default_city_is_seeded() {
        let a = generate_city(&CityParams::default());
        let b = generate_city(&CityParams::default());
        assert_eq!(a.raw, b.raw);
        let c = generate_city(&CityParams {
            seed: 2,
            ..CityParams::default()
        });
        assert_ne!(a.raw, c.raw);
        assert!(a.raw.nodes.len() > 2025);
    }

    #[test]
    fn xml_round_trip() {
        let city = generate_city(&CityParams {
            rows: 6,
            cols: 7,
            ..CityParams::default()
        });
        let mut buf = Vec::new();
        write_osm_xml(&city.raw, &mut buf).unwrap();
        let back = parse_osm_bytes(&buf).unwrap();
        assert_eq!(back.nodes, city.raw.nodes);
        assert_eq!(back.ways, city.raw.ways);
    }

    #[test]
    fn gtfs_round_trip() {
        let city = generate_city(&CityParams::plain_grid(9, 9, 150.0));
        let lines = city.bus_lines(4, 2);
        let dir = tempfile::tempdir().unwrap();
        write_gtfs(dir.path(), &lines, false).unwrap();
        let feed = parse_gtfs(dir.path()).unwrap();
        assert_eq!(feed.lines.len(), 4);
        for (parsed, orig) in feed.lines.iter().zip(&lines) {
            assert_eq!(parsed.line_id(), orig.line_id());
            assert_eq!(parsed.stops(), orig.stops());
            assert!(parsed.timetable().is_none());
        }
    }

    #[test]
    fn districts_cover_bbox() {
        let d = crate::sampling::read_districts_geojson(grid_districts((0.0, 1.0, 0.0, 2.0), 2, 3).to_string().as_bytes()).unwrap();
        assert_eq!(d.len(), 6);
        assert_eq!(d[5].population(), 6000);
    }
}
