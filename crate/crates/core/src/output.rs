//! Result serialization: results CSV, quantile-classified heatmap GeoJSON
//! and travel-time histograms.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::geodesy::GeoPoint;
use crate::nearest::{AccessibilityResult, Status};
use crate::routing::RouteMetric;
use crate::transit::Itinerary;

pub const DEFAULT_CLASSES: usize = 5;

/// Color anchors from yellow (shortest) to violet (longest).
const RAMP_ANCHORS: [(u8, u8, u8); 5] = [
    (0xfd, 0xe7, 0x25),
    (0x5e, 0xc9, 0x62),
    (0x21, 0x91, 0x8c),
    (0x3b, 0x52, 0x8b),
    (0x44, 0x01, 0x54),
];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("need at least {needed} finite values for {needed} classes, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("class count must be at least 2, got {0}")]
    Classes(usize),
    #[error("bin count must be at least 1")]
    Bins,
    #[error("no values to bin")]
    Empty,
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("classification covers {classified} values but {ok} results are ok")]
    Mismatch { classified: usize, ok: usize },
    #[error("result row for origin {0} has no matching origin location")]
    UnknownOrigin(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileClassification {
    pub n_classes: usize,
    /// Lower edge of classes 1..n, ascending.
    pub breakpoints: Vec<f64>,
    /// Class per input value, in input order.
    pub classes: Vec<usize>,
}

impl QuantileClassification {
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &c in &self.classes {
            counts[c] += 1;
        }
        counts
    }
}

/// Rank-based classes: a value whose strict rank (number of smaller values)
/// is `r` among `n` falls in class `floor(n_classes * r / n)`. Tied values
/// always share a class. Breakpoint `i` is the sorted value at 0-based rank
/// `ceil(i * n / n_classes)`.
pub fn classify_quantiles(values: &[f64], n_classes: usize) -> Result<QuantileClassification, OutputError> {
    if n_classes < 2 {
        return Err(OutputError::Classes(n_classes));
    }
    if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
        return Err(OutputError::NonFinite(v));
    }
    let n = values.len();
    if n < n_classes {
        return Err(OutputError::TooFewValues { needed: n_classes, got: n });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let breakpoints = (1..n_classes).map(|i| sorted[(i * n).div_ceil(n_classes)]).collect();
    let classes = values
        .iter()
        .map(|v| {
            let rank = sorted.partition_point(|s| s < v);
            n_classes * rank / n
        })
        .collect();
    Ok(QuantileClassification {
        n_classes,
        breakpoints,
        classes,
    })
}

/// `n` hex colors interpolated along the yellow-to-violet ramp.
pub fn color_ramp(n: usize) -> Vec<String> {
    let segments = (RAMP_ANCHORS.len() - 1) as f64;
    (0..n)
        .map(|i| {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            let pos = t * segments;
            let lo = (pos.floor() as usize).min(RAMP_ANCHORS.len() - 2);
            let f = pos - lo as f64;
            let (a, b) = (RAMP_ANCHORS[lo], RAMP_ANCHORS[lo + 1]);
            let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * f).round() as u8;
            format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
        })
        .collect()
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub origin_id: String,
    pub mode: String,
    pub metric: String,
    pub dest_id: Option<String>,
    pub value: Option<f64>,
    pub distance_m: Option<f64>,
    pub status: String,
    pub line_id: Option<String>,
    pub walk_to_s: Option<f64>,
    pub ride_s: Option<f64>,
    pub walk_from_s: Option<f64>,
    pub snap_distance_m: f64,
}

pub const RESULTS_HEADER: &str =
    "origin_id,mode,metric,dest_id,value,distance_m,status,line_id,walk_to_s,ride_s,walk_from_s,snap_distance_m";

impl From<&AccessibilityResult> for ResultRow {
    fn from(r: &AccessibilityResult) -> Self {
        let (line_id, walk_to_s, ride_s, walk_from_s) = match &r.itinerary {
            Some(Itinerary::BusRide(b)) => (Some(b.line_id.clone()), Some(b.walk_to_s), Some(b.ride_s), Some(b.walk_from_s)),
            Some(Itinerary::WalkOnly { walk_s }) if walk_s.is_finite() => (None, Some(*walk_s), None, None),
            _ => (None, None, None, None),
        };
        ResultRow {
            origin_id: r.origin_id.clone(),
            mode: r.mode.as_str().to_string(),
            metric: r.metric.as_str().to_string(),
            dest_id: r.dest_id.clone(),
            value: r.value(),
            distance_m: r.distance_m,
            status: r.status.as_str().to_string(),
            line_id,
            walk_to_s,
            ride_s,
            walk_from_s,
            snap_distance_m: r.snap_distance_m,
        }
    }
}

/// Writes one row per result in the given order. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_results_csv<W: Write>(writer: W, results: &[AccessibilityResult]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(writer);
    if results.is_empty() {
        w.write_record(RESULTS_HEADER.split(','))?;
    }
    for r in results {
        w.serialize(ResultRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(reader: R) -> Result<Vec<ResultRow>, OutputError> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

/// Values of the reachable results in input order, the population used for
/// classification and histograms.
pub fn ok_values(results: &[AccessibilityResult]) -> Vec<f64> {
    results
        .iter()
        .filter(|r| r.status == Status::Ok)
        .filter_map(|r| r.value())
        .collect()
}

/// One reachable origin on the heatmap.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatPoint {
    pub origin_id: String,
    pub location: GeoPoint,
    pub dest_id: Option<String>,
    pub travel_time_s: Option<f64>,
    pub value: f64,
    pub metric: String,
}

/// Heat points of the reachable results, in input order.
pub fn heat_points(results: &[AccessibilityResult]) -> Vec<HeatPoint> {
    results
        .iter()
        .filter(|r| r.status == Status::Ok)
        .filter_map(|r| {
            Some(HeatPoint {
                origin_id: r.origin_id.clone(),
                location: r.origin,
                dest_id: r.dest_id.clone(),
                travel_time_s: r.travel_time_s,
                value: r.value()?,
                metric: r.metric.as_str().to_string(),
            })
        })
        .collect()
}

/// Heat points from parsed result rows, locating each origin by id.
pub fn heat_points_from_rows(rows: &[ResultRow], locations: &HashMap<String, GeoPoint>) -> Result<Vec<HeatPoint>, OutputError> {
    rows.iter()
        .filter(|r| r.status == Status::Ok.as_str())
        .filter_map(|r| r.value.map(|v| (r, v)))
        .map(|(r, value)| {
            let location = *locations
                .get(&r.origin_id)
                .ok_or_else(|| OutputError::UnknownOrigin(r.origin_id.clone()))?;
            Ok(HeatPoint {
                origin_id: r.origin_id.clone(),
                location,
                dest_id: r.dest_id.clone(),
                travel_time_s: (r.metric == RouteMetric::Time.as_str()).then_some(value),
                value,
                metric: r.metric.clone(),
            })
        })
        .collect()
}

/// FeatureCollection of heat points with a `legend` member. The
/// classification must have been computed over the points' values, in
/// order.
pub fn heatmap_geojson(points: &[HeatPoint], classification: &QuantileClassification) -> Result<Value, OutputError> {
    if points.len() != classification.classes.len() {
        return Err(OutputError::Mismatch {
            classified: classification.classes.len(),
            ok: points.len(),
        });
    }
    let features: Vec<Value> = points
        .iter()
        .zip(&classification.classes)
        .map(|(p, class)| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [p.location.lon(), p.location.lat()]},
                "properties": {
                    "origin_id": p.origin_id,
                    "dest_id": p.dest_id,
                    "travel_time_s": p.travel_time_s,
                    "value": p.value,
                    "quantile_class": class,
                },
            })
        })
        .collect();
    let metric = points.first().map(|p| p.metric.as_str());
    Ok(json!({
        "type": "FeatureCollection",
        "legend": legend(classification.n_classes, &classification.breakpoints, metric),
        "features": features,
    }))
}

/// Legend for a run with no reachable results: classes but no breakpoints.
pub fn empty_heatmap_geojson(n_classes: usize) -> Value {
    json!({
        "type": "FeatureCollection",
        "legend": legend(n_classes, &[], None),
        "features": [],
    })
}

fn legend(n_classes: usize, breakpoints: &[f64], metric: Option<&str>) -> Value {
    let mut m = Map::new();
    m.insert("n_classes".into(), json!(n_classes));
    m.insert("breakpoints".into(), json!(breakpoints));
    m.insert("colors".into(), json!(color_ramp(n_classes)));
    if let Some(metric) = metric {
        m.insert("metric".into(), json!(metric));
    }
    Value::Object(m)
}

pub fn write_heatmap_geojson<W: Write>(
    writer: W,
    results: &[AccessibilityResult],
    classification: &QuantileClassification,
) -> Result<(), OutputError> {
    write_json(writer, &heatmap_geojson(&heat_points(results), classification)?)
}

pub fn write_json<W: Write>(mut writer: W, value: &Value) -> Result<(), OutputError> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_start: f64,
    pub bin_end: f64,
    pub count: usize,
}

/// Equal-width bins over `[min, max]`; each bin is half-open except the
/// last, which also holds the maximum. When all values are equal they all
/// land in the last bin.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<HistogramBin>, OutputError> {
    if bins == 0 {
        return Err(OutputError::Bins);
    }
    if values.is_empty() {
        return Err(OutputError::Empty);
    }
    if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
        return Err(OutputError::NonFinite(v));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    let edge = |i: usize| if i == bins { max } else { min + width * i as f64 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = if width > 0.0 {
            (((v - min) / width).floor() as usize).min(bins - 1)
        } else {
            bins - 1
        };
        counts[idx] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_start: edge(i),
            bin_end: edge(i + 1),
            count,
        })
        .collect())
}

pub fn write_histogram_csv<W: Write>(writer: W, bins: &[HistogramBin]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(writer);
    if bins.is_empty() {
        w.write_record(["bin_start", "bin_end", "count"])?;
    }
    for b in bins {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}
