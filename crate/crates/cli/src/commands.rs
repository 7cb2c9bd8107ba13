use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use access_core::cache::{read_graph, read_transit, write_graph, write_transit, ExcludedLine, TransitCache};
use access_core::nearest::{
    batch_compute, read_opportunities_csv, read_origins_csv, NearestConfig, NearestEngine, Status, TravelMode,
    DEFAULT_K, DEFAULT_WALK_RADIUS_M,
};
use access_core::osm::{compression_report, extract_street_graph, parse_osm_xml, CompressionReport};
use access_core::output::{
    classify_quantiles, empty_heatmap_geojson, heat_points, heat_points_from_rows, heatmap_geojson, histogram,
    read_results_csv, write_histogram_csv, write_json, write_results_csv, HeatPoint, QuantileClassification,
    DEFAULT_CLASSES,
};
use access_core::profile::{Mode, ProfileSet};
use access_core::sampling::{allocate_counts, read_districts_geojson, sample_districts, write_origins_csv};
use access_core::transit::{estimate_missing, index_lines, parse_gtfs, TimetableSource, TransitNetwork};
use access_core::{RouteMetric, StreetGraph};
use anyhow::{bail, Context};
use serde_json::json;

use crate::config::{check, existing_dir, existing_file, parse_setting, pick, require, usage, FileConfig};
use crate::staging::Staged;
use crate::{ComputeArgs, ExportArgs, IngestArgs, SampleArgs, TransitArgs};

pub const DEFAULT_BINS: usize = 30;
pub const DEFAULT_MULTIPLIER: f64 = 1.0;
const TRANSIT_CACHE_NAME: &str = "transit.json";

fn graph_path(dir: &Path, mode: Mode) -> PathBuf {
    dir.join(format!("{mode}.graph"))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn load_graph(path: &Path, mode: Mode) -> anyhow::Result<StreetGraph> {
    let g = read_graph(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    if g.profile().mode != mode {
        bail!("{} holds a {} graph, expected {mode}", path.display(), g.profile().mode);
    }
    Ok(g)
}

fn table_layout(reports: &[(Mode, CompressionReport)]) -> String {
    let header: String = reports
        .iter()
        .map(|(m, _)| {
            let label = match m {
                Mode::Car => "Car",
                Mode::Bike => "Bicycle",
                Mode::Foot => "Foot",
            };
            format!("{label:>10}")
        })
        .collect();
    let row = |name: &str, f: &dyn Fn(&CompressionReport) -> f64| {
        let cells: String = reports.iter().map(|(_, r)| format!("{:>10.6}", f(r))).collect();
        format!("{name:<24}{cells}")
    };
    [
        format!("{:<24}{header}", ""),
        row("Node compression ratio", &|r| r.node_ratio),
        row("Edge compression ratio", &|r| r.edge_ratio),
    ]
    .join("\n")
}

pub fn ingest_osm(a: IngestArgs, file: &FileConfig) -> anyhow::Result<()> {
    let osm = existing_file(require(pick(a.osm, &file.osm), "osm")?, "OSM file")?;
    let graph_dir = require(pick(a.graph_dir, &file.graph_dir), "graph-dir")?;
    let profiles = match pick(a.profiles, &file.profiles) {
        Some(path) => {
            let path = existing_file(path, "profile file")?;
            let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
            ProfileSet::from_toml_str(&text).map_err(|e| usage(format!("invalid profiles {}: {e}", path.display())))?
        }
        None => ProfileSet::default(),
    };

    let raw = parse_osm_xml(open(&osm)?).with_context(|| format!("reading {}", osm.display()))?;
    let mut graphs = Vec::new();
    for mode in [Mode::Car, Mode::Bike, Mode::Foot] {
        let g = extract_street_graph(&raw, profiles.get(mode))?;
        graphs.push((mode, g));
    }
    let reports: Vec<(Mode, CompressionReport)> =
        graphs.iter().map(|(m, g)| (*m, compression_report(&raw, g))).collect();

    fs::create_dir_all(&graph_dir).with_context(|| format!("cannot create {}", graph_dir.display()))?;
    let mut staged = Staged::new();
    for (mode, g) in &graphs {
        staged.write(&graph_path(&graph_dir, *mode), |w| Ok(write_graph(w, g)?))?;
    }
    let report_json: BTreeMap<String, &CompressionReport> =
        reports.iter().map(|(m, r)| (m.to_string(), r)).collect();
    staged.write(&graph_dir.join("compression.json"), |w| {
        Ok(write_json(w, &serde_json::to_value(&report_json)?)?)
    })?;
    staged.commit()?;

    println!("{}", table_layout(&reports));
    for (mode, r) in &reports {
        println!(
            "{mode}: {} -> {} nodes, {} -> {} directed edges",
            r.raw_node_count, r.graph_node_count, r.raw_edge_count, r.graph_edge_count
        );
    }
    println!("graphs written to {}", graph_dir.display());
    Ok(())
}

pub fn prepare_transit(a: TransitArgs, file: &FileConfig) -> anyhow::Result<()> {
    let gtfs = existing_dir(require(pick(a.gtfs, &file.gtfs), "gtfs")?, "GTFS directory")?;
    let graph_dir = existing_dir(require(pick(a.graph_dir, &file.graph_dir), "graph-dir")?, "graph directory")?;
    let car_path = existing_file(graph_path(&graph_dir, Mode::Car), "car graph (run ingest-osm first)")?;
    let out = pick(a.out, &file.out).unwrap_or_else(|| graph_dir.join(TRANSIT_CACHE_NAME));
    let multiplier = pick(a.multiplier, &file.multiplier).unwrap_or(DEFAULT_MULTIPLIER);
    check(multiplier.is_finite() && multiplier > 0.0, format!("--multiplier must be positive, got {multiplier}"))?;

    let car = load_graph(&car_path, Mode::Car)?;
    let feed = parse_gtfs(&gtfs).with_context(|| format!("reading GTFS feed {}", gtfs.display()))?;
    let (lines, failed) = estimate_missing(feed.lines, &car, multiplier)?;
    let index = index_lines(lines.clone())?;
    let excluded: Vec<ExcludedLine> = failed
        .into_iter()
        .map(|(line_id, e)| ExcludedLine {
            line_id,
            reason: e.to_string(),
        })
        .collect();
    let from_gtfs = index
        .lines()
        .iter()
        .filter(|l| l.timetable_source() == Some(TimetableSource::GtfsStopTimes))
        .count();
    let stop_total: usize = index.lines().iter().map(|l| l.stops().len()).sum();
    let cache = TransitCache::new(multiplier, index.lines().to_vec(), excluded);

    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let mut staged = Staged::new();
    staged.write(&out, |w| Ok(write_transit(w, &cache)?))?;
    staged.commit()?;

    let n = cache.lines.len();
    println!("lines: {n}");
    println!(
        "mean stops per line: {:.1}",
        if n == 0 { 0.0 } else { stop_total as f64 / n as f64 }
    );
    println!("timetables from stop_times: {from_gtfs}, estimated: {}", n - from_gtfs);
    for e in &cache.excluded {
        println!("excluded {}: {}", e.line_id, e.reason);
    }
    println!("transit cache written to {}", out.display());
    Ok(())
}

pub fn sample(a: SampleArgs, file: &FileConfig) -> anyhow::Result<()> {
    let districts = existing_file(require(pick(a.districts, &file.districts), "districts")?, "districts file")?;
    let n = require(pick(a.n, &file.n), "n")?;
    check(n > 0, "--n must be at least 1")?;
    let seed = pick(a.seed, &file.seed).unwrap_or(0);
    let out = require(pick(a.out, &file.out), "out")?;

    let polygons = read_districts_geojson(open(&districts)?).with_context(|| format!("reading {}", districts.display()))?;
    let counts = allocate_counts(&polygons, n, seed)?;
    let origins = sample_districts(&polygons, n, seed)?;

    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let mut staged = Staged::new();
    staged.write(&out, |w| Ok(write_origins_csv(w, &origins)?))?;
    staged.commit()?;

    for d in &polygons {
        println!("{}: {}", d.district_id(), counts[d.district_id()]);
    }
    println!("{} origins (seed {seed}) written to {}", origins.len(), out.display());
    Ok(())
}

/// Writes the heatmap and histogram for `points` and returns the
/// classification, if any origin was reachable.
fn stage_heatmap(
    staged: &mut Staged,
    out_dir: &Path,
    points: &[HeatPoint],
    classes: usize,
    bins: usize,
) -> anyhow::Result<Option<QuantileClassification>> {
    let values: Vec<f64> = points.iter().map(|p| p.value).collect();
    if values.is_empty() {
        staged.write(&out_dir.join("heatmap.geojson"), |w| Ok(write_json(w, &empty_heatmap_geojson(classes))?))?;
        staged.write(&out_dir.join("histogram.csv"), |w| Ok(write_histogram_csv(w, &[])?))?;
        return Ok(None);
    }
    let classification = classify_quantiles(&values, classes)
        .with_context(|| format!("{} reachable origins cannot fill {classes} classes", values.len()))?;
    let geojson = heatmap_geojson(points, &classification)?;
    let hist = histogram(&values, bins)?;
    staged.write(&out_dir.join("heatmap.geojson"), |w| Ok(write_json(w, &geojson)?))?;
    staged.write(&out_dir.join("histogram.csv"), |w| Ok(write_histogram_csv(w, &hist)?))?;
    Ok(Some(classification))
}

pub fn compute(a: ComputeArgs, file: &FileConfig) -> anyhow::Result<()> {
    let origins_path = existing_file(require(pick(a.origins, &file.origins), "origins")?, "origins file")?;
    let dest_path = existing_file(
        require(pick(a.destinations, &file.destinations), "destinations")?,
        "destinations file",
    )?;
    let graph_dir = existing_dir(require(pick(a.graph_dir, &file.graph_dir), "graph-dir")?, "graph directory")?;
    let out_dir = require(pick(a.out_dir, &file.out_dir), "out-dir")?;
    let mode: TravelMode = parse_setting(pick(a.mode, &file.mode), "mode")?.unwrap_or(TravelMode::Foot);
    let metric: RouteMetric = parse_setting(pick(a.metric, &file.metric), "metric")?.unwrap_or(RouteMetric::Time);
    let cfg = NearestConfig {
        k: pick(a.candidates, &file.candidates).unwrap_or(DEFAULT_K),
        mode,
        metric,
        walk_radius_m: pick(a.walk_radius_m, &file.walk_radius_m).unwrap_or(DEFAULT_WALK_RADIUS_M),
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let classes = pick(a.classes, &file.classes).unwrap_or(DEFAULT_CLASSES);
    check(classes >= 2, format!("--classes must be at least 2, got {classes}"))?;
    let bins = pick(a.bins, &file.bins).unwrap_or(DEFAULT_BINS);
    check(bins >= 1, "--bins must be at least 1")?;
    let workers = pick(a.workers, &file.workers);
    check(workers != Some(0), "--workers must be at least 1")?;
    let seed = pick(a.seed, &file.seed);
    let street_mode = mode.street_mode();
    let graph_file = existing_file(graph_path(&graph_dir, street_mode), &format!("{street_mode} graph (run ingest-osm first)"))?;
    let transit_file = if mode == TravelMode::PublicTransport {
        let path = pick(a.transit, &file.transit).unwrap_or_else(|| graph_dir.join(TRANSIT_CACHE_NAME));
        Some(existing_file(path, "transit cache (run prepare-transit first)")?)
    } else {
        None
    };

    let started = Instant::now();
    let origins = read_origins_csv(open(&origins_path)?).with_context(|| format!("reading {}", origins_path.display()))?;
    let destinations = read_opportunities_csv(open(&dest_path)?).with_context(|| format!("reading {}", dest_path.display()))?;
    let graph = load_graph(&graph_file, street_mode)?;
    let results = match &transit_file {
        None => {
            let engine = NearestEngine::street(&destinations, cfg, &graph)?;
            batch_compute(&origins, &engine, workers)?
        }
        Some(path) => {
            let cache = read_transit(open(path)?).with_context(|| format!("reading {}", path.display()))?;
            let index = index_lines(cache.lines)?;
            let network = TransitNetwork::new(&graph, &index)?;
            let engine = NearestEngine::transit(&destinations, cfg, &network)?;
            batch_compute(&origins, &engine, workers)?
        }
    };
    let wall_time_s = started.elapsed().as_secs_f64();

    let ok = results.iter().filter(|r| r.status == Status::Ok).count();
    let unreachable = results.len() - ok;
    let evaluated: usize = results.iter().map(|r| r.evaluated).sum();

    fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut staged = Staged::new();
    staged.write(&out_dir.join("results.csv"), |w| Ok(write_results_csv(w, &results)?))?;
    let classification = stage_heatmap(&mut staged, &out_dir, &heat_points(&results), classes, bins)?;
    let summary = json!({
        "command": "compute",
        "config": {
            "origins": origins_path,
            "destinations": dest_path,
            "graph": graph_file,
            "transit": transit_file,
            "out_dir": out_dir,
            "mode": mode.as_str(),
            "metric": metric.as_str(),
            "candidates": cfg.k,
            "walk_radius_m": cfg.walk_radius_m,
            "classes": classes,
            "bins": bins,
            "workers": workers,
            "seed": seed,
        },
        "origins": origins.len(),
        "destinations": destinations.len(),
        "status_counts": {"ok": ok, "unreachable": unreachable},
        "routed_candidates": evaluated,
        "breakpoints": classification.as_ref().map(|c| c.breakpoints.clone()),
        "wall_time_s": wall_time_s,
    });
    staged.write(&out_dir.join("summary.json"), |w| Ok(write_json(w, &summary)?))?;
    staged.commit()?;

    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

pub fn export_heatmap(a: ExportArgs, file: &FileConfig) -> anyhow::Result<()> {
    let results_path = existing_file(require(pick(a.results, &file.results), "results")?, "results file")?;
    let origins_path = existing_file(require(pick(a.origins, &file.origins), "origins")?, "origins file")?;
    let out_dir = require(pick(a.out_dir, &file.out_dir), "out-dir")?;
    let classes = pick(a.classes, &file.classes).unwrap_or(DEFAULT_CLASSES);
    check(classes >= 2, format!("--classes must be at least 2, got {classes}"))?;
    let bins = pick(a.bins, &file.bins).unwrap_or(DEFAULT_BINS);
    check(bins >= 1, "--bins must be at least 1")?;

    let rows = read_results_csv(open(&results_path)?).with_context(|| format!("reading {}", results_path.display()))?;
    let locations: HashMap<String, _> = read_origins_csv(open(&origins_path)?)
        .with_context(|| format!("reading {}", origins_path.display()))?
        .into_iter()
        .map(|o| (o.id, o.location))
        .collect();
    let points = heat_points_from_rows(&rows, &locations)?;

    fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut staged = Staged::new();
    let classification = stage_heatmap(&mut staged, &out_dir, &points, classes, bins)?;
    staged.commit()?;
    println!(
        "{} of {} rows mapped; unreachable: {}",
        points.len(),
        rows.len(),
        rows.iter().filter(|r| r.status == Status::Unreachable.as_str()).count()
    );
    if let Some(c) = classification {
        println!("breakpoints: {:?}", c.breakpoints);
    }
    Ok(())
}
