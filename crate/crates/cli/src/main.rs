//! `access`: batch nearest-opportunity accessibility from OSM and GTFS data.

mod commands;
mod config;
mod staging;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::UsageError;

#[derive(Debug, Parser)]
#[command(name = "access", version, about = "Nearest-opportunity accessibility on foot, bike, car and bus")]
struct Cli {
    /// TOML file with settings keyed by long flag name; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build foot, bike and car graphs from an OSM XML extract.
    IngestOsm(IngestArgs),
    /// Parse a GTFS feed and estimate missing timetables on the car graph.
    PrepareTransit(TransitArgs),
    /// Sample origins inside district polygons, weighted by population.
    Sample(SampleArgs),
    /// Find the nearest destination for every origin and write results.
    Compute(ComputeArgs),
    /// Rebuild the heatmap and histogram from a results CSV.
    ExportHeatmap(ExportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// OSM XML extract.
    #[arg(long)]
    pub osm: Option<PathBuf>,
    /// Directory receiving foot.graph, bike.graph and car.graph.
    #[arg(long)]
    pub graph_dir: Option<PathBuf>,
    /// Profile definitions; built-in defaults when absent.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransitArgs {
    /// GTFS directory.
    #[arg(long)]
    pub gtfs: Option<PathBuf>,
    /// Directory holding car.graph.
    #[arg(long)]
    pub graph_dir: Option<PathBuf>,
    /// Transit cache to write [default: <graph-dir>/transit.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Factor applied to estimated car travel times [default: 1.0].
    #[arg(long)]
    pub multiplier: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// GeoJSON districts with district_id and population properties.
    #[arg(long)]
    pub districts: Option<PathBuf>,
    /// Number of origins.
    #[arg(short = 'n', long = "n")]
    pub n: Option<usize>,
    /// Seed for allocation ties and point draws [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Origins CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    /// Origins CSV (id, lat, lon).
    #[arg(long)]
    pub origins: Option<PathBuf>,
    /// Destinations CSV (dest_id or id, lat, lon, extra columns kept).
    #[arg(long)]
    pub destinations: Option<PathBuf>,
    /// Directory of graphs written by ingest-osm.
    #[arg(long)]
    pub graph_dir: Option<PathBuf>,
    /// Transit cache for public_transport [default: <graph-dir>/transit.json].
    #[arg(long)]
    pub transit: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// foot, bike, car or public_transport [default: foot].
    #[arg(long)]
    pub mode: Option<String>,
    /// time_s or distance_m [default: time_s].
    #[arg(long)]
    pub metric: Option<String>,
    /// Geodesic candidates routed per origin [default: 10].
    #[arg(short = 'k', long)]
    pub candidates: Option<usize>,
    /// Walking radius to bus stops in meters [default: 500].
    #[arg(long)]
    pub walk_radius_m: Option<f64>,
    /// Quantile classes in the heatmap [default: 5].
    #[arg(long)]
    pub classes: Option<usize>,
    /// Histogram bins [default: 30].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Recorded in the summary for provenance.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Results CSV written by compute.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Origins CSV giving each origin's location.
    #[arg(long)]
    pub origins: Option<PathBuf>,
    /// Output directory for heatmap.geojson and histogram.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Quantile classes [default: 5].
    #[arg(long)]
    pub classes: Option<usize>,
    /// Histogram bins [default: 30].
    #[arg(long)]
    pub bins: Option<usize>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => config::FileConfig::load(path)?,
        None => config::FileConfig::default(),
    };
    match cli.command {
        Command::IngestOsm(a) => commands::ingest_osm(a, &file),
        Command::PrepareTransit(a) => commands::prepare_transit(a, &file),
        Command::Sample(a) => commands::sample(a, &file),
        Command::Compute(a) => commands::compute(a, &file),
        Command::ExportHeatmap(a) => commands::export_heatmap(a, &file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
