//! Batch nearest-opportunity accessibility over street and bus networks.
//!
//! For every origin the engine finds the closest destination by network
//! distance or travel time, on foot, by bike, by car, or with a single bus
//! ride. Candidates are first narrowed to the `K` geodesically closest
//! destinations and only those are routed exactly.

pub mod cache;
pub mod geodesy;
pub mod nearest;
pub mod osm;
pub mod output;
pub mod profile;
pub mod routing;
pub mod sampling;
pub mod spatial;
pub mod synth;
pub mod transit;

pub use geodesy::{haversine_m, GeoPoint};
pub use profile::{Mode, ModeProfile};
pub use routing::{RouteMetric, RouteResult, StreetGraph};
