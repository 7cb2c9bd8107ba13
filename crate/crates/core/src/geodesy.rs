//! Spherical-Earth geometry shared by every other module.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used for every great-circle distance, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
}

/// A WGS84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;
    fn try_from(raw: RawPoint) -> Result<Self, GeoError> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lat: p.lat, lon: p.lon }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        // NaN fails both range checks.
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        Ok(GeoPoint { lat, lon })
    }

    #[inline]
    pub fn lat(&self) -> f64 {
        self.lat
    }

    #[inline]
    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Great-circle distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
///
/// Uses the arcsine form of the haversine formula, which stays accurate for
/// nearly coincident points. The result is exactly symmetric in its arguments.
#[inline]
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    haversine_with_radius(a, b, EARTH_RADIUS_M)
}

pub fn haversine_with_radius(a: GeoPoint, b: GeoPoint, radius_m: f64) -> f64 {
    let dlat = (b.lat - a.lat).abs().to_radians();
    let dlon = (b.lon - a.lon).abs().to_radians();
    let s_lat = (dlat * 0.5).sin();
    let s_lon = (dlon * 0.5).sin();
    let h = s_lat * s_lat + a.lat.to_radians().cos() * b.lat.to_radians().cos() * s_lon * s_lon;
    2.0 * radius_m * h.sqrt().min(1.0).asin()
}

/// Lower bound in meters on the distance from `p` to any point of the
/// lat/lon rectangle `[min_lat, max_lat] x [min_lon, max_lon]`.
///
/// Combines the meridional gap with the cross-track distance to the nearest
/// bounding meridian, scaled at the query latitude. Never exceeds the true
/// minimum distance.
pub fn rect_lower_bound_m(p: GeoPoint, min_lat: f64, max_lat: f64, min_lon: f64, max_lon: f64) -> f64 {
    let dlat_deg = if p.lat < min_lat {
        min_lat - p.lat
    } else if p.lat > max_lat {
        p.lat - max_lat
    } else {
        0.0
    };
    let dlon_deg = if p.lon < min_lon {
        min_lon - p.lon
    } else if p.lon > max_lon {
        p.lon - max_lon
    } else {
        0.0
    };
    let along_meridian = dlat_deg.to_radians();
    // sin is concave on [0, 180], so its minimum over the box's longitude
    // offsets sits at one of the two extremes.
    let far_lon_deg = (p.lon - min_lon).abs().max((p.lon - max_lon).abs());
    let cross_track = if dlon_deg > 0.0 && far_lon_deg <= 180.0 {
        let s = dlon_deg.to_radians().sin().min(far_lon_deg.to_radians().sin());
        (p.lat.to_radians().cos() * s).clamp(0.0, 1.0).asin()
    } else {
        0.0
    };
    // Shave a relative epsilon so rounding can never push the bound past a
    // true distance computed by `haversine_m`.
    along_meridian.max(cross_track) * EARTH_RADIUS_M * (1.0 - 1e-9)
}
