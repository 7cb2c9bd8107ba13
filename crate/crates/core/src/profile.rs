//! Per-mode street access rules and default speeds.
//!
//! The built-in defaults are mirrored in `config/profiles.toml` at the
//! repository root; a test keeps the two in sync.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Foot,
    Bike,
    Car,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Foot, Mode::Bike, Mode::Car];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Foot => "foot",
            Mode::Bike => "bike",
            Mode::Car => "car",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "foot" => Ok(Mode::Foot),
            "bike" | "bicycle" => Ok(Mode::Bike),
            "car" => Ok(Mode::Car),
            other => Err(format!("unknown street mode '{other}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("invalid profile file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("profile '{mode}' has non-positive speed {speed} for '{tag}'")]
    Speed { mode: Mode, tag: String, speed: f64 },
    #[error("profile '{0}' violates its mode's fixed rules")]
    ModeRule(Mode),
    #[error("profile set is missing '{0}'")]
    Missing(Mode),
}

/// Which ways a mode may use and how fast it travels on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub mode: Mode,
    pub allowed_highways: BTreeSet<String>,
    /// Speed used for an allowed highway class with no entry in `highway_speeds_kmh`.
    pub default_speed_kmh: f64,
    #[serde(default)]
    pub highway_speeds_kmh: BTreeMap<String, f64>,
    pub respects_oneway: bool,
    pub respects_maxspeed: bool,
}

/// Travel direction(s) permitted on a way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Both,
    Forward,
    Backward,
}

impl Direction {
    pub fn forward(self) -> bool {
        matches!(self, Direction::Both | Direction::Forward)
    }

    pub fn backward(self) -> bool {
        matches!(self, Direction::Both | Direction::Backward)
    }
}

fn set(tags: &[&str]) -> BTreeSet<String> {
    tags.iter().map(|s| s.to_string()).collect()
}

impl ModeProfile {
    pub fn foot() -> Self {
        ModeProfile {
            mode: Mode::Foot,
            allowed_highways: set(&[
                "primary",
                "primary_link",
                "secondary",
                "secondary_link",
                "tertiary",
                "tertiary_link",
                "unclassified",
                "residential",
                "living_street",
                "service",
                "pedestrian",
                "footway",
                "path",
                "steps",
                "track",
                "cycleway",
            ]),
            default_speed_kmh: 5.0,
            highway_speeds_kmh: BTreeMap::new(),
            respects_oneway: false,
            respects_maxspeed: false,
        }
    }

    pub fn bike() -> Self {
        ModeProfile {
            mode: Mode::Bike,
            allowed_highways: set(&[
                "primary",
                "primary_link",
                "secondary",
                "secondary_link",
                "tertiary",
                "tertiary_link",
                "unclassified",
                "residential",
                "living_street",
                "service",
                "cycleway",
                "path",
                "track",
            ]),
            default_speed_kmh: 15.0,
            highway_speeds_kmh: BTreeMap::new(),
            respects_oneway: true,
            respects_maxspeed: false,
        }
    }

    pub fn car() -> Self {
        let speeds = [
            ("motorway", 100.0),
            ("motorway_link", 100.0),
            ("primary", 60.0),
            ("primary_link", 60.0),
            ("secondary", 50.0),
            ("secondary_link", 50.0),
            ("residential", 40.0),
        ];
        ModeProfile {
            mode: Mode::Car,
            allowed_highways: set(&[
                "motorway",
                "motorway_link",
                "trunk",
                "trunk_link",
                "primary",
                "primary_link",
                "secondary",
                "secondary_link",
                "tertiary",
                "tertiary_link",
                "unclassified",
                "residential",
                "living_street",
                "service",
            ]),
            default_speed_kmh: 30.0,
            highway_speeds_kmh: speeds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            respects_oneway: true,
            respects_maxspeed: true,
        }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Foot => Self::foot(),
            Mode::Bike => Self::bike(),
            Mode::Car => Self::car(),
        }
    }

    /// Same profile with every speed replaced by `kmh`.
    pub fn with_uniform_speed(mut self, kmh: f64) -> Self {
        self.default_speed_kmh = kmh;
        self.highway_speeds_kmh.clear();
        self.respects_maxspeed = false;
        self
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let bad = |tag: &str, speed: f64| ProfileError::Speed {
            mode: self.mode,
            tag: tag.to_string(),
            speed,
        };
        if !(self.default_speed_kmh.is_finite() && self.default_speed_kmh > 0.0) {
            return Err(bad("default", self.default_speed_kmh));
        }
        for (tag, &speed) in &self.highway_speeds_kmh {
            if !(speed.is_finite() && speed > 0.0) {
                return Err(bad(tag, speed));
            }
        }
        let fixed_ok = match self.mode {
            Mode::Foot => !self.respects_oneway,
            Mode::Car => self.respects_oneway && self.respects_maxspeed,
            Mode::Bike => true,
        };
        if !fixed_ok {
            return Err(ProfileError::ModeRule(self.mode));
        }
        Ok(())
    }

    /// Speed in km/h for a way with these tags, or `None` if the mode may
    /// not use it.
    pub fn speed_kmh(&self, tags: &BTreeMap<String, String>) -> Option<f64> {
        let highway = tags.get("highway")?;
        if !self.allowed_highways.contains(highway) {
            return None;
        }
        if matches!(tags.get("access").map(String::as_str), Some("no" | "private")) {
            return None;
        }
        if self.respects_maxspeed {
            if let Some(speed) = tags.get("maxspeed").and_then(|v| parse_maxspeed(v)) {
                return Some(speed);
            }
        }
        Some(
            self.highway_speeds_kmh
                .get(highway)
                .copied()
                .unwrap_or(self.default_speed_kmh),
        )
    }

    pub fn direction(&self, tags: &BTreeMap<String, String>, way_id: i64) -> Direction {
        if !self.respects_oneway {
            return Direction::Both;
        }
        match tags.get("oneway").map(String::as_str) {
            Some("yes" | "true" | "1") => Direction::Forward,
            Some("-1" | "reverse") => Direction::Backward,
            Some("no" | "false" | "0") => Direction::Both,
            Some(other) => {
                log::warn!("way {way_id}: unrecognised oneway={other}, treating as two-way");
                Direction::Both
            }
            None => {
                let roundabout = tags.get("junction").is_some_and(|j| j == "roundabout");
                let motorway = tags.get("highway").is_some_and(|h| h == "motorway");
                if roundabout || motorway {
                    Direction::Forward
                } else {
                    Direction::Both
                }
            }
        }
    }
}

/// Parses `50`, `50 km/h` or `30 mph`; anything else yields `None`.
pub fn parse_maxspeed(value: &str) -> Option<f64> {
    let first = value.split(';').next()?.trim();
    let (number, factor) = if let Some(n) = first.strip_suffix("mph") {
        (n.trim(), 1.609_344)
    } else if let Some(n) = first.strip_suffix("km/h").or_else(|| first.strip_suffix("kmh")) {
        (n.trim(), 1.0)
    } else {
        (first, 1.0)
    };
    let v: f64 = number.parse().ok()?;
    (v.is_finite() && v > 0.0).then_some(v * factor)
}

/// The three street profiles, as loaded from a profile file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub foot: ModeProfile,
    pub bike: ModeProfile,
    pub car: ModeProfile,
}

impl Default for ProfileSet {
    fn default() -> Self {
        ProfileSet {
            foot: ModeProfile::foot(),
            bike: ModeProfile::bike(),
            car: ModeProfile::car(),
        }
    }
}

impl ProfileSet {
    pub fn from_toml_str(text: &str) -> Result<Self, ProfileError> {
        let set: ProfileSet = toml::from_str(text)?;
        for (mode, p) in [(Mode::Foot, &set.foot), (Mode::Bike, &set.bike), (Mode::Car, &set.car)] {
            if p.mode != mode {
                return Err(ProfileError::Missing(mode));
            }
            p.validate()?;
        }
        Ok(set)
    }

    pub fn get(&self, mode: Mode) -> &ModeProfile {
        match mode {
            Mode::Foot => &self.foot,
            Mode::Bike => &self.bike,
            Mode::Car => &self.car,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_are_valid() {
        for m in Mode::ALL {
            ModeProfile::for_mode(m).validate().unwrap();
        }
        assert!(!ModeProfile::foot().respects_oneway);
        assert!(ModeProfile::car().respects_oneway && ModeProfile::car().respects_maxspeed);
    }

    #[test]
    fn car_speeds_by_class() {
        let car = ModeProfile::car();
        assert_eq!(car.speed_kmh(&tags(&[("highway", "motorway")])), Some(100.0));
        assert_eq!(car.speed_kmh(&tags(&[("highway", "primary")])), Some(60.0));
        assert_eq!(car.speed_kmh(&tags(&[("highway", "secondary")])), Some(50.0));
        assert_eq!(car.speed_kmh(&tags(&[("highway", "residential")])), Some(40.0));
        assert_eq!(car.speed_kmh(&tags(&[("highway", "tertiary")])), Some(30.0));
        assert_eq!(car.speed_kmh(&tags(&[("highway", "footway")])), None);
        assert_eq!(
            car.speed_kmh(&tags(&[("highway", "residential"), ("maxspeed", "20")])),
            Some(20.0)
        );
        assert_eq!(ModeProfile::foot().speed_kmh(&tags(&[("highway", "motorway")])), None);
        assert_eq!(ModeProfile::foot().speed_kmh(&tags(&[("highway", "footway")])), Some(5.0));
        assert_eq!(ModeProfile::bike().speed_kmh(&tags(&[("highway", "primary")])), Some(15.0));
    }

    #[test]
    fn maxspeed_formats() {
        assert_eq!(parse_maxspeed("50"), Some(50.0));
        assert_eq!(parse_maxspeed("50 km/h"), Some(50.0));
        assert!((parse_maxspeed("30 mph").unwrap() - 48.28032).abs() < 1e-9);
        assert_eq!(parse_maxspeed("AR:urban"), None);
        assert_eq!(parse_maxspeed("none"), None);
    }

    #[test]
    fn oneway_handling() {
        let car = ModeProfile::car();
        assert_eq!(car.direction(&tags(&[("oneway", "yes")]), 1), Direction::Forward);
        assert_eq!(car.direction(&tags(&[("oneway", "-1")]), 1), Direction::Backward);
        assert_eq!(car.direction(&tags(&[("oneway", "no")]), 1), Direction::Both);
        assert_eq!(car.direction(&tags(&[("oneway", "alternating")]), 1), Direction::Both);
        assert_eq!(car.direction(&tags(&[("junction", "roundabout")]), 1), Direction::Forward);
        let foot = ModeProfile::foot();
        assert_eq!(foot.direction(&tags(&[("oneway", "yes")]), 1), Direction::Both);
    }

    #[test]
    fn shipped_profile_file_matches_defaults() {
        let text = include_str!("../../../config/profiles.toml");
        assert_eq!(ProfileSet::from_toml_str(text).unwrap(), ProfileSet::default());
    }

    #[test]
    fn mode_rules_enforced() {
        let mut foot = ModeProfile::foot();
        foot.respects_oneway = true;
        assert!(matches!(foot.validate(), Err(ProfileError::ModeRule(Mode::Foot))));
        let mut car = ModeProfile::car();
        car.default_speed_kmh = 0.0;
        assert!(matches!(car.validate(), Err(ProfileError::Speed { .. })));
    }
}
