//! Run configuration: an optional TOML file whose keys mirror the long
//! flag names, overridden by flags given on the command line.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// A configuration or usage problem. Reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub osm: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub gtfs: Option<PathBuf>,
    pub graph_dir: Option<PathBuf>,
    pub transit: Option<PathBuf>,
    pub districts: Option<PathBuf>,
    pub origins: Option<PathBuf>,
    pub destinations: Option<PathBuf>,
    pub results: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub mode: Option<String>,
    pub metric: Option<String>,
    pub candidates: Option<usize>,
    pub walk_radius_m: Option<f64>,
    pub multiplier: Option<f64>,
    pub classes: Option<usize>,
    pub bins: Option<usize>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Flag value if given, else the config file value.
pub fn pick<T>(flag: Option<T>, file: &Option<T>) -> Option<T>
where
    T: Clone,
{
    flag.or_else(|| file.clone())
}

pub fn require<T>(value: Option<T>, name: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| usage(format!("missing required setting --{name}")))
}

pub fn existing_file(path: PathBuf, what: &str) -> anyhow::Result<PathBuf> {
    if !path.is_file() {
        return Err(usage(format!("{what} not found: {}", path.display())));
    }
    Ok(path)
}

pub fn existing_dir(path: PathBuf, what: &str) -> anyhow::Result<PathBuf> {
    if !path.is_dir() {
        return Err(usage(format!("{what} not found: {}", path.display())));
    }
    Ok(path)
}

pub fn parse_setting<T>(value: Option<String>, name: &str) -> anyhow::Result<Option<T>>
where
    T: std::str::FromStr,
    T::Err: fmt::Display,
{
    value
        .map(|v| v.parse::<T>().map_err(|e| usage(format!("invalid --{name}: {e}"))))
        .transpose()
}

pub fn check(ok: bool, message: impl Into<String>) -> anyhow::Result<()> {
    if ok {
        Ok(())
    } else {
        Err(usage(message))
    }
}
