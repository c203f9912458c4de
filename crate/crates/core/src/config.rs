//! Run configuration: input paths, analysis span and every tunable the
//! pipeline consumes. Serialized next to every output for provenance.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::Schema;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn de_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 22).unwrap()
}

fn de_span_end() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 8, 1).unwrap()
}

fn de_lockdown_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 9).unwrap()
}

fn de_lockdown_end() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 5, 18).unwrap()
}

fn de_tz() -> String {
    "CET".into()
}

fn de_reject() -> f64 {
    crate::ingest::DEFAULT_REJECT_THRESHOLD
}

fn de_window() -> f64 {
    crate::activity::SMOOTH_WINDOW_MINUTES
}

fn de_sigma() -> f64 {
    crate::activity::SMOOTH_SIGMA_BINS
}

fn de_threshold() -> usize {
    crate::clustering::INFREQUENT_THRESHOLD
}

fn de_k_range() -> (usize, usize) {
    (2, 10)
}

fn de_m_range() -> (usize, usize) {
    (1, 4)
}

fn de_wake() -> f64 {
    16.0
}

fn de_margin() -> f64 {
    1.0
}

fn de_bootstrap() -> usize {
    crate::stats::DIP_BOOTSTRAP_DEFAULT
}

fn de_lat() -> f64 {
    42.5
}

fn de_lon() -> f64 {
    12.5
}

fn de_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// All pipeline settings. Defaults: span 2020-01-22..2022-08-01 in
/// CET/CEST, 240-post infrequent threshold, 16-hour wake window, 1-hour
/// day/night safety margin and the 2020-03-09 to 2020-05-18 lockdown
/// period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Posts file (TSV/CSV per `schema`).
    pub posts: PathBuf,
    #[serde(default)]
    pub category_map: Option<PathBuf>,
    #[serde(default)]
    pub bot_list: Option<PathBuf>,
    #[serde(default)]
    pub user_coords: Option<PathBuf>,
    #[serde(default)]
    pub schema: Schema,

    #[serde(default = "de_date")]
    pub span_start: NaiveDate,
    #[serde(default = "de_span_end")]
    pub span_end: NaiveDate,
    #[serde(default = "de_tz")]
    pub timezone: String,

    #[serde(default = "de_reject")]
    pub reject_threshold: f64,
    #[serde(default = "de_window")]
    pub smooth_window_minutes: f64,
    #[serde(default = "de_sigma")]
    pub smooth_sigma_bins: f64,
    #[serde(default = "de_threshold")]
    pub infrequent_threshold: usize,
    #[serde(default = "de_k_range")]
    pub k_range: (usize, usize),
    #[serde(default = "de_m_range")]
    pub m_range: (usize, usize),
    #[serde(default = "de_wake")]
    pub wake_hours: f64,
    #[serde(default = "de_margin")]
    pub margin_hours: f64,
    /// Detect wake windows on raw instead of spectral curves.
    #[serde(default)]
    pub wake_on_raw: bool,
    /// Gaussian-smooth cluster curves before the Fourier step.
    #[serde(default)]
    pub presmooth_cluster_curves: bool,

    #[serde(default = "de_lockdown_start")]
    pub lockdown_start: NaiveDate,
    #[serde(default = "de_lockdown_end")]
    pub lockdown_end: NaiveDate,

    #[serde(default = "de_bootstrap")]
    pub dip_bootstrap: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 picks the rayon default.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "de_lat")]
    pub centroid_lat: f64,
    #[serde(default = "de_lon")]
    pub centroid_lon: f64,

    #[serde(default = "de_out_dir")]
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            posts: PathBuf::from("posts.tsv"),
            category_map: None,
            bot_list: None,
            user_coords: None,
            schema: Schema::default(),
            span_start: de_date(),
            span_end: de_span_end(),
            timezone: de_tz(),
            reject_threshold: de_reject(),
            smooth_window_minutes: de_window(),
            smooth_sigma_bins: de_sigma(),
            infrequent_threshold: de_threshold(),
            k_range: de_k_range(),
            m_range: de_m_range(),
            wake_hours: de_wake(),
            margin_hours: de_margin(),
            wake_on_raw: false,
            presmooth_cluster_curves: false,
            lockdown_start: de_lockdown_start(),
            lockdown_end: de_lockdown_end(),
            dip_bootstrap: de_bootstrap(),
            seed: 0,
            threads: 0,
            centroid_lat: de_lat(),
            centroid_lon: de_lon(),
            out_dir: de_out_dir(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source: Box::new(source) })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.span_start > self.span_end {
            return Err(ConfigError::Invalid("span_start after span_end".into()));
        }
        if self.k_range.0 < 2 || self.k_range.0 > self.k_range.1 {
            return Err(ConfigError::Invalid(format!("bad k_range {:?}", self.k_range)));
        }
        if self.m_range.0 < 1 || self.m_range.0 > self.m_range.1 || self.m_range.1 > 48 {
            return Err(ConfigError::Invalid(format!("bad m_range {:?}", self.m_range)));
        }
        if !(0.0..24.0).contains(&self.wake_hours) || self.wake_hours <= 0.0 {
            return Err(ConfigError::Invalid("wake_hours must be in (0, 24)".into()));
        }
        if self.margin_hours < 0.0 {
            return Err(ConfigError::Invalid("margin_hours must be non-negative".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Short provenance hash over the canonical TOML form. The thread
    /// count and output directory are excluded: neither may change
    /// results, so runs differing only in them hash identically.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.threads = 0;
        canonical.out_dir = PathBuf::new();
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
