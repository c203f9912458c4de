//! Diurnal activity curves on the 96-bin circular day grid.
//!
//! A day is split into 96 quarter-hour bins; bin `b` covers the half-open
//! interval `[b/4, b/4 + 1/4)` hours. Indexing is circular: bin 95 is
//! adjacent to bin 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{PostRecord, PostTable};

/// Number of quarter-hour bins in a day.
pub const BINS: usize = 96;

/// Minutes covered by one bin.
pub const BIN_MINUTES: u32 = 15;

#[derive(Debug, Error, PartialEq)]
pub enum ActivityError {
    #[error("user {0:?} has no posts")]
    EmptyUser(String),
    #[error("no posts found for any member of the set")]
    EmptyCluster,
    #[error("post table has not been localized")]
    NotLocalized,
    #[error("smoothing window shorter than one bin ({0} minutes)")]
    WindowTooShort(f64),
}

/// Provenance of a curve's values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// Direct per-bin tally (normalized or not).
    Raw,
    /// Circular Gaussian rolling average of a raw curve.
    Smoothed,
    /// Reconstruction from a truncated Fourier series; may dip below zero.
    Spectral,
}

/// A 96-value circular series over the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiurnalCurve {
    values: Vec<f64>,
    kind: CurveKind,
}

impl DiurnalCurve {
    /// Wraps raw values. Panics if the slice is not 96 long.
    pub fn new(values: Vec<f64>, kind: CurveKind) -> Self {
        assert_eq!(values.len(), BINS, "diurnal curve must have {BINS} bins");
        debug_assert!(
            kind == CurveKind::Spectral || values.iter().all(|v| *v >= 0.0),
            "raw/smoothed curves must be non-negative"
        );
        Self { values, kind }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    /// Sum of all bin values.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Value at bin `b` (no wrapping).
    pub fn value(&self, bin: usize) -> f64 {
        self.values[bin]
    }

    /// Circular left shift by `k` bins: output bin 0 holds input bin `k`.
    pub fn shifted_left(&self, k: usize) -> Self {
        let mut out = vec![0.0; BINS];
        for (b, slot) in out.iter_mut().enumerate() {
            *slot = self.values[(b + k) % BINS];
        }
        Self { values: out, kind: self.kind }
    }

    /// Hour of day at which bin `b` starts.
    pub fn bin_start_hour(bin: usize) -> f64 {
        bin as f64 / 4.0
    }

    /// 96-row CSV form: `bin_start,value` with HH:MM labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,value\n");
        for (b, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{:02}:{:02},{v:.9}\n", b / 4, (b % 4) * 15));
        }
        out
    }
}

/// Bin index for a wall-clock minute of day (0..1440).
pub fn bin_of_minute(minute_of_day: u32) -> usize {
    debug_assert!(minute_of_day < 24 * 60);
    (minute_of_day / BIN_MINUTES) as usize
}

/// Bin index for a wall-clock hour of day in `[0, 24)`: `floor(4h)`.
pub fn bin_index(hour_of_day: f64) -> usize {
    debug_assert!((0.0..24.0).contains(&hour_of_day));
    ((hour_of_day * 4.0).floor() as usize).min(BINS - 1)
}

fn tally(posts: &[&PostRecord]) -> Result<[u64; BINS], ActivityError> {
    let mut counts = [0u64; BINS];
    for rec in posts {
        let local = rec.local.as_ref().ok_or(ActivityError::NotLocalized)?;
        counts[bin_of_minute(local.minute_of_day)] += 1;
    }
    Ok(counts)
}

fn normalized(counts: [u64; BINS]) -> DiurnalCurve {
    let total: u64 = counts.iter().sum();
    let values = counts.iter().map(|&c| c as f64 / total as f64).collect();
    DiurnalCurve::new(values, CurveKind::Raw)
}

/// Per-user activity: share of the user's posts falling in each bin.
///
/// The curve has unit mass. All post kinds and categories count equally.
pub fn user_activity_curve(table: &PostTable, user: &str) -> Result<DiurnalCurve, ActivityError> {
    let posts: Vec<&PostRecord> = table.posts_of(user).collect();
    if posts.is_empty() {
        return Err(ActivityError::EmptyUser(user.to_string()));
    }
    Ok(normalized(tally(&posts)?))
}

/// Pooled cluster activity: per-bin counts over all members, normalized by
/// the pooled total. Heavy posters dominate; this is a post-weighted pool,
/// not an average of per-user curves.
pub fn cluster_activity_curve<'a, I>(table: &PostTable, members: I) -> Result<DiurnalCurve, ActivityError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts = [0u64; BINS];
    let mut any = false;
    for user in members {
        let posts: Vec<&PostRecord> = table.posts_of(user).collect();
        if posts.is_empty() {
            continue;
        }
        any = true;
        for (b, c) in tally(&posts)?.iter().enumerate() {
            counts[b] += c;
        }
    }
    if !any {
        return Err(ActivityError::EmptyCluster);
    }
    Ok(normalized(counts))
}

/// Unit-sum truncated Gaussian kernel over `2*half + 1` taps.
fn gaussian_kernel(half: usize, sigma_bins: f64) -> Vec<f64> {
    let mut kernel: Vec<f64> = (-(half as isize)..=half as isize)
        .map(|i| {
            let x = i as f64 / sigma_bins;
            (-0.5 * x * x).exp()
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= sum;
    }
    kernel
}

/// Circular rolling Gaussian average, looping around midnight.
///
/// The window length is given in minutes; it spans an odd number of taps
/// after rounding (`half = round(window / 30)` bins each side). Mass is
/// preserved because the kernel sums to one.
pub fn gaussian_circular_smooth(
    curve: &DiurnalCurve,
    window_minutes: f64,
    sigma_bins: f64,
) -> Result<DiurnalCurve, ActivityError> {
    if window_minutes < BIN_MINUTES as f64 {
        return Err(ActivityError::WindowTooShort(window_minutes));
    }
    assert!(sigma_bins > 0.0, "sigma must be positive");
    let half = (window_minutes / (2.0 * BIN_MINUTES as f64)).round() as usize;
    let kernel = gaussian_kernel(half, sigma_bins);
    let vals = curve.values();
    let mut out = vec![0.0; BINS];
    for (b, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, w) in kernel.iter().enumerate() {
            let idx = (b + BINS + j - half) % BINS;
            acc += w * vals[idx];
        }
        *slot = acc;
    }
    Ok(DiurnalCurve::new(out, CurveKind::Smoothed))
}

/// Default smoothing used for clustering features: 90-minute window,
/// sigma = window/4 in bins.
pub const SMOOTH_WINDOW_MINUTES: f64 = 90.0;
pub const SMOOTH_SIGMA_BINS: f64 = 1.5;
