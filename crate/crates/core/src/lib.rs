//! Diurnal activity analytics for timestamped post data.
//!
//! The crate turns a table of timestamped posts into:
//!
//! * per-user and per-cluster activity curves on a 96-bin circular day grid
//!   ([`activity`]),
//! * chronotype clusters via Ward agglomerative clustering with automatic
//!   cluster-count selection ([`clustering`]),
//! * Fourier-denoised curves with an automatically chosen harmonic budget
//!   ([`spectral`], [`curvedist`]),
//! * heightened-activity (waking) windows and curve extrema ([`rhythm`]),
//! * user-weighted content-reliability ratio series and day/night
//!   comparisons ([`ratios`], [`solar`]),
//! * a nonparametric test battery ([`stats`]),
//! * and an end-to-end pipeline with synthetic-population generation for
//!   verification ([`pipeline`], [`synth`]).

pub mod activity;
pub mod clustering;
pub mod config;
pub mod curvedist;
pub mod ingest;
pub mod pipeline;
pub mod ratios;
pub mod report;
pub mod rhythm;
pub mod solar;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use activity::{DiurnalCurve, BINS};
pub use ingest::{ContentCategory, PostKind, PostRecord, PostTable};
