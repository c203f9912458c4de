//! End-to-end orchestration: ingest, activity curves, chronotype
//! clustering, spectral denoising, wake windows, ratio series, the
//! statistics battery and solar boundaries, collected into a
//! serializable report bundle.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Datelike;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{self, CurveKind, DiurnalCurve, BINS};
use crate::clustering::{self, KSelection};
use crate::config::RunConfig;
use crate::curvedist::MetricKind;
use crate::ingest::{self, ContentCategory, PostTable, TzRule};
use crate::ratios::{self, PeriodComparison, RatioSeries};
use crate::rhythm::{self, Extremum, WakeWindow};
use crate::solar;
use crate::spectral;
use crate::stats::{self, Alternative, TestResult};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("ingest: {0}")]
    Ingest(#[from] crate::ingest::IngestError),
    #[error("activity: {0}")]
    Activity(#[from] crate::activity::ActivityError),
    #[error("clustering: {0}")]
    Clustering(#[from] crate::clustering::ClusterError),
    #[error("spectral: {0}")]
    Spectral(#[from] crate::spectral::SpectralError),
    #[error("ratios: {0}")]
    Ratios(#[from] crate::ratios::RatioError),
    #[error("stats: {0}")]
    Stats(#[from] crate::stats::StatsError),
    #[error("report: {0}")]
    Report(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
}

/// Everything the pipeline knows about one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub name: String,
    pub members: usize,
    pub posts: u64,
    /// Pooled per-bin activity, unit mass.
    pub raw_curve: Vec<f64>,
    /// Circular Gaussian rolling average of the raw curve.
    pub gaussian_curve: Vec<f64>,
    /// Fourier reconstruction with the voted harmonic budget.
    pub spectral_curve: Vec<f64>,
    pub activity_m: usize,
    pub wake: WakeWindow,
    pub activity_extrema: Vec<Extremum>,
    /// Same extrema on the "hours past waking" axis.
    pub activity_extrema_aligned: Vec<Extremum>,
    /// Composite disinformative ratio series.
    pub ratio_raw: RatioSeries,
    pub ratio_spectral: RatioSeries,
    pub ratio_m: usize,
    pub ratio_extrema: Vec<Extremum>,
    /// Raw per-category ratio values (known categories).
    pub category_ratios: BTreeMap<String, RatioSeries>,
    /// Bins where the smoothed ratio exceeds its third quartile.
    pub susceptibility_bins: Vec<usize>,
    pub dip_raw: TestResult,
    pub dip_spectral: TestResult,
    pub lockdown: PeriodComparison,
    /// Month labels plus month-by-bin composite ratio matrix and mask.
    pub heatmap_months: Vec<String>,
    pub heatmap_values: Vec<Vec<f64>>,
    pub heatmap_mask: Vec<Vec<bool>>,
}

/// One pairwise one-sided Mann-Whitney comparison of ratio distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwuPairRow {
    pub row_cluster: String,
    pub col_cluster: String,
    pub u: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Quarter-hour-rounded monthly average sunrise/sunset.
    Clock,
    /// Unrounded monthly average sunrise/sunset.
    Sun,
    /// Per-cluster heightened-activity window.
    Wake,
}

/// Day-versus-night ratio comparison for one cluster and category set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayNightRow {
    pub cluster: String,
    pub categories: String,
    pub boundary: BoundaryKind,
    pub day_start: f64,
    pub day_end: f64,
    pub n_day: usize,
    pub n_night: usize,
    pub u: f64,
    pub p_value: f64,
    /// Which side had the stochastically smaller ratios.
    pub lower: String,
}

/// Spearman correlation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanRow {
    pub cluster: String,
    pub target: String,
    pub basis: String,
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Complete analysis output; every table cross-references `config_hash`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub config_hash: String,
    pub config: RunConfig,
    pub counters: ingest::IngestCounters,
    pub users: usize,
    pub frequent_users: usize,
    pub infrequent_users: usize,
    pub k_selection: Option<KSelection>,
    /// user -> cluster name.
    pub assignments: BTreeMap<String, String>,
    pub clusters: Vec<ClusterReport>,
    pub mwu_pairs: Vec<MwuPairRow>,
    pub day_night: Vec<DayNightRow>,
    pub spearman_rows: Vec<SpearmanRow>,
    pub chi_square_category_cluster: Option<TestResult>,
    pub chi_square_lockdown: Option<TestResult>,
    /// (month label, rounded sunrise, rounded sunset).
    pub solar_monthly: Vec<(String, f64, f64)>,
    /// Rounded and unrounded span-average day boundaries.
    pub clock_boundaries: Option<(f64, f64)>,
    pub sun_boundaries: Option<(f64, f64)>,
    pub mean_coordinates: (f64, f64),
    pub warnings: Vec<String>,
}

/// Loads inputs and runs the full analysis.
pub fn run_pipeline(config: &RunConfig) -> Result<ReportBundle, PipelineError> {
    config.validate()?;
    let span = ingest::AnalysisSpan::new(config.span_start, config.span_end);
    let tz = TzRule::parse(&config.timezone)?;

    let file = std::fs::File::open(&config.posts).map_err(ingest::IngestError::Io)?;
    let parsed = ingest::parse_posts(
        std::io::BufReader::new(file),
        &config.schema,
        span,
        config.reject_threshold,
    )?;

    let category_map = match &config.category_map {
        Some(path) => ingest::load_category_map(path)?,
        None => ingest::CategoryMap::new(),
    };
    let bot_list = match &config.bot_list {
        Some(path) => ingest::load_bot_list(path)?,
        None => BTreeSet::new(),
    };
    let mapped = ingest::map_and_filter(&parsed, &category_map, &bot_list);
    let localized = ingest::localize(&mapped, tz);

    let user_coords = match &config.user_coords {
        Some(path) => ingest::load_user_coords(path)?,
        None => BTreeMap::new(),
    };
    run_on_table(localized, user_coords, config)
}

/// Runs every analysis stage on an ingested, localized table.
pub fn run_on_table(
    table: PostTable,
    user_coords: BTreeMap<String, (f64, f64)>,
    config: &RunConfig,
) -> Result<ReportBundle, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| PipelineError::Report(e.to_string()))?;
    pool.install(|| analyse(table, user_coords, config))
}

/// Chronotype clustering stage: infrequent split, smoothed-curve
/// features, Ward clustering and k selection.
pub struct ChronotypeOutcome {
    pub k_selection: Option<KSelection>,
    pub assignments: BTreeMap<String, String>,
    pub member_sets: BTreeMap<String, BTreeSet<String>>,
    pub frequent: usize,
    pub infrequent: usize,
    pub warnings: Vec<String>,
}

/// Clusters frequent users by their smoothed activity profiles and names
/// the clusters after their peak activity time. Infrequent users always
/// form their own cluster.
pub fn chronotype_clusters(
    table: &PostTable,
    config: &RunConfig,
) -> Result<ChronotypeOutcome, PipelineError> {
    let mut warnings = Vec::new();
    let (frequent, infrequent) = clustering::split_infrequent(table, config.infrequent_threshold);
    let frequent_sorted: Vec<String> = frequent.iter().cloned().collect();

    let features: Vec<Vec<f64>> = frequent_sorted
        .par_iter()
        .map(|user| {
            let raw = activity::user_activity_curve(table, user)?;
            let smooth = activity::gaussian_circular_smooth(
                &raw,
                config.smooth_window_minutes,
                config.smooth_sigma_bins,
            )?;
            Ok(smooth.values().to_vec())
        })
        .collect::<Result<_, crate::activity::ActivityError>>()?;

    let mut assignments: BTreeMap<String, String> = BTreeMap::new();
    let mut member_sets: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut k_selection = None;

    if features.len() >= 3 && config.k_range.0 < features.len() {
        let dendrogram = clustering::ward_dendrogram(&features)?;
        let k_hi = config.k_range.1.min(features.len() - 1);
        let selection = clustering::choose_k(&dendrogram, &features, (config.k_range.0, k_hi))?;
        if selection.degenerate {
            warnings.push("all frequent-user profiles identical; skipping clustering".into());
            let set: BTreeSet<String> = frequent_sorted.iter().cloned().collect();
            member_sets.insert("uniform".into(), set);
        } else {
            let labels = dendrogram.cut(selection.k);
            let names = name_clusters(&features, &labels, selection.k, table, &frequent_sorted);
            for (user, &label) in frequent_sorted.iter().zip(&labels) {
                assignments.insert(user.clone(), names[label].clone());
                member_sets.entry(names[label].clone()).or_default().insert(user.clone());
            }
            k_selection = Some(selection);
        }
    } else if !frequent_sorted.is_empty() {
        warnings.push(format!(
            "only {} frequent users; analysing them as one cluster",
            frequent_sorted.len()
        ));
        let set: BTreeSet<String> = frequent_sorted.iter().cloned().collect();
        member_sets.insert("frequent".into(), set);
        for u in &frequent_sorted {
            assignments.insert(u.clone(), "frequent".into());
        }
    } else {
        warnings.push("frequent set empty; infrequent-only analysis".into());
    }

    if !infrequent.is_empty() {
        for u in &infrequent {
            assignments.insert(u.clone(), "infrequent".into());
        }
        member_sets.insert("infrequent".into(), infrequent.clone());
    }

    Ok(ChronotypeOutcome {
        k_selection,
        assignments,
        member_sets,
        frequent: frequent.len(),
        infrequent: infrequent.len(),
        warnings,
    })
}

fn analyse(
    table: PostTable,
    user_coords: BTreeMap<String, (f64, f64)>,
    config: &RunConfig,
) -> Result<ReportBundle, PipelineError> {
    let chronotypes = chronotype_clusters(&table, config)?;
    let ChronotypeOutcome {
        k_selection,
        assignments,
        member_sets,
        frequent,
        infrequent,
        mut warnings,
    } = chronotypes;
    if member_sets.is_empty() {
        return Err(PipelineError::Degenerate("no users with posts in span".into()));
    }

    // solar boundaries from the mean user coordinate
    let mean_coordinates = mean_user_coordinates(&table, &user_coords, config);
    let tz = TzRule::parse(&config.timezone)?;
    let months = span_months(config);
    let mut solar_monthly = Vec::new();
    let mut rises = Vec::new();
    let mut sets = Vec::new();
    for &(y, m) in &months {
        let (rise, set) =
            solar::monthly_boundaries(mean_coordinates.0, mean_coordinates.1, y, m, tz);
        if let (Some(r), Some(s)) = (rise, set) {
            solar_monthly.push((format!("{y}-{m:02}"), r, s));
        }
        let date = chrono::NaiveDate::from_ymd_opt(y, m, 1).unwrap();
        let t = solar::sun_times(mean_coordinates.0, mean_coordinates.1, date, tz);
        if let (Some(r), Some(s)) = (t.sunrise, t.sunset) {
            rises.push(r);
            sets.push(s);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (clock_boundaries, sun_boundaries) = if rises.is_empty() {
        warnings.push("polar day/night at mean coordinates; no solar boundaries".into());
        (None, None)
    } else {
        (
            Some((solar::round_quarter(mean(&rises)), solar::round_quarter(mean(&sets)))),
            Some((mean(&rises), mean(&sets))),
        )
    };

    // per-cluster analysis, deterministic name order
    let cluster_names: Vec<String> = member_sets.keys().cloned().collect();
    let clusters: Vec<ClusterReport> = cluster_names
        .iter()
        .map(|name| cluster_report(name, &member_sets[name], &table, config))
        .collect::<Result<_, PipelineError>>()?;

    // cross-cluster statistics
    let mwu_pairs = mwu_pair_table(&clusters);
    let day_night = day_night_table(&clusters, clock_boundaries, sun_boundaries, config);
    let spearman_rows = spearman_table(&clusters, &member_sets, &table);
    let chi_square_category_cluster = category_cluster_chi2(&member_sets, &table, &mut warnings);
    let chi_square_lockdown = lockdown_chi2(&table, config, &mut warnings);

    Ok(ReportBundle {
        config_hash: config.hash(),
        config: config.clone(),
        counters: table.counters,
        users: table.user_count(),
        frequent_users: frequent,
        infrequent_users: infrequent,
        k_selection,
        assignments,
        clusters,
        mwu_pairs,
        day_night,
        spearman_rows,
        chi_square_category_cluster,
        chi_square_lockdown,
        solar_monthly,
        clock_boundaries,
        sun_boundaries,
        mean_coordinates,
        warnings,
    })
}

/// Months whose first day falls inside the analysis span.
fn span_months(config: &RunConfig) -> Vec<(i32, u32)> {
    let mut months = Vec::new();
    let mut date = config.span_start;
    if date.day() != 1 {
        let (y, m) = (date.year(), date.month());
        date = if m == 12 {
            chrono::NaiveDate::from_ymd_opt(y + 1, 1, 1).unwrap()
        } else {
            chrono::NaiveDate::from_ymd_opt(y, m + 1, 1).unwrap()
        };
    }
    while date <= config.span_end {
        months.push((date.year(), date.month()));
        let (y, m) = (date.year(), date.month());
        date = if m == 12 {
            chrono::NaiveDate::from_ymd_opt(y + 1, 1, 1).unwrap()
        } else {
            chrono::NaiveDate::from_ymd_opt(y, m + 1, 1).unwrap()
        };
    }
    months
}

/// Mean coordinate over users: per-row coordinates win, then the fallback
/// file, then the configured country centroid.
fn mean_user_coordinates(
    table: &PostTable,
    user_coords: &BTreeMap<String, (f64, f64)>,
    config: &RunConfig,
) -> (f64, f64) {
    let mut lat_sum = 0.0;
    let mut lon_sum = 0.0;
    let mut n = 0usize;
    for (user, posts) in table.users() {
        let coord = posts
            .iter()
            .find_map(|r| r.lat.zip(r.lon))
            .or_else(|| user_coords.get(user).copied())
            .unwrap_or((config.centroid_lat, config.centroid_lon));
        lat_sum += coord.0;
        lon_sum += coord.1;
        n += 1;
    }
    if n == 0 {
        (config.centroid_lat, config.centroid_lon)
    } else {
        (lat_sum / n as f64, lon_sum / n as f64)
    }
}

/// Names k clusters after their peak activity time: morning for peaks in
/// [05:00, 12:00), intermediate in [12:00, 17:00), evening otherwise.
/// Collisions get a numeric suffix in label order.
fn name_clusters(
    features: &[Vec<f64>],
    labels: &[usize],
    k: usize,
    table: &PostTable,
    users: &[String],
) -> Vec<String> {
    let mut names = Vec::with_capacity(k);
    let mut used: BTreeMap<String, usize> = BTreeMap::new();
    for cluster in 0..k {
        let members = users
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == cluster)
            .map(|(u, _)| u.as_str());
        let curve = activity::cluster_activity_curve(table, members)
            .map(|c| c.values().to_vec())
            .unwrap_or_else(|_| {
                // fall back to the mean feature profile
                let mut acc = vec![0.0; BINS];
                let mut count = 0.0f64;
                for (f, &l) in features.iter().zip(labels) {
                    if l == cluster {
                        count += 1.0;
                        for (a, v) in acc.iter_mut().zip(f) {
                            *a += v;
                        }
                    }
                }
                acc.iter().map(|v| v / count.max(1.0)).collect()
            });
        let peak = curve
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(b, _)| b)
            .unwrap_or(0);
        let base = match peak {
            20..=47 => "morning",
            48..=67 => "intermediate",
            _ => "evening",
        };
        let count = used.entry(base.to_string()).or_insert(0);
        *count += 1;
        names.push(if *count == 1 { base.to_string() } else { format!("{base}_{count}") });
    }
    names
}

/// Stable per-cluster seed offset so dip bootstraps differ across
/// clusters but never across runs.
fn name_seed(name: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn cluster_report(
    name: &str,
    members: &BTreeSet<String>,
    table: &PostTable,
    config: &RunConfig,
) -> Result<ClusterReport, PipelineError> {
    let raw = activity::cluster_activity_curve(table, members.iter().map(|s| s.as_str()))?;
    let gaussian = activity::gaussian_circular_smooth(
        &raw,
        config.smooth_window_minutes,
        config.smooth_sigma_bins,
    )?;

    let fourier_input = if config.presmooth_cluster_curves { &gaussian } else { &raw };
    let (spectral_curve, activity_sel) =
        spectral::smooth_spectral(fourier_input, &MetricKind::ALL, config.m_range)?;

    let wake_basis = if config.wake_on_raw { &raw } else { &spectral_curve };
    let wake = rhythm::heightened_window(wake_basis, config.wake_hours);

    let activity_extrema = rhythm::extract_extrema(&spectral_curve, 2);
    let aligned_curve = rhythm::align_by_reference(&spectral_curve, wake.onset);
    let activity_extrema_aligned = rhythm::extract_extrema(&aligned_curve, 2);

    let tally = ratios::weighted_tally(table, members, None)?;
    let ratio_raw = ratios::ratio_series_from_tally(&tally, &ContentCategory::DISINFORMATIVE)?;
    let (ratio_spectral, ratio_sel) =
        ratios::smooth_ratio_series(&ratio_raw, &MetricKind::ALL, config.m_range)?;
    let ratio_curve = DiurnalCurve::new(ratio_spectral.values.clone(), CurveKind::Spectral);
    let ratio_extrema = rhythm::extract_extrema(&ratio_curve, 2);
    let susceptibility_bins: Vec<usize> =
        ratios::susceptibility_windows(&ratio_spectral)?.into_iter().collect();

    let mut category_ratios = BTreeMap::new();
    for cat in ContentCategory::KNOWN {
        let series = ratios::ratio_series_from_tally(&tally, &[cat])?;
        category_ratios.insert(cat.as_str().to_string(), series);
    }

    let seed = config.seed ^ name_seed(name);
    let dip_raw = stats::dip_test(raw.values(), config.dip_bootstrap, seed)?;
    let dip_spectral = stats::dip_test(spectral_curve.values(), config.dip_bootstrap, seed ^ 1)?;

    let lockdown =
        ratios::period_comparison(table, members, (config.lockdown_start, config.lockdown_end))?;

    let (heatmap_months, heatmap_values, heatmap_mask) =
        ratios::monthly_heatmap(table, members, &ContentCategory::DISINFORMATIVE)?;

    let posts: u64 = members.iter().map(|u| table.posts_of(u).count() as u64).sum();

    Ok(ClusterReport {
        name: name.to_string(),
        members: members.len(),
        posts,
        raw_curve: raw.values().to_vec(),
        gaussian_curve: gaussian.values().to_vec(),
        spectral_curve: spectral_curve.values().to_vec(),
        activity_m: activity_sel.chosen_m,
        wake,
        activity_extrema,
        activity_extrema_aligned,
        ratio_raw,
        ratio_spectral,
        ratio_m: ratio_sel.chosen_m,
        ratio_extrema,
        category_ratios,
        susceptibility_bins,
        dip_raw,
        dip_spectral,
        lockdown,
        heatmap_months,
        heatmap_values,
        heatmap_mask,
    })
}

/// One-sided Mann-Whitney tests asking whether each row cluster's ratio
/// distribution sits below each column cluster's.
fn mwu_pair_table(clusters: &[ClusterReport]) -> Vec<MwuPairRow> {
    let samples: Vec<(&str, Vec<f64>)> = clusters
        .iter()
        .map(|c| (c.name.as_str(), c.ratio_raw.unmasked().map(|(_, v)| v).collect()))
        .collect();
    let mut rows = Vec::new();
    for (row_name, row_sample) in &samples {
        for (col_name, col_sample) in &samples {
            if row_name == col_name || row_sample.is_empty() || col_sample.is_empty() {
                continue;
            }
            if let Ok(result) = stats::mann_whitney_u(row_sample, col_sample, Alternative::Less) {
                rows.push(MwuPairRow {
                    row_cluster: row_name.to_string(),
                    col_cluster: col_name.to_string(),
                    u: result.statistic,
                    p_value: result.p_value,
                });
            }
        }
    }
    rows
}

fn category_set_series(cluster: &ClusterReport, set_name: &str) -> Option<RatioSeries> {
    if set_name == "disinformative" {
        return Some(cluster.ratio_raw.clone());
    }
    cluster.category_ratios.get(set_name).cloned()
}

fn day_night_table(
    clusters: &[ClusterReport],
    clock: Option<(f64, f64)>,
    sun: Option<(f64, f64)>,
    config: &RunConfig,
) -> Vec<DayNightRow> {
    let sets = ["disinformative", "political", "fake_or_hoax", "conspiracy_junk_science"];
    let mut rows = Vec::new();
    for cluster in clusters {
        let mut boundaries: Vec<(BoundaryKind, (f64, f64))> = Vec::new();
        if let Some(b) = clock {
            boundaries.push((BoundaryKind::Clock, b));
        }
        if let Some(b) = sun {
            boundaries.push((BoundaryKind::Sun, b));
        }
        boundaries.push((BoundaryKind::Wake, (cluster.wake.onset, cluster.wake.end)));

        for set_name in sets {
            let Some(series) = category_set_series(cluster, set_name) else { continue };
            for &(kind, bounds) in &boundaries {
                let Ok((day, night)) =
                    ratios::day_night_split(&series, bounds, config.margin_hours)
                else {
                    continue;
                };
                if day.len() < 2 || night.len() < 2 {
                    continue;
                }
                let day_less = stats::mann_whitney_u(&day, &night, Alternative::Less);
                let night_less = stats::mann_whitney_u(&night, &day, Alternative::Less);
                let (Ok(day_less), Ok(night_less)) = (day_less, night_less) else { continue };
                let (winner, lower) = if day_less.p_value <= night_less.p_value {
                    (day_less, "day")
                } else {
                    (night_less, "night")
                };
                rows.push(DayNightRow {
                    cluster: cluster.name.clone(),
                    categories: set_name.to_string(),
                    boundary: kind,
                    day_start: bounds.0,
                    day_end: bounds.1,
                    n_day: day.len(),
                    n_night: night.len(),
                    u: winner.statistic,
                    p_value: winner.p_value,
                    lower: lower.to_string(),
                });
            }
        }
    }
    rows
}

/// Per-user disinformative share among known-category posts.
fn user_disinformative_ratio(table: &PostTable, user: &str) -> Option<f64> {
    let mut known = 0u64;
    let mut disinf = 0u64;
    for rec in table.posts_of(user) {
        let cat = rec.category_or_other();
        if cat != ContentCategory::Other {
            known += 1;
            disinf += u64::from(cat.is_disinformative());
        }
    }
    (known > 0).then(|| disinf as f64 / known as f64)
}

fn spearman_table(
    clusters: &[ClusterReport],
    member_sets: &BTreeMap<String, BTreeSet<String>>,
    table: &PostTable,
) -> Vec<SpearmanRow> {
    let mut rows = Vec::new();

    // user total posts vs user disinformative ratio, per cluster and overall
    let mut push_user_row = |name: &str, members: Box<dyn Iterator<Item = &String> + '_>| {
        let mut totals = Vec::new();
        let mut ratios_v = Vec::new();
        for user in members {
            if let Some(r) = user_disinformative_ratio(table, user) {
                totals.push(table.posts_of(user).count() as f64);
                ratios_v.push(r);
            }
        }
        if let Ok(res) = stats::spearman(&totals, &ratios_v) {
            rows.push(SpearmanRow {
                cluster: name.to_string(),
                target: "disinformative_ratio_vs_total_posts".into(),
                basis: "per_user".into(),
                rho: res.statistic,
                p_value: res.p_value,
                n: totals.len(),
            });
        }
    };
    for (name, members) in member_sets {
        push_user_row(name, Box::new(members.iter()));
    }
    let mut all_users: Vec<&String> = member_sets.values().flatten().collect();
    all_users.sort();
    push_user_row("total", Box::new(all_users.into_iter()));

    // per-bin activity vs per-bin category ratios, raw and spectral
    for cluster in clusters {
        let sets =
            ["political", "fake_or_hoax", "conspiracy_junk_science", "disinformative"];
        for set_name in sets {
            let Some(series) = category_set_series(cluster, set_name) else { continue };
            for (basis, activity_vals, ratio_vals, mask) in [
                ("raw", &cluster.raw_curve, &series.values, Some(&series.mask)),
                (
                    "spectral",
                    &cluster.spectral_curve,
                    &cluster_spectral_ratio(cluster, set_name).values,
                    None,
                ),
            ] {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for b in 0..BINS {
                    if mask.is_none_or(|m| m[b]) {
                        xs.push(activity_vals[b]);
                        ys.push(ratio_vals[b]);
                    }
                }
                if let Ok(res) = stats::spearman(&xs, &ys) {
                    rows.push(SpearmanRow {
                        cluster: cluster.name.clone(),
                        target: format!("{set_name}_ratio_vs_activity"),
                        basis: basis.into(),
                        rho: res.statistic,
                        p_value: res.p_value,
                        n: xs.len(),
                    });
                }
            }
        }
    }
    rows
}

/// Spectral ratio series for a category set; only the composite has a
/// precomputed spectral form, so single categories reuse the raw values.
fn cluster_spectral_ratio(cluster: &ClusterReport, set_name: &str) -> RatioSeries {
    if set_name == "disinformative" {
        cluster.ratio_spectral.clone()
    } else {
        cluster.category_ratios[set_name].clone()
    }
}

fn category_cluster_chi2(
    member_sets: &BTreeMap<String, BTreeSet<String>>,
    table: &PostTable,
    warnings: &mut Vec<String>,
) -> Option<TestResult> {
    if member_sets.len() < 2 {
        return None;
    }
    let mut rows = Vec::new();
    for members in member_sets.values() {
        let mut counts = vec![0.0; ContentCategory::KNOWN.len()];
        for user in members {
            for rec in table.posts_of(user) {
                let cat = rec.category_or_other();
                if cat != ContentCategory::Other {
                    if let Some(i) = ContentCategory::KNOWN.iter().position(|c| *c == cat) {
                        counts[i] += 1.0;
                    }
                }
            }
        }
        rows.push(counts);
    }
    // drop all-zero category columns so expected counts stay positive
    let keep: Vec<usize> = (0..ContentCategory::KNOWN.len())
        .filter(|&j| rows.iter().map(|r| r[j]).sum::<f64>() > 0.0)
        .collect();
    let trimmed: Vec<Vec<f64>> =
        rows.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect();
    let trimmed: Vec<Vec<f64>> = trimmed
        .into_iter()
        .filter(|r| r.iter().sum::<f64>() > 0.0)
        .collect();
    match stats::chi_square(&trimmed) {
        Ok(res) => Some(res),
        Err(e) => {
            warnings.push(format!("category-by-cluster chi-square skipped: {e}"));
            None
        }
    }
}

fn lockdown_chi2(
    table: &PostTable,
    config: &RunConfig,
    warnings: &mut Vec<String>,
) -> Option<TestResult> {
    let mut counts = [[0.0f64; 2]; 2];
    for rec in table.records() {
        let cat = rec.category_or_other();
        if cat == ContentCategory::Other {
            continue;
        }
        let Some(local) = rec.local.as_ref() else { continue };
        let in_lockdown =
            local.date >= config.lockdown_start && local.date <= config.lockdown_end;
        counts[usize::from(in_lockdown)][usize::from(cat.is_disinformative())] += 1.0;
    }
    match stats::chi_square(&[counts[0].to_vec(), counts[1].to_vec()]) {
        Ok(res) => Some(res),
        Err(e) => {
            warnings.push(format!("lockdown chi-square skipped: {e}"));
            None
        }
    }
}
