//! User-weighted content-type ratio series, the potentially disinformative
//! composite, susceptibility windows and period comparisons.
//!
//! Every post carries the weight 1 / (author's total posts), so each user
//! contributes equally to the dataset. Ratios are taken over the known
//! categories only; `Other` never enters numerator or denominator. A set
//! ratio is accumulated as the sum of its single-category ratios, so the
//! composite equals the sum of its parts bit for bit.

use std::collections::BTreeSet;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{CurveKind, DiurnalCurve, BINS};
use crate::curvedist::MetricKind;
use crate::ingest::{ContentCategory, PostTable};
use crate::spectral;

#[derive(Debug, Error, PartialEq)]
pub enum RatioError {
    #[error("user {0:?} has no posts")]
    EmptyUser(String),
    #[error("category set must be within the known categories (no Other)")]
    BadCategorySet,
    #[error("post table has not been localized")]
    NotLocalized,
    #[error("susceptibility windows need a spectral series")]
    NotSpectral,
    #[error("empty or inverted period")]
    EmptyPeriod,
    #[error("day/night windows degenerate after margins")]
    DegenerateWindows,
    #[error(transparent)]
    Spectral(#[from] crate::spectral::SpectralError),
}

/// Weight of each post by `user`: one over the user's total posts.
pub fn user_weight(table: &PostTable, user: &str) -> Result<f64, RatioError> {
    let count = table.posts_of(user).count();
    if count == 0 {
        return Err(RatioError::EmptyUser(user.to_string()));
    }
    Ok(1.0 / count as f64)
}

/// Per-bin, per-category weighted post mass for a member set.
///
/// Entry `[bin][cat]` is the sum over members of (posts in that bin and
/// category) x (member weight). Accumulation is per user in sorted order
/// with one multiply per cell, which keeps results bit-stable under post
/// duplication (weight halves exactly as counts double).
#[derive(Debug, Clone)]
pub struct WeightedTally {
    pub mass: Vec<[f64; 8]>,
}

impl WeightedTally {
    pub fn known_mass(&self, bin: usize) -> f64 {
        ContentCategory::KNOWN.iter().map(|c| self.mass[bin][c.index()]).sum()
    }
}

/// Builds the weighted tally for `members`, optionally restricted to local
/// dates within `[from, to]`. Weights always use the user's full post count.
pub fn weighted_tally(
    table: &PostTable,
    members: &BTreeSet<String>,
    date_filter: Option<(NaiveDate, NaiveDate)>,
) -> Result<WeightedTally, RatioError> {
    let mut mass = vec![[0.0f64; 8]; BINS];
    for (user, posts) in table.users() {
        if !members.contains(user) {
            continue;
        }
        let weight = 1.0 / posts.len() as f64;
        let mut counts = vec![[0u32; 8]; BINS];
        for rec in posts {
            let local = rec.local.as_ref().ok_or(RatioError::NotLocalized)?;
            if let Some((from, to)) = date_filter {
                if local.date < from || local.date > to {
                    continue;
                }
            }
            let bin = (local.minute_of_day / 15) as usize;
            counts[bin][rec.category_or_other().index()] += 1;
        }
        for (bin, row) in counts.iter().enumerate() {
            for (cat, &c) in row.iter().enumerate() {
                if c > 0 {
                    mass[bin][cat] += c as f64 * weight;
                }
            }
        }
    }
    Ok(WeightedTally { mass })
}

/// A per-bin ratio series with a missing-value mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    pub values: Vec<f64>,
    /// False where the bin has no known-category posts.
    pub mask: Vec<bool>,
    pub categories: Vec<ContentCategory>,
    pub kind: CurveKind,
}

impl RatioSeries {
    pub fn unmasked(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().filter(|(b, _)| self.mask[*b]).map(|(b, v)| (b, *v))
    }
}

fn check_categories(categories: &[ContentCategory]) -> Result<(), RatioError> {
    if categories.is_empty() || categories.contains(&ContentCategory::Other) {
        return Err(RatioError::BadCategorySet);
    }
    Ok(())
}

/// Ratio of the given categories among all known-category posts, per bin.
pub fn ratio_series_from_tally(
    tally: &WeightedTally,
    categories: &[ContentCategory],
) -> Result<RatioSeries, RatioError> {
    check_categories(categories)?;
    let mut values = vec![0.0; BINS];
    let mut mask = vec![false; BINS];
    for bin in 0..BINS {
        let denom = tally.known_mass(bin);
        if denom > 0.0 {
            mask[bin] = true;
            // sum of single-category quotients: keeps set ratios exactly
            // additive in their parts
            values[bin] =
                categories.iter().map(|c| tally.mass[bin][c.index()] / denom).sum();
        }
    }
    Ok(RatioSeries { values, mask, categories: categories.to_vec(), kind: CurveKind::Raw })
}

/// Convenience: tally and ratio in one call.
pub fn ratio_series(
    table: &PostTable,
    members: &BTreeSet<String>,
    categories: &[ContentCategory],
) -> Result<RatioSeries, RatioError> {
    let tally = weighted_tally(table, members, None)?;
    ratio_series_from_tally(&tally, categories)
}

/// Masked bins filled by circular linear interpolation between the
/// nearest unmasked neighbours.
fn interpolate_masked(series: &RatioSeries) -> Vec<f64> {
    let n = BINS;
    if series.mask.iter().all(|m| *m) {
        return series.values.clone();
    }
    if series.mask.iter().all(|m| !*m) {
        return vec![0.0; n];
    }
    let mut out = series.values.clone();
    for (b, slot) in out.iter_mut().enumerate() {
        if series.mask[b] {
            continue;
        }
        let mut prev = b;
        let mut dp = 0usize;
        while !series.mask[prev] {
            prev = (prev + n - 1) % n;
            dp += 1;
        }
        let mut next = b;
        let mut dn = 0usize;
        while !series.mask[next] {
            next = (next + 1) % n;
            dn += 1;
        }
        let t = dp as f64 / (dp + dn) as f64;
        *slot = series.values[prev] * (1.0 - t) + series.values[next] * t;
    }
    out
}

/// Fourier-denoises a ratio series: masked bins are interpolated, the
/// harmonic budget is chosen by the metric vote, and the reconstruction is
/// returned as a fully-defined spectral series.
pub fn smooth_ratio_series(
    series: &RatioSeries,
    metrics: &[MetricKind],
    m_range: (usize, usize),
) -> Result<(RatioSeries, spectral::BudgetSelection), RatioError> {
    let filled = DiurnalCurve::new(interpolate_masked(series), CurveKind::Spectral);
    let (recon, selection) = spectral::smooth_spectral(&filled, metrics, m_range)?;
    Ok((
        RatioSeries {
            values: recon.values().to_vec(),
            mask: vec![true; BINS],
            categories: series.categories.clone(),
            kind: CurveKind::Spectral,
        },
        selection,
    ))
}

/// Third quartile by the inclusive linear-interpolation method.
pub fn quartile3(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = 0.75 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Bins where the smoothed ratio exceeds its third quartile.
pub fn susceptibility_windows(series: &RatioSeries) -> Result<BTreeSet<usize>, RatioError> {
    if series.kind != CurveKind::Spectral {
        return Err(RatioError::NotSpectral);
    }
    let q3 = quartile3(&series.values);
    Ok(series
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > q3)
        .map(|(b, _)| b)
        .collect())
}

/// Day and night per-bin samples around the given boundaries.
///
/// Day collects bins in `[start+margin, end-margin)`, night in
/// `[end+margin, start-margin)` (wrapped); bins inside the margins and
/// masked bins are discarded.
pub fn day_night_split(
    series: &RatioSeries,
    boundaries: (f64, f64),
    margin_hours: f64,
) -> Result<(Vec<f64>, Vec<f64>), RatioError> {
    let (start, end) = boundaries;
    let day_len = (end - start).rem_euclid(24.0) - 2.0 * margin_hours;
    let night_len = (start - end).rem_euclid(24.0) - 2.0 * margin_hours;
    if day_len <= 0.0 || night_len <= 0.0 {
        return Err(RatioError::DegenerateWindows);
    }
    let day_start = crate::rhythm::mod_time(start, margin_hours);
    let night_start = crate::rhythm::mod_time(end, margin_hours);

    let mut day = Vec::new();
    let mut night = Vec::new();
    for (bin, value) in series.unmasked() {
        let hour = bin as f64 / 4.0;
        if crate::rhythm::in_window(day_start, hour, day_len) {
            day.push(value);
        } else if crate::rhythm::in_window(night_start, hour, night_len) {
            night.push(value);
        }
    }
    Ok((day, night))
}

/// One row group of a period comparison: value inside the period, outside
/// it, and their difference. Outside values are absent when the period
/// covers the whole span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InOut {
    pub inside: f64,
    pub outside: Option<f64>,
    pub delta: Option<f64>,
}

impl InOut {
    fn new(inside: f64, outside: Option<f64>) -> Self {
        Self { inside, outside, delta: outside.map(|o| inside - o) }
    }
}

/// Posting-rate and disinformative-ratio comparison for a date period
/// against the rest of the analysis span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodComparison {
    pub period: (NaiveDate, NaiveDate),
    pub members: usize,
    pub posts_per_day_user: InOut,
    pub disinformative_per_day_user: InOut,
    pub disinformative_ratio: InOut,
}

/// Compares posting behaviour inside a date period with the remainder of
/// the analysis span.
pub fn period_comparison(
    table: &PostTable,
    members: &BTreeSet<String>,
    period: (NaiveDate, NaiveDate),
) -> Result<PeriodComparison, RatioError> {
    let (from, to) = period;
    if from > to || from < table.span.start || to > table.span.end {
        return Err(RatioError::EmptyPeriod);
    }
    let days_in = (to - from).num_days() + 1;
    let days_out = table.span.days() - days_in;
    let n_members = members.len().max(1);

    let mut in_posts = 0u64;
    let mut out_posts = 0u64;
    let mut in_disinf = 0u64;
    let mut out_disinf = 0u64;
    for (user, posts) in table.users() {
        if !members.contains(user) {
            continue;
        }
        for rec in posts {
            let local = rec.local.as_ref().ok_or(RatioError::NotLocalized)?;
            let inside = local.date >= from && local.date <= to;
            let disinf = rec.category_or_other().is_disinformative();
            if inside {
                in_posts += 1;
                in_disinf += u64::from(disinf);
            } else {
                out_posts += 1;
                out_disinf += u64::from(disinf);
            }
        }
    }

    let per_day_user = |posts: u64, days: i64| posts as f64 / (days as f64 * n_members as f64);
    let ratio_over = |filter: Option<(NaiveDate, NaiveDate)>| -> Result<Option<f64>, RatioError> {
        let tally = weighted_tally(table, members, filter)?;
        let num: f64 = (0..BINS)
            .map(|b| {
                ContentCategory::DISINFORMATIVE
                    .iter()
                    .map(|c| tally.mass[b][c.index()])
                    .sum::<f64>()
            })
            .sum();
        let den: f64 = (0..BINS).map(|b| tally.known_mass(b)).sum();
        Ok((den > 0.0).then(|| num / den))
    };

    let outside_defined = days_out > 0;
    let ratio_in = ratio_over(Some(period))?.unwrap_or(f64::NAN);
    let ratio_out = if outside_defined {
        // outside = whole span minus the period, in two pieces
        let before = (table.span.start, from - chrono::Duration::days(1));
        let after = (to + chrono::Duration::days(1), table.span.end);
        let mut num = 0.0;
        let mut den = 0.0;
        for part in [before, after] {
            if part.0 > part.1 {
                continue;
            }
            let tally = weighted_tally(table, members, Some(part))?;
            for b in 0..BINS {
                num += ContentCategory::DISINFORMATIVE
                    .iter()
                    .map(|c| tally.mass[b][c.index()])
                    .sum::<f64>();
                den += tally.known_mass(b);
            }
        }
        (den > 0.0).then(|| num / den)
    } else {
        None
    };

    Ok(PeriodComparison {
        period,
        members: members.len(),
        posts_per_day_user: InOut::new(
            per_day_user(in_posts, days_in),
            outside_defined.then(|| per_day_user(out_posts, days_out)),
        ),
        disinformative_per_day_user: InOut::new(
            per_day_user(in_disinf, days_in),
            outside_defined.then(|| per_day_user(out_disinf, days_out)),
        ),
        disinformative_ratio: InOut::new(ratio_in, ratio_out),
    })
}

/// Month labels, month-by-bin values and per-cell masks of a heatmap.
pub type HeatmapMatrix = (Vec<String>, Vec<Vec<f64>>, Vec<Vec<bool>>);

/// Month-by-bin ratio matrix for heatmap plots.
pub fn monthly_heatmap(
    table: &PostTable,
    members: &BTreeSet<String>,
    categories: &[ContentCategory],
) -> Result<HeatmapMatrix, RatioError> {
    check_categories(categories)?;
    let mut months = Vec::new();
    let mut date = table.span.start.with_day0(0).unwrap();
    while date <= table.span.end {
        months.push(date);
        date = next_month(date);
    }

    let mut values = Vec::with_capacity(months.len());
    let mut masks = Vec::with_capacity(months.len());
    for &month_start in &months {
        let month_end = next_month(month_start) - chrono::Duration::days(1);
        let tally = weighted_tally(table, members, Some((month_start, month_end)))?;
        let series = ratio_series_from_tally(&tally, categories)?;
        values.push(series.values);
        masks.push(series.mask);
    }
    let labels = months.iter().map(|m| m.format("%Y-%m").to_string()).collect();
    Ok((labels, values, masks))
}

fn next_month(date: NaiveDate) -> NaiveDate {
    let (y, m) = (date.year(), date.month());
    if m == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1).unwrap()
    } else {
        NaiveDate::from_ymd_opt(y, m + 1, 1).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{test_table, test_table_cat};
    use approx::assert_abs_diff_eq;
    use ContentCategory::*;

    fn members(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn weight_is_inverse_post_count() {
        let table = test_table(&[("a", 0), ("a", 1), ("a", 2), ("a", 3), ("b", 0)]);
        assert_abs_diff_eq!(user_weight(&table, "a").unwrap(), 0.25);
        assert_abs_diff_eq!(user_weight(&table, "b").unwrap(), 1.0);
        assert!(user_weight(&table, "zzz").is_err());
    }

    #[test]
    fn single_category_fills_unmasked_bins() {
        let table = test_table_cat(&[("a", 10, Political), ("a", 20, Political), ("b", 10, Political)]);
        let series = ratio_series(&table, &members(&["a", "b"]), &[Political]).unwrap();
        assert!(series.mask[10] && series.mask[20]);
        assert_abs_diff_eq!(series.values[10], 1.0);
        assert_abs_diff_eq!(series.values[20], 1.0);
        // bins with no known-category posts are masked
        assert!(!series.mask[0]);
    }

    #[test]
    fn other_category_is_excluded_everywhere() {
        // Other posts affect weights only; a bin with only Other is masked
        let table = test_table_cat(&[("a", 5, Other), ("a", 6, Science)]);
        let series = ratio_series(&table, &members(&["a"]), &[Science]).unwrap();
        assert!(!series.mask[5]);
        assert!(series.mask[6]);
        assert_abs_diff_eq!(series.values[6], 1.0);
        assert!(matches!(
            ratio_series(&table, &members(&["a"]), &[Other]),
            Err(RatioError::BadCategorySet)
        ));
    }

    #[test]
    fn hand_computed_weighted_ratio() {
        // user a: 4 posts (w = 1/4): bins 8: Political, Science; bin 9: Other x2
        // user b: 2 posts (w = 1/2): bin 8: Science; bin 9: Political
        let table = test_table_cat(&[
            ("a", 8, Political),
            ("a", 8, Science),
            ("a", 9, Other),
            ("a", 9, Other),
            ("b", 8, Science),
            ("b", 9, Political),
        ]);
        let series = ratio_series(&table, &members(&["a", "b"]), &[Political]).unwrap();
        // bin 8: political mass 1/4; known mass 1/4 + 1/4 + 1/2 = 1
        assert_abs_diff_eq!(series.values[8], 0.25, epsilon = 1e-15);
        // bin 9: political mass 1/2; known mass 1/2 (Other excluded)
        assert_abs_diff_eq!(series.values[9], 1.0, epsilon = 1e-15);
    }

    fn mixed_fixture() -> crate::ingest::PostTable {
        let mut posts = Vec::new();
        let mut state = 11u64;
        let mut rand = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as usize
        };
        let users = ["u1", "u2", "u3", "u4"];
        for (ui, user) in users.iter().enumerate() {
            for _ in 0..(10 + ui * 7) {
                let bin = rand() % 96;
                let cat = ContentCategory::ALL[rand() % 8];
                posts.push((*user, bin, cat));
            }
        }
        test_table_cat(&posts)
    }

    #[test]
    fn single_category_series_sum_to_one() {
        let table = mixed_fixture();
        let m = members(&["u1", "u2", "u3", "u4"]);
        let series: Vec<RatioSeries> = ContentCategory::KNOWN
            .iter()
            .map(|c| ratio_series(&table, &m, &[*c]).unwrap())
            .collect();
        for bin in 0..BINS {
            if series[0].mask[bin] {
                let total: f64 = series.iter().map(|s| s.values[bin]).sum();
                assert!((total - 1.0).abs() < 1e-12, "bin {bin}: {total}");
            }
        }
    }

    #[test]
    fn composite_is_bitwise_sum_of_parts() {
        let table = mixed_fixture();
        let m = members(&["u1", "u2", "u3", "u4"]);
        let composite =
            ratio_series(&table, &m, &ContentCategory::DISINFORMATIVE).unwrap();
        let parts: Vec<RatioSeries> = ContentCategory::DISINFORMATIVE
            .iter()
            .map(|c| ratio_series(&table, &m, &[*c]).unwrap())
            .collect();
        for bin in 0..BINS {
            if composite.mask[bin] {
                let sum = parts[0].values[bin] + parts[1].values[bin] + parts[2].values[bin];
                assert_eq!(composite.values[bin].to_bits(), sum.to_bits(), "bin {bin}");
            }
        }
    }

    #[test]
    fn duplicating_posts_leaves_ratios_bit_identical() {
        // duplicates differ in post kind so deduplication keeps them
        let base = vec![
            ("a", 8usize, Political),
            ("a", 9, Science),
            ("a", 30, Other),
            ("b", 8, FakeOrHoax),
            ("b", 40, MainstreamMedia),
        ];
        let table1 = test_table_cat(&base);
        let doubled = crate::ingest::double_posts_for_test(&table1);
        let m = members(&["a", "b"]);
        for cats in [&[Political][..], &ContentCategory::DISINFORMATIVE[..]] {
            let s1 = ratio_series(&table1, &m, cats).unwrap();
            let s2 = ratio_series(&doubled, &m, cats).unwrap();
            assert_eq!(s1.mask, s2.mask);
            for bin in 0..BINS {
                assert_eq!(s1.values[bin].to_bits(), s2.values[bin].to_bits(), "bin {bin}");
            }
        }
    }

    #[test]
    fn quartile3_inclusive_interpolation() {
        assert_abs_diff_eq!(quartile3(&[1.0, 2.0, 3.0, 4.0]), 3.25);
        assert_abs_diff_eq!(quartile3(&[1.0, 2.0, 3.0, 4.0, 5.0]), 4.0);
    }

    #[test]
    fn susceptibility_constant_is_empty() {
        let series = RatioSeries {
            values: vec![0.3; BINS],
            mask: vec![true; BINS],
            categories: vec![Political],
            kind: CurveKind::Spectral,
        };
        assert!(susceptibility_windows(&series).unwrap().is_empty());
    }

    #[test]
    fn susceptibility_cosine_selects_top_quarter() {
        // generic phase keeps all 96 values distinct
        let values: Vec<f64> = (0..BINS)
            .map(|b| 0.5 + 0.2 * (2.0 * std::f64::consts::PI * b as f64 / 96.0 - 0.3).cos())
            .collect();
        let series = RatioSeries {
            values,
            mask: vec![true; BINS],
            categories: vec![Political],
            kind: CurveKind::Spectral,
        };
        let windows = susceptibility_windows(&series).unwrap();
        assert_eq!(windows.len(), 24);
    }

    #[test]
    fn susceptibility_requires_spectral_kind() {
        let series = RatioSeries {
            values: vec![0.1; BINS],
            mask: vec![true; BINS],
            categories: vec![Political],
            kind: CurveKind::Raw,
        };
        assert_eq!(susceptibility_windows(&series), Err(RatioError::NotSpectral));
    }

    fn flat_series() -> RatioSeries {
        RatioSeries {
            values: (0..BINS).map(|b| b as f64).collect(),
            mask: vec![true; BINS],
            categories: vec![Political],
            kind: CurveKind::Raw,
        }
    }

    #[test]
    fn day_night_split_with_margin() {
        // boundaries 6:30 / 18:45 with 1 h margin: day [7:30, 17:45),
        // night [19:45, 5:30)
        let (day, night) = day_night_split(&flat_series(), (6.5, 18.75), 1.0).unwrap();
        assert_eq!(day.len(), 41);
        assert_eq!(night.len(), 39);
        assert!(day.contains(&30.0) && day.contains(&70.0) && !day.contains(&71.0));
        assert!(night.contains(&79.0) && night.contains(&21.0) && !night.contains(&22.0));
    }

    #[test]
    fn day_night_zero_margin_partitions_all_bins() {
        let (day, night) = day_night_split(&flat_series(), (6.5, 18.75), 0.0).unwrap();
        assert_eq!(day.len() + night.len(), BINS);
    }

    #[test]
    fn day_night_degenerate_margin_errors() {
        assert_eq!(
            day_night_split(&flat_series(), (6.0, 10.0), 2.0),
            Err(RatioError::DegenerateWindows)
        );
    }

    #[test]
    fn period_comparison_whole_span_masks_outside() {
        let table = test_table_cat(&[("a", 10, Political), ("a", 20, Science)]);
        let m = members(&["a"]);
        let cmp = period_comparison(&table, &m, (table.span.start, table.span.end)).unwrap();
        assert!(cmp.posts_per_day_user.outside.is_none());
        assert!(cmp.disinformative_ratio.delta.is_none());
        assert_abs_diff_eq!(cmp.disinformative_ratio.inside, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn period_comparison_counts_by_local_date() {
        // fixture posts all land on 2021-06-10; span is 2021-06-01..30
        let table = test_table_cat(&[
            ("a", 10, Political),
            ("a", 20, Science),
            ("a", 30, Science),
            ("b", 40, FakeOrHoax),
        ]);
        let m = members(&["a", "b"]);
        let day = NaiveDate::from_ymd_opt(2021, 6, 10).unwrap();
        let cmp = period_comparison(&table, &m, (day, day)).unwrap();
        // 4 posts over 1 day and 2 users
        assert_abs_diff_eq!(cmp.posts_per_day_user.inside, 2.0);
        assert_abs_diff_eq!(cmp.posts_per_day_user.outside.unwrap(), 0.0);
        // disinformative: political (w 1/3) + fake (w 1); known adds science 2/3
        let expected = (1.0 / 3.0 + 1.0) / (1.0 / 3.0 + 2.0 / 3.0 + 1.0);
        assert_abs_diff_eq!(cmp.disinformative_ratio.inside, expected, epsilon = 1e-12);
        assert!(cmp.disinformative_ratio.outside.is_none());
        assert!(period_comparison(&table, &m, (day, day.pred_opt().unwrap())).is_err());
    }

    #[test]
    fn heatmap_dimensions() {
        let table = mixed_fixture();
        let m = members(&["u1", "u2", "u3", "u4"]);
        let (labels, values, masks) =
            monthly_heatmap(&table, &m, &ContentCategory::DISINFORMATIVE).unwrap();
        // fixture span is one month
        assert_eq!(labels, vec!["2021-06".to_string()]);
        assert_eq!(values.len(), 1);
        assert_eq!(values[0].len(), BINS);
        assert_eq!(masks[0].len(), BINS);
    }

    #[test]
    fn smoothing_fills_masked_bins() {
        let table = test_table_cat(&[("a", 10, Political), ("a", 50, Science)]);
        let raw = ratio_series(&table, &members(&["a"]), &[Political]).unwrap();
        assert!(raw.mask.iter().any(|m| !*m));
        let (smoothed, sel) = smooth_ratio_series(&raw, &MetricKind::ALL, (1, 4)).unwrap();
        assert_eq!(smoothed.kind, CurveKind::Spectral);
        assert!(smoothed.mask.iter().all(|m| *m));
        assert!(sel.chosen_m >= 1 && sel.chosen_m <= 4);
    }
}
