//! Modular time-of-day arithmetic, heightened-activity window detection,
//! waking-time alignment and extrema extraction.

use serde::{Deserialize, Serialize};

use crate::activity::{DiurnalCurve, BINS};

/// Time of day `n` hours past `t`, wrapped into `[0, 24)`.
pub fn mod_time(t: f64, n: f64) -> f64 {
    (t + n).rem_euclid(24.0)
}

/// Whether time point `s` occurs within `n` hours past `t`, i.e. inside
/// the half-open window `[t, t+n)` wrapped around midnight.
pub fn in_window(t: f64, s: f64, n: f64) -> bool {
    debug_assert!((0.0..24.0).contains(&t) && (0.0..24.0).contains(&s));
    debug_assert!(n > 0.0 && n < 24.0);
    let end = mod_time(t, n);
    if t < end {
        t <= s && s < end
    } else {
        s >= t || s < end
    }
}

/// Onset and end of the heightened-activity (waking) window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WakeWindow {
    /// Window start, hours in `[0, 24)` quantized to a bin boundary.
    pub onset: f64,
    /// Window length in hours.
    pub hours: f64,
    /// `mod_time(onset, hours)`.
    pub end: f64,
    /// Set when every onset ties (constant curve).
    pub degenerate: bool,
}

impl WakeWindow {
    pub fn onset_bin(&self) -> usize {
        (self.onset * 4.0).round() as usize % BINS
    }

    /// True inside `[onset, end)`, the window of heightened activity.
    pub fn contains(&self, hour: f64) -> bool {
        in_window(self.onset, hour, self.hours)
    }
}

/// Finds the `n`-hour circular window with the largest summed activity.
///
/// All 96 candidate bin-boundary onsets are scored with prefix sums; ties
/// resolve to the earliest clock time.
pub fn heightened_window(curve: &DiurnalCurve, n_hours: f64) -> WakeWindow {
    assert!(n_hours > 0.0 && n_hours < 24.0, "window must be inside (0, 24) hours");
    let width = (n_hours * 4.0).round() as usize;
    let vals = curve.values();

    // prefix over two periods so any wrapped window is one subtraction
    let mut prefix = vec![0.0; 2 * BINS + 1];
    for i in 0..2 * BINS {
        prefix[i + 1] = prefix[i] + vals[i % BINS];
    }

    let mut best_bin = 0;
    let mut best_sum = f64::NEG_INFINITY;
    let mut all_equal = true;
    for start in 0..BINS {
        let sum = prefix[start + width] - prefix[start];
        if sum > best_sum {
            if best_sum != f64::NEG_INFINITY && (sum - best_sum).abs() > 0.0 {
                all_equal = false;
            }
            best_sum = sum;
            best_bin = start;
        } else if sum < best_sum {
            all_equal = false;
        }
    }

    let onset = best_bin as f64 / 4.0;
    WakeWindow {
        onset,
        hours: n_hours,
        end: mod_time(onset, n_hours),
        degenerate: all_equal,
    }
}

/// Circular left shift so that `reference_hour` becomes position zero
/// ("hours past waking" axis). The reference must sit on a bin boundary.
pub fn align_by_reference(curve: &DiurnalCurve, reference_hour: f64) -> DiurnalCurve {
    let bins = reference_hour.rem_euclid(24.0) * 4.0;
    debug_assert!(
        (bins - bins.round()).abs() < 1e-9,
        "reference hour {reference_hour} is not a bin boundary"
    );
    curve.shifted_left(bins.round() as usize % BINS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Max,
    Min,
}

/// A strict local extremum of a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    /// Bin-start hour of the extremum.
    pub hour: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

/// Strict local maxima and minima on the circular grid, ranked by value.
///
/// Returns up to `count` maxima (largest first) followed by up to `count`
/// minima (smallest first). Plateaus are not strict extrema; a constant
/// curve yields nothing.
pub fn extract_extrema(curve: &DiurnalCurve, count: usize) -> Vec<Extremum> {
    assert!(count >= 1);
    let vals = curve.values();
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for b in 0..BINS {
        let prev = vals[(b + BINS - 1) % BINS];
        let next = vals[(b + 1) % BINS];
        let v = vals[b];
        if v > prev && v > next {
            maxima.push(Extremum { hour: b as f64 / 4.0, value: v, kind: ExtremumKind::Max });
        } else if v < prev && v < next {
            minima.push(Extremum { hour: b as f64 / 4.0, value: v, kind: ExtremumKind::Min });
        }
    }
    maxima.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap().then(a.hour.partial_cmp(&b.hour).unwrap()));
    minima.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap().then(a.hour.partial_cmp(&b.hour).unwrap()));
    maxima.truncate(count);
    minima.truncate(count);
    maxima.extend(minima);
    maxima
}
