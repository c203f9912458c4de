//! Distance metrics between sampled curves.
//!
//! Curves are compared as polylines over the raw sample-index axis
//! (x = 0, 1, 2, ...), so every metric sees the same scaling. All seven
//! metrics return 0 for identical curves; DiscreteFrechet, DTW, MAE, MSE
//! and AreaBetween are symmetric, PCM is not, and CurveLength is a
//! pseudometric (two different curves of equal arc length are at
//! distance 0).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::DiurnalCurve;

#[derive(Debug, Error, PartialEq)]
pub enum DistanceError {
    #[error("curve lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("curves must have at least 2 points")]
    TooShort,
    #[error("non-finite value in curve")]
    NonFinite,
}

/// The seven distance metrics used for harmonic-budget voting and
/// curve-alignment comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Pcm,
    DiscreteFrechet,
    AreaBetween,
    CurveLength,
    Dtw,
    Mae,
    Mse,
}

impl MetricKind {
    pub const ALL: [MetricKind; 7] = [
        Self::Pcm,
        Self::DiscreteFrechet,
        Self::AreaBetween,
        Self::CurveLength,
        Self::Dtw,
        Self::Mae,
        Self::Mse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pcm => "pcm",
            Self::DiscreteFrechet => "discrete_frechet",
            Self::AreaBetween => "area_between",
            Self::CurveLength => "curve_length",
            Self::Dtw => "dtw",
            Self::Mae => "mae",
            Self::Mse => "mse",
        }
    }
}

/// Distance between two equal-length sampled curves.
pub fn curve_distance(a: &[f64], b: &[f64], metric: MetricKind) -> Result<f64, DistanceError> {
    if a.len() != b.len() {
        return Err(DistanceError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(DistanceError::TooShort);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(DistanceError::NonFinite);
    }
    Ok(match metric {
        MetricKind::Pcm => pcm(a, b),
        MetricKind::DiscreteFrechet => discrete_frechet(a, b),
        MetricKind::AreaBetween => area_between(a, b),
        MetricKind::CurveLength => curve_length(a, b),
        MetricKind::Dtw => dtw(a, b),
        MetricKind::Mae => mae(a, b),
        MetricKind::Mse => mse(a, b),
    })
}

/// Convenience wrapper for diurnal curves.
pub fn diurnal_distance(a: &DiurnalCurve, b: &DiurnalCurve, metric: MetricKind) -> f64 {
    curve_distance(a.values(), b.values(), metric).expect("diurnal curves are 96 finite bins")
}

fn mae(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Accumulated-cost dynamic time warping with absolute-difference local
/// cost and unconstrained monotone alignment.
fn dtw(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    let mut acc = 0.0;
    for (j, slot) in prev.iter_mut().enumerate() {
        acc += (a[0] - b[j]).abs();
        *slot = acc;
    }
    for &av in &a[1..n] {
        cur[0] = prev[0] + (av - b[0]).abs();
        for j in 1..m {
            let best = prev[j].min(prev[j - 1]).min(cur[j - 1]);
            cur[j] = best + (av - b[j]).abs();
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

fn point(i: usize, v: f64) -> (f64, f64) {
    (i as f64, v)
}

fn dist(p: (f64, f64), q: (f64, f64)) -> f64 {
    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
}

/// Discrete Frechet distance between the point sequences (index, value).
fn discrete_frechet(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    let mut reach = 0.0f64;
    for (j, slot) in prev.iter_mut().enumerate() {
        reach = reach.max(dist(point(0, a[0]), point(j, b[j])));
        *slot = reach;
    }
    for (i, &av) in a.iter().enumerate().take(n).skip(1) {
        cur[0] = prev[0].max(dist(point(i, av), point(0, b[0])));
        for j in 1..m {
            let reach = prev[j].min(prev[j - 1]).min(cur[j - 1]);
            cur[j] = reach.max(dist(point(i, av), point(j, b[j])));
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// Exact area enclosed between the two polylines over the common x axis.
///
/// Segments where the difference changes sign contribute the two triangle
/// areas on either side of the crossing.
fn area_between(a: &[f64], b: &[f64]) -> f64 {
    let mut area = 0.0;
    for i in 0..a.len() - 1 {
        let d0 = a[i] - b[i];
        let d1 = a[i + 1] - b[i + 1];
        area += if d0 * d1 >= 0.0 {
            (d0.abs() + d1.abs()) / 2.0
        } else {
            (d0 * d0 + d1 * d1) / (2.0 * (d0.abs() + d1.abs()))
        };
    }
    area
}

fn arc_length(curve: &[f64]) -> f64 {
    curve.windows(2).map(|w| (1.0 + (w[1] - w[0]).powi(2)).sqrt()).sum()
}

/// Absolute difference of polyline arc lengths.
fn curve_length(a: &[f64], b: &[f64]) -> f64 {
    (arc_length(a) - arc_length(b)).abs()
}

/// Cumulative arc-length fractions at each vertex, from 0 to 1.
fn arc_fractions(curve: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(curve.len());
    cum.push(0.0);
    let mut acc = 0.0;
    for w in curve.windows(2) {
        acc += (1.0 + (w[1] - w[0]).powi(2)).sqrt();
        cum.push(acc);
    }
    let total = acc;
    for c in &mut cum {
        *c /= total;
    }
    *cum.last_mut().unwrap() = 1.0;
    cum
}

/// Point on the polyline at arc-length fraction `s`. Fractions landing
/// exactly on a vertex return that vertex.
fn at_fraction(curve: &[f64], fractions: &[f64], s: f64) -> (f64, f64) {
    let seg = fractions.partition_point(|f| *f < s).clamp(1, curve.len() - 1);
    if fractions[seg] == s {
        return point(seg, curve[seg]);
    }
    if fractions[seg - 1] == s {
        return point(seg - 1, curve[seg - 1]);
    }
    let (f0, f1) = (fractions[seg - 1], fractions[seg]);
    let t = if f1 > f0 { ((s - f0) / (f1 - f0)).clamp(0.0, 1.0) } else { 0.0 };
    let x = (seg - 1) as f64 + t;
    let y = curve[seg - 1] + t * (curve[seg] - curve[seg - 1]);
    (x, y)
}

/// Partial curve mapping: both curves are parameterized by normalized arc
/// length and the pointwise gap is integrated over the fraction axis with
/// the trapezoid rule on the first curve's vertex fractions. The first
/// curve supplies the quadrature grid, so the mapping is directional.
fn pcm(a: &[f64], b: &[f64]) -> f64 {
    let fa = arc_fractions(a);
    let fb = arc_fractions(b);
    let gaps: Vec<f64> = fa
        .iter()
        .enumerate()
        .map(|(i, &s)| dist(point(i, a[i]), at_fraction(b, &fb, s)))
        .collect();
    let mut total = 0.0;
    for i in 0..gaps.len() - 1 {
        total += (gaps[i] + gaps[i + 1]) / 2.0 * (fa[i + 1] - fa[i]);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn impulse(n: usize, at: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[at] = 1.0;
        v
    }

    #[test]
    fn identical_curves_are_at_zero() {
        let a: Vec<f64> = (0..96).map(|i| (i as f64 * 0.13).sin().abs()).collect();
        for metric in MetricKind::ALL {
            assert_eq!(curve_distance(&a, &a, metric).unwrap(), 0.0, "{metric:?}");
        }
    }

    #[test]
    fn constant_offset_values() {
        let a = vec![0.0; 96];
        let b = vec![1.0; 96];
        assert_abs_diff_eq!(curve_distance(&a, &b, MetricKind::Mae).unwrap(), 1.0);
        assert_abs_diff_eq!(curve_distance(&a, &b, MetricKind::Mse).unwrap(), 1.0);
        assert_abs_diff_eq!(curve_distance(&a, &b, MetricKind::AreaBetween).unwrap(), 95.0);
        assert_abs_diff_eq!(curve_distance(&a, &b, MetricKind::CurveLength).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_errors() {
        assert_eq!(
            curve_distance(&[0.0, 1.0], &[0.0, 1.0, 2.0], MetricKind::Mae),
            Err(DistanceError::LengthMismatch(2, 3))
        );
    }

    #[test]
    fn area_handles_sign_crossing() {
        // a - b goes +1 -> -1 over one unit segment: two triangles of area 1/4
        let a = vec![1.0, 0.0];
        let b = vec![0.0, 1.0];
        assert_abs_diff_eq!(curve_distance(&a, &b, MetricKind::AreaBetween).unwrap(), 0.5);
    }

    #[test]
    fn dtw_warps_impulses() {
        let a = impulse(96, 10);
        let b = impulse(96, 12);
        let dtw = curve_distance(&a, &b, MetricKind::Dtw).unwrap();
        let mae96 = curve_distance(&a, &b, MetricKind::Mae).unwrap() * 96.0;
        assert!(dtw < mae96, "dtw {dtw} should beat unwarped cost {mae96}");
    }

    /// Brute-force DTW over every monotone alignment path (tiny inputs only).
    fn dtw_brute(a: &[f64], b: &[f64]) -> f64 {
        fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
            let c = (a[i] - b[j]).abs();
            if i == 0 && j == 0 {
                return c;
            }
            let mut best = f64::INFINITY;
            if i > 0 {
                best = best.min(go(a, b, i - 1, j));
            }
            if j > 0 {
                best = best.min(go(a, b, i, j - 1));
            }
            if i > 0 && j > 0 {
                best = best.min(go(a, b, i - 1, j - 1));
            }
            best + c
        }
        go(a, b, a.len() - 1, b.len() - 1)
    }

    /// Brute-force discrete Frechet by path enumeration.
    fn frechet_brute(a: &[f64], b: &[f64]) -> f64 {
        fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
            let c = dist(point(i, a[i]), point(j, b[j]));
            if i == 0 && j == 0 {
                return c;
            }
            let mut best = f64::INFINITY;
            if i > 0 {
                best = best.min(go(a, b, i - 1, j));
            }
            if j > 0 {
                best = best.min(go(a, b, i, j - 1));
            }
            if i > 0 && j > 0 {
                best = best.min(go(a, b, i - 1, j - 1));
            }
            best.max(c)
        }
        go(a, b, a.len() - 1, b.len() - 1)
    }

    #[test]
    fn dtw_and_frechet_match_path_enumeration_on_toys() {
        let toys: [([f64; 8], [f64; 8]); 3] = [
            ([0., 1., 0., 0., 2., 0., 1., 0.], [0., 0., 1., 2., 0., 1., 0., 0.]),
            ([1., 3., 2., 5., 4., 0., 1., 2.], [2., 1., 4., 3., 5., 1., 0., 2.]),
            ([0., 0., 0., 1., 1., 1., 0., 0.], [1., 1., 0., 0., 0., 0., 1., 1.]),
        ];
        for (a, b) in toys {
            assert_abs_diff_eq!(dtw(&a, &b), dtw_brute(&a, &b), epsilon = 1e-12);
            assert_abs_diff_eq!(discrete_frechet(&a, &b), frechet_brute(&a, &b), epsilon = 1e-12);
        }
    }

    #[test]
    fn pcm_golden_value() {
        // Hand-computed: L_a = sqrt(2)+1, a-vertex fractions {0, 0.5858, 1};
        // the middle gap is sqrt(2 - sqrt(2)).
        let a = [0.0, 1.0, 1.0];
        let b = [0.0, 0.0, 1.0];
        let expected = (2.0f64 - 2.0f64.sqrt()).sqrt() / 2.0;
        assert_abs_diff_eq!(pcm(&a, &b), expected, epsilon = 1e-12);
    }

    #[test]
    fn pcm_is_directional() {
        let a = [0.0, 3.0, 1.0, 1.0, 0.5];
        let b = [1.0, 0.0, 2.0, 0.0, 2.0];
        let ab = pcm(&a, &b);
        let ba = pcm(&b, &a);
        assert!((ab - ba).abs() > 1e-6, "expected asymmetry, got {ab} vs {ba}");
    }

    #[test]
    fn curve_length_is_a_pseudometric() {
        // distinct curves with equal arc length sit at distance zero
        let a = [0.0, 1.0, 0.0, 0.0];
        let b = [0.0, 0.0, 1.0, 0.0];
        assert_abs_diff_eq!(curve_length(&a, &b), 0.0, epsilon = 1e-14);
        assert_ne!(a, b);
    }

    proptest! {
        #[test]
        fn metrics_nonnegative_and_symmetric(
            a in proptest::collection::vec(-2.0f64..2.0, 12),
            b in proptest::collection::vec(-2.0f64..2.0, 12),
        ) {
            for metric in MetricKind::ALL {
                let d = curve_distance(&a, &b, metric).unwrap();
                prop_assert!(d >= 0.0);
            }
            for metric in [
                MetricKind::DiscreteFrechet,
                MetricKind::Dtw,
                MetricKind::Mae,
                MetricKind::Mse,
                MetricKind::AreaBetween,
                MetricKind::CurveLength,
            ] {
                let ab = curve_distance(&a, &b, metric).unwrap();
                let ba = curve_distance(&b, &a, metric).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12, "{metric:?}: {ab} vs {ba}");
            }
        }

        #[test]
        fn dtw_never_exceeds_unwarped_cost(
            a in proptest::collection::vec(-2.0f64..2.0, 16),
            b in proptest::collection::vec(-2.0f64..2.0, 16),
        ) {
            let dtw = curve_distance(&a, &b, MetricKind::Dtw).unwrap();
            let unwarped: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
            prop_assert!(dtw <= unwarped + 1e-12);
        }

        #[test]
        fn triangle_inequality_for_frechet_and_mae(
            a in proptest::collection::vec(-2.0f64..2.0, 10),
            b in proptest::collection::vec(-2.0f64..2.0, 10),
            c in proptest::collection::vec(-2.0f64..2.0, 10),
        ) {
            for metric in [MetricKind::DiscreteFrechet, MetricKind::Mae] {
                let ab = curve_distance(&a, &b, metric).unwrap();
                let bc = curve_distance(&b, &c, metric).unwrap();
                let ac = curve_distance(&a, &c, metric).unwrap();
                prop_assert!(ac <= ab + bc + 1e-12, "{metric:?}");
            }
        }
    }
}
