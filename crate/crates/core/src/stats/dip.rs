//! Hartigan-Hartigan dip statistic.
//!
//! The dip of an empirical cdf F is the smallest sup-norm distance from F
//! to any unimodal cdf. It is computed by the greatest-convex-minorant /
//! least-concave-majorant construction: hull predecessor pointers are built
//! once over the whole sample, then a candidate modal interval is narrowed
//! iteratively. Deviations are tracked in count units (heights 0..n) and
//! divided by 2n at the end; the factor 2 comes from centring the unimodal
//! fit inside the deviation band.
//!
//! Conventions, with x sorted ascending and 0-based index i:
//! * the GCM is the lower convex hull of the points (x_i, i) and is read
//!   against the cdf's left limits, so the cdf exceeds it at bin i by
//!   (i+1) - hull(x_i);
//! * the LCM is the upper concave hull of (x_i, i+1) and exceeds the cdf
//!   at bin i by hull(x_i) - i;
//! * both hulls share touch structure with the hull of (x_i, i), so one
//!   pointer array per side suffices.

/// Dip statistic of a sample (need not be sorted). Zero for constant or
/// near-empty samples; at most 1/4.
pub fn dip_statistic(sample: &[f64]) -> f64 {
    let mut x: Vec<f64> = sample.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in dip sample"));
    dip_sorted(&x)
}

/// Dip of an already-sorted sample.
pub fn dip_sorted(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 || x[0] == x[n - 1] {
        return 0.0;
    }

    let mn = gcm_predecessors(x);
    let mj = lcm_successors(x);

    let mut lo = 0usize;
    let mut hi = n - 1;
    // 1 count is the floor: hulls touch the step function within one step
    let mut d_best = 1.0f64;

    loop {
        // hull touch points inside [lo, hi], gcm descending / lcm ascending
        let mut gcm = vec![hi];
        while *gcm.last().unwrap() > lo {
            let next = mn[*gcm.last().unwrap()];
            gcm.push(next.max(lo));
        }
        let mut lcm = vec![lo];
        while *lcm.last().unwrap() < hi {
            let next = mj[*lcm.last().unwrap()];
            lcm.push(next.min(hi));
        }

        // largest separation between the hulls, measured at touch points
        let mut d_gap = 1.0f64;
        let mut cand = (lo, hi);

        // LCM touch points against GCM chords
        for &l in lcm.iter().filter(|l| **l > lo && **l < hi) {
            let seg = gcm.windows(2).find(|w| w[1] <= l && l <= w[0]).unwrap();
            let (g_right, g_left) = (seg[0], seg[1]);
            let gap = (l + 1) as f64 - chord(x, g_left, g_right, 0.0, l);
            if gap > d_gap {
                d_gap = gap;
                cand = (g_left, l);
            }
        }
        // GCM touch points against LCM chords
        for &g in gcm.iter().filter(|g| **g > lo && **g < hi) {
            let seg = lcm.windows(2).find(|w| w[0] <= g && g <= w[1]).unwrap();
            let (l_left, l_right) = (seg[0], seg[1]);
            let gap = chord(x, l_left, l_right, 1.0, g) - g as f64;
            if gap > d_gap {
                d_gap = gap;
                cand = (g, l_right);
            }
        }

        if d_gap <= d_best {
            break;
        }

        let (new_lo, new_hi) = cand;

        // cdf above the GCM on the abandoned left flank
        for w in gcm.windows(2) {
            let (right, left) = (w[0].min(new_lo), w[1]);
            for i in left..=right {
                let dev = (i + 1) as f64 - chord(x, w[1], w[0], 0.0, i);
                if dev > d_best {
                    d_best = dev;
                }
            }
        }
        // LCM above the cdf on the abandoned right flank
        for w in lcm.windows(2) {
            let (left, right) = (w[0].max(new_hi), w[1]);
            for i in left..=right {
                let dev = chord(x, w[0], w[1], 1.0, i) - i as f64;
                if dev > d_best {
                    d_best = dev;
                }
            }
        }

        if (new_lo, new_hi) == (lo, hi) {
            break;
        }
        lo = new_lo;
        hi = new_hi;
    }

    d_best / (2.0 * n as f64)
}

/// Height of the chord through (x[a], a+off) and (x[b], b+off) at x[i].
/// Stacked equal x-values degenerate to the lower endpoint.
fn chord(x: &[f64], a: usize, b: usize, off: f64, i: usize) -> f64 {
    let (lo, hi) = if x[a] <= x[b] { (a, b) } else { (b, a) };
    if x[hi] == x[lo] {
        return lo.min(hi) as f64 + off;
    }
    lo as f64 + off + (x[i] - x[lo]) * (hi as f64 - lo as f64) / (x[hi] - x[lo])
}

/// Predecessor pointers of the lower convex hull of (x_i, i), built left
/// to right with the usual pop loop.
fn gcm_predecessors(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut mn = vec![0usize; n];
    for j in 1..n {
        mn[j] = j - 1;
        loop {
            let p = mn[j];
            if p == 0 {
                break;
            }
            let q = mn[p];
            // keep p while slope(q,p) < slope(p,j)
            if (x[j] - x[p]) * ((p - q) as f64) < (x[p] - x[q]) * ((j - p) as f64) {
                break;
            }
            mn[j] = q;
        }
    }
    mn
}

/// Successor pointers of the upper concave hull of (x_i, i), built right
/// to left.
fn lcm_successors(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut mj = vec![n - 1; n];
    for k in (0..n - 1).rev() {
        mj[k] = k + 1;
        loop {
            let p = mj[k];
            if p == n - 1 {
                break;
            }
            let q = mj[p];
            if (x[k] - x[p]) * (p as f64 - q as f64) < (x[p] - x[q]) * (k as f64 - p as f64) {
                break;
            }
            mj[k] = q;
        }
    }
    mj
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_sample_has_zero_dip() {
        assert_eq!(dip_statistic(&[3.0; 10]), 0.0);
        assert_eq!(dip_statistic(&[1.0]), 0.0);
        assert_eq!(dip_statistic(&[]), 0.0);
    }

    #[test]
    fn two_point_masses_reach_the_maximum() {
        // hand-proved: dip of two equal point masses is exactly 1/4
        let mut sample = vec![0.0; 25];
        sample.extend(vec![1.0; 25]);
        assert_abs_diff_eq!(dip_statistic(&sample), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(dip_statistic(&[0.0, 0.0, 1.0, 1.0]), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn two_one_split_value() {
        // hand-proved: {0, 0, 1} has dip 1/6
        assert_abs_diff_eq!(dip_statistic(&[0.0, 0.0, 1.0]), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn arithmetic_grid_has_minimal_dip() {
        for n in [2usize, 5, 10, 96] {
            let grid: Vec<f64> = (0..n).map(|i| i as f64).collect();
            assert_abs_diff_eq!(dip_sorted(&grid), 1.0 / (2.0 * n as f64), epsilon = 1e-15);
        }
    }

    #[test]
    fn three_point_masses() {
        // hand-proved: three equal masses give dip 1/6
        let mut sample = Vec::new();
        for v in [0.0, 1.0, 2.0] {
            sample.extend(vec![v; 10]);
        }
        assert_abs_diff_eq!(dip_statistic(&sample), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn affine_invariance() {
        let mut state = 5u64;
        let mut rand = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let sample: Vec<f64> = (0..200).map(|_| rand()).collect();
        let shifted: Vec<f64> = sample.iter().map(|v| 3.5 * v - 11.0).collect();
        assert_abs_diff_eq!(dip_statistic(&sample), dip_statistic(&shifted), epsilon = 1e-12);
    }

    #[test]
    fn dip_is_bounded() {
        let mut state = 77u64;
        let mut rand = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for round in 0..50 {
            let n = 4 + (round % 40);
            let sample: Vec<f64> = (0..n).map(|_| rand()).collect();
            let dip = dip_statistic(&sample);
            assert!(dip >= 1.0 / (2.0 * n as f64) - 1e-15, "dip {dip} below floor for n={n}");
            assert!(dip <= 0.25 + 1e-15, "dip {dip} above 1/4");
        }
    }

    #[test]
    fn bimodal_exceeds_unimodal() {
        let mut state = 13u64;
        let mut rand = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let unimodal: Vec<f64> = (0..100).map(|_| rand() + rand() + rand()).collect();
        let bimodal: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { rand() * 0.2 } else { rand() * 0.2 + 3.0 })
            .collect();
        assert!(dip_statistic(&bimodal) > 2.0 * dip_statistic(&unimodal));
    }
}
