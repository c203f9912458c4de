//! Nonparametric test battery: Hartigan dip test, Mann-Whitney U,
//! Spearman rank correlation and chi-square independence.

mod dip;

pub use dip::{dip_sorted, dip_statistic};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample too small: need at least {need}, got {got}")]
    TooSmall { need: usize, got: usize },
    #[error("samples must have equal length")]
    LengthMismatch,
    #[error("degenerate sample: zero variance")]
    Degenerate,
    #[error("contingency table must be at least 2x2 and rectangular")]
    BadTable,
    #[error("expected count is zero at cell ({0}, {1})")]
    ExpectedZero(usize, usize),
    #[error("empty sample")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DipTest,
    MannWhitneyU,
    Spearman,
    ChiSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    Less,
    Greater,
}

/// Outcome of one hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
    /// Sample sizes, or (rows, cols) for contingency tables.
    pub n: Vec<usize>,
    pub alternative: Alternative,
}

/// Midranks (ties get the average of the ranks they span), 1-based.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("non-finite value"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Number of interleavings of samples sized (m, n) with U statistic <= u,
/// by the counting recurrence N(i, j, v) = N(i-1, j, v-j) + N(i, j-1, v).
fn mwu_count_leq(m: usize, n: usize, u: i64) -> f64 {
    if u < 0 {
        return 0.0;
    }
    let u = (u as usize).min(m * n);
    // prev[j][v] = N(i-1, j, v); base case N(0, j, 0) = 1
    let mut prev: Vec<Vec<f64>> = vec![vec![0.0; u + 1]; n + 1];
    for row in prev.iter_mut() {
        row[0] = 1.0;
    }
    let mut cur = vec![vec![0.0; u + 1]; n + 1];
    for _i in 1..=m {
        for (v, slot) in cur[0].iter_mut().enumerate() {
            *slot = if v == 0 { 1.0 } else { 0.0 }; // N(i, 0, v)
        }
        for j in 1..=n {
            for v in 0..=u {
                let a = if v >= j { prev[j][v - j] } else { 0.0 };
                cur[j][v] = a + cur[j - 1][v];
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[n][..=u].iter().sum()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Sample size bound below which the exact null distribution is used
/// (requires tie-free data).
pub const MWU_EXACT_LIMIT: usize = 8;

/// Mann-Whitney U test. The statistic is U of `x`.
///
/// With both samples at most [`MWU_EXACT_LIMIT`] and no ties, the p-value
/// comes from the exact count of interleavings; otherwise from the normal
/// approximation with tie and continuity corrections.
pub fn mann_whitney_u(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::Empty);
    }
    let (nx, ny) = (x.len(), y.len());
    let mut merged: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&merged);
    let rank_sum_x: f64 = ranks[..nx].iter().sum();
    let u_x = rank_sum_x - (nx * (nx + 1)) as f64 / 2.0;

    merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let has_ties = merged.windows(2).any(|w| w[0] == w[1]);

    let p_value = if !has_ties && nx <= MWU_EXACT_LIMIT && ny <= MWU_EXACT_LIMIT {
        let total = binomial(nx + ny, nx);
        let u = u_x.round() as i64;
        let p_leq = mwu_count_leq(nx, ny, u) / total;
        let p_geq = 1.0 - mwu_count_leq(nx, ny, u - 1) / total;
        match alternative {
            Alternative::Less => p_leq,
            Alternative::Greater => p_geq,
            Alternative::TwoSided => (2.0 * p_leq.min(p_geq)).min(1.0),
        }
    } else {
        let n = nx + ny;
        let mean = (nx * ny) as f64 / 2.0;
        let tie_term: f64 = tie_groups(&merged).iter().map(|t| (t * t * t - t) as f64).sum();
        let var = (nx * ny) as f64 / 12.0
            * ((n + 1) as f64 - tie_term / (n as f64 * (n as f64 - 1.0)));
        if var <= 0.0 {
            1.0
        } else {
            let sd = var.sqrt();
            let normal = Normal::new(0.0, 1.0).unwrap();
            let p_less = normal.cdf((u_x + 0.5 - mean) / sd);
            let p_greater = normal.sf((u_x - 0.5 - mean) / sd);
            match alternative {
                Alternative::Less => p_less,
                Alternative::Greater => p_greater,
                Alternative::TwoSided => (2.0 * p_less.min(p_greater)).min(1.0),
            }
        }
    };

    Ok(TestResult {
        method: Method::MannWhitneyU,
        statistic: u_x,
        p_value,
        n: vec![nx, ny],
        alternative,
    })
}

fn tie_groups(sorted: &[f64]) -> Vec<usize> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        groups.push(j - i + 1);
        i = j + 1;
    }
    groups
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with t-approximation p-value (two-sided).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch);
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooSmall { need: 3, got: n });
    }
    let rx = midranks(x);
    let ry = midranks(y);
    let rho = pearson(&rx, &ry).ok_or(StatsError::Degenerate)?;

    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        (2.0 * dist.sf(t.abs())).min(1.0)
    };

    Ok(TestResult {
        method: Method::Spearman,
        statistic: rho,
        p_value,
        n: vec![n],
        alternative: Alternative::TwoSided,
    })
}

/// Upper regularized incomplete gamma Q(a, x) by series / continued
/// fraction, the chi-square survival function.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        // P(a,x) by series, Q = 1 - P
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        1.0 - sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // Q(a,x) by Lentz continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x + a * x.ln() - ln_gamma(a)).exp() * h
    }
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Pearson chi-square independence test on a contingency table of counts.
pub fn chi_square(table: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    let rows = table.len();
    if rows < 2 || table[0].len() < 2 || table.iter().any(|r| r.len() != table[0].len()) {
        return Err(StatsError::BadTable);
    }
    let cols = table[0].len();
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> =
        (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let total: f64 = row_sums.iter().sum();
    if total <= 0.0 || total.is_nan() {
        return Err(StatsError::ExpectedZero(0, 0));
    }

    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / total;
            if expected <= 0.0 || expected.is_nan() {
                return Err(StatsError::ExpectedZero(i, j));
            }
            statistic += (obs - expected).powi(2) / expected;
        }
    }
    let df = ((rows - 1) * (cols - 1)) as f64;
    let p_value = gamma_q(df / 2.0, statistic / 2.0);

    Ok(TestResult {
        method: Method::ChiSquare,
        statistic,
        p_value,
        n: vec![rows, cols],
        alternative: Alternative::TwoSided,
    })
}

/// Default bootstrap replicates for the dip test.
pub const DIP_BOOTSTRAP_DEFAULT: usize = 2000;

/// Hartigan dip test of unimodality.
///
/// The p-value is the fraction of `bootstrap_n` uniform(0,1) samples of the
/// same size whose dip is at least the observed one. Draw `b` uses stream
/// `b` of a ChaCha8 generator seeded with `seed`, so the result is
/// reproducible bit-for-bit and independent of thread scheduling.
pub fn dip_test(sample: &[f64], bootstrap_n: usize, seed: u64) -> Result<TestResult, StatsError> {
    if sample.len() < 4 {
        return Err(StatsError::TooSmall { need: 4, got: sample.len() });
    }
    let observed = dip_statistic(sample);
    let n = sample.len();

    let p_value = if observed == 0.0 {
        1.0
    } else {
        let exceed: u64 = (0..bootstrap_n as u64)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b);
                let mut draw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                draw.sort_by(|p, q| p.partial_cmp(q).unwrap());
                u64::from(dip_sorted(&draw) >= observed)
            })
            .sum();
        exceed as f64 / bootstrap_n as f64
    };

    Ok(TestResult {
        method: Method::DipTest,
        statistic: observed,
        p_value,
        n: vec![n],
        alternative: Alternative::Greater,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 30.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(midranks(&[1.0, 2.0, 2.0, 4.0, 5.0]), vec![1.0, 2.5, 2.5, 4.0, 5.0]);
        assert_eq!(midranks(&[7.0, 7.0, 7.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn mwu_exact_small_example() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], Alternative::Less).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_abs_diff_eq!(r.p_value, 1.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn mwu_identical_singletons() {
        let r = mann_whitney_u(&[5.0], &[5.0], Alternative::TwoSided).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn mwu_u_statistics_sum_to_product() {
        let x = [1.0, 4.0, 2.5, 7.0, 0.5];
        let y = [3.0, 2.0, 6.0, 8.0];
        let ux = mann_whitney_u(&x, &y, Alternative::TwoSided).unwrap().statistic;
        let uy = mann_whitney_u(&y, &x, Alternative::TwoSided).unwrap().statistic;
        assert_abs_diff_eq!(ux + uy, (x.len() * y.len()) as f64, epsilon = 1e-12);
    }

    /// Exact p by explicit enumeration of all rank subsets.
    fn mwu_exact_brute(nx: usize, ny: usize, u_obs: f64, alternative: Alternative) -> f64 {
        let n = nx + ny;
        let mut leq = 0u64;
        let mut geq = 0u64;
        let mut total = 0u64;
        // iterate over all nx-subsets of 0..n as bitmasks
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != nx {
                continue;
            }
            total += 1;
            let rank_sum: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| (i + 1) as f64).sum();
            let u = rank_sum - (nx * (nx + 1)) as f64 / 2.0;
            if u <= u_obs {
                leq += 1;
            }
            if u >= u_obs {
                geq += 1;
            }
        }
        let (p_leq, p_geq) = (leq as f64 / total as f64, geq as f64 / total as f64);
        match alternative {
            Alternative::Less => p_leq,
            Alternative::Greater => p_geq,
            Alternative::TwoSided => (2.0 * p_leq.min(p_geq)).min(1.0),
        }
    }

    #[test]
    fn mwu_exact_matches_enumeration() {
        // distinct values, several shapes and sizes
        let mut state = 3u64;
        let mut rand = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for (nx, ny) in [(1, 1), (2, 3), (3, 3), (4, 2), (5, 5), (6, 4)] {
            let x: Vec<f64> = (0..nx).map(|_| rand()).collect();
            let y: Vec<f64> = (0..ny).map(|_| rand()).collect();
            for alt in [Alternative::Less, Alternative::Greater, Alternative::TwoSided] {
                let got = mann_whitney_u(&x, &y, alt).unwrap();
                let want = mwu_exact_brute(nx, ny, got.statistic, alt);
                assert_abs_diff_eq!(got.p_value, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mwu_normal_approx_in_reasonable_range() {
        // clearly separated samples above the exact limit
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64 + 15.0).collect();
        let r = mann_whitney_u(&x, &y, Alternative::Less).unwrap();
        assert!(r.p_value < 0.001, "p = {}", r.p_value);
        let r2 = mann_whitney_u(&x, &y, Alternative::Greater).unwrap();
        assert!(r2.p_value > 0.99);
    }

    #[test]
    fn spearman_monotone_sequences() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = [2.0, 4.0, 5.0, 7.0, 11.0];
        let down = [11.0, 7.0, 5.0, 4.0, 2.0];
        assert_abs_diff_eq!(spearman(&x, &up).unwrap().statistic, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spearman(&x, &down).unwrap().statistic, -1.0, epsilon = 1e-12);
        assert_eq!(spearman(&x, &up).unwrap().p_value, 0.0);
    }

    #[test]
    fn spearman_degenerate_errors() {
        let x = [1.0, 2.0, 3.0];
        let y = [5.0, 5.0, 5.0];
        assert_eq!(spearman(&x, &y), Err(StatsError::Degenerate));
    }

    #[test]
    fn spearman_equals_pearson_on_ranks() {
        let mut state = 17u64;
        let mut rand = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let x: Vec<f64> = (0..20).map(|_| (rand() * 8.0).round()).collect();
        let y: Vec<f64> = (0..20).map(|_| (rand() * 8.0).round()).collect();
        let rho = spearman(&x, &y).unwrap().statistic;

        // independent route: O(n^2) rank computation and textbook formula
        let rank = |v: &[f64], i: usize| -> f64 {
            let less = v.iter().filter(|w| **w < v[i]).count();
            let equal = v.iter().filter(|w| **w == v[i]).count();
            less as f64 + (equal as f64 + 1.0) / 2.0
        };
        let rx: Vec<f64> = (0..20).map(|i| rank(&x, i)).collect();
        let ry: Vec<f64> = (0..20).map(|i| rank(&y, i)).collect();
        let oracle = pearson(&rx, &ry).unwrap();
        assert_abs_diff_eq!(rho, oracle, epsilon = 1e-12);
    }

    #[test]
    fn chi_square_uniform_table() {
        let r = chi_square(&[vec![10.0, 10.0], vec![10.0, 10.0]]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn chi_square_diagonal_table() {
        let r = chi_square(&[vec![50.0, 0.0], vec![0.0, 50.0]]).unwrap();
        assert_abs_diff_eq!(r.statistic, 100.0, epsilon = 1e-12);
        assert_eq!(r.n, vec![2, 2]);
        assert!(r.p_value < 1e-20);
    }

    #[test]
    fn chi_square_textbook_quantile() {
        // chi2 = 3.841 at df = 1 sits at p ~ 0.05
        let p = gamma_q(0.5, 3.841 / 2.0);
        assert_abs_diff_eq!(p, 0.05, epsilon = 5e-4);
        // chi2 = 18.307 at df = 10 sits at p ~ 0.05
        let p10 = gamma_q(5.0, 18.307 / 2.0);
        assert_abs_diff_eq!(p10, 0.05, epsilon = 5e-4);
    }

    #[test]
    fn chi_square_rejects_zero_expected() {
        let r = chi_square(&[vec![0.0, 0.0], vec![5.0, 5.0]]);
        assert_eq!(r, Err(StatsError::ExpectedZero(0, 0)));
    }

    #[test]
    fn dip_test_rejects_two_point_masses() {
        let mut sample = vec![0.0; 25];
        sample.extend(vec![1.0; 25]);
        let r = dip_test(&sample, 500, 42).unwrap();
        assert!(r.p_value < 0.01, "p = {}", r.p_value);
    }

    #[test]
    fn dip_test_accepts_uniform_grid() {
        let grid: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let r = dip_test(&grid, 500, 42).unwrap();
        assert!(r.p_value > 0.1, "p = {}", r.p_value);
    }

    #[test]
    fn dip_test_is_reproducible() {
        let sample: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64).collect();
        let a = dip_test(&sample, 300, 7).unwrap();
        let b = dip_test(&sample, 300, 7).unwrap();
        assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
        assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
    }

    #[test]
    fn dip_test_constant_sample() {
        let r = dip_test(&[2.0, 2.0, 2.0, 2.0], 100, 1).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    proptest! {
        #[test]
        fn mwu_u_sum_property(
            x in proptest::collection::vec(0.0f64..10.0, 1..12),
            y in proptest::collection::vec(0.0f64..10.0, 1..12),
        ) {
            let ux = mann_whitney_u(&x, &y, Alternative::TwoSided).unwrap().statistic;
            let uy = mann_whitney_u(&y, &x, Alternative::TwoSided).unwrap().statistic;
            prop_assert!((ux + uy - (x.len() * y.len()) as f64).abs() < 1e-9);
        }

        #[test]
        fn spearman_antisymmetry(
            pairs in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0), 5..20),
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let neg_y: Vec<f64> = y.iter().map(|v| -v).collect();
            if let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&x, &neg_y)) {
                prop_assert!((a.statistic + b.statistic).abs() < 1e-12);
            }
        }

        #[test]
        fn chi_square_permutation_invariant(seed in 0u64..1000) {
            let mut state = seed.wrapping_add(1);
            let mut rand = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) % 30 + 1) as f64
            };
            let table: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rand()).collect()).collect();
            let base = chi_square(&table).unwrap();
            let mut swapped = table.clone();
            swapped.swap(0, 2);
            for row in &mut swapped {
                row.swap(1, 3);
            }
            let perm = chi_square(&swapped).unwrap();
            prop_assert!((base.statistic - perm.statistic).abs() < 1e-9);
            prop_assert!((base.p_value - perm.p_value).abs() < 1e-9);
        }
    }
}
