//! Fourier decomposition of diurnal curves and reconstruction from the
//! largest-amplitude harmonics.
//!
//! The grid is small (96 samples) so a direct O(N^2) transform is used.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{CurveKind, DiurnalCurve, BINS};
use crate::curvedist::{curve_distance, MetricKind};

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("harmonic budget {0} outside [1, {1}]")]
    BudgetOutOfRange(usize, usize),
    #[error("empty metric set")]
    NoMetrics,
}

/// DFT of a 96-bin curve with derived cosine-series parameters.
///
/// `amplitudes[n]` and `phases[n]` (n = 0..=N/2) describe the series
/// `S(b) = A_0/2 + sum A_n cos(2 pi n b / N - phi_n)`, which reproduces the
/// input exactly when every harmonic is kept. `phases[n]` is the phase lag
/// `-arg(X_n)`; `amplitudes[0]` is signed so `A_0/2` is always the mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub n_samples: usize,
    pub coefficients: Vec<(f64, f64)>,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    pub period_hours: f64,
}

/// Highest representable harmonic (Nyquist) for the 96-bin grid.
pub const MAX_HARMONIC: usize = BINS / 2;

/// Unnormalized forward DFT: `X_k = sum_n x_n exp(-i 2 pi k n / N)`.
pub fn dft_forward(curve: &DiurnalCurve) -> SpectralDecomposition {
    let x = curve.values();
    let n = x.len();
    let mut coeffs = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in x.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
            acc += Complex64::new(v * angle.cos(), v * angle.sin());
        }
        coeffs.push(acc);
    }

    let mut amplitudes = Vec::with_capacity(n / 2 + 1);
    let mut phases = Vec::with_capacity(n / 2 + 1);
    for (k, c) in coeffs.iter().enumerate().take(n / 2 + 1) {
        if k == 0 {
            // signed DC so that A_0 / 2 is the mean even for negative input
            amplitudes.push(2.0 * c.re / n as f64);
            phases.push(0.0);
        } else {
            let scale = if k == n / 2 { 1.0 } else { 2.0 };
            amplitudes.push(scale * c.norm() / n as f64);
            phases.push(-c.arg());
        }
    }

    SpectralDecomposition {
        n_samples: n,
        coefficients: coeffs.iter().map(|c| (c.re, c.im)).collect(),
        amplitudes,
        phases,
        period_hours: 24.0,
    }
}

impl SpectralDecomposition {
    /// Harmonic indices of the `m` largest amplitudes (DC excluded),
    /// ties broken toward lower harmonics.
    pub fn top_harmonics(&self, m: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (1..self.amplitudes.len()).collect();
        order.sort_by(|&a, &b| {
            self.amplitudes[b]
                .partial_cmp(&self.amplitudes[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut kept: Vec<usize> = order.into_iter().take(m).collect();
        kept.sort_unstable();
        kept
    }
}

/// Cosine-series reconstruction keeping only the `m` largest-amplitude
/// harmonics (plus the mean term).
pub fn reconstruct_top_m(spec: &SpectralDecomposition, m: usize) -> Result<DiurnalCurve, SpectralError> {
    let max = spec.n_samples / 2;
    if m == 0 || m > max {
        return Err(SpectralError::BudgetOutOfRange(m, max));
    }
    let kept = spec.top_harmonics(m);
    let n = spec.n_samples;
    let mut values = vec![spec.amplitudes[0] / 2.0; n];
    for &h in &kept {
        let amp = spec.amplitudes[h];
        let phase = spec.phases[h];
        for (b, v) in values.iter_mut().enumerate() {
            let angle = 2.0 * std::f64::consts::PI * (h * b) as f64 / n as f64 - phase;
            *v += amp * angle.cos();
        }
    }
    Ok(DiurnalCurve::new(values, CurveKind::Spectral))
}

/// Distance table and per-metric votes behind a harmonic-budget choice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetSelection {
    pub chosen_m: usize,
    pub m_range: (usize, usize),
    /// `(metric, distances for each m in range, voted m)`.
    pub table: Vec<(MetricKind, Vec<f64>, usize)>,
}

/// Picks the harmonic budget by vote across distance metrics.
///
/// For each metric the reconstruction-to-original distance is computed for
/// every budget in `m_range`; the metric votes for the budget with the
/// largest drop from its predecessor (the last big gain). The final budget
/// is the smallest of the most common votes.
pub fn select_m(
    curve: &DiurnalCurve,
    metrics: &[MetricKind],
    m_range: (usize, usize),
) -> Result<BudgetSelection, SpectralError> {
    if metrics.is_empty() {
        return Err(SpectralError::NoMetrics);
    }
    let (lo, hi) = m_range;
    let max = curve.values().len() / 2;
    if lo == 0 || lo > hi || hi > max {
        return Err(SpectralError::BudgetOutOfRange(hi, max));
    }

    let spec = dft_forward(curve);
    let recons: Vec<DiurnalCurve> =
        (lo..=hi).map(|m| reconstruct_top_m(&spec, m)).collect::<Result<_, _>>()?;

    // reconstructions indistinguishable from the input at every budget
    // (constant curves) should all read as distance zero
    let scale = curve.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);

    let mut table = Vec::with_capacity(metrics.len());
    let mut votes = Vec::with_capacity(metrics.len());
    for &metric in metrics {
        let distances: Vec<f64> = recons
            .iter()
            .map(|r| curve_distance(r.values(), curve.values(), metric).expect("equal length"))
            .collect();
        let vote = vote_for(&distances, lo, tol);
        votes.push(vote);
        table.push((metric, distances, vote));
    }

    let chosen_m = min_mode(&votes);
    Ok(BudgetSelection { chosen_m, m_range, table })
}

/// Budget with the largest drop `D[m] - D[m-1]`; flat tables go to the
/// smallest budget, as do ties.
fn vote_for(distances: &[f64], lo: usize, tol: f64) -> usize {
    let flat = distances.len() < 2
        || distances.iter().all(|d| *d <= tol)
        || distances.windows(2).all(|w| w[0] == w[1]);
    if flat {
        return lo;
    }
    let diffs: Vec<f64> = distances.windows(2).map(|w| w[1] - w[0]).collect();
    let mut best = 0;
    for (i, d) in diffs.iter().enumerate() {
        if *d < diffs[best] {
            best = i;
        }
    }
    lo + best + 1
}

/// Smallest member of the mode set.
fn min_mode(votes: &[usize]) -> usize {
    let mut counts = std::collections::BTreeMap::new();
    for &v in votes {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    let max_count = *counts.values().max().unwrap();
    *counts.iter().find(|(_, c)| **c == max_count).unwrap().0
}

/// Spectral smoothing in one step: pick the budget, reconstruct with it.
pub fn smooth_spectral(
    curve: &DiurnalCurve,
    metrics: &[MetricKind],
    m_range: (usize, usize),
) -> Result<(DiurnalCurve, BudgetSelection), SpectralError> {
    let selection = select_m(curve, metrics, m_range)?;
    let spec = dft_forward(curve);
    let recon = reconstruct_top_m(&spec, selection.chosen_m)?;
    Ok((recon, selection))
}
