//! Field-level data evaluation: coverage, update frequency, outliers,
//! distribution shape, staleness, continuity, and volatility bursts —
//! plus the mapping from update frequency to recommended lookback windows.
//!
//! Slowly-updating fields (quarterly/yearly fundamentals) get long windows
//! (63/252 trading days); daily-varying fields get short ones.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::is_missing;
use crate::panel::PanelField;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("field has no observations")]
    NoData,
    #[error("expected_median must be nonzero")]
    ZeroExpected,
    #[error("outlier_threshold must be positive")]
    InvalidThreshold,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct QualityConfig {
    /// Absolute-value cutoff for the outlier ratio. Metric skipped when absent.
    pub outlier_threshold: Option<f64>,
    /// Benchmark for median deviation. Metric skipped when absent.
    pub expected_median: Option<f64>,
}

/// Metric bundle for one series (a symbol's column, or the pooled view).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetrics {
    pub coverage_ratio: f64,
    pub missing_ratio: f64,
    pub frequency_ratio: f64,
    pub duplicate_ratio: f64,
    pub outlier_ratio: Option<f64>,
    pub deviation_from_expected: Option<f64>,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub max_gap: usize,
    pub volatility_ratio: Option<f64>,
}

/// Per-field report: one entry per symbol column plus a pooled entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityReport {
    pub field: String,
    /// Indexed by symbol position in the panel.
    pub per_symbol: Vec<Option<SeriesMetrics>>,
    pub pooled: SeriesMetrics,
}

/// Adjusted sample skewness (Fisher-Pearson, bias-corrected). None when
/// n < 3 or the series is degenerate.
pub fn sample_skewness(values: &[f64]) -> Option<f64> {
    let n = values.len() as f64;
    if values.len() < 3 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    if m2.sqrt() < 1e-12 {
        return None;
    }
    let g1 = m3 / m2.powf(1.5);
    Some(g1 * (n * (n - 1.0)).sqrt() / (n - 2.0))
}

/// Adjusted sample excess kurtosis. None when n < 4 or degenerate.
pub fn sample_excess_kurtosis(values: &[f64]) -> Option<f64> {
    let n = values.len() as f64;
    if values.len() < 4 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    if m2.sqrt() < 1e-12 {
        return None;
    }
    let g2 = m4 / (m2 * m2) - 3.0;
    Some(((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0)))
}

fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(var.sqrt())
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

struct SeriesView<'a> {
    /// Calendar-length slice with NaN gaps.
    slots: &'a [f64],
    /// Indices of non-missing observations, ascending.
    obs_idx: Vec<usize>,
}

impl<'a> SeriesView<'a> {
    fn new(slots: &'a [f64]) -> Self {
        let obs_idx = slots
            .iter()
            .enumerate()
            .filter(|(_, v)| !is_missing(**v))
            .map(|(i, _)| i)
            .collect();
        Self { slots, obs_idx }
    }

    fn observations(&self) -> Vec<f64> {
        self.obs_idx.iter().map(|&i| self.slots[i]).collect()
    }
}

fn series_metrics(view: &SeriesView, cfg: &QualityConfig) -> Result<SeriesMetrics, QualityError> {
    let n_slots = view.slots.len();
    let obs = view.observations();
    if obs.is_empty() {
        return Err(QualityError::NoData);
    }

    let coverage = obs.len() as f64 / n_slots as f64;

    // Changes among consecutive non-missing observations, over N-1 slots.
    let mut changes = 0usize;
    let mut equal_pairs = 0usize;
    for pair in obs.windows(2) {
        if pair[0] == pair[1] {
            equal_pairs += 1;
        } else {
            changes += 1;
        }
    }
    let frequency = if n_slots > 1 {
        changes as f64 / (n_slots - 1) as f64
    } else {
        0.0
    };
    let n_pairs = obs.len().saturating_sub(1);
    let duplicate = if n_pairs > 0 {
        equal_pairs as f64 / n_pairs as f64
    } else {
        0.0
    };

    let outlier = match cfg.outlier_threshold {
        Some(x) if x <= 0.0 => return Err(QualityError::InvalidThreshold),
        Some(x) => Some(obs.iter().filter(|v| v.abs() > x).count() as f64 / obs.len() as f64),
        None => None,
    };

    let deviation = match cfg.expected_median {
        Some(e) if e == 0.0 => return Err(QualityError::ZeroExpected),
        Some(e) => {
            let mut sorted = obs.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN among observations"));
            Some((median(&sorted) - e).abs() / e.abs())
        }
        None => None,
    };

    let max_gap = view
        .obs_idx
        .windows(2)
        .map(|w| w[1] - w[0] - 1)
        .max()
        .unwrap_or(0);

    let volatility_ratio = volatility_burst(view.slots);

    Ok(SeriesMetrics {
        coverage_ratio: coverage,
        missing_ratio: 1.0 - coverage,
        frequency_ratio: frequency,
        duplicate_ratio: duplicate,
        outlier_ratio: outlier,
        deviation_from_expected: deviation,
        skewness: sample_skewness(&obs),
        kurtosis: sample_excess_kurtosis(&obs),
        max_gap,
        volatility_ratio,
    })
}

/// Max over time of (63-day rolling std / full-sample std); windows with any
/// missing slot are skipped. Flags bursts of local volatility.
fn volatility_burst(slots: &[f64]) -> Option<f64> {
    const WINDOW: usize = 63;
    let obs: Vec<f64> = slots.iter().copied().filter(|v| !is_missing(*v)).collect();
    let full_std = sample_std(&obs)?;
    if full_std < 1e-12 {
        return None;
    }
    let mut best: Option<f64> = None;
    if slots.len() < WINDOW {
        return None;
    }
    for t in WINDOW - 1..slots.len() {
        let window = &slots[t + 1 - WINDOW..=t];
        if window.iter().any(|v| is_missing(*v)) {
            continue;
        }
        if let Some(s) = sample_std(window) {
            let ratio = s / full_std;
            best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
        }
    }
    best
}

/// Evaluate one field, producing per-symbol metrics (None for all-missing
/// columns) and a pooled entry. Pooled cell-level metrics are computed over
/// symbols with at least one observation, so appending an empty column does
/// not move them; path-dependent metrics pool as per-symbol aggregates
/// (mean for frequency/duplication, max for gap and volatility).
pub fn evaluate_field(
    field: &PanelField,
    cfg: &QualityConfig,
) -> Result<QualityReport, QualityError> {
    let m = &field.values;
    let (n_dates, n_syms) = m.shape();
    if n_dates == 0 || n_syms == 0 || m.count_present() == 0 {
        return Err(QualityError::NoData);
    }

    let mut per_symbol: Vec<Option<SeriesMetrics>> = Vec::with_capacity(n_syms);
    for sym in 0..n_syms {
        let view = SeriesView::new(m.column(sym));
        if view.obs_idx.is_empty() {
            per_symbol.push(None);
        } else {
            per_symbol.push(Some(series_metrics(&view, cfg)?));
        }
    }

    let active: Vec<&SeriesMetrics> = per_symbol.iter().flatten().collect();
    let pooled_obs: Vec<f64> = (0..n_syms)
        .flat_map(|s| m.column(s).iter().copied())
        .filter(|v| !is_missing(*v))
        .collect();
    let active_cells = active.len() * n_dates;
    let coverage = pooled_obs.len() as f64 / active_cells as f64;

    let outlier = match cfg.outlier_threshold {
        Some(x) if x <= 0.0 => return Err(QualityError::InvalidThreshold),
        Some(x) => Some(
            pooled_obs.iter().filter(|v| v.abs() > x).count() as f64 / pooled_obs.len() as f64,
        ),
        None => None,
    };
    let deviation = match cfg.expected_median {
        Some(e) if e == 0.0 => return Err(QualityError::ZeroExpected),
        Some(e) => {
            let mut sorted = pooled_obs.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
            Some((median(&sorted) - e).abs() / e.abs())
        }
        None => None,
    };

    let mean_of = |f: fn(&SeriesMetrics) -> f64| {
        active.iter().map(|s| f(s)).sum::<f64>() / active.len() as f64
    };

    let pooled = SeriesMetrics {
        coverage_ratio: coverage,
        missing_ratio: 1.0 - coverage,
        frequency_ratio: mean_of(|s| s.frequency_ratio),
        duplicate_ratio: mean_of(|s| s.duplicate_ratio),
        outlier_ratio: outlier,
        deviation_from_expected: deviation,
        skewness: sample_skewness(&pooled_obs),
        kurtosis: sample_excess_kurtosis(&pooled_obs),
        max_gap: active.iter().map(|s| s.max_gap).max().unwrap_or(0),
        volatility_ratio: active
            .iter()
            .filter_map(|s| s.volatility_ratio)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
    };

    Ok(QualityReport {
        field: field.name.clone(),
        per_symbol,
        pooled,
    })
}

/// Map a field's update frequency to trailing-window lengths worth searching.
/// Sparse updaters (quarterly/yearly) get long windows; daily-varying fields
/// get short ones. Thresholds 0.02 / 0.2 on the pooled frequency ratio.
pub fn recommend_windows(report: &QualityReport) -> BTreeSet<u32> {
    let f = report.pooled.frequency_ratio;
    if f <= 0.02 {
        [63, 252].into()
    } else if f <= 0.2 {
        [21, 63].into()
    } else {
        [5, 10, 21, 63].into()
    }
}
