//! Supervised dataset construction: rows are (date, symbol) pairs whose
//! features are alpha signal values at date t and whose target is the
//! forward `horizon`-day compounded return. Rows with any missing feature
//! or target are excluded, and the last `horizon` dates of the range drop
//! so targets never reach outside it.

use std::ops::Range;
use std::sync::Arc;

use super::{AlphaSignalBank, EnsembleError};
use crate::matrix::{is_missing, Matrix};
use crate::panel::PanelSet;
use crate::search::AlphaArchive;

/// Flat row-major feature storage.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    data: Vec<f64>,
    n_rows: usize,
    n_feats: usize,
}

impl FeatureTable {
    pub fn new(n_feats: usize) -> Self {
        Self {
            data: Vec::new(),
            n_rows: 0,
            n_feats,
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.n_feats);
        self.data.extend_from_slice(row);
        self.n_rows += 1;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_feats..(i + 1) * self.n_feats]
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_feats(&self) -> usize {
        self.n_feats
    }
}

#[derive(Debug, Clone)]
pub struct SupervisedDataset {
    pub alpha_ids: Vec<usize>,
    /// Full-panel signal matrices, one per selected alpha (shared).
    pub signals: Vec<Arc<Matrix>>,
    /// (date index, symbol index) per row.
    pub rows: Vec<(usize, usize)>,
    pub features: FeatureTable,
    pub targets: Vec<f64>,
    pub horizon: usize,
}

impl SupervisedDataset {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Public contract: evaluate the selected archive entries and assemble the
/// dataset over `range`.
pub fn build_dataset(
    archive: &AlphaArchive,
    alpha_ids: &[usize],
    panel: &PanelSet,
    range: Range<usize>,
    horizon: usize,
) -> Result<SupervisedDataset, EnsembleError> {
    let bank = AlphaSignalBank::build(archive, panel)?;
    build_from_bank(&bank, alpha_ids, panel, range, horizon)
}

pub(crate) fn build_from_bank(
    bank: &AlphaSignalBank,
    alpha_ids: &[usize],
    panel: &PanelSet,
    range: Range<usize>,
    horizon: usize,
) -> Result<SupervisedDataset, EnsembleError> {
    assert!(horizon >= 1, "horizon must be at least one day");
    let signals: Vec<Arc<Matrix>> = alpha_ids
        .iter()
        .map(|&id| bank.signal(id))
        .collect::<Result<_, _>>()?;
    let returns = &panel
        .get_field("returns")
        .map_err(|_| crate::backtest::BacktestError::MissingReturns)?
        .values;

    let mut features = FeatureTable::new(signals.len());
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut feat_buf = vec![0.0; signals.len()];

    // last `horizon` dates of the range drop: target must stay inside
    let last_t = range.end.saturating_sub(horizon);
    for t in range.start..last_t {
        'cell: for i in 0..panel.n_symbols() {
            for (k, sig) in signals.iter().enumerate() {
                let v = sig.get(t, i);
                if is_missing(v) {
                    continue 'cell;
                }
                feat_buf[k] = v;
            }
            let mut growth = 1.0;
            for h in 1..=horizon {
                let r = returns.get(t + h, i);
                if is_missing(r) {
                    continue 'cell;
                }
                growth *= 1.0 + r;
            }
            rows.push((t, i));
            features.push_row(&feat_buf);
            targets.push(growth - 1.0);
        }
    }
    if rows.is_empty() {
        return Err(EnsembleError::EmptyDataset);
    }
    Ok(SupervisedDataset {
        alpha_ids: alpha_ids.to_vec(),
        signals,
        rows,
        features,
        targets,
        horizon,
    })
}
