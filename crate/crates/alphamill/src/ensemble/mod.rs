//! Classical predictive models over archived alpha signals, combiner
//! machinery (weighted vote, stacking, bagging), and the two composition
//! searches: stochastic hill climbing and the randomized study.
//!
//! External model plugins (neural or reinforcement-learning agents) can be
//! registered by name through [`ModelRegistry`]; only the classical
//! families ship here.

mod combine;
mod dataset;
mod models;
mod study;

pub use combine::{combine, Combiner};
pub use dataset::{build_dataset, SupervisedDataset};
pub use models::{fit_predict, FitInfo, ModelSpec};
pub use study::{
    ensemble_search, random_composition_study, study_to_jsonl, EnsembleSearchResult, StudyTrial,
    MAX_ALPHAS_PER_ENSEMBLE, MIN_ALPHAS_PER_ENSEMBLE,
};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{BacktestError, BacktestReport, SampleSplit};
use crate::eval::{evaluate, SignalMatrix};
use crate::lang::parse;
use crate::matrix::{is_missing, Matrix, MISSING};
use crate::panel::PanelSet;
use crate::rng::derive_seed;
use crate::search::AlphaArchive;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("dataset has no usable rows")]
    EmptyDataset,
    #[error("archive holds {0} alphas, need at least {MIN_ALPHAS_PER_ENSEMBLE}")]
    ArchiveTooSmall(usize),
    #[error("weighted vote weights do not match members: {0}")]
    WeightMismatch(String),
    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("alpha id {0} out of range")]
    UnknownAlpha(usize),
    #[error("archived expression failed to evaluate: {0}")]
    BadArchivedExpression(String),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
}

/// A selected alpha set, member models, and a combiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Indices into the archive's entry list.
    pub alpha_ids: Vec<usize>,
    pub members: Vec<ModelSpec>,
    pub combiner: Combiner,
    /// Drives bootstrap resampling for bagging.
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self, n_alphas: usize) -> Result<(), EnsembleError> {
        let k = self.alpha_ids.len();
        if !(MIN_ALPHAS_PER_ENSEMBLE..=MAX_ALPHAS_PER_ENSEMBLE).contains(&k) {
            return Err(EnsembleError::InvalidSpec(format!(
                "{k} alphas selected, need {MIN_ALPHAS_PER_ENSEMBLE}..={MAX_ALPHAS_PER_ENSEMBLE}"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &id in &self.alpha_ids {
            if id >= n_alphas {
                return Err(EnsembleError::UnknownAlpha(id));
            }
            if !seen.insert(id) {
                return Err(EnsembleError::InvalidSpec(format!("duplicate alpha id {id}")));
            }
        }
        if self.members.is_empty() {
            return Err(EnsembleError::InvalidSpec("no members".into()));
        }
        for m in &self.members {
            m.validate()?;
        }
        match &self.combiner {
            Combiner::WeightedVote { weights } => {
                if weights.len() != self.members.len() {
                    return Err(EnsembleError::WeightMismatch(format!(
                        "{} weights for {} members",
                        weights.len(),
                        self.members.len()
                    )));
                }
                if weights.iter().any(|w| *w < 0.0) {
                    return Err(EnsembleError::WeightMismatch("negative weight".into()));
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(EnsembleError::WeightMismatch(format!("weights sum {sum}")));
                }
            }
            Combiner::Bagging { n_bags, .. } => {
                if self.members.len() != 1 {
                    return Err(EnsembleError::InvalidSpec(
                        "bagging takes exactly one member spec".into(),
                    ));
                }
                if *n_bags == 0 {
                    return Err(EnsembleError::InvalidSpec("n_bags must be positive".into()));
                }
            }
            Combiner::Stacking => {}
        }
        Ok(())
    }
}

/// Evaluated signals for every archive entry, shared across trials.
#[derive(Debug, Clone)]
pub struct AlphaSignalBank {
    signals: Vec<Arc<Matrix>>,
}

impl AlphaSignalBank {
    pub fn build(archive: &AlphaArchive, panel: &PanelSet) -> Result<Self, EnsembleError> {
        let mut signals = Vec::with_capacity(archive.len());
        for entry in archive.entries() {
            let expr = parse(&entry.expr)
                .map_err(|e| EnsembleError::BadArchivedExpression(e.to_string()))?;
            let sig = evaluate(&expr, panel)
                .map_err(|e| EnsembleError::BadArchivedExpression(e.to_string()))?;
            signals.push(Arc::new(sig.values));
        }
        Ok(Self { signals })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub(crate) fn signal(&self, id: usize) -> Result<Arc<Matrix>, EnsembleError> {
        self.signals
            .get(id)
            .cloned()
            .ok_or(EnsembleError::UnknownAlpha(id))
    }
}

/// Registration point for external model backends. A plugin binds a name
/// to a constructor the pipeline can look up; the shipped families resolve
/// natively and never pass through here.
#[derive(Default)]
pub struct ModelRegistry {
    plugins: BTreeMap<String, Box<dyn Fn(&serde_json::Value) -> Result<ModelSpec, EnsembleError>>>,
}

impl ModelRegistry {
    pub fn register(
        &mut self,
        name: &str,
        constructor: Box<dyn Fn(&serde_json::Value) -> Result<ModelSpec, EnsembleError>>,
    ) {
        self.plugins.insert(name.to_string(), constructor);
    }

    pub fn resolve(
        &self,
        name: &str,
        params: &serde_json::Value,
    ) -> Option<Result<ModelSpec, EnsembleError>> {
        self.plugins.get(name).map(|ctor| ctor(params))
    }

    pub fn names(&self) -> Vec<&str> {
        self.plugins.keys().map(String::as_str).collect()
    }
}

/// Stacking meta-regressions cap their row count; a deterministic stride
/// subsample keeps member train-prediction costs bounded.
pub(crate) const META_MAX_ROWS: usize = 4000;

/// Full evaluation of one ensemble spec against an archive.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub validation: BacktestReport,
    pub test: Option<BacktestReport>,
    /// Daily PnL over the test range, when requested.
    #[serde(skip)]
    pub test_pnl: Option<crate::backtest::PnlSeries>,
    /// Train MSE per member over the stacking meta rows.
    pub member_train_mse: Vec<f64>,
    /// Combined train MSE over the same rows (stacking only).
    pub combined_train_mse: Option<f64>,
}

pub fn evaluate_ensemble(
    spec: &EnsembleSpec,
    archive: &AlphaArchive,
    panel: &PanelSet,
    split: &SampleSplit,
    horizon: usize,
    cost_bps: f64,
    include_test: bool,
) -> Result<EnsembleReport, EnsembleError> {
    let bank = AlphaSignalBank::build(archive, panel)?;
    let outcome = evaluate_spec(spec, &bank, panel, split, horizon, cost_bps, include_test)?;
    Ok(EnsembleReport {
        validation: outcome.validation,
        test: outcome.test,
        test_pnl: outcome.test_pnl,
        member_train_mse: outcome.member_train_mse,
        combined_train_mse: outcome.combined_train_mse,
    })
}

#[derive(Debug, Clone)]
pub(crate) struct SpecOutcome {
    pub validation: BacktestReport,
    pub test: Option<BacktestReport>,
    /// Daily PnL over the test range (cumulative restarts at zero).
    pub test_pnl: Option<crate::backtest::PnlSeries>,
    /// Train MSE per member over the meta row set.
    pub member_train_mse: Vec<f64>,
    /// Combined train MSE over the same rows (stacking only).
    pub combined_train_mse: Option<f64>,
}

/// Fit members, predict the scoring ranges, combine, and backtest.
pub(crate) fn evaluate_spec(
    spec: &EnsembleSpec,
    bank: &AlphaSignalBank,
    panel: &PanelSet,
    split: &SampleSplit,
    horizon: usize,
    cost_bps: f64,
    include_test: bool,
) -> Result<SpecOutcome, EnsembleError> {
    spec.validate(bank.len())?;
    let train = dataset::build_from_bank(bank, &spec.alpha_ids, panel, split.train.clone(), horizon)?;

    // deterministic stride subsample of train rows for meta fitting / MSE
    let stride = train.n_rows().div_ceil(META_MAX_ROWS).max(1);
    let meta_rows: Vec<usize> = (0..train.n_rows()).step_by(stride).collect();
    let meta_targets: Vec<f64> = meta_rows.iter().map(|&r| train.targets[r]).collect();

    // cells to predict: validation range, optionally test range
    let mut score_ranges = vec![split.validation.clone()];
    if include_test {
        score_ranges.push(split.test.clone());
    }

    let fitted = fit_members(spec, &train)?;

    // member predictions over scoring cells and over meta train rows
    let mut member_signals: Vec<SignalMatrix> = Vec::with_capacity(fitted.len());
    let mut member_meta_preds: Vec<Vec<f64>> = Vec::with_capacity(fitted.len());
    for model in &fitted {
        let mut m = Matrix::missing(panel.n_dates(), panel.n_symbols());
        for range in &score_ranges {
            predict_cells(model, &train, panel, range.clone(), &mut m);
        }
        member_signals.push(SignalMatrix { values: m });
        member_meta_preds.push(
            meta_rows
                .iter()
                .map(|&r| model.predict(train.features.row(r)))
                .collect(),
        );
    }

    let member_train_mse: Vec<f64> = member_meta_preds
        .iter()
        .map(|preds| mse(preds, &meta_targets))
        .collect();

    let combined = match &spec.combiner {
        Combiner::WeightedVote { weights } => {
            combine::weighted_vote(&member_signals, weights)?
        }
        Combiner::Stacking => {
            let coefs = combine::fit_stacker(&member_meta_preds, &meta_targets)?;
            combine::apply_stacker(&coefs, &member_signals)
        }
        Combiner::Bagging { .. } => combine::mean_combine(&member_signals),
    };

    let combined_train_mse = match &spec.combiner {
        Combiner::Stacking => {
            let coefs = combine::fit_stacker(&member_meta_preds, &meta_targets)?;
            let preds: Vec<f64> = (0..meta_rows.len())
                .map(|k| {
                    let row: Vec<f64> = member_meta_preds.iter().map(|p| p[k]).collect();
                    combine::stacker_predict(&coefs, &row)
                })
                .collect();
            Some(mse(&preds, &meta_targets))
        }
        _ => None,
    };

    let weights = crate::backtest::signal_to_weights(&combined);
    let frame = crate::backtest::run_backtest_frame(&weights, panel, cost_bps)?;
    Ok(SpecOutcome {
        validation: frame.report(split.validation.clone()),
        test: include_test.then(|| frame.report(split.test.clone())),
        test_pnl: include_test.then(|| frame.pnl.slice(&split.test)),
        member_train_mse,
        combined_train_mse,
    })
}

/// Fit the member list; bagging expands its single spec into n_bags
/// bootstrap fits seeded from the ensemble seed.
fn fit_members(
    spec: &EnsembleSpec,
    train: &SupervisedDataset,
) -> Result<Vec<models::FittedModel>, EnsembleError> {
    match &spec.combiner {
        Combiner::Bagging { n_bags, bootstrap } => {
            let base = &spec.members[0];
            let mut fits = Vec::with_capacity(*n_bags);
            for bag in 0..*n_bags {
                let rows: Vec<usize> = if *bootstrap {
                    use rand::Rng;
                    let mut rng = crate::rng::rng_from_seed(derive_seed(spec.seed, bag as u64));
                    (0..train.n_rows())
                        .map(|_| rng.random_range(0..train.n_rows()))
                        .collect()
                } else {
                    (0..train.n_rows()).collect()
                };
                let (model, _) = models::fit_rows(base, train, &rows)?;
                fits.push(model);
            }
            Ok(fits)
        }
        _ => {
            let all: Vec<usize> = (0..train.n_rows()).collect();
            spec.members
                .iter()
                .map(|m| models::fit_rows(m, train, &all).map(|(f, _)| f))
                .collect()
        }
    }
}

/// Predict every cell in the date range where all alpha signals are
/// present, writing into `out`.
pub(crate) fn predict_cells(
    model: &models::FittedModel,
    train: &SupervisedDataset,
    panel: &PanelSet,
    range: std::ops::Range<usize>,
    out: &mut Matrix,
) {
    let n_feats = train.signals.len();
    let mut feats = vec![0.0; n_feats];
    for t in range {
        'cell: for i in 0..panel.n_symbols() {
            for (k, sig) in train.signals.iter().enumerate() {
                let v = sig.get(t, i);
                if is_missing(v) {
                    out.set(t, i, MISSING);
                    continue 'cell;
                }
                feats[k] = v;
            }
            out.set(t, i, model.predict(&feats));
        }
    }
}

pub(crate) fn mse(preds: &[f64], targets: &[f64]) -> f64 {
    debug_assert_eq!(preds.len(), targets.len());
    if preds.is_empty() {
        return f64::INFINITY;
    }
    preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / preds.len() as f64
}
