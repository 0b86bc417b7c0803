//! Ensemble composition search: stochastic hill climbing over (alpha set,
//! member models, combiner), plus the randomized composition study that
//! scores many independently drawn ensembles and ranks them by validation
//! Sharpe. Test-range metrics attach to the top decile only, so the test
//! window is read for a handful of finalists rather than every trial.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::models::ModelSpec;
use super::{evaluate_spec, AlphaSignalBank, Combiner, EnsembleError, EnsembleSpec, SpecOutcome};
use crate::backtest::{BacktestReport, SampleSplit};
use crate::panel::PanelSet;
use crate::rng::{derive_seed, rng_from_seed};
use crate::search::{accept, AlphaArchive};

pub const MIN_ALPHAS_PER_ENSEMBLE: usize = 10;
pub const MAX_ALPHAS_PER_ENSEMBLE: usize = 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyTrial {
    /// 1-based rank after sorting by validation Sharpe.
    pub rank: usize,
    /// Trial index in draw order (seed stream).
    pub trial: usize,
    pub spec: EnsembleSpec,
    pub validation: BacktestReport,
    /// Present for the top decile only.
    pub test: Option<BacktestReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSearchResult {
    pub spec: EnsembleSpec,
    pub validation: BacktestReport,
    pub test: BacktestReport,
    pub accepted_scores: Vec<f64>,
    pub n_evaluated: usize,
}

fn draw_model(rng: &mut impl Rng) -> ModelSpec {
    match rng.random_range(0..6u8) {
        0 => ModelSpec::Ols,
        1 => ModelSpec::Ridge {
            lambda: (rng.random::<f64>() * (10.0f64.ln() - 1e-4f64.ln()) + 1e-4f64.ln()).exp(),
        },
        2 => ModelSpec::Logistic,
        3 => ModelSpec::Knn {
            k: rng.random_range(5..=50),
        },
        4 => ModelSpec::DecisionTree {
            max_depth: rng.random_range(2..=6),
            min_leaf: *pick(rng, &[5, 10, 20, 50]),
        },
        _ => ModelSpec::Gbt {
            n_trees: rng.random_range(10..=50),
            learning_rate: 0.05 + rng.random::<f64>() * 0.25,
            max_depth: rng.random_range(2..=3),
        },
    }
}

fn pick<'a, T>(rng: &mut impl Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

/// Uniform subset of `count` distinct entries of `pool` (partial
/// Fisher-Yates), returned sorted for stable serialization.
fn draw_subset(rng: &mut impl Rng, pool: &[usize], count: usize) -> Vec<usize> {
    let mut pool = pool.to_vec();
    let n = pool.len();
    for i in 0..count {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool.sort_unstable();
    pool
}

/// Archive entries usable as supervised features: deeply nested windows can
/// eat the whole training span in warmup, so a signal must carry a workable
/// number of present cells in the horizon-trimmed training range (and at
/// least one in validation) before it can feed a model.
fn eligible_ids(
    bank: &AlphaSignalBank,
    panel: &PanelSet,
    split: &SampleSplit,
    horizon: usize,
) -> Vec<usize> {
    let train_end = split.train.end.saturating_sub(horizon);
    let train_cells = train_end.saturating_sub(split.train.start) * panel.n_symbols();
    let floor = 50.min((train_cells / 8).max(1));
    (0..bank.len())
        .filter(|&id| {
            let sig = bank.signal(id).expect("id in range");
            let present_count: usize = (split.train.start..train_end)
                .map(|t| {
                    (0..panel.n_symbols())
                        .filter(|&i| !crate::matrix::is_missing(sig.get(t, i)))
                        .count()
                })
                .sum();
            let val_present = split.validation.clone().any(|t| {
                (0..panel.n_symbols()).any(|i| !crate::matrix::is_missing(sig.get(t, i)))
            });
            present_count >= floor && val_present
        })
        .collect()
}

/// One random ensemble draw: alpha count uniform in [10, min(20, pool)],
/// uniform subset of the eligible pool, combiner, and member models.
pub(crate) fn draw_spec(seed: u64, eligible: &[usize]) -> EnsembleSpec {
    let mut rng = rng_from_seed(seed);
    let max_count = MAX_ALPHAS_PER_ENSEMBLE.min(eligible.len());
    let count = rng.random_range(MIN_ALPHAS_PER_ENSEMBLE..=max_count);
    let alpha_ids = draw_subset(&mut rng, eligible, count);
    let combiner_kind = rng.random_range(0..3u8);
    let (members, combiner) = match combiner_kind {
        0 => {
            let m = rng.random_range(1..=3usize);
            let members: Vec<ModelSpec> = (0..m).map(|_| draw_model(&mut rng)).collect();
            let weights = vec![1.0 / m as f64; m];
            (members, Combiner::WeightedVote { weights })
        }
        1 => {
            let m = rng.random_range(1..=3usize);
            let members: Vec<ModelSpec> = (0..m).map(|_| draw_model(&mut rng)).collect();
            (members, Combiner::Stacking)
        }
        _ => {
            let member = draw_model(&mut rng);
            (
                vec![member],
                Combiner::Bagging {
                    n_bags: rng.random_range(4..=10),
                    bootstrap: true,
                },
            )
        }
    };
    EnsembleSpec {
        alpha_ids,
        members,
        combiner,
        seed: derive_seed(seed, 0xBA6),
    }
}

/// Randomized composition study: `n_trials` independent draws, each scored
/// on validation, returned sorted descending by validation Sharpe (stable)
/// with test reports attached to the top decile.
pub fn random_composition_study(
    seed: u64,
    archive: &AlphaArchive,
    panel: &PanelSet,
    split: &SampleSplit,
    n_trials: usize,
    horizon: usize,
    cost_bps: f64,
) -> Result<Vec<StudyTrial>, EnsembleError> {
    if archive.len() < MIN_ALPHAS_PER_ENSEMBLE {
        return Err(EnsembleError::ArchiveTooSmall(archive.len()));
    }
    assert!(n_trials >= 1);
    let bank = AlphaSignalBank::build(archive, panel)?;
    let eligible = eligible_ids(&bank, panel, split, horizon);
    if eligible.len() < MIN_ALPHAS_PER_ENSEMBLE {
        return Err(EnsembleError::ArchiveTooSmall(eligible.len()));
    }

    let outcomes: Vec<(usize, EnsembleSpec, SpecOutcome)> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let spec = draw_spec(derive_seed(seed, trial as u64), &eligible);
            let outcome = score_or_flat(&spec, &bank, panel, split, horizon, cost_bps, false);
            (trial, spec, outcome)
        })
        .collect();

    let mut rows: Vec<StudyTrial> = outcomes
        .into_iter()
        .map(|(trial, spec, outcome)| StudyTrial {
            rank: 0,
            trial,
            spec,
            validation: outcome.validation,
            test: None,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.validation
            .sharpe
            .partial_cmp(&a.validation.sharpe)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }

    let decile = n_trials.div_ceil(10);
    for row in rows.iter_mut().take(decile) {
        let outcome = score_or_flat(&row.spec, &bank, panel, split, horizon, cost_bps, true);
        row.test = outcome.test;
    }
    Ok(rows)
}

/// A composition whose joint feature coverage leaves no training rows
/// scores as a flat (never-invested) book rather than failing the study.
fn score_or_flat(
    spec: &EnsembleSpec,
    bank: &AlphaSignalBank,
    panel: &PanelSet,
    split: &SampleSplit,
    horizon: usize,
    cost_bps: f64,
    include_test: bool,
) -> SpecOutcome {
    match evaluate_spec(spec, bank, panel, split, horizon, cost_bps, include_test) {
        Ok(outcome) => outcome,
        Err(EnsembleError::EmptyDataset) => flat_outcome(split, include_test),
        Err(other) => panic!(
            "study spec evaluation failed: {other}; spec = {}",
            serde_json::to_string(spec).unwrap_or_default()
        ),
    }
}

fn flat_outcome(split: &SampleSplit, include_test: bool) -> SpecOutcome {
    let flat = |n_days: usize| BacktestReport {
        sharpe: 0.0,
        annual_return: 0.0,
        max_drawdown: 0.0,
        turnover: 0.0,
        margin: 0.0,
        n_days,
    };
    SpecOutcome {
        validation: flat(split.validation.len()),
        test: include_test.then(|| flat(split.test.len())),
        test_pnl: include_test
            .then(|| crate::backtest::PnlSeries::from_daily(vec![0.0; split.test.len()])),
        member_train_mse: Vec::new(),
        combined_train_mse: None,
    }
}

pub fn study_to_jsonl(rows: &[StudyTrial]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("study row serializes"));
        out.push('\n');
    }
    out
}

/// Hill climbing over ensemble composition. Moves: add/drop/swap an alpha,
/// change a member's family, jitter a hyperparameter, switch combiner.
/// Acceptance shares the alpha-search rule (strictly better validation
/// Sharpe, ties to lower turnover).
pub fn ensemble_search(
    seed: u64,
    archive: &AlphaArchive,
    panel: &PanelSet,
    split: &SampleSplit,
    budget: usize,
    horizon: usize,
    cost_bps: f64,
) -> Result<EnsembleSearchResult, EnsembleError> {
    if archive.len() < MIN_ALPHAS_PER_ENSEMBLE {
        return Err(EnsembleError::ArchiveTooSmall(archive.len()));
    }
    assert!(budget >= 1);
    let bank = AlphaSignalBank::build(archive, panel)?;
    let eligible = eligible_ids(&bank, panel, split, horizon);
    if eligible.len() < MIN_ALPHAS_PER_ENSEMBLE {
        return Err(EnsembleError::ArchiveTooSmall(eligible.len()));
    }

    // archive entries are sorted by validation Sharpe, so the head of the
    // eligible list is the strongest starting set; start at the minimum
    // count to limit dilution of the top alphas
    let init_count = MIN_ALPHAS_PER_ENSEMBLE;
    let mut current_spec = EnsembleSpec {
        alpha_ids: eligible[..init_count].to_vec(),
        members: vec![ModelSpec::Ols],
        combiner: Combiner::WeightedVote {
            weights: vec![1.0],
        },
        seed: derive_seed(seed, 0xBA6),
    };
    let mut current =
        evaluate_spec(&current_spec, &bank, panel, split, horizon, cost_bps, false)?;
    let mut n_evaluated = 1usize;
    let mut accepted_scores = vec![current.validation.sharpe];

    let max_steps = budget.saturating_mul(16) as u64;
    let mut step = 0u64;
    while n_evaluated < budget && step < max_steps {
        let mut rng = rng_from_seed(derive_seed(seed, 1 + step));
        step += 1;
        let Some(proposal) = propose_move(&mut rng, &current_spec, &eligible) else {
            continue;
        };
        if proposal.validate(archive.len()).is_err() {
            continue;
        }
        let outcome =
            match evaluate_spec(&proposal, &bank, panel, split, horizon, cost_bps, false) {
                Ok(o) => o,
                Err(EnsembleError::EmptyDataset) => continue,
                Err(other) => return Err(other),
            };
        n_evaluated += 1;
        if accept(
            current.validation.sharpe,
            outcome.validation.sharpe,
            current.validation.turnover,
            outcome.validation.turnover,
        ) {
            accepted_scores.push(outcome.validation.sharpe);
            current_spec = proposal;
            current = outcome;
        }
    }

    let final_outcome = evaluate_spec(&current_spec, &bank, panel, split, horizon, cost_bps, true)?;
    Ok(EnsembleSearchResult {
        spec: current_spec,
        validation: final_outcome.validation,
        test: final_outcome.test.expect("requested test report"),
        accepted_scores,
        n_evaluated,
    })
}

fn propose_move(
    rng: &mut impl Rng,
    spec: &EnsembleSpec,
    eligible: &[usize],
) -> Option<EnsembleSpec> {
    let mut next = spec.clone();
    let unused: Vec<usize> = eligible
        .iter()
        .copied()
        .filter(|id| !spec.alpha_ids.contains(id))
        .collect();
    match rng.random_range(0..6u8) {
        0 => {
            // add alpha
            if spec.alpha_ids.len() >= MAX_ALPHAS_PER_ENSEMBLE || unused.is_empty() {
                return None;
            }
            next.alpha_ids.push(*pick(rng, &unused));
            next.alpha_ids.sort_unstable();
        }
        1 => {
            // drop alpha
            if spec.alpha_ids.len() <= MIN_ALPHAS_PER_ENSEMBLE {
                return None;
            }
            let idx = rng.random_range(0..next.alpha_ids.len());
            next.alpha_ids.remove(idx);
        }
        2 => {
            // swap alpha
            if unused.is_empty() {
                return None;
            }
            let idx = rng.random_range(0..next.alpha_ids.len());
            next.alpha_ids[idx] = *pick(rng, &unused);
            next.alpha_ids.sort_unstable();
        }
        3 => {
            // change a member's family
            let idx = rng.random_range(0..next.members.len());
            let mut replacement = draw_model(rng);
            for _ in 0..8 {
                if replacement.family_name() != spec.members[idx].family_name() {
                    break;
                }
                replacement = draw_model(rng);
            }
            next.members[idx] = replacement;
        }
        4 => {
            // jitter one hyperparameter
            let idx = rng.random_range(0..next.members.len());
            next.members[idx] = jitter_model(rng, &next.members[idx])?;
        }
        _ => {
            // switch combiner
            next.combiner = match &spec.combiner {
                Combiner::WeightedVote { .. } => Combiner::Stacking,
                Combiner::Stacking => {
                    next.members.truncate(1);
                    Combiner::Bagging {
                        n_bags: 8,
                        bootstrap: true,
                    }
                }
                Combiner::Bagging { .. } => Combiner::WeightedVote {
                    weights: vec![1.0 / next.members.len() as f64; next.members.len()],
                },
            };
        }
    }
    // weighted vote weights track the member count
    if let Combiner::WeightedVote { weights } = &mut next.combiner {
        *weights = vec![1.0 / next.members.len() as f64; next.members.len()];
    }
    Some(next)
}

fn jitter_model(rng: &mut impl Rng, model: &ModelSpec) -> Option<ModelSpec> {
    Some(match model {
        ModelSpec::Ols | ModelSpec::Logistic => return None,
        ModelSpec::Ridge { lambda } => ModelSpec::Ridge {
            lambda: (lambda * *pick(rng, &[0.3, 3.0])).clamp(1e-6, 100.0),
        },
        ModelSpec::Knn { k } => ModelSpec::Knn {
            k: (*k as i64 + rng.random_range(-5..=5i64)).clamp(1, 100) as usize,
        },
        ModelSpec::DecisionTree {
            max_depth,
            min_leaf,
        } => ModelSpec::DecisionTree {
            max_depth: (*max_depth as i64 + *pick(rng, &[-1i64, 1])).clamp(2, 8) as usize,
            min_leaf: *min_leaf,
        },
        ModelSpec::Gbt {
            n_trees,
            learning_rate,
            max_depth,
        } => ModelSpec::Gbt {
            n_trees: (*n_trees as i64 + *pick(rng, &[-10i64, 10])).clamp(5, 100) as usize,
            learning_rate: (learning_rate * *pick(rng, &[0.7, 1.4])).clamp(0.01, 1.0),
            max_depth: *max_depth,
        },
    })
}
