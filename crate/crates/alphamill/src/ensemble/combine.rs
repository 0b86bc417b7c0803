//! Combiners over member prediction signals. Cells combine only where
//! every member is present.

use serde::{Deserialize, Serialize};

use super::dataset::SupervisedDataset;
use super::EnsembleError;
use crate::eval::SignalMatrix;
use crate::linalg::{solve, solve_spd};
use crate::matrix::{is_missing, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Combiner {
    /// Fixed convex combination of member predictions.
    WeightedVote { weights: Vec<f64> },
    /// OLS-with-intercept of the target on member train-predictions,
    /// applied out of range.
    Stacking,
    /// Members are bootstrap refits of one spec, combined by mean.
    Bagging { n_bags: usize, bootstrap: bool },
}

/// Combine member signals. For stacking, the member signals must cover the
/// training rows of `train` so the meta-regression can read its design
/// matrix; the other combiners ignore `train`.
pub fn combine(
    member_signals: &[SignalMatrix],
    method: &Combiner,
    train: &SupervisedDataset,
) -> Result<SignalMatrix, EnsembleError> {
    if member_signals.is_empty() {
        return Err(EnsembleError::InvalidSpec("no member signals".into()));
    }
    match method {
        Combiner::WeightedVote { weights } => weighted_vote(member_signals, weights),
        Combiner::Bagging { .. } => Ok(mean_combine(member_signals)),
        Combiner::Stacking => {
            let mut preds: Vec<Vec<f64>> = vec![Vec::new(); member_signals.len()];
            let mut targets = Vec::new();
            'row: for (row_idx, &(t, i)) in train.rows.iter().enumerate() {
                let mut row_preds = Vec::with_capacity(member_signals.len());
                for sig in member_signals {
                    let v = sig.values.get(t, i);
                    if is_missing(v) {
                        continue 'row;
                    }
                    row_preds.push(v);
                }
                for (k, v) in row_preds.into_iter().enumerate() {
                    preds[k].push(v);
                }
                targets.push(train.targets[row_idx]);
            }
            let coefs = fit_stacker(&preds, &targets)?;
            Ok(apply_stacker(&coefs, member_signals))
        }
    }
}

pub(crate) fn weighted_vote(
    member_signals: &[SignalMatrix],
    weights: &[f64],
) -> Result<SignalMatrix, EnsembleError> {
    if weights.len() != member_signals.len() {
        return Err(EnsembleError::WeightMismatch(format!(
            "{} weights for {} members",
            weights.len(),
            member_signals.len()
        )));
    }
    if weights.iter().any(|w| *w < 0.0) {
        return Err(EnsembleError::WeightMismatch("negative weight".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(EnsembleError::WeightMismatch(format!("weights sum {sum}")));
    }
    let (n_dates, n_syms) = member_signals[0].values.shape();
    let mut out = Matrix::missing(n_dates, n_syms);
    for i in 0..n_syms {
        'cell: for t in 0..n_dates {
            let mut acc = 0.0;
            for (sig, w) in member_signals.iter().zip(weights) {
                let v = sig.values.get(t, i);
                if is_missing(v) {
                    continue 'cell;
                }
                acc += w * v;
            }
            out.set(t, i, acc);
        }
    }
    Ok(SignalMatrix { values: out })
}

pub(crate) fn mean_combine(member_signals: &[SignalMatrix]) -> SignalMatrix {
    let n = member_signals.len();
    let uniform = vec![1.0 / n as f64; n];
    weighted_vote(member_signals, &uniform).expect("uniform weights are valid")
}

/// Stacker coefficients: intercept followed by one coefficient per member.
#[derive(Debug, Clone)]
pub(crate) struct StackerCoefs(pub Vec<f64>);

pub(crate) fn fit_stacker(
    member_preds: &[Vec<f64>],
    targets: &[f64],
) -> Result<StackerCoefs, EnsembleError> {
    let p = member_preds.len();
    let n = targets.len();
    if n == 0 {
        return Err(EnsembleError::EmptyDataset);
    }
    let d = p + 1;
    let mut xtx = vec![vec![0.0; d]; d];
    let mut xty = vec![0.0; d];
    for r in 0..n {
        xtx[0][0] += 1.0;
        xty[0] += targets[r];
        for j in 0..p {
            let xj = member_preds[j][r];
            xtx[0][j + 1] += xj;
            xty[j + 1] += xj * targets[r];
            for k in j..p {
                xtx[j + 1][k + 1] += xj * member_preds[k][r];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            xtx[j][k] = xtx[k][j];
        }
    }
    if let Some(beta) = solve_spd(&xtx, &xty) {
        return Ok(StackerCoefs(beta));
    }
    // scale-relative jitter: duplicated member predictions stay solvable
    let max_diag = (1..d).map(|j| xtx[j][j]).fold(1.0f64, f64::max);
    for j in 1..d {
        xtx[j][j] += 1e-8 * max_diag;
    }
    solve_spd(&xtx, &xty)
        .or_else(|| solve(&xtx, &xty))
        .map(StackerCoefs)
        .ok_or_else(|| EnsembleError::InvalidSpec("degenerate stacking system".into()))
}

pub(crate) fn stacker_predict(coefs: &StackerCoefs, member_row: &[f64]) -> f64 {
    coefs.0[0]
        + coefs.0[1..]
            .iter()
            .zip(member_row)
            .map(|(c, v)| c * v)
            .sum::<f64>()
}

pub(crate) fn apply_stacker(
    coefs: &StackerCoefs,
    member_signals: &[SignalMatrix],
) -> SignalMatrix {
    let (n_dates, n_syms) = member_signals[0].values.shape();
    let mut out = Matrix::missing(n_dates, n_syms);
    let mut row = vec![0.0; member_signals.len()];
    for i in 0..n_syms {
        'cell: for t in 0..n_dates {
            for (k, sig) in member_signals.iter().enumerate() {
                let v = sig.values.get(t, i);
                if is_missing(v) {
                    continue 'cell;
                }
                row[k] = v;
            }
            out.set(t, i, stacker_predict(coefs, &row));
        }
    }
    SignalMatrix { values: out }
}

#[cfg(test)]
mod tests {
    use super::super::dataset::FeatureTable;
    use super::*;
    use std::sync::Arc;

    fn signal(rows: Vec<Vec<f64>>) -> SignalMatrix {
        SignalMatrix {
            values: Matrix::from_rows(&rows),
        }
    }

    fn dummy_train(rows: Vec<(usize, usize)>, targets: Vec<f64>) -> SupervisedDataset {
        let mut features = FeatureTable::new(1);
        for _ in &rows {
            features.push_row(&[0.0]);
        }
        SupervisedDataset {
            alpha_ids: vec![0],
            signals: vec![Arc::new(Matrix::missing(1, 1))],
            rows,
            features,
            targets,
            horizon: 1,
        }
    }

    #[test]
    fn degenerate_vote_weights_identity() {
        let a = signal(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = signal(vec![vec![9.0, 9.0], vec![9.0, 9.0]]);
        let train = dummy_train(vec![], vec![]);
        let out = combine(
            &[a.clone(), b],
            &Combiner::WeightedVote {
                weights: vec![1.0, 0.0],
            },
            &train,
        )
        .unwrap();
        assert_eq!(out.values, a.values);
    }

    #[test]
    fn vote_weight_mismatch_rejected() {
        let a = signal(vec![vec![1.0]]);
        let train = dummy_train(vec![], vec![]);
        assert!(matches!(
            combine(
                std::slice::from_ref(&a),
                &Combiner::WeightedVote {
                    weights: vec![0.5, 0.5]
                },
                &train
            ),
            Err(EnsembleError::WeightMismatch(_))
        ));
        assert!(combine(
            &[a],
            &Combiner::WeightedVote {
                weights: vec![0.7]
            },
            &train
        )
        .is_err());
    }

    #[test]
    fn stacking_train_mse_dominates_members() {
        // two noisy member signals over 40 train cells in one column
        let n = 40;
        let mut m1 = Matrix::missing(n, 1);
        let mut m2 = Matrix::missing(n, 1);
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for t in 0..n {
            let x = t as f64 / 10.0;
            let target = 0.4 * x - 0.1;
            m1.set(t, 0, x + ((t * 7) % 5) as f64 * 0.1);
            m2.set(t, 0, -0.5 * x + ((t * 3) % 4) as f64 * 0.05);
            rows.push((t, 0usize));
            targets.push(target);
        }
        let members = [
            SignalMatrix { values: m1 },
            SignalMatrix { values: m2 },
        ];
        let train = dummy_train(rows.clone(), targets.clone());
        let stacked = combine(&members, &Combiner::Stacking, &train).unwrap();

        let mse = |sig: &SignalMatrix| {
            rows.iter()
                .zip(&targets)
                .map(|(&(t, i), target)| (sig.values.get(t, i) - target).powi(2))
                .sum::<f64>()
                / rows.len() as f64
        };
        let stacked_mse = mse(&stacked);
        for member in &members {
            assert!(
                stacked_mse <= mse(member) + 1e-9,
                "stacked {stacked_mse} vs member {}",
                mse(member)
            );
        }
    }

    #[test]
    fn mean_combine_requires_all_present() {
        let a = signal(vec![vec![1.0, f64::NAN]]);
        let b = signal(vec![vec![3.0, 5.0]]);
        let out = mean_combine(&[a, b]);
        assert_eq!(out.values.get(0, 0), 2.0);
        assert!(is_missing(out.values.get(0, 1)));
    }
}
