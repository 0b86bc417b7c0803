//! The classical model families: OLS, ridge, logistic (IRLS), kNN,
//! depth-capped regression trees, and gradient-boosted trees. Everything
//! is deterministic: tree split ties break toward the lowest feature index
//! then lowest threshold, kNN distance ties toward the lowest row index.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::dataset::SupervisedDataset;
use super::EnsembleError;
use crate::eval::SignalMatrix;
use crate::linalg::{solve, solve_spd};
use crate::matrix::Matrix;
use crate::panel::PanelSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Ols,
    Ridge {
        lambda: f64,
    },
    Logistic,
    Knn {
        k: usize,
    },
    DecisionTree {
        max_depth: usize,
        min_leaf: usize,
    },
    Gbt {
        n_trees: usize,
        learning_rate: f64,
        max_depth: usize,
    },
}

impl ModelSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            ModelSpec::Ols => "ols",
            ModelSpec::Ridge { .. } => "ridge",
            ModelSpec::Logistic => "logistic",
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::DecisionTree { .. } => "decision_tree",
            ModelSpec::Gbt { .. } => "gbt",
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        let bad = |msg: String| Err(EnsembleError::InvalidHyperparameters(msg));
        match self {
            ModelSpec::Ols | ModelSpec::Logistic => Ok(()),
            ModelSpec::Ridge { lambda } => {
                if *lambda < 0.0 || !lambda.is_finite() {
                    return bad(format!("ridge lambda {lambda}"));
                }
                Ok(())
            }
            ModelSpec::Knn { k } => {
                if *k == 0 {
                    return bad("knn k must be positive".into());
                }
                Ok(())
            }
            ModelSpec::DecisionTree {
                max_depth,
                min_leaf,
            } => {
                if !(1..=8).contains(max_depth) {
                    return bad(format!("tree max_depth {max_depth} outside 1..=8"));
                }
                if *min_leaf == 0 {
                    return bad("tree min_leaf must be positive".into());
                }
                Ok(())
            }
            ModelSpec::Gbt {
                n_trees,
                learning_rate,
                max_depth,
            } => {
                if !(1..=200).contains(n_trees) {
                    return bad(format!("gbt n_trees {n_trees} outside 1..=200"));
                }
                if !(*learning_rate > 0.0 && *learning_rate <= 1.0) {
                    return bad(format!("gbt learning_rate {learning_rate} outside (0, 1]"));
                }
                if !(1..=6).contains(max_depth) {
                    return bad(format!("gbt max_depth {max_depth} outside 1..=6"));
                }
                Ok(())
            }
        }
    }
}

/// Fit diagnostics; `ridge_fallback` flags an OLS design so collinear that
/// the normal equations needed a 1e-8 ridge jitter.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct FitInfo {
    pub ridge_fallback: bool,
}

#[derive(Debug, Clone)]
pub(crate) enum TreeNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf(v) => *v,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum FittedModel {
    Linear {
        intercept: f64,
        coefs: Vec<f64>,
    },
    Logistic {
        intercept: f64,
        coefs: Vec<f64>,
        means: Vec<f64>,
        stds: Vec<f64>,
    },
    Knn {
        k: usize,
        rows: Vec<f64>,
        targets: Vec<f64>,
        n_feats: usize,
    },
    Tree(TreeNode),
    Gbt {
        init: f64,
        learning_rate: f64,
        trees: Vec<TreeNode>,
    },
}

impl FittedModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            FittedModel::Linear { intercept, coefs } => {
                intercept + coefs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
            }
            FittedModel::Logistic {
                intercept,
                coefs,
                means,
                stds,
            } => {
                let mut z = *intercept;
                for j in 0..coefs.len() {
                    z += coefs[j] * (x[j] - means[j]) / stds[j];
                }
                sigmoid(z)
            }
            FittedModel::Knn {
                k,
                rows,
                targets,
                n_feats,
            } => {
                let n = targets.len();
                let mut dist: Vec<(f64, usize)> = (0..n)
                    .map(|r| {
                        let row = &rows[r * n_feats..(r + 1) * n_feats];
                        let d: f64 = row
                            .iter()
                            .zip(x)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        (d, r)
                    })
                    .collect();
                let k = (*k).min(n);
                let cmp = |a: &(f64, usize), b: &(f64, usize)| {
                    a.0.partial_cmp(&b.0)
                        .expect("finite distances")
                        .then(a.1.cmp(&b.1))
                };
                if k < n {
                    dist.select_nth_unstable_by(k - 1, cmp);
                }
                let mut nearest = dist[..k].to_vec();
                nearest.sort_by(cmp);
                nearest.iter().map(|(_, r)| targets[*r]).sum::<f64>() / k as f64
            }
            FittedModel::Tree(root) => root.predict(x),
            FittedModel::Gbt {
                init,
                learning_rate,
                trees,
            } => init + learning_rate * trees.iter().map(|t| t.predict(x)).sum::<f64>(),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Fit a model on the given training rows (indices into the dataset).
pub(crate) fn fit_rows(
    spec: &ModelSpec,
    train: &SupervisedDataset,
    rows: &[usize],
) -> Result<(FittedModel, FitInfo), EnsembleError> {
    spec.validate()?;
    if rows.is_empty() {
        return Err(EnsembleError::EmptyDataset);
    }
    let p = train.features.n_feats();
    let x = |r: usize| train.features.row(rows[r]);
    let y = |r: usize| train.targets[rows[r]];
    let n = rows.len();

    let fitted = match spec {
        ModelSpec::Ols => {
            let (beta, fallback) = linear_normal_equations(n, p, &x, &y, 0.0)?;
            return Ok((
                FittedModel::Linear {
                    intercept: beta[0],
                    coefs: beta[1..].to_vec(),
                },
                FitInfo {
                    ridge_fallback: fallback,
                },
            ));
        }
        ModelSpec::Ridge { lambda } => {
            let (beta, _) = linear_normal_equations(n, p, &x, &y, *lambda)?;
            FittedModel::Linear {
                intercept: beta[0],
                coefs: beta[1..].to_vec(),
            }
        }
        ModelSpec::Logistic => fit_logistic(n, p, &x, &y)?,
        ModelSpec::Knn { k } => {
            let mut flat = Vec::with_capacity(n * p);
            let mut targets = Vec::with_capacity(n);
            for r in 0..n {
                flat.extend_from_slice(x(r));
                targets.push(y(r));
            }
            FittedModel::Knn {
                k: *k,
                rows: flat,
                targets,
                n_feats: p,
            }
        }
        ModelSpec::DecisionTree {
            max_depth,
            min_leaf,
        } => {
            let ys: Vec<f64> = (0..n).map(&y).collect();
            let idx: Vec<usize> = (0..n).collect();
            FittedModel::Tree(grow_tree(
                &|r| x(r),
                &ys,
                &idx,
                p,
                *max_depth,
                *min_leaf,
            ))
        }
        ModelSpec::Gbt {
            n_trees,
            learning_rate,
            max_depth,
        } => {
            let ys: Vec<f64> = (0..n).map(&y).collect();
            let init = ys.iter().sum::<f64>() / n as f64;
            let mut residuals: Vec<f64> = ys.iter().map(|v| v - init).collect();
            let idx: Vec<usize> = (0..n).collect();
            let mut trees = Vec::with_capacity(*n_trees);
            for _ in 0..*n_trees {
                let tree = grow_tree(&|r| x(r), &residuals, &idx, p, *max_depth, GBT_MIN_LEAF);
                for r in 0..n {
                    residuals[r] -= learning_rate * tree.predict(x(r));
                }
                trees.push(tree);
            }
            FittedModel::Gbt {
                init,
                learning_rate: *learning_rate,
                trees,
            }
        }
    };
    Ok((fitted, FitInfo::default()))
}

const GBT_MIN_LEAF: usize = 5;

/// Solve the (optionally ridge-regularized) normal equations with an
/// intercept column. The intercept is never penalized. Returns the
/// coefficient vector [intercept, b_1..b_p] and whether the 1e-8 fallback
/// jitter was needed.
fn linear_normal_equations<'a>(
    n: usize,
    p: usize,
    x: &impl Fn(usize) -> &'a [f64],
    y: &impl Fn(usize) -> f64,
    lambda: f64,
) -> Result<(Vec<f64>, bool), EnsembleError> {
    let d = p + 1;
    let mut xtx = vec![vec![0.0; d]; d];
    let mut xty = vec![0.0; d];
    for r in 0..n {
        let row = x(r);
        let target = y(r);
        xtx[0][0] += 1.0;
        xty[0] += target;
        for j in 0..p {
            xtx[0][j + 1] += row[j];
            xty[j + 1] += row[j] * target;
            for k in j..p {
                xtx[j + 1][k + 1] += row[j] * row[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            xtx[j][k] = xtx[k][j];
        }
    }
    for j in 1..d {
        xtx[j][j] += lambda;
    }
    if let Some(beta) = solve_spd(&xtx, &xty) {
        return Ok((beta, false));
    }
    // collinear design: ridge jitter fallback, flagged to the caller. The
    // jitter scales with the design so it survives rounding whatever the
    // feature magnitudes are.
    let max_diag = (1..d).map(|j| xtx[j][j]).fold(1.0f64, f64::max);
    for j in 1..d {
        xtx[j][j] += 1e-8 * max_diag;
    }
    solve_spd(&xtx, &xty)
        .or_else(|| solve(&xtx, &xty))
        .map(|beta| (beta, true))
        .ok_or_else(|| EnsembleError::InvalidSpec("degenerate linear system".into()))
}

/// IRLS logistic regression of 1{target > 0} on z-scored features.
fn fit_logistic<'a>(
    n: usize,
    p: usize,
    x: &impl Fn(usize) -> &'a [f64],
    y: &impl Fn(usize) -> f64,
) -> Result<FittedModel, EnsembleError> {
    let mut means = vec![0.0; p];
    let mut stds = vec![0.0; p];
    for j in 0..p {
        let mut s = 0.0;
        for r in 0..n {
            s += x(r)[j];
        }
        means[j] = s / n as f64;
    }
    for j in 0..p {
        let mut ss = 0.0;
        for r in 0..n {
            ss += (x(r)[j] - means[j]).powi(2);
        }
        let sd = (ss / (n as f64 - 1.0).max(1.0)).sqrt();
        stds[j] = if sd < 1e-12 { 1.0 } else { sd };
    }
    let labels: Vec<f64> = (0..n).map(|r| if y(r) > 0.0 { 1.0 } else { 0.0 }).collect();

    let d = p + 1;
    let mut beta = vec![0.0; d];
    let z = |r: usize, j: usize| (x(r)[j] - means[j]) / stds[j];
    for _ in 0..50 {
        let mut h = vec![vec![0.0; d]; d];
        let mut g = vec![0.0; d];
        for r in 0..n {
            let mut lin = beta[0];
            for j in 0..p {
                lin += beta[j + 1] * z(r, j);
            }
            let prob = sigmoid(lin);
            let w = (prob * (1.0 - prob)).max(1e-6);
            let err = labels[r] - prob;
            g[0] += err;
            h[0][0] += w;
            for j in 0..p {
                let zj = z(r, j);
                g[j + 1] += err * zj;
                h[0][j + 1] += w * zj;
                for k in j..p {
                    h[j + 1][k + 1] += w * zj * z(r, k);
                }
            }
        }
        for j in 0..d {
            for k in 0..j {
                h[j][k] = h[k][j];
            }
            h[j][j] += 1e-8;
        }
        let Some(delta) = solve_spd(&h, &g) else { break };
        let step: f64 = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..d {
            beta[j] += delta[j];
        }
        if step < 1e-10 {
            break;
        }
    }
    Ok(FittedModel::Logistic {
        intercept: beta[0],
        coefs: beta[1..].to_vec(),
        means,
        stds,
    })
}

/// Exact greedy regression tree. Split gain must strictly improve, so the
/// first-scanned candidate (lowest feature index, then lowest threshold)
/// wins ties.
fn grow_tree<'a>(
    x: &impl Fn(usize) -> &'a [f64],
    ys: &[f64],
    rows: &[usize],
    n_feats: usize,
    depth_left: usize,
    min_leaf: usize,
) -> TreeNode {
    let n = rows.len();
    let mean = rows.iter().map(|&r| ys[r]).sum::<f64>() / n as f64;
    if depth_left == 0 || n < 2 * min_leaf {
        return TreeNode::Leaf(mean);
    }

    let total_sum: f64 = rows.iter().map(|&r| ys[r]).sum();
    let total_sq: f64 = rows.iter().map(|&r| ys[r] * ys[r]).sum();
    let parent_sse = total_sq - total_sum * total_sum / n as f64;

    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    let mut order: Vec<usize> = rows.to_vec();
    for feature in 0..n_feats {
        order.sort_by(|&a, &b| {
            x(a)[feature]
                .partial_cmp(&x(b)[feature])
                .expect("finite features")
        });
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for split in 1..n {
            let r = order[split - 1];
            left_sum += ys[r];
            left_sq += ys[r] * ys[r];
            let prev_val = x(order[split - 1])[feature];
            let next_val = x(order[split])[feature];
            if prev_val == next_val {
                continue;
            }
            if split < min_leaf || n - split < min_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse_l = left_sq - left_sum * left_sum / split as f64;
            let sse_r = right_sq - right_sum * right_sum / (n - split) as f64;
            let gain = parent_sse - sse_l - sse_r;
            let threshold = 0.5 * (prev_val + next_val);
            if gain > 1e-12 && best.map_or(true, |(g, _, _)| gain > g) {
                best = Some((gain, feature, threshold));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        return TreeNode::Leaf(mean);
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&r| x(r)[feature] <= threshold);
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(grow_tree(x, ys, &left_rows, n_feats, depth_left - 1, min_leaf)),
        right: Box::new(grow_tree(
            x,
            ys,
            &right_rows,
            n_feats,
            depth_left - 1,
            min_leaf,
        )),
    }
}

/// Fit on the training dataset and emit predictions over a date range as a
/// signal matrix (cells with any missing feature stay missing). Logistic
/// emits P(target > 0); continuous families emit the raw prediction.
pub fn fit_predict(
    model: &ModelSpec,
    train: &SupervisedDataset,
    score_range: Range<usize>,
    panel: &PanelSet,
) -> Result<(SignalMatrix, FitInfo), EnsembleError> {
    let all: Vec<usize> = (0..train.n_rows()).collect();
    let (fitted, info) = fit_rows(model, train, &all)?;
    let mut out = Matrix::missing(panel.n_dates(), panel.n_symbols());
    super::predict_cells(&fitted, train, panel, score_range, &mut out);
    Ok((SignalMatrix { values: out }, info))
}
