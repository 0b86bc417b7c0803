//! Trailing-window kernels, one symbol column at a time.
//!
//! A `run` counter tracks consecutive non-missing cells so windows spanning
//! gaps stay missing. Window sums are recomputed left-to-right per cell
//! rather than maintained incrementally: differenced running sums drift by
//! ulps, and discrete operators downstream (rank ties, quantile buckets)
//! turn any drift into whole-bucket divergences. Extrema use monotonic
//! deques since they only select input values.

use std::collections::VecDeque;

use super::DEGENERATE_STD;
use crate::lang::Op;
use crate::matrix::is_missing;
use crate::quality::{sample_excess_kurtosis, sample_skewness};

const ANNUALIZATION: f64 = 252.0;

pub(crate) fn one_series(op: Op, col: &[f64], out: &mut [f64], w: usize) {
    match op {
        Op::TsDelay => {
            for t in w..col.len() {
                if !is_missing(col[t - w]) {
                    out[t] = col[t - w];
                }
            }
        }
        Op::TsDelta => {
            for t in w..col.len() {
                if !is_missing(col[t]) && !is_missing(col[t - w]) {
                    out[t] = col[t] - col[t - w];
                }
            }
        }
        Op::TsMin | Op::TsMax | Op::TsArgMin | Op::TsArgMax => extremum(op, col, out, w),
        Op::TaRsi => rsi(col, out, w),
        _ => rolling(op, col, out, w),
    }
}

/// Window-statistics family: fresh per-window sums, recentered moments.
fn rolling(op: Op, col: &[f64], out: &mut [f64], w: usize) {
    let mut run = 0usize;
    for t in 0..col.len() {
        if is_missing(col[t]) {
            run = 0;
            continue;
        }
        run += 1;
        if run < w {
            continue;
        }
        let window = &col[t + 1 - w..=t];
        let s1: f64 = window.iter().sum();
        let mean = s1 / w as f64;
        out[t] = match op {
            Op::TsSum => s1,
            Op::TsMean => mean,
            Op::TsStd => window_std(window, mean),
            Op::TsZscore => match guarded_std(window, mean) {
                Some(sd) => (col[t] - mean) / sd,
                None => continue,
            },
            Op::TsIr => match guarded_std(window, mean) {
                Some(sd) => mean / sd,
                None => continue,
            },
            Op::TsSharpe => match guarded_std(window, mean) {
                Some(sd) => ANNUALIZATION.sqrt() * mean / sd,
                None => continue,
            },
            Op::TsSkew => match sample_skewness(window) {
                Some(v) => v,
                None => continue,
            },
            Op::TsKurtosis => match sample_excess_kurtosis(window) {
                Some(v) => v,
                None => continue,
            },
            Op::TsRank => window_rank(window),
            other => unreachable!("{other:?} is not a rolling one-series op"),
        };
    }
}

fn window_std(window: &[f64], mean: f64) -> f64 {
    let ss: f64 = window.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (window.len() as f64 - 1.0)).sqrt()
}

fn guarded_std(window: &[f64], mean: f64) -> Option<f64> {
    let sd = window_std(window, mean);
    (sd >= DEGENERATE_STD).then_some(sd)
}

/// Fractional rank of today's value within the window, average ties,
/// scaled to [0, 1].
fn window_rank(window: &[f64]) -> f64 {
    let last = *window.last().expect("window non-empty");
    let mut less = 0usize;
    let mut ties = 0usize;
    for &v in window {
        if v < last {
            less += 1;
        } else if v == last {
            ties += 1;
        }
    }
    let avg_rank = less as f64 + (ties as f64 + 1.0) / 2.0;
    (avg_rank - 1.0) / (window.len() as f64 - 1.0)
}

/// Monotonic-deque extrema. Equal values evict older entries so ties
/// resolve to the most recent day.
fn extremum(op: Op, col: &[f64], out: &mut [f64], w: usize) {
    let keep_new_max = |back: f64, cur: f64| back <= cur; // for max-type ops
    let keep_new_min = |back: f64, cur: f64| back >= cur;
    let is_max = matches!(op, Op::TsMax | Op::TsArgMax);
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut run = 0usize;
    for t in 0..col.len() {
        if is_missing(col[t]) {
            run = 0;
            deque.clear();
            continue;
        }
        run += 1;
        while let Some(&b) = deque.back() {
            let evict = if is_max {
                keep_new_max(col[b], col[t])
            } else {
                keep_new_min(col[b], col[t])
            };
            if evict {
                deque.pop_back();
            } else {
                break;
            }
        }
        deque.push_back(t);
        while let Some(&f) = deque.front() {
            if f + w <= t {
                deque.pop_front();
            } else {
                break;
            }
        }
        if run >= w {
            let front = *deque.front().expect("deque non-empty");
            out[t] = match op {
                Op::TsMax | Op::TsMin => col[front],
                Op::TsArgMax | Op::TsArgMin => (t - front) as f64,
                _ => unreachable!(),
            };
        }
    }
}

/// RSI with simple-average gains and losses over the last `w` one-day
/// changes (needs w+1 consecutive observations). Flat windows read 50,
/// all-gain windows 100.
fn rsi(col: &[f64], out: &mut [f64], w: usize) {
    let mut run = 0usize;
    for t in 0..col.len() {
        if is_missing(col[t]) {
            run = 0;
            continue;
        }
        run += 1;
        if run < w + 1 {
            continue;
        }
        let mut gain = 0.0f64;
        let mut loss = 0.0f64;
        for i in t + 1 - w..=t {
            let d = col[i] - col[i - 1];
            if d > 0.0 {
                gain += d;
            } else {
                loss -= d;
            }
        }
        let avg_gain = gain / w as f64;
        let avg_loss = loss / w as f64;
        out[t] = if avg_gain < 1e-12 && avg_loss < 1e-12 {
            50.0
        } else if avg_loss < 1e-12 {
            100.0
        } else {
            100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
        };
    }
}

/// Fast-minus-slow exponential moving averages, each seeded with the first
/// observation, alpha = 2/(span+1). State carries across gaps; output on
/// observed days only.
pub(crate) fn macd(col: &[f64], out: &mut [f64], fast: usize, slow: usize) {
    let alpha_f = 2.0 / (fast as f64 + 1.0);
    let alpha_s = 2.0 / (slow as f64 + 1.0);
    let mut ema_f: Option<f64> = None;
    let mut ema_s: Option<f64> = None;
    for t in 0..col.len() {
        if is_missing(col[t]) {
            continue;
        }
        ema_f = Some(match ema_f {
            None => col[t],
            Some(e) => alpha_f * col[t] + (1.0 - alpha_f) * e,
        });
        ema_s = Some(match ema_s {
            None => col[t],
            Some(e) => alpha_s * col[t] + (1.0 - alpha_s) * e,
        });
        out[t] = ema_f.expect("set above") - ema_s.expect("set above");
    }
}

/// Two-series window statistics. Argument order follows the surface
/// syntax: `ts_regression(y, x, w)` passes a = y (dependent), b = x;
/// `ts_corr(x, y, w)` passes a = x, b = y; `ts_beta(x, y, w)` = cov/var(y)
/// is the slope of a on b.
pub(crate) fn two_series(op: Op, a: &[f64], b: &[f64], out: &mut [f64], w: usize) {
    let mut run_a = 0usize;
    let mut run_b = 0usize;
    for t in 0..a.len() {
        let (ma, mb) = (is_missing(a[t]), is_missing(b[t]));
        run_a = if ma { 0 } else { run_a + 1 };
        run_b = if mb { 0 } else { run_b + 1 };
        if run_a < w || run_b < w {
            continue;
        }
        let sa: f64 = a[t + 1 - w..=t].iter().sum();
        let sb: f64 = b[t + 1 - w..=t].iter().sum();
        let mean_a = sa / w as f64;
        let mean_b = sb / w as f64;
        let mut s_ab = 0.0;
        let mut s_aa = 0.0;
        let mut s_bb = 0.0;
        let mut s_abb = 0.0;
        let mut s_abbb = 0.0;
        for i in t + 1 - w..=t {
            let ac = a[i] - mean_a;
            let bc = b[i] - mean_b;
            s_ab += ac * bc;
            s_aa += ac * ac;
            s_bb += bc * bc;
            s_abb += ac * bc * bc;
            s_abbb += ac * bc * bc * bc;
        }
        let n = w as f64;
        let sd_a = (s_aa / (n - 1.0)).sqrt();
        let sd_b = (s_bb / (n - 1.0)).sqrt();
        out[t] = match op {
            Op::TsCov => s_ab / (n - 1.0),
            Op::TsCorr => {
                if sd_a < DEGENERATE_STD || sd_b < DEGENERATE_STD {
                    continue;
                }
                (s_ab / (s_aa * s_bb).sqrt()).clamp(-1.0, 1.0)
            }
            Op::TsBeta => {
                if sd_b < DEGENERATE_STD {
                    continue;
                }
                s_ab / s_bb
            }
            Op::TsCoSkewness => {
                // population moments: E[(a-mu_a)(b-mu_b)^2] / (sigma_a sigma_b^2)
                let pa = (s_aa / n).sqrt();
                let pb = (s_bb / n).sqrt();
                if pa < DEGENERATE_STD || pb < DEGENERATE_STD {
                    continue;
                }
                (s_abb / n) / (pa * pb * pb)
            }
            Op::TsCoKurtosis => {
                let pa = (s_aa / n).sqrt();
                let pb = (s_bb / n).sqrt();
                if pa < DEGENERATE_STD || pb < DEGENERATE_STD {
                    continue;
                }
                (s_abbb / n) / (pa * pb * pb * pb)
            }
            Op::TsRegression | Op::TsRegressionRes => {
                if sd_b < DEGENERATE_STD {
                    continue;
                }
                let slope = s_ab / s_bb;
                let fitted = mean_a + slope * (b[t] - mean_b);
                if op == Op::TsRegression {
                    fitted
                } else {
                    a[t] - fitted
                }
            }
            other => unreachable!("{other:?} is not a two-series op"),
        };
    }
}
