//! Brute-force reference evaluator. Every cell is derived from scratch:
//! windows are re-gathered and statistics recomputed with textbook
//! formulas, cross-sections are re-scanned per cell, and EMAs are replayed
//! from the first observation for every output cell. Slow on purpose — it
//! shares the semantic contract with `evaluate` but none of its machinery.

use super::{group_index, EvalError, GroupIndex, SignalMatrix, DEGENERATE_STD};
use crate::lang::{validate, AlphaExpr, Op, PanelSchema};
use crate::matrix::{is_missing, Matrix, MISSING};
use crate::panel::PanelSet;

pub fn reference_evaluate(expr: &AlphaExpr, panel: &PanelSet) -> Result<SignalMatrix, EvalError> {
    let schema = PanelSchema::from_panel(panel).with_max_depth(usize::MAX);
    let diags = validate(expr, &schema);
    if !diags.is_empty() {
        return Err(EvalError::Invalid(diags));
    }
    let groups = group_index(panel);
    let mut values = node(expr, panel, groups.as_ref());
    for sym in 0..values.n_symbols() {
        for t in 0..values.n_dates() {
            let v = values.get(t, sym);
            if !v.is_finite() {
                values.set(t, sym, MISSING);
            }
        }
    }
    Ok(SignalMatrix { values })
}

fn node(expr: &AlphaExpr, panel: &PanelSet, groups: Option<&GroupIndex>) -> Matrix {
    match expr {
        AlphaExpr::Field(name) => panel.get_field(name).expect("validated").values.clone(),
        AlphaExpr::Literal(v) => Matrix::filled(panel.n_dates(), panel.n_symbols(), *v),
        AlphaExpr::Window(_) => unreachable!(),
        AlphaExpr::Call(op, args) => call(*op, args, panel, groups),
    }
}

fn window_usize(arg: &AlphaExpr) -> usize {
    match arg {
        AlphaExpr::Window(w) => *w as usize,
        _ => unreachable!(),
    }
}

fn literal(arg: &AlphaExpr) -> f64 {
    match arg {
        AlphaExpr::Literal(v) => *v,
        _ => unreachable!(),
    }
}

fn call(op: Op, args: &[AlphaExpr], panel: &PanelSet, groups: Option<&GroupIndex>) -> Matrix {
    use Op::*;
    let (n_dates, n_syms) = (panel.n_dates(), panel.n_symbols());
    let mut out = Matrix::missing(n_dates, n_syms);

    match op {
        Neg | Abs | Sign | Log | Sqrt | Inverse | Sin | Cos | Not => {
            let x = node(&args[0], panel, groups);
            for i in 0..n_syms {
                for t in 0..n_dates {
                    let v = x.get(t, i);
                    if is_missing(v) {
                        continue;
                    }
                    let r = match op {
                        Neg => -v,
                        Abs => v.abs(),
                        Sign => {
                            if v > 0.0 {
                                1.0
                            } else if v < 0.0 {
                                -1.0
                            } else {
                                0.0
                            }
                        }
                        Log => {
                            if v > 0.0 {
                                v.ln()
                            } else {
                                MISSING
                            }
                        }
                        Sqrt => {
                            if v >= 0.0 {
                                v.sqrt()
                            } else {
                                MISSING
                            }
                        }
                        Inverse => {
                            if v == 0.0 {
                                MISSING
                            } else {
                                1.0 / v
                            }
                        }
                        Sin => v.sin(),
                        Cos => v.cos(),
                        Not => {
                            if v == 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        _ => unreachable!(),
                    };
                    out.set(t, i, r);
                }
            }
        }
        Tail => {
            let x = node(&args[0], panel, groups);
            let lo = literal(&args[1]);
            let hi = literal(&args[2]);
            let rep = literal(&args[3]);
            for i in 0..n_syms {
                for t in 0..n_dates {
                    let v = x.get(t, i);
                    if is_missing(v) {
                        continue;
                    }
                    out.set(t, i, if lo < v && v < hi { rep } else { v });
                }
            }
        }
        Add | Subtract | Multiply | Divide | Power | Min | Max | And | Or | Equal | Less
        | Greater => {
            let a = node(&args[0], panel, groups);
            let b = node(&args[1], panel, groups);
            for i in 0..n_syms {
                for t in 0..n_dates {
                    let (x, y) = (a.get(t, i), b.get(t, i));
                    if is_missing(x) || is_missing(y) {
                        continue;
                    }
                    let r = match op {
                        Add => x + y,
                        Subtract => x - y,
                        Multiply => x * y,
                        Divide => {
                            if y == 0.0 {
                                MISSING
                            } else {
                                x / y
                            }
                        }
                        Power => x.powf(y),
                        Min => x.min(y),
                        Max => x.max(y),
                        And => real_of(x != 0.0 && y != 0.0),
                        Or => real_of(x != 0.0 || y != 0.0),
                        Equal => real_of(x == y),
                        Less => real_of(x < y),
                        Greater => real_of(x > y),
                        _ => unreachable!(),
                    };
                    out.set(t, i, r);
                }
            }
        }
        IfElse => {
            let c = node(&args[0], panel, groups);
            let a = node(&args[1], panel, groups);
            let b = node(&args[2], panel, groups);
            for i in 0..n_syms {
                for t in 0..n_dates {
                    let cv = c.get(t, i);
                    if is_missing(cv) {
                        continue;
                    }
                    out.set(t, i, if cv != 0.0 { a.get(t, i) } else { b.get(t, i) });
                }
            }
        }
        Rank | Zscore | Demean | Normalize | Quantile => {
            let x = node(&args[0], panel, groups);
            let q = if op == Quantile {
                window_usize(&args[1])
            } else {
                0
            };
            for t in 0..n_dates {
                for i in 0..n_syms {
                    let v = x.get(t, i);
                    if is_missing(v) {
                        continue;
                    }
                    let peers: Vec<f64> = (0..n_syms)
                        .map(|j| x.get(t, j))
                        .filter(|u| !is_missing(*u))
                        .collect();
                    if let Some(r) = cross_stat(op, v, &peers, q) {
                        out.set(t, i, r);
                    }
                }
            }
        }
        GroupRank | GroupMean | GroupZscore => {
            let x = node(&args[0], panel, groups);
            let gi = groups.expect("validated");
            for t in 0..n_dates {
                for i in 0..n_syms {
                    let v = x.get(t, i);
                    if is_missing(v) {
                        continue;
                    }
                    let Some(g) = gi.of_symbol[i] else { continue };
                    let peers: Vec<f64> = gi.members[g]
                        .iter()
                        .map(|&j| x.get(t, j))
                        .filter(|u| !is_missing(*u))
                        .collect();
                    let cross_op = match op {
                        GroupRank => Rank,
                        GroupMean => GroupMean,
                        GroupZscore => Zscore,
                        _ => unreachable!(),
                    };
                    if let Some(r) = cross_stat(cross_op, v, &peers, 0) {
                        out.set(t, i, r);
                    }
                }
            }
        }
        TsDelay => {
            let x = node(&args[0], panel, groups);
            let w = window_usize(&args[1]);
            for i in 0..n_syms {
                for t in w..n_dates {
                    let v = x.get(t - w, i);
                    if !is_missing(v) {
                        out.set(t, i, v);
                    }
                }
            }
        }
        TsDelta => {
            let x = node(&args[0], panel, groups);
            let w = window_usize(&args[1]);
            for i in 0..n_syms {
                for t in w..n_dates {
                    let (now, then) = (x.get(t, i), x.get(t - w, i));
                    if !is_missing(now) && !is_missing(then) {
                        out.set(t, i, now - then);
                    }
                }
            }
        }
        TsMacd => {
            let x = node(&args[0], panel, groups);
            let fast = window_usize(&args[1]) as f64;
            let slow = window_usize(&args[2]) as f64;
            for i in 0..n_syms {
                for t in 0..n_dates {
                    if is_missing(x.get(t, i)) {
                        continue;
                    }
                    // replay both EMAs from the start for this one cell
                    let mut ef: Option<f64> = None;
                    let mut es: Option<f64> = None;
                    for s in 0..=t {
                        let v = x.get(s, i);
                        if is_missing(v) {
                            continue;
                        }
                        ef = Some(match ef {
                            None => v,
                            Some(e) => 2.0 / (fast + 1.0) * v + (1.0 - 2.0 / (fast + 1.0)) * e,
                        });
                        es = Some(match es {
                            None => v,
                            Some(e) => 2.0 / (slow + 1.0) * v + (1.0 - 2.0 / (slow + 1.0)) * e,
                        });
                    }
                    out.set(t, i, ef.unwrap() - es.unwrap());
                }
            }
        }
        TaRsi => {
            let x = node(&args[0], panel, groups);
            let w = window_usize(&args[1]);
            for i in 0..n_syms {
                'cell: for t in w..n_dates {
                    let mut gains = 0.0;
                    let mut losses = 0.0;
                    for s in t + 1 - w..=t {
                        let (cur, prev) = (x.get(s, i), x.get(s - 1, i));
                        if is_missing(cur) || is_missing(prev) {
                            continue 'cell;
                        }
                        let d = cur - prev;
                        if d > 0.0 {
                            gains += d;
                        } else {
                            losses += -d;
                        }
                    }
                    let (ag, al) = (gains / w as f64, losses / w as f64);
                    let r = if ag < 1e-12 && al < 1e-12 {
                        50.0
                    } else if al < 1e-12 {
                        100.0
                    } else {
                        100.0 - 100.0 / (1.0 + ag / al)
                    };
                    out.set(t, i, r);
                }
            }
        }
        TsMean | TsStd | TsSum | TsMin | TsMax | TsRank | TsZscore | TsSkew | TsKurtosis
        | TsArgMax | TsArgMin | TsIr | TsSharpe => {
            let x = node(&args[0], panel, groups);
            let w = window_usize(&args[1]);
            for i in 0..n_syms {
                for t in 0..n_dates {
                    if t + 1 < w {
                        continue;
                    }
                    let window: Vec<f64> = (t + 1 - w..=t).map(|s| x.get(s, i)).collect();
                    if window.iter().any(|v| is_missing(*v)) {
                        continue;
                    }
                    if let Some(r) = window_stat(op, &window) {
                        out.set(t, i, r);
                    }
                }
            }
        }
        TsCorr | TsCov | TsCoSkewness | TsCoKurtosis | TsRegression | TsRegressionRes
        | TsBeta => {
            let a = node(&args[0], panel, groups);
            let b = node(&args[1], panel, groups);
            let w = window_usize(&args[2]);
            for i in 0..n_syms {
                for t in 0..n_dates {
                    if t + 1 < w {
                        continue;
                    }
                    let wa: Vec<f64> = (t + 1 - w..=t).map(|s| a.get(s, i)).collect();
                    let wb: Vec<f64> = (t + 1 - w..=t).map(|s| b.get(s, i)).collect();
                    if wa.iter().chain(wb.iter()).any(|v| is_missing(*v)) {
                        continue;
                    }
                    if let Some(r) = pair_stat(op, &wa, &wb) {
                        out.set(t, i, r);
                    }
                }
            }
        }
    }
    out
}

fn real_of(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Cross-sectional statistic of one value against its peer set (peers
/// include the value itself). GroupMean doubles as plain mean.
fn cross_stat(op: Op, v: f64, peers: &[f64], q: usize) -> Option<f64> {
    let n = peers.len();
    match op {
        Op::Rank | Op::Quantile => {
            let frank = if n == 1 {
                0.5
            } else {
                let less = peers.iter().filter(|u| **u < v).count();
                let ties = peers.iter().filter(|u| **u == v).count();
                let avg_rank = less as f64 + (ties as f64 + 1.0) / 2.0;
                (avg_rank - 1.0) / (n as f64 - 1.0)
            };
            if op == Op::Rank {
                Some(frank)
            } else {
                Some((frank * q as f64).floor().min(q as f64 - 1.0))
            }
        }
        Op::Zscore => {
            if n < 2 {
                return None;
            }
            let mean = peers.iter().sum::<f64>() / n as f64;
            let var = peers.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>()
                / (n as f64 - 1.0);
            let sd = var.sqrt();
            (sd >= DEGENERATE_STD).then(|| (v - mean) / sd)
        }
        Op::Demean => {
            let mean = peers.iter().sum::<f64>() / n as f64;
            Some(v - mean)
        }
        Op::GroupMean => Some(peers.iter().sum::<f64>() / n as f64),
        Op::Normalize => {
            let norm: f64 = peers.iter().map(|u| u.abs()).sum();
            Some(if norm == 0.0 { 0.0 } else { v / norm })
        }
        _ => unreachable!(),
    }
}

fn window_stat(op: Op, window: &[f64]) -> Option<f64> {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let sd = {
        let ss: f64 = window.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    };
    match op {
        Op::TsMean => Some(mean),
        Op::TsSum => Some(window.iter().sum()),
        Op::TsStd => Some(sd),
        Op::TsZscore => (sd >= DEGENERATE_STD).then(|| (window[window.len() - 1] - mean) / sd),
        Op::TsIr => (sd >= DEGENERATE_STD).then(|| mean / sd),
        Op::TsSharpe => (sd >= DEGENERATE_STD).then(|| 252.0f64.sqrt() * mean / sd),
        Op::TsMin => window.iter().copied().reduce(f64::min),
        Op::TsMax => window.iter().copied().reduce(f64::max),
        Op::TsArgMax => {
            let mut best = 0usize;
            for (k, v) in window.iter().enumerate() {
                if *v >= window[best] {
                    best = k; // >= so later ties win
                }
            }
            Some((window.len() - 1 - best) as f64)
        }
        Op::TsArgMin => {
            let mut best = 0usize;
            for (k, v) in window.iter().enumerate() {
                if *v <= window[best] {
                    best = k;
                }
            }
            Some((window.len() - 1 - best) as f64)
        }
        Op::TsRank => {
            let last = window[window.len() - 1];
            let less = window.iter().filter(|v| **v < last).count() as f64;
            let ties = window.iter().filter(|v| **v == last).count() as f64;
            Some((less + (ties + 1.0) / 2.0 - 1.0) / (n - 1.0))
        }
        Op::TsSkew => {
            if window.len() < 3 {
                return None;
            }
            let m2 = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let m3 = window.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
            if m2.sqrt() < DEGENERATE_STD {
                return None;
            }
            Some(m3 / m2.powf(1.5) * (n * (n - 1.0)).sqrt() / (n - 2.0))
        }
        Op::TsKurtosis => {
            if window.len() < 4 {
                return None;
            }
            let m2 = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let m4 = window.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
            if m2.sqrt() < DEGENERATE_STD {
                return None;
            }
            let g2 = m4 / (m2 * m2) - 3.0;
            Some(((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0)))
        }
        _ => unreachable!(),
    }
}

/// Textbook two-series statistics; a is the first surface argument.
/// Arithmetic grouping deliberately matches the streaming kernels so exact
/// ties (corr of a 2-cell window is exactly +-1) survive the downstream
/// discretizing operators identically on both paths.
fn pair_stat(op: Op, a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut s_ab = 0.0;
    let mut s_aa = 0.0;
    let mut s_bb = 0.0;
    let mut s_abb = 0.0;
    let mut s_abbb = 0.0;
    for k in 0..a.len() {
        let (ac, bc) = (a[k] - mean_a, b[k] - mean_b);
        s_ab += ac * bc;
        s_aa += ac * ac;
        s_bb += bc * bc;
        s_abb += ac * bc * bc;
        s_abbb += ac * bc * bc * bc;
    }
    let sd_a = (s_aa / (n - 1.0)).sqrt();
    let sd_b = (s_bb / (n - 1.0)).sqrt();
    match op {
        Op::TsCov => Some(s_ab / (n - 1.0)),
        Op::TsCorr => {
            if sd_a < DEGENERATE_STD || sd_b < DEGENERATE_STD {
                return None;
            }
            Some((s_ab / (s_aa * s_bb).sqrt()).clamp(-1.0, 1.0))
        }
        Op::TsBeta => {
            if sd_b < DEGENERATE_STD {
                return None;
            }
            Some(s_ab / s_bb)
        }
        Op::TsCoSkewness => {
            let pa = (s_aa / n).sqrt();
            let pb = (s_bb / n).sqrt();
            if pa < DEGENERATE_STD || pb < DEGENERATE_STD {
                return None;
            }
            Some((s_abb / n) / (pa * pb * pb))
        }
        Op::TsCoKurtosis => {
            let pa = (s_aa / n).sqrt();
            let pb = (s_bb / n).sqrt();
            if pa < DEGENERATE_STD || pb < DEGENERATE_STD {
                return None;
            }
            Some((s_abbb / n) / (pa * pb * pb * pb))
        }
        Op::TsRegression | Op::TsRegressionRes => {
            if sd_b < DEGENERATE_STD {
                return None;
            }
            let slope = s_ab / s_bb;
            let fitted = mean_a + slope * (b[b.len() - 1] - mean_b);
            if op == Op::TsRegression {
                Some(fitted)
            } else {
                Some(a[a.len() - 1] - fitted)
            }
        }
        _ => unreachable!(),
    }
}
