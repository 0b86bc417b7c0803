//! Expression evaluation over a panel into a date × symbol signal matrix.
//!
//! Semantics in one place:
//! - trailing windows include the current day and require every input in
//!   the window to be present (`ts_delay`/`ts_delta` need only the cells
//!   they actually read);
//! - cross-sectional operators act per date over non-missing symbols;
//! - any operator dividing by an intra-window std/variance yields missing
//!   when that std is below [`DEGENERATE_STD`];
//! - numerical edge cases (log of a negative, division by zero, overflow)
//!   produce missing cells, never panics;
//! - boolean outputs materialize as 0/1 reals.
//!
//! [`reference_evaluate`] recomputes every cell from scratch with separate,
//! deliberately naive code; the two paths are compared in tests.

mod reference;
mod ts;

pub use reference::reference_evaluate;

use std::io::Write;

use thiserror::Error;

use crate::lang::{validate, AlphaExpr, Diagnostic, Op, PanelSchema};
use crate::matrix::{is_missing, Matrix, MISSING};
use crate::panel::PanelSet;

/// Stds below this are treated as zero; dividing by them yields missing.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("expression failed validation: {}", format_diags(.0))]
    Invalid(Vec<Diagnostic>),
}

fn format_diags(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Evaluated signal, aligned to its panel's calendar and symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub values: Matrix,
}

impl SignalMatrix {
    /// Long-format export: `date,symbol,value`, missing cells skipped.
    pub fn export_long_csv<W: Write>(&self, panel: &PanelSet, mut out: W) -> std::io::Result<()> {
        writeln!(out, "date,symbol,value")?;
        for t in 0..self.values.n_dates() {
            for i in 0..self.values.n_symbols() {
                let v = self.values.get(t, i);
                if !is_missing(v) {
                    writeln!(out, "{},{},{}", panel.calendar().date(t), panel.symbols()[i], v)?;
                }
            }
        }
        Ok(())
    }
}

/// Group partition: symbol indices per label, plus per-symbol membership.
pub(crate) struct GroupIndex {
    pub members: Vec<Vec<usize>>,
    pub of_symbol: Vec<Option<usize>>,
}

pub(crate) fn group_index(panel: &PanelSet) -> Option<GroupIndex> {
    let labels = panel.group_labels()?;
    let mut by_label: std::collections::BTreeMap<&str, Vec<usize>> = Default::default();
    for (i, label) in labels.iter().enumerate() {
        if let Some(l) = label {
            by_label.entry(l).or_default().push(i);
        }
    }
    let mut of_symbol = vec![None; labels.len()];
    let mut members = Vec::with_capacity(by_label.len());
    for (gi, (_, syms)) in by_label.into_iter().enumerate() {
        for &s in &syms {
            of_symbol[s] = Some(gi);
        }
        members.push(syms);
    }
    Some(GroupIndex { members, of_symbol })
}

/// Evaluate a validated expression into a signal matrix. Validation here
/// checks structure, fields, and domains but not the search-policy depth
/// cap (deep hand-written expressions evaluate fine).
pub fn evaluate(expr: &AlphaExpr, panel: &PanelSet) -> Result<SignalMatrix, EvalError> {
    let schema = PanelSchema::from_panel(panel).with_max_depth(usize::MAX);
    let diags = validate(expr, &schema);
    if !diags.is_empty() {
        return Err(EvalError::Invalid(diags));
    }
    let groups = group_index(panel);
    let mut values = eval_node(expr, panel, groups.as_ref());
    scrub_nonfinite(&mut values);
    Ok(SignalMatrix { values })
}

pub(crate) fn scrub_nonfinite(m: &mut Matrix) {
    m.map_inplace(|v| if v.is_finite() { v } else { MISSING });
}

fn expect_window(arg: &AlphaExpr) -> usize {
    match arg {
        AlphaExpr::Window(w) => *w as usize,
        _ => unreachable!("validated window slot"),
    }
}

fn expect_literal(arg: &AlphaExpr) -> f64 {
    match arg {
        AlphaExpr::Literal(v) => *v,
        _ => unreachable!("validated literal slot"),
    }
}

fn eval_node(expr: &AlphaExpr, panel: &PanelSet, groups: Option<&GroupIndex>) -> Matrix {
    match expr {
        AlphaExpr::Field(name) => panel
            .get_field(name)
            .expect("validated field")
            .values
            .clone(),
        AlphaExpr::Literal(v) => {
            Matrix::filled(panel.n_dates(), panel.n_symbols(), *v)
        }
        AlphaExpr::Window(_) => unreachable!("window in series position"),
        AlphaExpr::Call(op, args) => eval_call(*op, args, panel, groups),
    }
}

fn eval_call(op: Op, args: &[AlphaExpr], panel: &PanelSet, groups: Option<&GroupIndex>) -> Matrix {
    use Op::*;
    match op {
        // -- elementwise unary ------------------------------------------------
        Neg => unary(eval_node(&args[0], panel, groups), |x| -x),
        Abs => unary(eval_node(&args[0], panel, groups), f64::abs),
        Sign => unary(eval_node(&args[0], panel, groups), |x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }),
        Log => unary(eval_node(&args[0], panel, groups), |x| {
            if x > 0.0 {
                x.ln()
            } else {
                MISSING
            }
        }),
        Sqrt => unary(eval_node(&args[0], panel, groups), |x| {
            if x >= 0.0 {
                x.sqrt()
            } else {
                MISSING
            }
        }),
        Inverse => unary(eval_node(&args[0], panel, groups), |x| {
            if x == 0.0 {
                MISSING
            } else {
                1.0 / x
            }
        }),
        Sin => unary(eval_node(&args[0], panel, groups), f64::sin),
        Cos => unary(eval_node(&args[0], panel, groups), f64::cos),
        Tail => {
            let lo = expect_literal(&args[1]);
            let hi = expect_literal(&args[2]);
            let v = expect_literal(&args[3]);
            unary(eval_node(&args[0], panel, groups), move |x| {
                if lo < x && x < hi {
                    v
                } else {
                    x
                }
            })
        }
        // -- elementwise binary -----------------------------------------------
        Add => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            |a, b| a + b,
        ),
        Subtract => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            |a, b| a - b,
        ),
        Multiply => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            |a, b| a * b,
        ),
        Divide => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            |a, b| if b == 0.0 { MISSING } else { a / b },
        ),
        Power => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            f64::powf,
        ),
        Min => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            f64::min,
        ),
        Max => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            f64::max,
        ),
        // -- logical ----------------------------------------------------------
        And => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            |a, b| bool_to_real(a != 0.0 && b != 0.0),
        ),
        Or => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            |a, b| bool_to_real(a != 0.0 || b != 0.0),
        ),
        Not => unary(eval_node(&args[0], panel, groups), |a| {
            bool_to_real(a == 0.0)
        }),
        Equal => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            |a, b| bool_to_real(a == b),
        ),
        Less => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            |a, b| bool_to_real(a < b),
        ),
        Greater => binary(
            eval_node(&args[0], panel, groups),
            &eval_node(&args[1], panel, groups),
            |a, b| bool_to_real(a > b),
        ),
        IfElse => {
            let cond = eval_node(&args[0], panel, groups);
            let a = eval_node(&args[1], panel, groups);
            let b = eval_node(&args[2], panel, groups);
            let mut out = Matrix::missing(cond.n_dates(), cond.n_symbols());
            for sym in 0..cond.n_symbols() {
                for t in 0..cond.n_dates() {
                    let c = cond.get(t, sym);
                    if is_missing(c) {
                        continue;
                    }
                    let chosen = if c != 0.0 { a.get(t, sym) } else { b.get(t, sym) };
                    out.set(t, sym, chosen);
                }
            }
            out
        }
        // -- cross-sectional --------------------------------------------------
        Rank => cross_sectional(eval_node(&args[0], panel, groups), cs_rank),
        Zscore => cross_sectional(eval_node(&args[0], panel, groups), cs_zscore),
        Demean => cross_sectional(eval_node(&args[0], panel, groups), cs_demean),
        Normalize => cross_sectional(eval_node(&args[0], panel, groups), cs_normalize),
        Quantile => {
            let q = expect_window(&args[1]);
            cross_sectional(eval_node(&args[0], panel, groups), move |vals, out| {
                cs_quantile(vals, out, q)
            })
        }
        // -- group-based ------------------------------------------------------
        GroupRank | GroupMean | GroupZscore => {
            let input = eval_node(&args[0], panel, groups);
            let gi = groups.expect("validated group availability");
            let mut out = Matrix::missing(input.n_dates(), input.n_symbols());
            let mut vals: Vec<f64> = Vec::new();
            let mut res: Vec<f64> = Vec::new();
            for t in 0..input.n_dates() {
                for members in &gi.members {
                    vals.clear();
                    vals.extend(members.iter().map(|&s| input.get(t, s)));
                    res.clear();
                    res.resize(vals.len(), MISSING);
                    match op {
                        GroupRank => cs_rank(&vals, &mut res),
                        GroupMean => cs_mean_fill(&vals, &mut res),
                        GroupZscore => cs_zscore(&vals, &mut res),
                        _ => unreachable!(),
                    }
                    for (k, &s) in members.iter().enumerate() {
                        out.set(t, s, res[k]);
                    }
                }
            }
            out
        }
        // -- time-series ------------------------------------------------------
        TsMean | TsStd | TsSum | TsMin | TsMax | TsDelay | TsDelta | TsRank | TsZscore
        | TsSkew | TsKurtosis | TsArgMax | TsArgMin | TsIr | TsSharpe | TaRsi => {
            let input = eval_node(&args[0], panel, groups);
            let w = expect_window(&args[1]);
            per_symbol(&input, |col, out| ts::one_series(op, col, out, w))
        }
        TsMacd => {
            let input = eval_node(&args[0], panel, groups);
            let fast = expect_window(&args[1]);
            let slow = expect_window(&args[2]);
            per_symbol(&input, |col, out| ts::macd(col, out, fast, slow))
        }
        TsCorr | TsCov | TsCoSkewness | TsCoKurtosis | TsRegression | TsRegressionRes
        | TsBeta => {
            let a = eval_node(&args[0], panel, groups);
            let b = eval_node(&args[1], panel, groups);
            let w = expect_window(&args[2]);
            let mut out = Matrix::missing(a.n_dates(), a.n_symbols());
            for sym in 0..a.n_symbols() {
                ts::two_series(op, a.column(sym), b.column(sym), out.column_mut(sym), w);
            }
            out
        }
    }
}

#[inline]
fn bool_to_real(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn unary<F: Fn(f64) -> f64>(mut m: Matrix, f: F) -> Matrix {
    m.map_inplace(|x| if is_missing(x) { MISSING } else { f(x) });
    m
}

fn binary<F: Fn(f64, f64) -> f64>(mut a: Matrix, b: &Matrix, f: F) -> Matrix {
    assert_eq!(a.shape(), b.shape());
    for sym in 0..b.n_symbols() {
        let bc = b.column(sym);
        let ac = a.column_mut(sym);
        for t in 0..bc.len() {
            ac[t] = if is_missing(ac[t]) || is_missing(bc[t]) {
                MISSING
            } else {
                f(ac[t], bc[t])
            };
        }
    }
    a
}

fn per_symbol<F: Fn(&[f64], &mut [f64])>(input: &Matrix, f: F) -> Matrix {
    let mut out = Matrix::missing(input.n_dates(), input.n_symbols());
    for sym in 0..input.n_symbols() {
        f(input.column(sym), out.column_mut(sym));
    }
    out
}

fn cross_sectional<F: Fn(&[f64], &mut [f64])>(input: Matrix, f: F) -> Matrix {
    let mut out = Matrix::missing(input.n_dates(), input.n_symbols());
    let mut row: Vec<f64> = vec![0.0; input.n_symbols()];
    let mut res: Vec<f64> = vec![0.0; input.n_symbols()];
    for t in 0..input.n_dates() {
        for i in 0..input.n_symbols() {
            row[i] = input.get(t, i);
        }
        res.iter_mut().for_each(|v| *v = MISSING);
        f(&row, &mut res);
        out.set_row(t, &res);
    }
    out
}

/// Fractional rank in [0, 1]: average ranks for ties, scaled by (r-1)/(n-1).
/// A one-element cross-section ranks 0.5.
pub(crate) fn cs_rank(vals: &[f64], out: &mut [f64]) {
    let present: Vec<usize> = (0..vals.len()).filter(|&i| !is_missing(vals[i])).collect();
    let n = present.len();
    if n == 0 {
        return;
    }
    if n == 1 {
        out[present[0]] = 0.5;
        return;
    }
    let mut order = present.clone();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).expect("no NaN"));
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && vals[order[j + 1]] == vals[order[i]] {
            j += 1;
        }
        // 1-based average rank over the tie run [i, j]
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let scaled = (avg_rank - 1.0) / (n as f64 - 1.0);
        for &idx in &order[i..=j] {
            out[idx] = scaled;
        }
        i = j + 1;
    }
}

pub(crate) fn cs_zscore(vals: &[f64], out: &mut [f64]) {
    let present: Vec<f64> = vals.iter().copied().filter(|v| !is_missing(*v)).collect();
    let n = present.len();
    if n < 2 {
        return;
    }
    let mean = present.iter().sum::<f64>() / n as f64;
    let var = present.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let std = var.sqrt();
    if std < DEGENERATE_STD {
        return;
    }
    for (i, &v) in vals.iter().enumerate() {
        if !is_missing(v) {
            out[i] = (v - mean) / std;
        }
    }
}

pub(crate) fn cs_demean(vals: &[f64], out: &mut [f64]) {
    let present: Vec<f64> = vals.iter().copied().filter(|v| !is_missing(*v)).collect();
    if present.is_empty() {
        return;
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    for (i, &v) in vals.iter().enumerate() {
        if !is_missing(v) {
            out[i] = v - mean;
        }
    }
}

/// Divide by the cross-sectional L1 norm; an all-zero cross-section maps
/// to zeros rather than missing.
pub(crate) fn cs_normalize(vals: &[f64], out: &mut [f64]) {
    let norm: f64 = vals
        .iter()
        .filter(|v| !is_missing(**v))
        .map(|v| v.abs())
        .sum();
    for (i, &v) in vals.iter().enumerate() {
        if !is_missing(v) {
            out[i] = if norm == 0.0 { 0.0 } else { v / norm };
        }
    }
}

/// Bucket index 0..q-1 from the fractional rank.
pub(crate) fn cs_quantile(vals: &[f64], out: &mut [f64], q: usize) {
    cs_rank(vals, out);
    for v in out.iter_mut() {
        if !is_missing(*v) {
            *v = ((*v * q as f64).floor()).min(q as f64 - 1.0);
        }
    }
}

fn cs_mean_fill(vals: &[f64], out: &mut [f64]) {
    let present: Vec<f64> = vals.iter().copied().filter(|v| !is_missing(*v)).collect();
    if present.is_empty() {
        return;
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    for (i, &v) in vals.iter().enumerate() {
        if !is_missing(v) {
            out[i] = mean;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::panel::{PanelField, PanelSet, TradingCalendar};
    use std::collections::BTreeMap;

    /// Panel with explicit columns for a handful of fields.
    pub(crate) fn panel_from(fields: &[(&str, Vec<Vec<f64>>)]) -> PanelSet {
        let n_dates = fields[0].1.len();
        let dates: Vec<crate::panel::Date> = (0..n_dates)
            .map(|i| {
                "2020-01-01"
                    .parse::<crate::panel::Date>()
                    .unwrap()
                    .add_days(i as i32)
            })
            .collect();
        let n_syms = fields[0].1[0].len();
        let mut map = BTreeMap::new();
        for (name, rows) in fields {
            map.insert(
                name.to_string(),
                PanelField {
                    name: name.to_string(),
                    values: Matrix::from_rows(rows),
                },
            );
        }
        PanelSet::new(
            TradingCalendar::new(dates),
            (0..n_syms).map(|i| format!("s{i}")).collect(),
            map,
            None,
        )
    }

    fn eval_str(expr: &str, panel: &PanelSet) -> Matrix {
        evaluate(&parse(expr).unwrap(), panel).unwrap().values
    }

    #[test]
    fn ts_mean_fixture() {
        let p = panel_from(&[("x", vec![vec![1.0], vec![2.0], vec![3.0]])]);
        let m = eval_str("ts_mean(x, 2)", &p);
        assert!(is_missing(m.get(0, 0)));
        assert_eq!(m.get(1, 0), 1.5);
        assert_eq!(m.get(2, 0), 2.5);
    }

    #[test]
    fn rank_fixture() {
        let p = panel_from(&[("x", vec![vec![3.0, 1.0, 2.0]])]);
        let m = eval_str("rank(x)", &p);
        assert_eq!(m.row(0), vec![1.0, 0.0, 0.5]);
    }

    #[test]
    fn ts_arg_max_days_since_peak() {
        let p = panel_from(&[("x", vec![vec![1.0], vec![5.0], vec![2.0]])]);
        let m = eval_str("ts_arg_max(x, 3)", &p);
        assert_eq!(m.get(2, 0), 1.0);
    }

    #[test]
    fn ts_corr_of_series_with_itself() {
        let p = panel_from(&[(
            "x",
            vec![vec![1.0], vec![2.0], vec![4.0], vec![3.0], vec![5.0]],
        )]);
        let m = eval_str("ts_corr(x, x, 3)", &p);
        for t in 2..5 {
            assert!((m.get(t, 0) - 1.0).abs() < 1e-12, "t={t}");
        }
        // constant window: degenerate std -> missing
        let p = panel_from(&[("x", vec![vec![2.0], vec![2.0], vec![2.0]])]);
        let m = eval_str("ts_corr(x, x, 3)", &p);
        assert!(is_missing(m.get(2, 0)));
    }

    #[test]
    fn group_mean_fixture() {
        let p = {
            let base = panel_from(&[("x", vec![vec![1.0, 3.0, 5.0]])]);
            let groups: BTreeMap<String, String> = [
                ("s0".to_string(), "a".to_string()),
                ("s1".to_string(), "a".to_string()),
                ("s2".to_string(), "b".to_string()),
            ]
            .into();
            base.with_groups(groups)
        };
        let m = eval_str("group_mean(x)", &p);
        assert_eq!(m.row(0), vec![2.0, 2.0, 5.0]);
    }

    #[test]
    fn exact_linear_regression_fit() {
        // y = 2x on the window: fitted value equals y, residual zero
        let x_rows: Vec<Vec<f64>> = (1..=6).map(|v| vec![v as f64]).collect();
        let y_rows: Vec<Vec<f64>> = (1..=6).map(|v| vec![2.0 * v as f64]).collect();
        let p = panel_from(&[("x", x_rows), ("y", y_rows)]);
        let fit = eval_str("ts_regression(y, x, 4)", &p);
        let res = eval_str("ts_regression_res(y, x, 4)", &p);
        for t in 3..6 {
            let y_t = 2.0 * (t as f64 + 1.0);
            assert!((fit.get(t, 0) - y_t).abs() < 1e-9);
            assert!(res.get(t, 0).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_propagates_through_windows() {
        let p = panel_from(&[(
            "x",
            vec![vec![1.0], vec![MISSING], vec![3.0], vec![4.0], vec![5.0]],
        )]);
        let m = eval_str("ts_sum(x, 2)", &p);
        assert!(is_missing(m.get(0, 0)));
        assert!(is_missing(m.get(1, 0)));
        assert!(is_missing(m.get(2, 0)));
        assert_eq!(m.get(3, 0), 7.0);
        assert_eq!(m.get(4, 0), 9.0);
    }

    #[test]
    fn delta_plus_delay_recovers_series() {
        let p = panel_from(&[(
            "x",
            vec![vec![2.0], vec![4.0], vec![7.0], vec![11.0]],
        )]);
        let delta = eval_str("ts_delta(x, 2)", &p);
        let delay = eval_str("ts_delay(x, 2)", &p);
        for t in 2..4 {
            let sum = delta.get(t, 0) + delay.get(t, 0);
            assert_eq!(sum, p.get_field("x").unwrap().values.get(t, 0));
        }
    }

    #[test]
    fn division_by_zero_is_missing() {
        let p = panel_from(&[
            ("x", vec![vec![1.0]]),
            ("z", vec![vec![0.0]]),
        ]);
        assert!(is_missing(eval_str("x / z", &p).get(0, 0)));
        assert!(is_missing(eval_str("inverse(z)", &p).get(0, 0)));
        assert!(is_missing(eval_str("log(z)", &p).get(0, 0)));
    }

    #[test]
    fn quantile_buckets() {
        let p = panel_from(&[("x", vec![vec![1.0, 2.0, 3.0, 4.0]])]);
        let m = eval_str("quantile(x, 2)", &p);
        assert_eq!(m.row(0), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn if_else_selects_per_cell() {
        let p = panel_from(&[
            ("x", vec![vec![1.0, 5.0]]),
            ("y", vec![vec![3.0, 3.0]]),
        ]);
        let m = eval_str("if_else(greater(x, y), x, y)", &p);
        assert_eq!(m.row(0), vec![3.0, 5.0]);
        let lit = eval_str("if_else(greater(x, y), 1, 0)", &p);
        assert_eq!(lit.row(0), vec![0.0, 1.0]);
    }

    #[test]
    fn rank_invariant_under_monotone_transform() {
        let p = panel_from(&[("x", vec![vec![0.3, -1.2, 2.0, 0.9]])]);
        let a = eval_str("rank(x)", &p);
        // exp is strictly increasing; ranks must match cell-for-cell
        let pe = panel_from(&[(
            "x",
            vec![vec![0.3f64.exp(), (-1.2f64).exp(), 2.0f64.exp(), 0.9f64.exp()]],
        )]);
        let b = eval_str("rank(x)", &pe);
        assert!(a.approx_eq(&b, 1e-12));
    }
}
