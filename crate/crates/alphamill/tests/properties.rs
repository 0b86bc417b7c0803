//! Property tests over the numeric core: position-rule invariants,
//! simplex feasibility, evaluator identities, and the acceptance rule.

use alphamill::allocation::project_to_simplex;
use alphamill::backtest::{metrics_from_daily, signal_to_weights};
use alphamill::eval::{evaluate, SignalMatrix};
use alphamill::lang::parse;
use alphamill::matrix::{is_missing, Matrix, MISSING};
use alphamill::panel::{PanelField, PanelSet, TradingCalendar};
use alphamill::search::accept;
use proptest::prelude::*;

fn signal_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    // up to 8 dates x 6 symbols with ~15% missing cells
    prop::collection::vec(
        prop::collection::vec(
            prop_oneof![
                8 => (-1e3f64..1e3).prop_map(|v| v),
                2 => Just(MISSING),
            ],
            6,
        ),
        1..8,
    )
}

fn single_field_panel(name: &str, rows: &[Vec<f64>]) -> PanelSet {
    let dates: Vec<alphamill::panel::Date> = (0..rows.len())
        .map(|i| {
            alphamill::panel::Date::from_ymd(2021, 6, 1)
                .unwrap()
                .add_days(i as i32)
        })
        .collect();
    let mut fields = std::collections::BTreeMap::new();
    fields.insert(
        name.to_string(),
        PanelField {
            name: name.to_string(),
            values: Matrix::from_rows(rows),
        },
    );
    PanelSet::new(
        TradingCalendar::new(dates),
        (0..rows[0].len()).map(|i| format!("s{i}")).collect(),
        fields,
        None,
    )
}

proptest! {
    /// Position rule output is always dollar-neutral with unit (or zero)
    /// gross exposure, regardless of signal content.
    #[test]
    fn positions_stay_on_neutral_unit_gross(rows in signal_rows()) {
        let signal = SignalMatrix { values: Matrix::from_rows(&rows) };
        let pos = signal_to_weights(&signal);
        for t in 0..rows.len() {
            let row = pos.weights.row(t);
            let sum: f64 = row.iter().sum();
            let gross: f64 = row.iter().map(|w| w.abs()).sum();
            prop_assert!(sum.abs() < 1e-9, "sum {}", sum);
            prop_assert!(gross.abs() < 1e-9 || (gross - 1.0).abs() < 1e-9, "gross {}", gross);
        }
    }

    /// Positive scaling never changes rank-based positions.
    #[test]
    fn positions_scale_invariant(rows in signal_rows(), k in 1e-6f64..1e6) {
        let signal = SignalMatrix { values: Matrix::from_rows(&rows) };
        let scaled_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v * k).collect())
            .collect();
        let scaled = SignalMatrix { values: Matrix::from_rows(&scaled_rows) };
        prop_assert_eq!(signal_to_weights(&signal), signal_to_weights(&scaled));
    }

    /// Euclidean simplex projection always lands on the simplex.
    #[test]
    fn simplex_projection_feasible(mut v in prop::collection::vec(-10.0f64..10.0, 1..12)) {
        project_to_simplex(&mut v);
        let sum: f64 = v.iter().sum();
        prop_assert!(v.iter().all(|w| *w >= 0.0));
        prop_assert!((sum - 1.0).abs() < 1e-9, "sum {}", sum);
    }

    /// Rank output is invariant under strictly increasing transforms.
    #[test]
    fn rank_monotone_invariant(rows in prop::collection::vec(
        prop::collection::vec(-5.0f64..5.0, 5), 1..6)) {
        let expr = parse("rank(x)").unwrap();
        let a = evaluate(&expr, &single_field_panel("x", &rows)).unwrap();
        let transformed: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v.exp()).collect())
            .collect();
        let b = evaluate(&expr, &single_field_panel("x", &transformed)).unwrap();
        prop_assert!(a.values.approx_eq(&b.values, 1e-12));
    }

    /// ts_delta(x, w) + ts_delay(x, w) = x wherever both are defined.
    #[test]
    fn delta_plus_delay_identity(
        col in prop::collection::vec(-100.0f64..100.0, 6..20),
        w in 2usize..5,
    ) {
        let rows: Vec<Vec<f64>> = col.iter().map(|v| vec![*v]).collect();
        let panel = single_field_panel("x", &rows);
        let delta = evaluate(&parse(&format!("ts_delta(x, {w})")).unwrap(), &panel).unwrap();
        let delay = evaluate(&parse(&format!("ts_delay(x, {w})")).unwrap(), &panel).unwrap();
        for t in 0..col.len() {
            let (d1, d2) = (delta.values.get(t, 0), delay.values.get(t, 0));
            if !is_missing(d1) && !is_missing(d2) {
                prop_assert!((d1 + d2 - col[t]).abs() < 1e-9);
            }
        }
    }

    /// Acceptance is asymmetric: a candidate and its reflection can never
    /// both be accepted.
    #[test]
    fn accept_is_asymmetric(
        a in -5.0f64..5.0, b in -5.0f64..5.0,
        ta in 0.0f64..2.0, tb in 0.0f64..2.0,
    ) {
        prop_assert!(!(accept(a, b, ta, tb) && accept(b, a, tb, ta)));
    }

    /// Bounded operators stay in their documented ranges.
    #[test]
    fn bounded_operator_ranges(rows in prop::collection::vec(
        prop::collection::vec(-50.0f64..50.0, 4), 8..16)) {
        let panel = single_field_panel("x", &rows);
        for (text, lo, hi) in [
            ("rank(x)", 0.0, 1.0),
            ("ts_rank(x, 4)", 0.0, 1.0),
            ("ts_corr(x, ts_delay(x, 2), 3)", -1.0, 1.0),
            ("ta_rsi(x, 3)", 0.0, 100.0),
        ] {
            let out = evaluate(&parse(text).unwrap(), &panel).unwrap();
            for t in 0..rows.len() {
                for i in 0..rows[0].len() {
                    let v = out.values.get(t, i);
                    if !is_missing(v) {
                        prop_assert!((lo..=hi).contains(&v), "{} out of range: {}", text, v);
                    }
                }
            }
        }
    }

    /// Cross-sectional operators are permutation-equivariant in symbols.
    #[test]
    fn cross_sectional_permutation_equivariance(rows in prop::collection::vec(
        prop::collection::vec(-10.0f64..10.0, 5), 2..6)) {
        // reversal permutation of the symbol axis
        let reversed: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().rev().copied().collect())
            .collect();
        for text in ["rank(x)", "zscore(x)", "demean(x)", "normalize(x)"] {
            let expr = parse(text).unwrap();
            let a = evaluate(&expr, &single_field_panel("x", &rows)).unwrap();
            let b = evaluate(&expr, &single_field_panel("x", &reversed)).unwrap();
            for t in 0..rows.len() {
                let mut a_row = a.values.row(t);
                let b_row = b.values.row(t);
                a_row.reverse();
                for (x, y) in a_row.iter().zip(&b_row) {
                    match (is_missing(*x), is_missing(*y)) {
                        (true, true) => {}
                        (false, false) => prop_assert!((x - y).abs() < 1e-12),
                        _ => prop_assert!(false, "mask not equivariant for {}", text),
                    }
                }
            }
        }
    }

    /// Sharpe sign follows the mean; margin averages gross exposure.
    #[test]
    fn metrics_basic_consistency(daily in prop::collection::vec(-0.05f64..0.05, 2..60)) {
        let n = daily.len();
        let report = metrics_from_daily(&daily, &vec![0.1; n], &vec![1.0; n]);
        let mean = daily.iter().sum::<f64>() / n as f64;
        if report.sharpe != 0.0 {
            prop_assert_eq!(report.sharpe > 0.0, mean > 0.0);
        }
        prop_assert!((report.margin - 1.0).abs() < 1e-12);
        prop_assert!((report.turnover - 0.1).abs() < 1e-12);
        prop_assert!(report.max_drawdown >= 0.0);
    }
}
