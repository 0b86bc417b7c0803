//! Allocate capital across alpha books with every weighting scheme, the
//! risk baselines, and the stochastic mean-variance climb, then compare
//! in-sample and out-of-sample Sharpe per rule.

use alphamill::allocation::{
    baseline_allocate, combine_books, compute_alpha_stats, mvo_hill_climb, scheme_weight,
    BaselineMethod, MvoConstraints, MvoInputs, ALL_SCHEMES,
};
use alphamill::backtest::{run_backtest_frame, PnlSeries, PositionMatrix};
use alphamill::panel::{generate_synthetic, SyntheticConfig};
use alphamill::search::{default_split, hill_climb, rescore_expression, SearchConfig};

fn main() {
    let panel = generate_synthetic(&SyntheticConfig {
        seed: 4,
        n_symbols: 20,
        n_days: 500,
        signal_strength: 0.3,
        noise_vol: 0.02,
    })
    .expect("valid config");
    let split = default_split(&panel).expect("enough dates");

    let cfg = SearchConfig {
        seed: 8,
        n_restarts: 6,
        steps_per_restart: 100,
        patience: 40,
        eval_budget: 600,
        sharpe_threshold: 1.0,
        ..SearchConfig::default()
    };
    let archive = hill_climb(&cfg, &panel, &split).expect("has returns").archive;
    let n_books = archive.len().min(12);
    assert!(n_books >= 2, "archive too small for allocation");

    // rebuild books and in-sample statistics from the archived expressions
    let in_sample = split.in_sample();
    let mut books: Vec<PositionMatrix> = Vec::new();
    let mut pnls_in: Vec<PnlSeries> = Vec::new();
    for entry in archive.entries().iter().take(n_books) {
        let (_, pnl, positions) =
            rescore_expression(&entry.expr, &panel, &split, 0.0).expect("archived expr");
        pnls_in.push(PnlSeries::from_daily(
            pnl.train
                .daily_pnl
                .iter()
                .chain(&pnl.validation.daily_pnl)
                .copied()
                .collect(),
        ));
        books.push(positions);
    }
    let books_in: Vec<PositionMatrix> = books
        .iter()
        .map(|b| PositionMatrix {
            weights: b.weights.slice_dates(in_sample.clone()),
        })
        .collect();
    let returns_in = panel
        .get_field("returns")
        .unwrap()
        .values
        .slice_dates(in_sample.clone());
    let stats = compute_alpha_stats(&pnls_in, &books_in, &returns_in).expect("aligned");
    let inputs = MvoInputs::from_pnls(&pnls_in).expect("aligned");

    println!("{:<20} {:>10} {:>10}", "rule", "in_sharpe", "oos_sharpe");
    let show = |name: &str, weights: &alphamill::allocation::PortfolioWeights| {
        let combined = combine_books(weights, &books).expect("aligned books");
        let frame = run_backtest_frame(&combined, &panel, 0.0).expect("has returns");
        println!(
            "{:<20} {:>10.3} {:>10.3}",
            name,
            frame.report(in_sample.clone()).sharpe,
            frame.report(split.test.clone()).sharpe
        );
    };
    for scheme in ALL_SCHEMES {
        show(scheme.name(), &scheme_weight(scheme, &stats));
    }
    for (name, method) in [
        ("equal", BaselineMethod::Equal),
        ("inverse_volatility", BaselineMethod::InverseVolatility),
        ("risk_parity", BaselineMethod::RiskParity),
    ] {
        show(name, &baseline_allocate(method, &inputs).expect("pd inputs"));
    }
    let mvo = mvo_hill_climb(123, &inputs, &MvoConstraints::default()).expect("feasible");
    show("mvo", &mvo);
}
