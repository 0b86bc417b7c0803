//! Backtest one alpha end to end: evaluate, form dollar-neutral rank
//! positions, simulate daily PnL, and report per-split metrics.

use alphamill::backtest::{run_backtest_frame, signal_to_weights, split_sample};
use alphamill::eval::evaluate;
use alphamill::lang::parse;
use alphamill::panel::{generate_synthetic, SyntheticConfig};

fn main() {
    let panel = generate_synthetic(&SyntheticConfig {
        seed: 11,
        n_symbols: 30,
        n_days: 750,
        signal_strength: 0.25,
        noise_vol: 0.02,
    })
    .expect("valid config");
    let split = split_sample(panel.calendar(), (0.6, 0.2, 0.2)).expect("enough dates");

    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "rank(sig)".to_string());
    let expr = parse(&text).expect("well-formed expression");

    let signal = evaluate(&expr, &panel).expect("valid expression");
    let weights = signal_to_weights(&signal);
    let frame = run_backtest_frame(&weights, &panel, 0.0).expect("panel has returns");

    println!("alpha: {text}");
    println!(
        "{:<12} {:>8} {:>9} {:>10} {:>9} {:>7}",
        "range", "sharpe", "cagr", "drawdown", "turnover", "days"
    );
    for (name, range) in [
        ("train", split.train.clone()),
        ("validation", split.validation.clone()),
        ("test", split.test.clone()),
    ] {
        let r = frame.report(range);
        println!(
            "{:<12} {:>8.3} {:>9.4} {:>10.4} {:>9.4} {:>7}",
            name, r.sharpe, r.annual_return, r.max_drawdown, r.turnover, r.n_days
        );
    }

    let out = std::env::temp_dir().join("alphamill_pnl.csv");
    let mut buf = Vec::new();
    frame
        .pnl
        .export_csv(panel.calendar(), 0..panel.n_dates(), &mut buf)
        .unwrap();
    std::fs::write(&out, buf).unwrap();
    println!("wrote {}", out.display());
}
