//! Hill-climb the expression space on a planted-signal panel and print
//! the best archived alphas.

use alphamill::panel::{generate_synthetic, SyntheticConfig};
use alphamill::search::{default_split, hill_climb, SearchConfig};

fn main() {
    let panel = generate_synthetic(&SyntheticConfig {
        seed: 5,
        n_symbols: 20,
        n_days: 500,
        signal_strength: 0.3,
        noise_vol: 0.02,
    })
    .expect("valid config");
    let split = default_split(&panel).expect("enough dates");

    let cfg = SearchConfig {
        seed: 42,
        n_restarts: 6,
        steps_per_restart: 100,
        patience: 30,
        eval_budget: 600,
        sharpe_threshold: 1.5,
        ..SearchConfig::default()
    };
    let result = hill_climb(&cfg, &panel, &split).expect("panel has returns");

    println!(
        "evaluated {} expressions, archived {} above Sharpe {}",
        result.stats.n_evaluated,
        result.stats.n_archived,
        cfg.sharpe_threshold
    );
    println!(
        "{:<55} {:>8} {:>8} {:>8}",
        "expression", "val", "test", "turnover"
    );
    for entry in result.archive.entries().iter().take(8) {
        println!(
            "{:<55} {:>8.2} {:>8.2} {:>8.3}",
            entry.expr,
            entry.reports.validation.sharpe,
            entry.reports.test.sharpe,
            entry.reports.validation.turnover
        );
    }
}
