//! Build an archive, then run the randomized ensemble composition study:
//! each trial draws 10-20 alphas, a model stack, and a combiner, and is
//! ranked by validation Sharpe. The top decile gets test-range metrics.

use alphamill::ensemble::random_composition_study;
use alphamill::panel::{generate_synthetic, SyntheticConfig};
use alphamill::search::{default_split, hill_climb, SearchConfig};

fn main() {
    let panel = generate_synthetic(&SyntheticConfig {
        seed: 9,
        n_symbols: 20,
        n_days: 500,
        signal_strength: 0.3,
        noise_vol: 0.02,
    })
    .expect("valid config");
    let split = default_split(&panel).expect("enough dates");

    let cfg = SearchConfig {
        seed: 2,
        n_restarts: 6,
        steps_per_restart: 120,
        patience: 40,
        eval_budget: 720,
        sharpe_threshold: 1.0,
        ..SearchConfig::default()
    };
    let archive = hill_climb(&cfg, &panel, &split)
        .expect("panel has returns")
        .archive;
    println!("archive: {} alphas", archive.len());

    let rows = random_composition_study(77, &archive, &panel, &split, 25, 1, 0.0)
        .expect("archive large enough");

    println!(
        "{:>4} {:>6} {:>7} {:>9} {:<14} members",
        "rank", "val", "test", "n_alphas", "combiner"
    );
    for row in rows.iter().take(10) {
        let combiner = match &row.spec.combiner {
            alphamill::ensemble::Combiner::WeightedVote { .. } => "weighted_vote",
            alphamill::ensemble::Combiner::Stacking => "stacking",
            alphamill::ensemble::Combiner::Bagging { .. } => "bagging",
        };
        let families: Vec<&str> = row.spec.members.iter().map(|m| m.family_name()).collect();
        println!(
            "{:>4} {:>6.2} {:>7} {:>9} {:<14} {}",
            row.rank,
            row.validation.sharpe,
            row.test
                .as_ref()
                .map(|t| format!("{:.2}", t.sharpe))
                .unwrap_or_else(|| "-".into()),
            row.spec.alpha_ids.len(),
            combiner,
            families.join("+")
        );
    }
}
