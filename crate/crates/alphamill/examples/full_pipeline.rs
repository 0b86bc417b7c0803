//! The whole pipeline through the same code path as the CLI: quality
//! reports, alpha search, ensemble study, and scheme comparison, all into
//! one output directory.

use alphamill::config::RunConfig;
use alphamill::pipeline::cmd_run_all;

fn main() {
    let out = std::env::temp_dir().join("alphamill_demo");
    let mut cfg: RunConfig = serde_json::from_str(
        r#"{
        "data": {"kind": "synthetic", "n_symbols": 20, "n_days": 400,
                 "signal_strength": 0.35, "noise_vol": 0.02},
        "search": {"n_restarts": 6, "steps_per_restart": 100, "patience": 40,
                   "eval_budget": 600, "sharpe_threshold": 1.0},
        "ensemble": {"horizon": 1, "budget": 10, "n_trials": 25},
        "allocation": {"max_books": 12},
        "seed": 7
    }"#,
    )
    .expect("valid config");
    cfg.output_dir = out.clone();
    cfg.validate().expect("valid config");

    cmd_run_all(&cfg).expect("pipeline completes");

    println!("\noutputs under {}:", out.display());
    for entry in walk(&out) {
        println!("  {}", entry.strip_prefix(&out).unwrap().display());
    }
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                files.extend(walk(&path));
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    files
}
