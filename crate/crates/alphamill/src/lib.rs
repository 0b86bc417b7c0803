//! alphamill: evolutionary alpha research over daily equity panels.
//!
//! The library covers the full research loop:
//!
//! - [`panel`] — load or synthesize aligned date × symbol data;
//! - [`quality`] — field statistics and lookback-window recommendations;
//! - [`lang`] — the alpha expression language (parse, print, validate,
//!   canonicalize, random construction and mutation);
//! - [`eval`] — vectorized expression evaluation plus an independent
//!   brute-force reference evaluator;
//! - [`backtest`] — rank-based dollar-neutral positions and daily PnL
//!   simulation without lookahead;
//! - [`search`] — randomized hill climbing with restarts over expression
//!   space, archiving every alpha that clears the Sharpe threshold;
//! - [`ensemble`] — classical models (OLS, ridge, logistic, kNN, trees,
//!   GBT) over archived signals, combined by weighted vote, stacking, or
//!   bagging, with a randomized composition study;
//! - [`allocation`] — per-alpha statistics, eleven weighting schemes,
//!   risk-based baselines, and stochastic mean-variance optimization;
//! - [`pipeline`] — file-based stages behind the `alphamill` binary.
//!
//! Everything stochastic is seeded: one global seed fans out through
//! documented streams ([`config::seed_stream`]), so runs reproduce
//! byte-for-byte at any thread count.
//!
//! ## Examples
//!
//! One runnable example per major capability:
//!
//! ```bash
//! cargo run --release --example gen_data          # synthetic panel -> CSV
//! cargo run --release --example quality_report    # field metrics + windows
//! cargo run --release --example parse_and_eval    # expression -> signal
//! cargo run --release --example backtest_alpha    # one alpha, full report
//! cargo run --release --example search_alphas     # hill-climb an archive
//! cargo run --release --example ensemble_study    # randomized compositions
//! cargo run --release --example allocate_schemes  # weighting-scheme table
//! cargo run --release --example full_pipeline     # everything end to end
//! ```
//!
//! The `alphamill` binary wires the same stages to a JSON config:
//!
//! ```bash
//! alphamill run-all --config run.json --seed 7 --out results/
//! ```

pub mod allocation;
pub mod backtest;
pub mod config;
pub mod ensemble;
pub mod eval;
pub mod lang;
pub mod linalg;
pub mod matrix;
pub mod panel;
pub mod pipeline;
pub mod quality;
pub mod rng;
pub mod search;
