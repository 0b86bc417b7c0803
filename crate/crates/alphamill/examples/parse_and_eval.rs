//! Parse an alpha expression, validate it against the panel schema,
//! evaluate it into a signal matrix, and export the signal as CSV.
//!
//! Pass an expression as the first argument to try your own:
//!
//! ```bash
//! cargo run --example parse_and_eval -- "zscore(ts_delta(close, 5))"
//! ```

use alphamill::eval::{evaluate, reference_evaluate};
use alphamill::lang::{canonicalize, parse, print, validate, PanelSchema};
use alphamill::panel::{generate_synthetic, SyntheticConfig};

fn main() {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "rank(ts_corr(close, volume, 10))".to_string());

    let panel = generate_synthetic(&SyntheticConfig {
        seed: 1,
        n_symbols: 8,
        n_days: 60,
        signal_strength: 0.3,
        noise_vol: 0.02,
    })
    .expect("valid config");

    let expr = match parse(&text) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("parse error: {e}");
            std::process::exit(1);
        }
    };
    println!("parsed:    {}", print(&expr));
    println!("canonical: {}", print(&canonicalize(&expr)));

    let schema = PanelSchema::from_panel(&panel);
    let diags = validate(&expr, &schema);
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("diagnostic: {d}");
        }
        std::process::exit(1);
    }

    let signal = evaluate(&expr, &panel).expect("validated expression");
    let reference = reference_evaluate(&expr, &panel).expect("validated expression");
    let diff = signal.values.max_abs_diff(&reference.values);
    println!("fast vs reference evaluator: max |diff| = {diff:?}");

    // last date's cross-section
    let t = panel.n_dates() - 1;
    println!("signal on {}:", panel.calendar().date(t));
    for (i, sym) in panel.symbols().iter().enumerate() {
        let v = signal.values.get(t, i);
        if alphamill::matrix::is_missing(v) {
            println!("  {sym}: (missing)");
        } else {
            println!("  {sym}: {v:.4}");
        }
    }

    let out = std::env::temp_dir().join("alphamill_signal.csv");
    let mut buf = Vec::new();
    signal.export_long_csv(&panel, &mut buf).unwrap();
    std::fs::write(&out, buf).unwrap();
    println!("wrote {}", out.display());
}
