//! Evaluate data-quality metrics per field and print the recommended
//! lookback windows each field should be searched with.

use alphamill::panel::{generate_synthetic, SyntheticConfig};
use alphamill::quality::{evaluate_field, recommend_windows, QualityConfig};

fn main() {
    let panel = generate_synthetic(&SyntheticConfig {
        seed: 3,
        n_symbols: 15,
        n_days: 400,
        signal_strength: 0.2,
        noise_vol: 0.02,
    })
    .expect("valid config");

    let cfg = QualityConfig {
        outlier_threshold: Some(1000.0),
        expected_median: None,
    };

    println!(
        "{:<10} {:>9} {:>10} {:>9} {:>8} {:>8}  windows",
        "field", "coverage", "frequency", "dup", "skew", "kurtosis"
    );
    for name in panel.field_names() {
        let field = panel.get_field(&name).unwrap();
        let report = evaluate_field(field, &cfg).expect("field has observations");
        let windows = recommend_windows(&report);
        let p = &report.pooled;
        println!(
            "{:<10} {:>9.4} {:>10.4} {:>9.4} {:>8.3} {:>8.3}  {:?}",
            name,
            p.coverage_ratio,
            p.frequency_ratio,
            p.duplicate_ratio,
            p.skewness.unwrap_or(f64::NAN),
            p.kurtosis.unwrap_or(f64::NAN),
            windows
        );
    }
}
