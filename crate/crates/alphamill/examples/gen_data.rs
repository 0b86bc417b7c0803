//! Generate a synthetic panel with a planted signal and write it as a
//! long-format CSV next to the target directory.

use alphamill::panel::{generate_synthetic, SyntheticConfig};

fn main() {
    let cfg = SyntheticConfig {
        seed: 7,
        n_symbols: 20,
        n_days: 500,
        signal_strength: 0.3,
        noise_vol: 0.02,
    };
    let panel = generate_synthetic(&cfg).expect("valid config");
    println!(
        "panel: {} dates x {} symbols, fields {:?}",
        panel.n_dates(),
        panel.n_symbols(),
        panel.field_names()
    );

    let out = std::env::temp_dir().join("alphamill_panel.csv");
    let mut text = String::from("date,symbol,field,value\n");
    for name in panel.field_names() {
        let field = panel.get_field(&name).unwrap();
        for t in 0..panel.n_dates() {
            for i in 0..panel.n_symbols() {
                let v = field.values.get(t, i);
                if !alphamill::matrix::is_missing(v) {
                    text.push_str(&format!(
                        "{},{},{},{}\n",
                        panel.calendar().date(t),
                        panel.symbols()[i],
                        name,
                        v
                    ));
                }
            }
        }
    }
    std::fs::write(&out, text).expect("writable temp dir");
    println!("wrote {}", out.display());
    println!("re-ingest with: alphamill quality --config <cfg with csv source>");
}
