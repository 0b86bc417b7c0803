//! The public ensemble operations driven end to end against a real
//! archive: dataset assembly, model fit/predict over a date range, and
//! signal combination.

use alphamill::ensemble::{build_dataset, combine, fit_predict, Combiner, ModelSpec};
use alphamill::matrix::is_missing;
use alphamill::panel::{generate_synthetic, SyntheticConfig};
use alphamill::search::{default_split, hill_climb, SearchConfig};

fn fixture() -> (
    alphamill::search::AlphaArchive,
    alphamill::panel::PanelSet,
    alphamill::backtest::SampleSplit,
) {
    let panel = generate_synthetic(&SyntheticConfig {
        seed: 33,
        n_symbols: 12,
        n_days: 200,
        signal_strength: 0.5,
        noise_vol: 0.02,
    })
    .unwrap();
    let split = default_split(&panel).unwrap();
    let cfg = SearchConfig {
        seed: 6,
        n_restarts: 4,
        steps_per_restart: 60,
        patience: 30,
        eval_budget: 240,
        sharpe_threshold: 0.5,
        ..SearchConfig::default()
    };
    let archive = hill_climb(&cfg, &panel, &split).unwrap().archive;
    assert!(archive.len() >= 4, "fixture archive too small");
    (archive, panel, split)
}

#[test]
fn dataset_fit_predict_combine_pipeline() {
    let (archive, panel, split) = fixture();
    let ids: Vec<usize> = (0..4).collect();

    let train = build_dataset(&archive, &ids, &panel, split.train.clone(), 1).unwrap();
    assert!(train.n_rows() > 0);
    assert_eq!(train.features.n_feats(), ids.len());
    // every row's date stays inside the horizon-trimmed training range
    for &(t, _) in &train.rows {
        assert!(t + 1 < split.train.end);
    }

    // members predict over train + validation so stacking can read its
    // design matrix from the signals
    let score_range = split.train.start..split.validation.end;
    let (ols_sig, ols_info) =
        fit_predict(&ModelSpec::Ols, &train, score_range.clone(), &panel).unwrap();
    assert!(!ols_info.ridge_fallback);
    let (knn_sig, _) = fit_predict(
        &ModelSpec::Knn { k: 15 },
        &train,
        score_range.clone(),
        &panel,
    )
    .unwrap();

    // predictions appear only inside the score range
    for t in split.validation.end..panel.n_dates() {
        for i in 0..panel.n_symbols() {
            assert!(is_missing(ols_sig.values.get(t, i)));
        }
    }
    let predicted = ols_sig
        .values
        .count_present();
    assert!(predicted > 0, "no cells predicted");

    // weighted vote with a degenerate weight vector is the member itself
    let members = [ols_sig, knn_sig];
    let vote = combine(
        &members,
        &Combiner::WeightedVote {
            weights: vec![1.0, 0.0],
        },
        &train,
    )
    .unwrap();
    assert_eq!(vote.values, members[0].values);

    // stacking dominates both members on the training rows it fit
    let stacked = combine(&members, &Combiner::Stacking, &train).unwrap();
    let train_mse = |sig: &alphamill::eval::SignalMatrix| {
        let mut sse = 0.0;
        let mut n = 0usize;
        for (row_idx, &(t, i)) in train.rows.iter().enumerate() {
            let v = sig.values.get(t, i);
            let m0 = members[0].values.get(t, i);
            let m1 = members[1].values.get(t, i);
            if is_missing(v) || is_missing(m0) || is_missing(m1) {
                continue;
            }
            sse += (v - train.targets[row_idx]).powi(2);
            n += 1;
        }
        sse / n as f64
    };
    let stacked_mse = train_mse(&stacked);
    for member in &members {
        assert!(
            stacked_mse <= train_mse(member) + 1e-9,
            "stacking lost to a member: {stacked_mse} vs {}",
            train_mse(member)
        );
    }

    // bagging over identical member signals is the mean (here: identity)
    let bagged = combine(
        &[members[0].clone(), members[0].clone()],
        &Combiner::Bagging {
            n_bags: 2,
            bootstrap: false,
        },
        &train,
    )
    .unwrap();
    assert!(bagged.values.approx_eq(&members[0].values, 1e-12));
}

#[test]
fn logistic_fit_predict_emits_probabilities() {
    let (archive, panel, split) = fixture();
    let ids: Vec<usize> = (0..3).collect();
    let train = build_dataset(&archive, &ids, &panel, split.train.clone(), 1).unwrap();
    let (sig, _) = fit_predict(
        &ModelSpec::Logistic,
        &train,
        split.validation.clone(),
        &panel,
    )
    .unwrap();
    let mut seen = 0usize;
    for t in split.validation.clone() {
        for i in 0..panel.n_symbols() {
            let v = sig.values.get(t, i);
            if !is_missing(v) {
                assert!((0.0..=1.0).contains(&v), "probability out of range: {v}");
                seen += 1;
            }
        }
    }
    assert!(seen > 0);
}
