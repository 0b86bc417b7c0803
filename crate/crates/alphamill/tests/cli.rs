//! CLI behavior: exit codes, fail-fast config validation, and output-file
//! determinism through the installed binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_alphamill")
}

fn sandbox(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("alphamill_cli_{}_{tag}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn synthetic_config() -> &'static str {
    r#"{
        "data": {"kind": "synthetic", "n_symbols": 10, "n_days": 140,
                 "signal_strength": 0.5, "noise_vol": 0.02},
        "search": {"n_restarts": 4, "steps_per_restart": 40, "patience": 20,
                   "eval_budget": 160, "sharpe_threshold": 1.0},
        "seed": 3
    }"#
}

fn run(args: &[&str]) -> (i32, String, String) {
    let output = Command::new(bin()).args(args).output().expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).to_string(),
        String::from_utf8_lossy(&output.stderr).to_string(),
    )
}

#[test]
fn missing_config_flag_is_config_error() {
    let (code, _, err) = run(&["quality"]);
    assert_eq!(code, 2, "stderr: {err}");
    assert!(err.contains("--config"));
}

#[test]
fn unknown_config_key_is_config_error() {
    let dir = sandbox("unknown_key");
    let cfg = write_config(
        &dir,
        r#"{"data": {"kind": "synthetic", "n_symbols": 10, "n_days": 140,
                     "signal_strength": 0.5, "noise_vol": 0.02},
            "mystery_knob": true}"#,
    );
    let (code, _, err) = run(&["quality", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2, "stderr: {err}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_data_file_exits_3_and_names_path() {
    let dir = sandbox("missing_data");
    let cfg = write_config(
        &dir,
        r#"{"data": {"kind": "csv", "path": "/no/such/panel.csv", "layout": "long"}}"#,
    );
    let (code, _, err) = run(&["quality", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 3, "stderr: {err}");
    assert!(err.contains("/no/such/panel.csv"), "stderr: {err}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn quality_on_crafted_csv_reports_coverage() {
    let dir = sandbox("quality_fixture");
    // field `px`: AAA observed 8 of 10 days; BBB pins the full calendar
    let mut csv = String::from("date,symbol,field,value\n");
    for day in 1..=10 {
        csv.push_str(&format!("2021-01-{day:02},BBB,px,{}\n", day as f64 * 2.0));
        if day == 3 || day == 7 {
            continue;
        }
        csv.push_str(&format!("2021-01-{day:02},AAA,px,{}\n", day as f64));
    }
    let data_path = dir.join("panel.csv");
    fs::write(&data_path, csv).unwrap();
    let cfg = write_config(
        &dir,
        &format!(
            r#"{{"data": {{"kind": "csv", "path": "{}", "layout": "long"}},
                "output_dir": "{}"}}"#,
            data_path.display(),
            dir.join("out").display()
        ),
    );
    let (code, out, err) = run(&["quality", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "stdout: {out} stderr: {err}");
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.join("out/quality/px.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["per_symbol"][0]["symbol"], "AAA");
    let coverage = report["per_symbol"][0]["coverage_ratio"].as_f64().unwrap();
    assert!((coverage - 0.8).abs() < 1e-12, "coverage {coverage}");
    let pooled = report["pooled"]["coverage_ratio"].as_f64().unwrap();
    assert!((pooled - 0.9).abs() < 1e-12, "pooled {pooled}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn search_archive_is_seed_stable_and_threads_invariant() {
    let dir = sandbox("search_stable");
    let cfg = write_config(&dir, synthetic_config());
    let cfg_str = cfg.to_str().unwrap();
    let out1 = dir.join("r1");
    let out2 = dir.join("r2");
    let out3 = dir.join("r3");
    for (out, threads) in [(&out1, "1"), (&out2, "1"), (&out3, "4")] {
        let (code, _, err) = run(&[
            "search",
            "--config",
            cfg_str,
            "--seed",
            "9",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "stderr: {err}");
    }
    let a = fs::read(out1.join("archive.jsonl")).unwrap();
    let b = fs::read(out2.join("archive.jsonl")).unwrap();
    let c = fs::read(out3.join("archive.jsonl")).unwrap();
    assert_eq!(a, b, "same seed produced different archives");
    assert_eq!(a, c, "thread count changed the archive");
    assert!(!a.is_empty());

    // the composition study parallelizes over trials; thread count must
    // not change its output either
    let archived = String::from_utf8_lossy(&a).lines().count();
    if archived >= 10 {
        let cfg2 = write_config(
            &dir.join("ens"),
            &format!(
                r#"{{
                "data": {{"kind": "synthetic", "n_symbols": 10, "n_days": 140,
                         "signal_strength": 0.5, "noise_vol": 0.02}},
                "search": {{"n_restarts": 4, "steps_per_restart": 40, "patience": 20,
                           "eval_budget": 160, "sharpe_threshold": 1.0}},
                "ensemble": {{"n_trials": 10}},
                "seed": 3
            }}"#
            ),
        );
        for (out, threads) in [(&out1, "1"), (&out3, "4")] {
            let (code, _, err) = run(&[
                "ensemble",
                "--config",
                cfg2.to_str().unwrap(),
                "--seed",
                "9",
                "--threads",
                threads,
                "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code, 0, "stderr: {err}");
        }
        let s1 = fs::read(out1.join("study.jsonl")).unwrap();
        let s3 = fs::read(out3.join("study.jsonl")).unwrap();
        assert_eq!(s1, s3, "thread count changed the study");
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn absurd_threshold_yields_empty_archive_exit_0() {
    let dir = sandbox("high_threshold");
    let cfg = write_config(
        &dir,
        r#"{
            "data": {"kind": "synthetic", "n_symbols": 10, "n_days": 140,
                     "signal_strength": 0.5, "noise_vol": 0.02},
            "search": {"n_restarts": 2, "steps_per_restart": 20, "patience": 10,
                       "eval_budget": 40, "sharpe_threshold": 99.0},
            "seed": 1
        }"#,
    );
    let out = dir.join("out");
    let (code, stdout, err) = run(&[
        "search",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    assert!(stdout.contains("archived=0"), "stdout: {stdout}");
    let archive = fs::read_to_string(out.join("archive.jsonl")).unwrap();
    assert!(archive.is_empty());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn ensemble_requires_ten_archived_alphas() {
    let dir = sandbox("ensemble_small");
    let cfg = write_config(
        &dir,
        &format!(
            r#"{{
            "data": {{"kind": "synthetic", "n_symbols": 10, "n_days": 140,
                     "signal_strength": 0.5, "noise_vol": 0.02}},
            "output_dir": "{}",
            "seed": 3
        }}"#,
            dir.join("out").display()
        ),
    );
    fs::create_dir_all(dir.join("out")).unwrap();
    // archive with nine copies of distinct trivial entries
    let mut lines = String::new();
    for k in 0..9 {
        lines.push_str(&format!(
            "{{\"expr\":\"ts_mean(sig, {w})\",\"hash\":{k},\
             \"train\":{{\"sharpe\":2.0,\"annual_return\":0.1,\"max_drawdown\":0.01,\"turnover\":0.5,\"margin\":1.0,\"n_days\":84}},\
             \"validation\":{{\"sharpe\":2.0,\"annual_return\":0.1,\"max_drawdown\":0.01,\"turnover\":0.5,\"margin\":1.0,\"n_days\":28}},\
             \"test\":{{\"sharpe\":2.0,\"annual_return\":0.1,\"max_drawdown\":0.01,\"turnover\":0.5,\"margin\":1.0,\"n_days\":28}}}}\n",
            w = k + 2
        ));
    }
    fs::write(dir.join("out/archive.jsonl"), lines).unwrap();
    let (code, _, err) = run(&["ensemble", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 4, "stderr: {err}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn gen_data_writes_reingestible_panel() {
    let dir = sandbox("gen_data");
    let out = dir.join("out");
    let cfg = write_config(
        &dir,
        &format!(
            r#"{{
            "data": {{"kind": "synthetic", "n_symbols": 5, "n_days": 40,
                     "signal_strength": 0.3, "noise_vol": 0.02}},
            "output_dir": "{}",
            "seed": 2
        }}"#,
            out.display()
        ),
    );
    let (code, _, err) = run(&["gen-data", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "stderr: {err}");
    let panel =
        alphamill::panel::ingest_csv(&out.join("panel.csv"), alphamill::panel::CsvLayout::Long)
            .unwrap();
    assert_eq!(panel.n_symbols(), 5);
    assert_eq!(panel.n_dates(), 40);
    assert!(panel.has_field("sig"));
    fs::remove_dir_all(&dir).ok();
}
