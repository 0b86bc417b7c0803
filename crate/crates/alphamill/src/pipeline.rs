//! End-to-end pipeline stages behind the CLI subcommands. Stages compose
//! through files in the output directory: `search` writes the archive that
//! `ensemble` and `allocate` read back, so each stage re-runs independently.
//! Fixed seeds make every output file byte-identical across runs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::allocation::{
    baseline_allocate, combine_books, compute_alpha_stats, mvo_hill_climb, scheme_weight,
    AllocationError, BaselineMethod, MvoConstraints, MvoInputs, PortfolioWeights, SchemeId,
    ALL_SCHEMES,
};
use crate::backtest::{
    run_backtest_frame, split_sample, BacktestError, BacktestFrame, PnlSeries, PositionMatrix,
    SampleSplit,
};
use crate::config::{seed_stream, DataSource, RunConfig};
use crate::ensemble::{random_composition_study, study_to_jsonl, EnsembleError};
use crate::panel::{generate_synthetic, ingest_csv, load_groups, PanelError, PanelSet};
use crate::quality::{evaluate_field, recommend_windows, QualityConfig, QualityError};
use crate::rng::derive_seed;
use crate::search::{hill_climb, rescore_expression, AlphaArchive};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("archive error: {0}")]
    Archive(String),
    #[error("alignment error: {0}")]
    Alignment(String),
}

impl PipelineError {
    /// CLI exit codes: 2 config, 3 data, 4 archive, 5 alignment.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) => 3,
            PipelineError::Archive(_) => 4,
            PipelineError::Alignment(_) => 5,
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<PanelError> for PipelineError {
    fn from(e: PanelError) -> Self {
        match e {
            PanelError::InvalidConfig(_) => PipelineError::Config(e.to_string()),
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<BacktestError> for PipelineError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::BadFractions => PipelineError::Config(e.to_string()),
            BacktestError::ShapeMismatch { .. } => PipelineError::Alignment(e.to_string()),
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<EnsembleError> for PipelineError {
    fn from(e: EnsembleError) -> Self {
        match e {
            EnsembleError::ArchiveTooSmall(_) => PipelineError::Archive(e.to_string()),
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<AllocationError> for PipelineError {
    fn from(e: AllocationError) -> Self {
        PipelineError::Alignment(e.to_string())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, PipelineError> {
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
    cfg.validate().map_err(PipelineError::Config)?;
    Ok(cfg)
}

pub fn load_panel(cfg: &RunConfig) -> Result<PanelSet, PipelineError> {
    match &cfg.data {
        DataSource::Synthetic { .. } => {
            let synth = cfg.synthetic_config().expect("synthetic source");
            Ok(generate_synthetic(&synth)?)
        }
        DataSource::Csv {
            path,
            layout,
            groups_path,
        } => {
            if !path.exists() {
                return Err(PipelineError::Data(format!(
                    "data file not found: {}",
                    path.display()
                )));
            }
            let mut panel = ingest_csv(path, *layout)?;
            if let Some(gp) = groups_path {
                if !gp.exists() {
                    return Err(PipelineError::Data(format!(
                        "groups file not found: {}",
                        gp.display()
                    )));
                }
                panel = panel.with_groups(load_groups(gp)?);
            }
            Ok(panel)
        }
    }
}

fn split_for(cfg: &RunConfig, panel: &PanelSet) -> Result<SampleSplit, PipelineError> {
    Ok(split_sample(panel.calendar(), cfg.split_fractions())?)
}

fn ensure_dir(path: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(path)?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn archive_path(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("archive.jsonl")
}

fn load_archive(cfg: &RunConfig) -> Result<AlphaArchive, PipelineError> {
    let path = archive_path(cfg);
    let text = fs::read_to_string(&path).map_err(|e| {
        PipelineError::Data(format!("cannot read archive {}: {e}", path.display()))
    })?;
    AlphaArchive::from_jsonl(&text).map_err(|e| PipelineError::Data(e.to_string()))
}

/// Write the loaded or generated panel as a long-format CSV.
pub fn cmd_gen_data(cfg: &RunConfig) -> Result<(), PipelineError> {
    let panel = load_panel(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    let mut out = String::from("date,symbol,field,value\n");
    for name in panel.field_names() {
        let field = panel.get_field(&name).expect("listed field");
        for t in 0..panel.n_dates() {
            for i in 0..panel.n_symbols() {
                let v = field.values.get(t, i);
                if !crate::matrix::is_missing(v) {
                    out.push_str(&format!(
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
    let path = cfg.output_dir.join("panel.csv");
    write_file(&path, &out)?;
    println!(
        "wrote {} ({} dates x {} symbols, {} fields)",
        path.display(),
        panel.n_dates(),
        panel.n_symbols(),
        panel.field_names().len()
    );
    Ok(())
}

#[derive(Serialize)]
struct QualityFileSymbol<'a> {
    symbol: &'a str,
    #[serde(flatten)]
    metrics: Option<crate::quality::SeriesMetrics>,
}

#[derive(Serialize)]
struct QualityFile<'a> {
    field: &'a str,
    recommended_windows: Vec<u32>,
    pooled: crate::quality::SeriesMetrics,
    per_symbol: Vec<QualityFileSymbol<'a>>,
}

/// Per-field data-quality reports plus recommended lookback windows.
pub fn cmd_quality(cfg: &RunConfig) -> Result<(), PipelineError> {
    let panel = load_panel(cfg)?;
    let dir = cfg.output_dir.join("quality");
    ensure_dir(&dir)?;
    let mut written = 0usize;
    for name in panel.field_names() {
        let field = panel.get_field(&name).expect("listed field");
        let qcfg = QualityConfig {
            outlier_threshold: cfg.quality.outlier_threshold,
            expected_median: cfg.quality.expected_medians.get(&name).copied(),
        };
        let report = match evaluate_field(field, &qcfg) {
            Ok(r) => r,
            Err(QualityError::NoData) => {
                eprintln!("skipping field `{name}`: no observations");
                continue;
            }
            Err(e) => return Err(PipelineError::Config(e.to_string())),
        };
        let windows: Vec<u32> = recommend_windows(&report).into_iter().collect();
        let file = QualityFile {
            field: &name,
            recommended_windows: windows,
            pooled: report.pooled.clone(),
            per_symbol: panel
                .symbols()
                .iter()
                .zip(&report.per_symbol)
                .map(|(symbol, metrics)| QualityFileSymbol {
                    symbol,
                    metrics: metrics.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        write_file(&dir.join(format!("{name}.json")), &json)?;
        written += 1;
    }
    println!("wrote {written} field reports to {}", dir.display());
    Ok(())
}

/// Hill-climb the expression space and write the archive.
pub fn cmd_search(cfg: &RunConfig) -> Result<(), PipelineError> {
    let panel = load_panel(cfg)?;
    let split = split_for(cfg, &panel)?;
    let search_cfg = cfg.search.to_search_config(cfg.seed);
    let result = hill_climb(&search_cfg, &panel, &split)
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    ensure_dir(&cfg.output_dir)?;
    write_file(&archive_path(cfg), &result.archive.to_jsonl())?;
    println!(
        "evaluated={} archived={} best_validation_sharpe={}",
        result.stats.n_evaluated,
        result.stats.n_archived,
        result
            .stats
            .best_validation_sharpe
            .map(|s| format!("{s:.4}"))
            .unwrap_or_else(|| "n/a".to_string())
    );
    Ok(())
}

/// Randomized composition study over the archive; writes the ranked study,
/// the best ensemble spec, and its test-range PnL curve.
pub fn cmd_ensemble(cfg: &RunConfig) -> Result<(), PipelineError> {
    let panel = load_panel(cfg)?;
    let split = split_for(cfg, &panel)?;
    let archive = load_archive(cfg)?;
    let rows = random_composition_study(
        derive_seed(cfg.seed, seed_stream::STUDY),
        &archive,
        &panel,
        &split,
        cfg.ensemble.n_trials,
        cfg.ensemble.horizon,
        cfg.search.cost_bps,
    )?;
    ensure_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("study.jsonl"), &study_to_jsonl(&rows))?;

    let best = &rows[0];
    let best_json = serde_json::to_string_pretty(best)
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    write_file(&cfg.output_dir.join("best_ensemble.json"), &best_json)?;

    let report = crate::ensemble::evaluate_ensemble(
        &best.spec,
        &archive,
        &panel,
        &split,
        cfg.ensemble.horizon,
        cfg.search.cost_bps,
        true,
    )?;
    let test_pnl = report.test_pnl.expect("test pnl requested");
    let mut csv = Vec::new();
    write_pnl_csv(&mut csv, &panel, split.test.clone(), &test_pnl)?;
    write_file(
        &cfg.output_dir.join("best_ensemble_pnl.csv"),
        &String::from_utf8(csv).expect("utf8 csv"),
    )?;
    println!(
        "trials={} best_validation_sharpe={:.4} best_test_sharpe={}",
        rows.len(),
        best.validation.sharpe,
        best.test
            .as_ref()
            .map(|r| format!("{:.4}", r.sharpe))
            .unwrap_or_else(|| "n/a".to_string())
    );
    Ok(())
}

fn write_pnl_csv<W: Write>(
    out: &mut W,
    panel: &PanelSet,
    range: std::ops::Range<usize>,
    pnl: &PnlSeries,
) -> Result<(), PipelineError> {
    writeln!(out, "date,daily_pnl,cum_pnl")?;
    for (k, t) in range.enumerate() {
        writeln!(
            out,
            "{},{},{}",
            panel.calendar().date(t),
            pnl.daily_pnl[k],
            pnl.cum_pnl[k]
        )?;
    }
    Ok(())
}

struct Book {
    expr: String,
    positions: PositionMatrix,
    frame: BacktestFrame,
}

#[derive(Serialize)]
struct WeightsFile<'a> {
    scheme: &'a str,
    alphas: Vec<WeightEntry<'a>>,
}

#[derive(Serialize)]
struct WeightEntry<'a> {
    expr: &'a str,
    weight: f64,
}

/// Scheme comparison across all weighting rules, baselines, and the
/// stochastic mean-variance climb. Alpha statistics come from the
/// in-sample (train + validation) range only; the test range supplies the
/// out-of-sample columns.
pub fn cmd_allocate(cfg: &RunConfig) -> Result<(), PipelineError> {
    let panel = load_panel(cfg)?;
    let split = split_for(cfg, &panel)?;
    let archive = load_archive(cfg)?;
    if archive.len() < 2 {
        return Err(PipelineError::Alignment(format!(
            "need at least 2 archived alphas to allocate, found {}",
            archive.len()
        )));
    }

    // books for the top alphas by validation Sharpe (archive is sorted)
    let n_books = cfg.allocation.max_books.min(archive.len());
    let mut books: Vec<Book> = Vec::with_capacity(n_books);
    for entry in archive.entries().iter().take(n_books) {
        let (_, _, positions) = rescore_expression(&entry.expr, &panel, &split, cfg.search.cost_bps)
            .ok_or_else(|| {
                PipelineError::Data(format!("archived expression failed: {}", entry.expr))
            })?;
        let frame = run_backtest_frame(&positions, &panel, cfg.search.cost_bps)?;
        books.push(Book {
            expr: entry.expr.clone(),
            positions,
            frame,
        });
    }

    // in-sample statistics for scheme scoring
    let in_sample = split.in_sample();
    let returns_in = panel
        .get_field("returns")
        .map_err(|_| PipelineError::Data("missing returns".into()))?
        .values
        .slice_dates(in_sample.clone());
    let pnls_in: Vec<PnlSeries> = books
        .iter()
        .map(|b| b.frame.pnl.slice(&in_sample))
        .collect();
    let books_in: Vec<PositionMatrix> = books
        .iter()
        .map(|b| PositionMatrix {
            weights: b.positions.weights.slice_dates(in_sample.clone()),
        })
        .collect();
    let stats = compute_alpha_stats(&pnls_in, &books_in, &returns_in)?;
    let mvo_inputs = MvoInputs::from_pnls(&pnls_in)?;

    let schemes: Vec<SchemeId> = cfg
        .allocation
        .schemes
        .clone()
        .unwrap_or_else(|| ALL_SCHEMES.to_vec());

    let mut rows: Vec<(String, PortfolioWeights)> = Vec::new();
    for scheme in &schemes {
        rows.push((scheme.name().to_string(), scheme_weight(*scheme, &stats)));
    }
    for method in [
        BaselineMethod::Equal,
        BaselineMethod::InverseVolatility,
        BaselineMethod::RiskParity,
    ] {
        let name = match method {
            BaselineMethod::Equal => "equal",
            BaselineMethod::InverseVolatility => "inverse_volatility",
            BaselineMethod::RiskParity => "risk_parity",
        };
        rows.push((name.to_string(), baseline_allocate(method, &mvo_inputs)?));
    }
    rows.push((
        "mvo".to_string(),
        mvo_hill_climb(
            derive_seed(cfg.seed, seed_stream::MVO),
            &mvo_inputs,
            &MvoConstraints {
                cardinality: cfg.allocation.cardinality,
                n_steps: cfg.allocation.mvo_steps,
                step_size: cfg.allocation.mvo_step_size,
            },
        )?,
    ));

    ensure_dir(&cfg.output_dir)?;
    let weights_dir = cfg.output_dir.join("weights");
    let pnl_dir = cfg.output_dir.join("scheme_pnl");
    ensure_dir(&weights_dir)?;
    ensure_dir(&pnl_dir)?;

    let all_books: Vec<PositionMatrix> = books.iter().map(|b| b.positions.clone()).collect();
    let mut table = String::from(
        "scheme,in_sample_sharpe,out_sample_sharpe,returns,drawdown,turnover\n",
    );
    for (name, weights) in &rows {
        let combined = combine_books(weights, &all_books)?;
        let frame = run_backtest_frame(&combined, &panel, cfg.search.cost_bps)?;
        let in_report = frame.report(in_sample.clone());
        let out_report = frame.report(split.test.clone());
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            name,
            in_report.sharpe,
            out_report.sharpe,
            out_report.annual_return,
            out_report.max_drawdown,
            out_report.turnover
        ));

        let wf = WeightsFile {
            scheme: name,
            alphas: books
                .iter()
                .zip(&weights.weights)
                .map(|(b, w)| WeightEntry {
                    expr: &b.expr,
                    weight: *w,
                })
                .collect(),
        };
        let json =
            serde_json::to_string_pretty(&wf).map_err(|e| PipelineError::Data(e.to_string()))?;
        write_file(&weights_dir.join(format!("{name}.json")), &json)?;

        let mut csv = Vec::new();
        write_pnl_csv(&mut csv, &panel, 0..panel.n_dates(), &frame.pnl)?;
        write_file(
            &pnl_dir.join(format!("{name}.csv")),
            &String::from_utf8(csv).expect("utf8 csv"),
        )?;
    }
    write_file(&cfg.output_dir.join("scheme_comparison.csv"), &table)?;
    println!(
        "wrote scheme comparison ({} rows) to {}",
        rows.len(),
        cfg.output_dir.join("scheme_comparison.csv").display()
    );
    Ok(())
}

/// All stages in sequence on one config.
pub fn cmd_run_all(cfg: &RunConfig) -> Result<(), PipelineError> {
    cmd_quality(cfg)?;
    cmd_search(cfg)?;
    cmd_ensemble(cfg)?;
    cmd_allocate(cfg)?;
    Ok(())
}
