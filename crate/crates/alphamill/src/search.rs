//! Randomized hill climbing over expression space.
//!
//! Each restart derives its own seed from (seed, restart_index), starts at
//! a fresh random expression, and proposes single-move mutations, accepting
//! only strict improvements (ties broken toward lower turnover). Every
//! scored candidate whose validation Sharpe clears the threshold enters the
//! archive, not just the accepted trajectory. The evaluation budget is
//! pre-split evenly across restarts so parallel and serial execution
//! produce identical archives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{
    run_backtest_frame, signal_to_weights, split_sample, BacktestError, BacktestReport,
    PnlSeries, SampleSplit,
};
use crate::eval::{evaluate, SignalMatrix};
use crate::lang::{
    canonical_hash, canonicalize, mutate, parse, print, random_instantiate, AlphaExpr,
    PanelSchema, WindowMenu,
};
use crate::matrix::is_missing;
use crate::panel::PanelSet;
use crate::quality::{evaluate_field, recommend_windows, QualityConfig};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error("search config invalid: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    ValidationSharpe,
    NegativeMse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub seed: u64,
    pub n_restarts: usize,
    pub steps_per_restart: usize,
    /// Consecutive rejections before a restart gives up.
    pub patience: usize,
    /// Cap on total expression evaluations across all restarts.
    pub eval_budget: usize,
    pub sharpe_threshold: f64,
    pub objective: Objective,
    pub max_depth: usize,
    pub cost_bps: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_restarts: 8,
            steps_per_restart: 250,
            patience: 40,
            eval_budget: 2000,
            sharpe_threshold: 1.5,
            objective: Objective::ValidationSharpe,
            max_depth: 6,
            cost_bps: 0.0,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<(), SearchError> {
        let positive = [
            ("n_restarts", self.n_restarts),
            ("steps_per_restart", self.steps_per_restart),
            ("patience", self.patience),
            ("eval_budget", self.eval_budget),
            ("max_depth", self.max_depth),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(SearchError::BadConfig(format!("{name} must be positive")));
            }
        }
        if self.cost_bps < 0.0 {
            return Err(SearchError::BadConfig("cost_bps must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitReports {
    pub train: BacktestReport,
    pub validation: BacktestReport,
    pub test: BacktestReport,
}

#[derive(Debug, Clone)]
pub struct SplitPnl {
    pub train: PnlSeries,
    pub validation: PnlSeries,
    pub test: PnlSeries,
}

/// One archived alpha: canonical expression text plus per-split results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub expr: String,
    pub hash: u64,
    #[serde(flatten)]
    pub reports: SplitReports,
    #[serde(skip)]
    pub pnl: Option<SplitPnl>,
}

/// Deduplicated set of threshold-clearing alphas, sorted by validation
/// Sharpe (descending, expression text as tie-break).
#[derive(Debug, Clone, Default)]
pub struct AlphaArchive {
    entries: Vec<ArchiveEntry>,
}

impl AlphaArchive {
    pub fn from_entries(entries: Vec<ArchiveEntry>) -> Self {
        let mut archive = Self::default();
        for e in entries {
            archive.insert(e);
        }
        archive.sort();
        archive
    }

    fn insert(&mut self, entry: ArchiveEntry) -> bool {
        if self.entries.iter().any(|e| e.hash == entry.hash) {
            return false;
        }
        self.entries.push(entry);
        true
    }

    fn sort(&mut self) {
        self.entries.sort_by(|a, b| {
            b.reports
                .validation
                .sharpe
                .partial_cmp(&a.reports.validation.sharpe)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.expr.cmp(&b.expr))
        });
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best_validation_sharpe(&self) -> Option<f64> {
        self.entries.first().map(|e| e.reports.validation.sharpe)
    }

    /// One JSON object per line: expression text and per-split metrics.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("archive entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut entries = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(line)?);
        }
        Ok(Self::from_entries(entries))
    }
}

/// Acceptance rule shared by every hill climb in the pipeline: strictly
/// better score, or an exact tie with lower turnover.
pub fn accept(old_score: f64, new_score: f64, old_turnover: f64, new_turnover: f64) -> bool {
    new_score > old_score
        || ((new_score - old_score).abs() <= 1e-12 && new_turnover < old_turnover)
}

/// Scored candidate: objective value plus everything needed for archiving.
#[derive(Debug, Clone)]
pub(crate) struct Scored {
    pub expr: AlphaExpr,
    pub objective: f64,
    pub validation_sharpe: f64,
    pub validation_turnover: f64,
    pub reports: SplitReports,
    pub pnl: SplitPnl,
}

/// Shared scoring path: evaluate, rank into positions, simulate, summarize
/// per split. The objective reads the validation range only.
pub(crate) struct Scorer<'a> {
    pub panel: &'a PanelSet,
    pub split: &'a SampleSplit,
    pub objective: Objective,
    pub cost_bps: f64,
}

impl Scorer<'_> {
    pub fn score(&self, expr: &AlphaExpr) -> Option<Scored> {
        let signal = evaluate(expr, self.panel).ok()?;
        let weights = signal_to_weights(&signal);
        let frame = run_backtest_frame(&weights, self.panel, self.cost_bps).ok()?;
        let reports = SplitReports {
            train: frame.report(self.split.train.clone()),
            validation: frame.report(self.split.validation.clone()),
            test: frame.report(self.split.test.clone()),
        };
        let objective = match self.objective {
            Objective::ValidationSharpe => reports.validation.sharpe,
            Objective::NegativeMse => negative_mse(&signal, self.panel, self.split),
        };
        if !objective.is_finite() {
            return None;
        }
        Some(Scored {
            expr: expr.clone(),
            objective,
            validation_sharpe: reports.validation.sharpe,
            validation_turnover: reports.validation.turnover,
            pnl: SplitPnl {
                train: frame.pnl.slice(&self.split.train),
                validation: frame.pnl.slice(&self.split.validation),
                test: frame.pnl.slice(&self.split.test),
            },
            reports,
        })
    }
}

/// Negative mean squared error between the cross-sectionally z-scored
/// signal and the z-scored next-day return, over the validation range.
/// Targets stay inside the range (no reach into the test window).
fn negative_mse(signal: &SignalMatrix, panel: &PanelSet, split: &SampleSplit) -> f64 {
    let returns = &panel.get_field("returns").expect("checked by caller").values;
    let n_syms = signal.values.n_symbols();
    let mut sse = 0.0;
    let mut count = 0usize;
    let mut sig_row = vec![f64::NAN; n_syms];
    let mut ret_row = vec![f64::NAN; n_syms];
    let mut zs = vec![f64::NAN; n_syms];
    let mut zr = vec![f64::NAN; n_syms];
    let range = split.validation.clone();
    for t in range.start..range.end.saturating_sub(1) {
        for i in 0..n_syms {
            let s = signal.values.get(t, i);
            let r = returns.get(t + 1, i);
            if !is_missing(s) && !is_missing(r) {
                sig_row[i] = s;
                ret_row[i] = r;
            } else {
                sig_row[i] = f64::NAN;
                ret_row[i] = f64::NAN;
            }
        }
        zs.iter_mut().for_each(|v| *v = f64::NAN);
        zr.iter_mut().for_each(|v| *v = f64::NAN);
        crate::eval::cs_zscore(&sig_row, &mut zs);
        crate::eval::cs_zscore(&ret_row, &mut zr);
        for i in 0..n_syms {
            if !is_missing(zs[i]) && !is_missing(zr[i]) {
                sse += (zs[i] - zr[i]).powi(2);
                count += 1;
            }
        }
    }
    if count == 0 {
        f64::NEG_INFINITY
    } else {
        -(sse / count as f64)
    }
}

/// Build the per-field window menu from update-frequency statistics.
pub fn window_menu_for_panel(panel: &PanelSet) -> WindowMenu {
    let mut menu = WindowMenu::default();
    let cfg = QualityConfig::default();
    for name in panel.field_names() {
        if let Ok(field) = panel.get_field(&name) {
            if let Ok(report) = evaluate_field(field, &cfg) {
                menu.insert(&name, recommend_windows(&report));
            }
        }
    }
    menu
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchStats {
    pub n_evaluated: usize,
    pub n_archived: usize,
    pub best_validation_sharpe: Option<f64>,
    /// Accepted objective values per restart, in acceptance order.
    pub accepted_scores: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct HillClimbResult {
    pub archive: AlphaArchive,
    pub stats: SearchStats,
}

struct RestartOutcome {
    candidates: Vec<ArchiveEntry>,
    accepted_scores: Vec<f64>,
    n_evaluated: usize,
}

/// Run the full hill climb. Deterministic in `cfg.seed`, including under
/// parallel restarts: restart r uses derive_seed(seed, r) and a
/// pre-allocated slice of the evaluation budget, and results merge in
/// restart order.
pub fn hill_climb(
    cfg: &SearchConfig,
    panel: &PanelSet,
    split: &SampleSplit,
) -> Result<HillClimbResult, SearchError> {
    cfg.validate()?;
    panel
        .get_field("returns")
        .map_err(|_| BacktestError::MissingReturns)?;

    let schema = PanelSchema::from_panel(panel).with_max_depth(cfg.max_depth);
    let windows = window_menu_for_panel(panel);
    let scorer = Scorer {
        panel,
        split,
        objective: cfg.objective,
        cost_bps: cfg.cost_bps,
    };

    let base = cfg.eval_budget / cfg.n_restarts;
    let extra = cfg.eval_budget % cfg.n_restarts;
    let budgets: Vec<usize> = (0..cfg.n_restarts)
        .map(|r| base + usize::from(r < extra))
        .collect();

    let outcomes: Vec<RestartOutcome> = (0..cfg.n_restarts)
        .into_par_iter()
        .map(|r| run_restart(cfg, &scorer, &schema, &windows, derive_seed(cfg.seed, r as u64), budgets[r]))
        .collect();

    let mut archive = AlphaArchive::default();
    let mut stats = SearchStats {
        n_evaluated: 0,
        n_archived: 0,
        best_validation_sharpe: None,
        accepted_scores: Vec::with_capacity(cfg.n_restarts),
    };
    for outcome in outcomes {
        stats.n_evaluated += outcome.n_evaluated;
        stats.accepted_scores.push(outcome.accepted_scores);
        for entry in outcome.candidates {
            archive.insert(entry);
        }
    }
    archive.sort();
    stats.n_archived = archive.len();
    stats.best_validation_sharpe = archive.best_validation_sharpe();
    Ok(HillClimbResult { archive, stats })
}

fn archive_entry(scored: &Scored) -> ArchiveEntry {
    let canonical = canonicalize(&scored.expr);
    ArchiveEntry {
        expr: print(&canonical),
        hash: canonical_hash(&canonical),
        reports: scored.reports.clone(),
        pnl: Some(scored.pnl.clone()),
    }
}

fn run_restart(
    cfg: &SearchConfig,
    scorer: &Scorer,
    schema: &PanelSchema,
    windows: &WindowMenu,
    restart_seed: u64,
    budget: usize,
) -> RestartOutcome {
    let mut outcome = RestartOutcome {
        candidates: Vec::new(),
        accepted_scores: Vec::new(),
        n_evaluated: 0,
    };
    if budget == 0 {
        return outcome;
    }

    let consider = |scored: &Scored, outcome: &mut RestartOutcome| {
        if scored.validation_sharpe >= cfg.sharpe_threshold {
            outcome.candidates.push(archive_entry(scored));
        }
    };

    // initial point; retry a few seeds if the first draw fails to score
    // (all-missing signal), still charging the budget per evaluation
    let mut current: Option<Scored> = None;
    let mut attempt = 0u64;
    while outcome.n_evaluated < budget && current.is_none() && attempt < 16 {
        let expr = random_instantiate(
            derive_seed(restart_seed, 1_000_000 + attempt),
            schema,
            windows,
            cfg.max_depth,
        );
        outcome.n_evaluated += 1;
        current = scorer.score(&expr);
        attempt += 1;
    }
    let Some(mut current) = current else {
        return outcome;
    };
    consider(&current, &mut outcome);
    outcome.accepted_scores.push(current.objective);

    let mut rejections = 0usize;
    for step in 0..cfg.steps_per_restart {
        if outcome.n_evaluated >= budget || rejections >= cfg.patience {
            break;
        }
        let proposal = mutate(
            derive_seed(restart_seed, step as u64),
            &current.expr,
            schema,
            windows,
            cfg.max_depth,
        );
        outcome.n_evaluated += 1;
        let Some(scored) = scorer.score(&proposal) else {
            rejections += 1;
            continue;
        };
        consider(&scored, &mut outcome);
        if accept(
            current.objective,
            scored.objective,
            current.validation_turnover,
            scored.validation_turnover,
        ) {
            outcome.accepted_scores.push(scored.objective);
            current = scored;
            rejections = 0;
        } else {
            rejections += 1;
        }
    }
    outcome
}

/// Convenience: default split fractions.
pub fn default_split(panel: &PanelSet) -> Result<SampleSplit, BacktestError> {
    split_sample(panel.calendar(), (0.6, 0.2, 0.2))
}

/// Re-score an archived expression from its stored text, reproducing the
/// stored per-split reports (archive purity check and book rebuilds).
pub fn rescore_expression(
    text: &str,
    panel: &PanelSet,
    split: &SampleSplit,
    cost_bps: f64,
) -> Option<(SplitReports, SplitPnl, crate::backtest::PositionMatrix)> {
    let expr = parse(text).ok()?;
    let signal = evaluate(&expr, panel).ok()?;
    let weights = signal_to_weights(&signal);
    let frame = run_backtest_frame(&weights, panel, cost_bps).ok()?;
    let reports = SplitReports {
        train: frame.report(split.train.clone()),
        validation: frame.report(split.validation.clone()),
        test: frame.report(split.test.clone()),
    };
    let pnl = SplitPnl {
        train: frame.pnl.slice(&split.train),
        validation: frame.pnl.slice(&split.validation),
        test: frame.pnl.slice(&split.test),
    };
    Some((reports, pnl, weights))
}
