//! Run configuration: a single JSON file drives every pipeline stage.
//! Unknown keys are rejected, and all randomness derives from one global
//! seed through fixed per-stage streams.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::allocation::SchemeId;
use crate::panel::{CsvLayout, SyntheticConfig};
use crate::rng::derive_seed;
use crate::search::{Objective, SearchConfig};

/// Per-stage seed streams off the global seed.
pub mod seed_stream {
    pub const SYNTHETIC: u64 = 11;
    pub const SEARCH: u64 = 22;
    pub const STUDY: u64 = 33;
    pub const ENSEMBLE_SEARCH: u64 = 44;
    pub const MVO: u64 = 55;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        n_symbols: usize,
        n_days: usize,
        signal_strength: f64,
        noise_vol: f64,
    },
    Csv {
        path: PathBuf,
        layout: CsvLayout,
        #[serde(default)]
        groups_path: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualitySection {
    #[serde(default)]
    pub outlier_threshold: Option<f64>,
    /// Expected medians by field name for the deviation metric.
    #[serde(default)]
    pub expected_medians: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default = "d_restarts")]
    pub n_restarts: usize,
    #[serde(default = "d_steps")]
    pub steps_per_restart: usize,
    #[serde(default = "d_patience")]
    pub patience: usize,
    #[serde(default = "d_budget")]
    pub eval_budget: usize,
    #[serde(default = "d_threshold")]
    pub sharpe_threshold: f64,
    #[serde(default = "d_objective")]
    pub objective: Objective,
    #[serde(default = "d_depth")]
    pub max_depth: usize,
    #[serde(default)]
    pub cost_bps: f64,
}

fn d_restarts() -> usize {
    8
}
fn d_steps() -> usize {
    250
}
fn d_patience() -> usize {
    40
}
fn d_budget() -> usize {
    2000
}
fn d_threshold() -> f64 {
    1.5
}
fn d_objective() -> Objective {
    Objective::ValidationSharpe
}
fn d_depth() -> usize {
    6
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            n_restarts: d_restarts(),
            steps_per_restart: d_steps(),
            patience: d_patience(),
            eval_budget: d_budget(),
            sharpe_threshold: d_threshold(),
            objective: d_objective(),
            max_depth: d_depth(),
            cost_bps: 0.0,
        }
    }
}

impl SearchSection {
    pub fn to_search_config(&self, global_seed: u64) -> SearchConfig {
        SearchConfig {
            seed: derive_seed(global_seed, seed_stream::SEARCH),
            n_restarts: self.n_restarts,
            steps_per_restart: self.steps_per_restart,
            patience: self.patience,
            eval_budget: self.eval_budget,
            sharpe_threshold: self.sharpe_threshold,
            objective: self.objective,
            max_depth: self.max_depth,
            cost_bps: self.cost_bps,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "d_horizon")]
    pub horizon: usize,
    #[serde(default = "d_ens_budget")]
    pub budget: usize,
    #[serde(default = "d_trials")]
    pub n_trials: usize,
}

fn d_horizon() -> usize {
    1
}
fn d_ens_budget() -> usize {
    40
}
fn d_trials() -> usize {
    200
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            horizon: d_horizon(),
            budget: d_ens_budget(),
            n_trials: d_trials(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationSection {
    /// Schemes to run; all eleven when omitted.
    #[serde(default)]
    pub schemes: Option<Vec<SchemeId>>,
    #[serde(default = "d_mvo_steps")]
    pub mvo_steps: usize,
    #[serde(default = "d_mvo_step_size")]
    pub mvo_step_size: f64,
    #[serde(default)]
    pub cardinality: Option<usize>,
    /// Books built from the top archived alphas by validation Sharpe.
    #[serde(default = "d_max_books")]
    pub max_books: usize,
}

fn d_mvo_steps() -> usize {
    10_000
}
fn d_mvo_step_size() -> f64 {
    0.05
}
fn d_max_books() -> usize {
    20
}

impl Default for AllocationSection {
    fn default() -> Self {
        Self {
            schemes: None,
            mvo_steps: d_mvo_steps(),
            mvo_step_size: d_mvo_step_size(),
            cardinality: None,
            max_books: d_max_books(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub quality: QualitySection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub allocation: AllocationSection,
    #[serde(default = "d_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn d_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Full validation before any data is touched.
    pub fn validate(&self) -> Result<(), String> {
        let s = &self.split;
        if s.train <= 0.0 || s.validation <= 0.0 || s.test <= 0.0 {
            return Err("split fractions must be positive".into());
        }
        if (s.train + s.validation + s.test - 1.0).abs() > 1e-9 {
            return Err(format!(
                "split fractions sum to {}, expected 1",
                s.train + s.validation + s.test
            ));
        }
        if let Some(x) = self.quality.outlier_threshold {
            if x <= 0.0 {
                return Err("quality.outlier_threshold must be positive".into());
            }
        }
        for (field, median) in &self.quality.expected_medians {
            if *median == 0.0 {
                return Err(format!("quality.expected_medians.{field} must be nonzero"));
            }
        }
        for (name, v) in [
            ("search.n_restarts", self.search.n_restarts),
            ("search.steps_per_restart", self.search.steps_per_restart),
            ("search.patience", self.search.patience),
            ("search.eval_budget", self.search.eval_budget),
            ("search.max_depth", self.search.max_depth),
            ("ensemble.horizon", self.ensemble.horizon),
            ("ensemble.budget", self.ensemble.budget),
            ("ensemble.n_trials", self.ensemble.n_trials),
            ("allocation.mvo_steps", self.allocation.mvo_steps),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.search.cost_bps < 0.0 {
            return Err("search.cost_bps must be >= 0".into());
        }
        if self.allocation.mvo_step_size <= 0.0 {
            return Err("allocation.mvo_step_size must be positive".into());
        }
        if self.allocation.max_books < 2 {
            return Err("allocation.max_books must be at least 2".into());
        }
        if let DataSource::Synthetic {
            n_symbols,
            n_days,
            signal_strength,
            noise_vol,
        } = &self.data
        {
            // mirror the generator's invariants so config errors surface
            // before any data work starts
            if *n_days < 30 {
                return Err("synthetic n_days must be >= 30".into());
            }
            if *n_symbols < 3 {
                return Err("synthetic n_symbols must be >= 3".into());
            }
            if !(0.0..=1.0).contains(signal_strength) {
                return Err("synthetic signal_strength must be in [0, 1]".into());
            }
            if !(*noise_vol > 0.0 && *noise_vol <= 0.1) {
                return Err("synthetic noise_vol must be in (0, 0.1]".into());
            }
        }
        Ok(())
    }

    pub fn synthetic_config(&self) -> Option<SyntheticConfig> {
        match &self.data {
            DataSource::Synthetic {
                n_symbols,
                n_days,
                signal_strength,
                noise_vol,
            } => Some(SyntheticConfig {
                seed: derive_seed(self.seed, seed_stream::SYNTHETIC),
                n_symbols: *n_symbols,
                n_days: *n_days,
                signal_strength: *signal_strength,
                noise_vol: *noise_vol,
            }),
            DataSource::Csv { .. } => None,
        }
    }

    pub fn split_fractions(&self) -> (f64, f64, f64) {
        (self.split.train, self.split.validation, self.split.test)
    }
}
