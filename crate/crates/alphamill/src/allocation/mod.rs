//! Capital allocation across alpha books: per-alpha summary statistics,
//! the named weighting schemes, book blending, and stochastic mean-variance
//! hill climbing on the nonnegative simplex.

mod books;
mod mvo;
mod schemes;
mod stats;

pub use books::combine_books;
pub use mvo::{
    baseline_allocate, mvo_hill_climb, project_to_simplex, risk_contributions, BaselineMethod,
    MvoConstraints, MvoInputs,
};
pub use schemes::{raw_score, scheme_weight, SchemeId, ALL_SCHEMES};
pub use stats::{compute_alpha_stats, AlphaStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("PnL series do not share a calendar")]
    CalendarMismatch,
    #[error("need at least two alphas, got {0}")]
    TooFewAlphas(usize),
    #[error("book shapes do not match weight count")]
    ShapeMismatch,
    #[error("cardinality {k} infeasible for {n} assets")]
    InfeasibleCardinality { k: usize, n: usize },
    #[error("asset {0} has zero volatility")]
    ZeroVolatilityAsset(usize),
    #[error("risk parity failed to converge")]
    NoConvergence,
    #[error("bad inputs: {0}")]
    BadInputs(String),
}

/// Nonnegative per-alpha budget shares summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights {
    pub weights: Vec<f64>,
}

impl PortfolioWeights {
    /// Enforce the simplex invariants (tolerance 1e-9 on the budget).
    pub fn check(&self) -> Result<(), AllocationError> {
        if self.weights.iter().any(|w| *w < -1e-12) {
            return Err(AllocationError::BadInputs("negative weight".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(AllocationError::BadInputs(format!("weights sum {sum}")));
        }
        Ok(())
    }
}
