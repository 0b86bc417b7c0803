//! The eleven weighting schemes. Each maps per-alpha stats to a raw score;
//! raw scores clamp at zero and L1-normalize into budget shares. When every
//! raw score is nonpositive the scheme falls back to equal weights.

use serde::{Deserialize, Serialize};

use super::{AlphaStats, PortfolioWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    /// ir * exp(-turnover): high-IR, low-turnover alphas.
    IrExpTurnover,
    /// 1 / (1 + avg_corr): low correlation among alphas.
    InvAvgCorr,
    /// 1 / (1 + volatility): low-volatility signals.
    InvVolatility,
    /// sigmoid(momentum): positive recent performance.
    SigmoidMomentum,
    /// 1 - |0.5 - long_short_ratio|: balanced long/short books.
    LsBalance,
    /// 1 if |zscore| < 2 else 0: gate out regime outliers.
    ZscoreGate,
    /// max(expected_pnl, 0).
    PosExpectedPnl,
    /// (ir + 1/(1+volatility) + sigmoid(momentum)) / 3.
    Composite,
    /// (ir_short + ir_long) / 2.
    IrLongShortMean,
    /// 1 / (1 + drawdown).
    InvDrawdown,
    /// (rank_sharpe + rank_pnl + rank_turnover) / 3.
    RankAggregate,
}

pub const ALL_SCHEMES: [SchemeId; 11] = [
    SchemeId::IrExpTurnover,
    SchemeId::InvAvgCorr,
    SchemeId::InvVolatility,
    SchemeId::SigmoidMomentum,
    SchemeId::LsBalance,
    SchemeId::ZscoreGate,
    SchemeId::PosExpectedPnl,
    SchemeId::Composite,
    SchemeId::IrLongShortMean,
    SchemeId::InvDrawdown,
    SchemeId::RankAggregate,
];

impl SchemeId {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeId::IrExpTurnover => "ir_exp_turnover",
            SchemeId::InvAvgCorr => "inv_avg_corr",
            SchemeId::InvVolatility => "inv_volatility",
            SchemeId::SigmoidMomentum => "sigmoid_momentum",
            SchemeId::LsBalance => "ls_balance",
            SchemeId::ZscoreGate => "zscore_gate",
            SchemeId::PosExpectedPnl => "pos_expected_pnl",
            SchemeId::Composite => "composite",
            SchemeId::IrLongShortMean => "ir_long_short_mean",
            SchemeId::InvDrawdown => "inv_drawdown",
            SchemeId::RankAggregate => "rank_aggregate",
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Raw (pre-normalization) score of one alpha under a scheme.
pub fn raw_score(scheme: SchemeId, s: &AlphaStats) -> f64 {
    match scheme {
        SchemeId::IrExpTurnover => s.ir * (-s.turnover).exp(),
        SchemeId::InvAvgCorr => 1.0 / (1.0 + s.avg_corr),
        SchemeId::InvVolatility => 1.0 / (1.0 + s.volatility),
        SchemeId::SigmoidMomentum => sigmoid(s.momentum),
        SchemeId::LsBalance => 1.0 - (0.5 - s.long_short_ratio).abs(),
        SchemeId::ZscoreGate => {
            if s.zscore.abs() < 2.0 {
                1.0
            } else {
                0.0
            }
        }
        SchemeId::PosExpectedPnl => s.expected_pnl.max(0.0),
        SchemeId::Composite => {
            (s.ir + 1.0 / (1.0 + s.volatility) + sigmoid(s.momentum)) / 3.0
        }
        SchemeId::IrLongShortMean => (s.ir_short + s.ir_long) / 2.0,
        SchemeId::InvDrawdown => 1.0 / (1.0 + s.drawdown),
        SchemeId::RankAggregate => (s.rank_sharpe + s.rank_pnl + s.rank_turnover) / 3.0,
    }
}

/// Score every alpha, clamp raw scores at zero, and normalize to sum one.
pub fn scheme_weight(scheme: SchemeId, stats: &[AlphaStats]) -> PortfolioWeights {
    assert!(!stats.is_empty(), "scheme_weight needs at least one alpha");
    let raws: Vec<f64> = stats
        .iter()
        .map(|s| raw_score(scheme, s).max(0.0))
        .collect();
    let total: f64 = raws.iter().sum();
    let n = raws.len() as f64;
    let weights = if total <= 0.0 {
        vec![1.0 / n; raws.len()]
    } else {
        raws.iter().map(|r| r / total).collect()
    };
    PortfolioWeights { weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_stats() -> AlphaStats {
        AlphaStats {
            ir: 1.0,
            volatility: 0.1,
            turnover: 0.2,
            avg_corr: 0.3,
            momentum: 0.5,
            drawdown: 0.05,
            expected_pnl: 0.12,
            long_short_ratio: 0.5,
            zscore: 0.0,
            ir_long: 0.8,
            ir_short: 0.6,
            rank_sharpe: 0.5,
            rank_pnl: 0.5,
            rank_turnover: 0.5,
        }
    }

    #[test]
    fn ir_exp_turnover_formula() {
        let mut s = base_stats();
        s.ir = 2.0;
        s.turnover = 0.5;
        let raw = raw_score(SchemeId::IrExpTurnover, &s);
        assert!((raw - 1.2131).abs() < 5e-5, "raw {raw}");
    }

    #[test]
    fn sigmoid_momentum_at_zero_is_half() {
        let mut s = base_stats();
        s.momentum = 0.0;
        assert!((raw_score(SchemeId::SigmoidMomentum, &s) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zscore_gate_cuts_above_two() {
        let mut s = base_stats();
        s.zscore = 2.5;
        assert_eq!(raw_score(SchemeId::ZscoreGate, &s), 0.0);
        s.zscore = -1.9;
        assert_eq!(raw_score(SchemeId::ZscoreGate, &s), 1.0);
    }

    #[test]
    fn normalization_fixture() {
        let mut a = base_stats();
        let mut b = base_stats();
        // engineer raw scores 1 and 3 through pos_expected_pnl
        a.expected_pnl = 1.0;
        b.expected_pnl = 3.0;
        let w = scheme_weight(SchemeId::PosExpectedPnl, &[a, b]);
        assert!((w.weights[0] - 0.25).abs() < 1e-12);
        assert!((w.weights[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn composite_is_mean_of_components() {
        let s = base_stats();
        let composite = raw_score(SchemeId::Composite, &s);
        let parts = [
            s.ir,
            raw_score(SchemeId::InvVolatility, &s),
            raw_score(SchemeId::SigmoidMomentum, &s),
        ];
        let mean = parts.iter().sum::<f64>() / 3.0;
        assert!((composite - mean).abs() < 1e-12);
    }

    #[test]
    fn all_nonpositive_raws_fall_back_to_equal() {
        let mut a = base_stats();
        let mut b = base_stats();
        a.expected_pnl = -0.5;
        b.expected_pnl = -0.1;
        let w = scheme_weight(SchemeId::PosExpectedPnl, &[a, b]);
        assert_eq!(w.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn every_scheme_yields_simplex_weights() {
        let mut stats = Vec::new();
        for i in 0..5 {
            let mut s = base_stats();
            s.ir = i as f64 - 2.0;
            s.momentum = (i as f64).sin();
            s.zscore = i as f64;
            s.expected_pnl = 0.05 * i as f64 - 0.1;
            stats.push(s);
        }
        for scheme in ALL_SCHEMES {
            let w = scheme_weight(scheme, &stats);
            w.check().unwrap_or_else(|e| panic!("{scheme:?}: {e}"));
        }
    }

    #[test]
    fn ir_monotonicity_for_exp_turnover_scheme() {
        let mut stats = vec![base_stats(), base_stats(), base_stats()];
        stats[1].ir = 0.2;
        let before = scheme_weight(SchemeId::IrExpTurnover, &stats).weights[1];
        stats[1].ir = 1.8;
        let after = scheme_weight(SchemeId::IrExpTurnover, &stats).weights[1];
        assert!(after >= before);
    }
}
