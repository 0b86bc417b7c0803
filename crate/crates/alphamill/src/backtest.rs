//! Signal → dollar-neutral positions → daily PnL, without lookahead.
//!
//! Position rule: per date, fractional-rank the non-missing cross-section,
//! demean, scale to unit gross. Days with fewer than two names or an
//! all-tied cross-section stay flat. Positions formed on date t-1 earn
//! date-t returns; turnover_t = 0.5 * sum |w_t - w_{t-1}| with w_{-1} = 0.
//! Drawdown is measured on additive cumulative PnL in capital-fraction
//! units, the standard for dollar-neutral books.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{cs_demean, cs_rank, SignalMatrix};
use crate::matrix::{is_missing, Matrix};
use crate::panel::{PanelSet, TradingCalendar};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("panel has no `returns` field")]
    MissingReturns,
    #[error("too few dates for a split: {0} < 60")]
    TooFewDates(usize),
    #[error("split fractions must be positive and sum to 1")]
    BadFractions,
    #[error("weights shape {weights:?} does not match panel shape {panel:?}")]
    ShapeMismatch {
        weights: (usize, usize),
        panel: (usize, usize),
    },
}

/// Per-name weights in capital-fraction units. Invested days satisfy
/// sum(w) = 0 and sum|w| = 1; flat days are all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionMatrix {
    pub weights: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnlSeries {
    pub daily_pnl: Vec<f64>,
    pub cum_pnl: Vec<f64>,
}

impl PnlSeries {
    pub fn from_daily(daily: Vec<f64>) -> Self {
        let mut cum = Vec::with_capacity(daily.len());
        let mut acc = 0.0;
        for d in &daily {
            acc += d;
            cum.push(acc);
        }
        Self {
            daily_pnl: daily,
            cum_pnl: cum,
        }
    }

    pub fn total(&self) -> f64 {
        self.cum_pnl.last().copied().unwrap_or(0.0)
    }

    /// Sub-series over a date-index range, cumulative restarted at zero.
    pub fn slice(&self, range: &Range<usize>) -> PnlSeries {
        PnlSeries::from_daily(self.daily_pnl[range.clone()].to_vec())
    }

    /// CSV `date,daily_pnl,cum_pnl` over the given range.
    pub fn export_csv<W: Write>(
        &self,
        calendar: &TradingCalendar,
        range: Range<usize>,
        mut out: W,
    ) -> std::io::Result<()> {
        writeln!(out, "date,daily_pnl,cum_pnl")?;
        let sliced = self.slice(&range);
        for (k, t) in range.enumerate() {
            writeln!(
                out,
                "{},{},{}",
                calendar.date(t),
                sliced.daily_pnl[k],
                sliced.cum_pnl[k]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    /// Annualized: sqrt(252) * mean / std of daily PnL.
    pub sharpe: f64,
    /// CAGR: (1 + total_pnl)^(252/n_days) - 1.
    pub annual_return: f64,
    /// Largest peak-to-trough decline of additive cumulative PnL.
    pub max_drawdown: f64,
    /// Mean daily one-sided turnover.
    pub turnover: f64,
    /// Mean gross exposure.
    pub margin: f64,
    pub n_days: usize,
}

/// Daily simulation output: PnL plus the per-day turnover and gross series
/// needed to summarize arbitrary sub-ranges without re-running.
#[derive(Debug, Clone)]
pub struct BacktestFrame {
    pub pnl: PnlSeries,
    pub daily_turnover: Vec<f64>,
    pub daily_gross: Vec<f64>,
}

impl BacktestFrame {
    pub fn report(&self, range: Range<usize>) -> BacktestReport {
        metrics_from_daily(
            &self.pnl.daily_pnl[range.clone()],
            &self.daily_turnover[range.clone()],
            &self.daily_gross[range],
        )
    }

    pub fn full_report(&self) -> BacktestReport {
        self.report(0..self.pnl.daily_pnl.len())
    }
}

/// Chronologically contiguous train / validation / test date-index ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSplit {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl SampleSplit {
    /// Train and validation together (in-sample for allocation).
    pub fn in_sample(&self) -> Range<usize> {
        self.train.start..self.validation.end
    }
}

/// Rank-demean-normalize position rule.
pub fn signal_to_weights(signal: &SignalMatrix) -> PositionMatrix {
    let src = &signal.values;
    let (n_dates, n_syms) = src.shape();
    let mut weights = Matrix::filled(n_dates, n_syms, 0.0);
    let mut row = vec![0.0; n_syms];
    let mut ranks = vec![f64::NAN; n_syms];
    for t in 0..n_dates {
        for i in 0..n_syms {
            row[i] = src.get(t, i);
        }
        let n_present = row.iter().filter(|v| !is_missing(**v)).count();
        if n_present < 2 {
            continue; // flat day
        }
        ranks.iter_mut().for_each(|v| *v = f64::NAN);
        cs_rank(&row, &mut ranks);
        cs_demean(&ranks.clone(), &mut ranks);
        let gross: f64 = ranks
            .iter()
            .filter(|v| !is_missing(**v))
            .map(|v| v.abs())
            .sum();
        if gross < 1e-12 {
            continue; // all ranks tied
        }
        for i in 0..n_syms {
            if !is_missing(ranks[i]) {
                weights.set(t, i, ranks[i] / gross);
            }
        }
    }
    PositionMatrix { weights }
}

/// Simulate daily PnL. Positions from t-1 earn date-t returns; costs are
/// `cost_bps` basis points per unit of one-sided turnover; missing returns
/// contribute zero.
pub fn run_backtest_frame(
    weights: &PositionMatrix,
    panel: &PanelSet,
    cost_bps: f64,
) -> Result<BacktestFrame, BacktestError> {
    let returns = &panel
        .get_field("returns")
        .map_err(|_| BacktestError::MissingReturns)?
        .values;
    let w = &weights.weights;
    if w.shape() != returns.shape() {
        return Err(BacktestError::ShapeMismatch {
            weights: w.shape(),
            panel: returns.shape(),
        });
    }
    let (n_dates, n_syms) = w.shape();
    let mut daily = vec![0.0; n_dates];
    let mut turnover = vec![0.0; n_dates];
    let mut gross = vec![0.0; n_dates];
    for t in 0..n_dates {
        let mut pnl = 0.0;
        let mut tv = 0.0;
        let mut g = 0.0;
        for i in 0..n_syms {
            let w_now = w.get(t, i);
            let w_prev = if t > 0 { w.get(t - 1, i) } else { 0.0 };
            if t > 0 {
                let r = returns.get(t, i);
                if !is_missing(r) {
                    pnl += w_prev * r;
                }
            }
            tv += (w_now - w_prev).abs();
            g += w_now.abs();
        }
        turnover[t] = 0.5 * tv;
        gross[t] = g;
        daily[t] = pnl - cost_bps * 1e-4 * turnover[t];
    }
    Ok(BacktestFrame {
        pnl: PnlSeries::from_daily(daily),
        daily_turnover: turnover,
        daily_gross: gross,
    })
}

pub fn run_backtest(
    weights: &PositionMatrix,
    panel: &PanelSet,
    cost_bps: f64,
) -> Result<(PnlSeries, BacktestReport), BacktestError> {
    let frame = run_backtest_frame(weights, panel, cost_bps)?;
    let report = frame.full_report();
    Ok((frame.pnl, report))
}

/// Metric suite over daily series. Shared by full-period and per-split
/// reporting.
pub fn metrics_from_daily(
    daily_pnl: &[f64],
    daily_turnover: &[f64],
    daily_gross: &[f64],
) -> BacktestReport {
    let n = daily_pnl.len();
    if n == 0 {
        return BacktestReport {
            sharpe: 0.0,
            annual_return: 0.0,
            max_drawdown: 0.0,
            turnover: 0.0,
            margin: 0.0,
            n_days: 0,
        };
    }
    let nf = n as f64;
    let mean = daily_pnl.iter().sum::<f64>() / nf;
    let std = if n > 1 {
        (daily_pnl.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
    } else {
        0.0
    };
    let sharpe = if std < 1e-12 {
        0.0
    } else {
        TRADING_DAYS_PER_YEAR.sqrt() * mean / std
    };

    let total: f64 = daily_pnl.iter().sum();
    let annual_return = if total <= -1.0 {
        -1.0
    } else {
        (1.0 + total).powf(TRADING_DAYS_PER_YEAR / nf) - 1.0
    };

    let mut peak = 0.0f64;
    let mut cum = 0.0f64;
    let mut max_dd = 0.0f64;
    for &p in daily_pnl {
        cum += p;
        peak = peak.max(cum);
        max_dd = max_dd.max(peak - cum);
    }

    BacktestReport {
        sharpe,
        annual_return,
        max_drawdown: max_dd,
        turnover: daily_turnover.iter().sum::<f64>() / nf,
        margin: daily_gross.iter().sum::<f64>() / nf,
        n_days: n,
    }
}

/// Contiguous chronological split by fractions (default 0.6/0.2/0.2).
pub fn split_sample(
    calendar: &TradingCalendar,
    fractions: (f64, f64, f64),
) -> Result<SampleSplit, BacktestError> {
    let (a, b, c) = fractions;
    if a <= 0.0 || b <= 0.0 || c <= 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(BacktestError::BadFractions);
    }
    let n = calendar.len();
    if n < 60 {
        return Err(BacktestError::TooFewDates(n));
    }
    let t1 = (n as f64 * a).floor() as usize;
    let t2 = (n as f64 * (a + b)).floor() as usize;
    Ok(SampleSplit {
        train: 0..t1,
        validation: t1..t2,
        test: t2..n,
    })
}
