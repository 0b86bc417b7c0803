//! The operator catalog: one signature per operator, covering eight
//! categories. Slot kinds drive parsing (integer arguments resolve to
//! window parameters or literals depending on the slot) and validation
//! (boolean-input operators reject real arguments).

use serde::{Deserialize, Serialize};

/// Inclusive bounds for window parameters.
pub const WINDOW_MIN: u32 = 2;
pub const WINDOW_MAX: u32 = 252;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    Mathematical,
    Horizontal,
    Group,
    Logical,
    Risk,
    TimeSeries,
    Transformation,
    Technical,
}

/// Output domain of an expression node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Real,
    Bool,
}

/// What an argument slot accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Real-valued series (boolean series coerce to 0/1).
    Series,
    /// Strictly boolean series.
    Bool,
    /// Integer window parameter in [WINDOW_MIN, WINDOW_MAX].
    Window,
    /// Numeric literal parameter (tail bounds and replacement value).
    Const,
    /// Series or a numeric literal (if_else branches).
    SeriesOrConst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    // mathematical
    Add,
    Subtract,
    Multiply,
    Divide,
    Power,
    Min,
    Max,
    Neg,
    Abs,
    Sign,
    Log,
    Sqrt,
    Inverse,
    // horizontal (cross-sectional per date)
    Rank,
    Zscore,
    Demean,
    Normalize,
    Quantile,
    // group-based (cross-sectional within group label)
    GroupRank,
    GroupMean,
    GroupZscore,
    // logical
    And,
    Or,
    Not,
    Equal,
    Less,
    Greater,
    IfElse,
    // time-series (trailing window per symbol)
    TsMean,
    TsStd,
    TsSum,
    TsMin,
    TsMax,
    TsDelay,
    TsDelta,
    TsRank,
    TsZscore,
    TsSkew,
    TsKurtosis,
    TsArgMax,
    TsArgMin,
    TsCorr,
    TsCov,
    TsIr,
    TsCoSkewness,
    TsCoKurtosis,
    TsRegression,
    TsRegressionRes,
    // risk
    TsBeta,
    TsSharpe,
    // transformation
    Sin,
    Cos,
    Tail,
    // technical
    TsMacd,
    TaRsi,
}

#[derive(Debug, Clone, Copy)]
pub struct OperatorSignature {
    pub op: Op,
    pub name: &'static str,
    pub category: Category,
    pub slots: &'static [Slot],
    pub output: Domain,
    pub requires_groups: bool,
    pub commutative: bool,
}

use Category as C;
use Domain::{Bool, Real};
use Slot::{Bool as SB, Const, Series as S, SeriesOrConst, Window as W};

macro_rules! sig {
    ($op:ident, $name:literal, $cat:expr, $slots:expr, $out:expr) => {
        sig!($op, $name, $cat, $slots, $out, groups = false, comm = false)
    };
    ($op:ident, $name:literal, $cat:expr, $slots:expr, $out:expr, comm) => {
        sig!($op, $name, $cat, $slots, $out, groups = false, comm = true)
    };
    ($op:ident, $name:literal, $cat:expr, $slots:expr, $out:expr, groups) => {
        sig!($op, $name, $cat, $slots, $out, groups = true, comm = false)
    };
    ($op:ident, $name:literal, $cat:expr, $slots:expr, $out:expr, groups = $g:expr, comm = $c:expr) => {
        OperatorSignature {
            op: Op::$op,
            name: $name,
            category: $cat,
            slots: $slots,
            output: $out,
            requires_groups: $g,
            commutative: $c,
        }
    };
}

pub static CATALOG: &[OperatorSignature] = &[
    sig!(Add, "add", C::Mathematical, &[S, S], Real, comm),
    sig!(Subtract, "subtract", C::Mathematical, &[S, S], Real),
    sig!(Multiply, "multiply", C::Mathematical, &[S, S], Real, comm),
    sig!(Divide, "divide", C::Mathematical, &[S, S], Real),
    sig!(Power, "power", C::Mathematical, &[S, S], Real),
    sig!(Min, "min", C::Mathematical, &[S, S], Real, comm),
    sig!(Max, "max", C::Mathematical, &[S, S], Real, comm),
    sig!(Neg, "neg", C::Mathematical, &[S], Real),
    sig!(Abs, "abs", C::Mathematical, &[S], Real),
    sig!(Sign, "sign", C::Mathematical, &[S], Real),
    sig!(Log, "log", C::Mathematical, &[S], Real),
    sig!(Sqrt, "sqrt", C::Mathematical, &[S], Real),
    sig!(Inverse, "inverse", C::Mathematical, &[S], Real),
    sig!(Rank, "rank", C::Horizontal, &[S], Real),
    sig!(Zscore, "zscore", C::Horizontal, &[S], Real),
    sig!(Demean, "demean", C::Horizontal, &[S], Real),
    sig!(Normalize, "normalize", C::Horizontal, &[S], Real),
    sig!(Quantile, "quantile", C::Horizontal, &[S, W], Real),
    sig!(GroupRank, "group_rank", C::Group, &[S], Real, groups),
    sig!(GroupMean, "group_mean", C::Group, &[S], Real, groups),
    sig!(GroupZscore, "group_zscore", C::Group, &[S], Real, groups),
    sig!(And, "and", C::Logical, &[SB, SB], Bool, comm),
    sig!(Or, "or", C::Logical, &[SB, SB], Bool, comm),
    sig!(Not, "not", C::Logical, &[SB], Bool),
    sig!(Equal, "equal", C::Logical, &[S, S], Bool, comm),
    sig!(Less, "less", C::Logical, &[S, S], Bool),
    sig!(Greater, "greater", C::Logical, &[S, S], Bool),
    sig!(
        IfElse,
        "if_else",
        C::Logical,
        &[SB, SeriesOrConst, SeriesOrConst],
        Real
    ),
    sig!(TsMean, "ts_mean", C::TimeSeries, &[S, W], Real),
    sig!(TsStd, "ts_std", C::TimeSeries, &[S, W], Real),
    sig!(TsSum, "ts_sum", C::TimeSeries, &[S, W], Real),
    sig!(TsMin, "ts_min", C::TimeSeries, &[S, W], Real),
    sig!(TsMax, "ts_max", C::TimeSeries, &[S, W], Real),
    sig!(TsDelay, "ts_delay", C::TimeSeries, &[S, W], Real),
    sig!(TsDelta, "ts_delta", C::TimeSeries, &[S, W], Real),
    sig!(TsRank, "ts_rank", C::TimeSeries, &[S, W], Real),
    sig!(TsZscore, "ts_zscore", C::TimeSeries, &[S, W], Real),
    sig!(TsSkew, "ts_skew", C::TimeSeries, &[S, W], Real),
    sig!(TsKurtosis, "ts_kurtosis", C::TimeSeries, &[S, W], Real),
    sig!(TsArgMax, "ts_arg_max", C::TimeSeries, &[S, W], Real),
    sig!(TsArgMin, "ts_arg_min", C::TimeSeries, &[S, W], Real),
    sig!(TsCorr, "ts_corr", C::TimeSeries, &[S, S, W], Real),
    sig!(TsCov, "ts_cov", C::TimeSeries, &[S, S, W], Real),
    sig!(TsIr, "ts_ir", C::TimeSeries, &[S, W], Real),
    sig!(
        TsCoSkewness,
        "ts_co_skewness",
        C::TimeSeries,
        &[S, S, W],
        Real
    ),
    sig!(
        TsCoKurtosis,
        "ts_co_kurtosis",
        C::TimeSeries,
        &[S, S, W],
        Real
    ),
    sig!(TsRegression, "ts_regression", C::TimeSeries, &[S, S, W], Real),
    sig!(
        TsRegressionRes,
        "ts_regression_res",
        C::TimeSeries,
        &[S, S, W],
        Real
    ),
    sig!(TsBeta, "ts_beta", C::Risk, &[S, S, W], Real),
    sig!(TsSharpe, "ts_sharpe", C::Risk, &[S, W], Real),
    sig!(Sin, "sin", C::Transformation, &[S], Real),
    sig!(Cos, "cos", C::Transformation, &[S], Real),
    sig!(Tail, "tail", C::Transformation, &[S, Const, Const, Const], Real),
    sig!(TsMacd, "ts_macd", C::Technical, &[S, W, W], Real),
    sig!(TaRsi, "ta_rsi", C::Technical, &[S, W], Real),
];

impl Op {
    pub fn signature(self) -> &'static OperatorSignature {
        CATALOG
            .iter()
            .find(|s| s.op == self)
            .expect("every Op appears in CATALOG")
    }

    pub fn name(self) -> &'static str {
        self.signature().name
    }

    pub fn from_name(name: &str) -> Option<Op> {
        CATALOG.iter().find(|s| s.name == name).map(|s| s.op)
    }

    pub fn arity(self) -> usize {
        self.signature().slots.len()
    }

    pub fn output(self) -> Domain {
        self.signature().output
    }

    pub fn is_commutative(self) -> bool {
        self.signature().commutative
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names_unique_and_resolvable() {
        let mut names: Vec<&str> = CATALOG.iter().map(|s| s.name).collect();
        names.sort_unstable();
        let before = names.len();
        names.dedup();
        assert_eq!(names.len(), before, "duplicate operator names");
        for s in CATALOG {
            assert_eq!(Op::from_name(s.name), Some(s.op));
            assert_eq!(s.op.signature().name, s.name);
        }
    }

    #[test]
    fn every_op_has_exactly_one_signature() {
        for s in CATALOG {
            assert_eq!(CATALOG.iter().filter(|t| t.op == s.op).count(), 1);
        }
    }

    #[test]
    fn logical_ops_output_bool() {
        for op in [Op::And, Op::Or, Op::Not, Op::Equal, Op::Less, Op::Greater] {
            assert_eq!(op.output(), Domain::Bool);
        }
        assert_eq!(Op::IfElse.output(), Domain::Real);
    }
}
