//! Panel data substrate: aligned date × symbol matrices, one per field,
//! plus the trading calendar and optional symbol group labels. A panel is
//! immutable once built; every downstream stage reads it concurrently.

mod csv_io;
mod date;
mod synthetic;

pub use csv_io::{ingest_csv, load_groups, CsvLayout};
pub use date::Date;
pub use synthetic::{generate_synthetic, SyntheticConfig};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{is_missing, Matrix, MISSING};

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("duplicate record for ({date}, {symbol}, {field})")]
    DuplicateRecord {
        date: String,
        symbol: String,
        field: String,
    },
    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] ::csv::Error),
}

/// Strictly increasing list of trading dates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradingCalendar {
    dates: Vec<Date>,
}

impl TradingCalendar {
    /// Build from a sorted, deduplicated date list. Panics on violations;
    /// construction paths are expected to sort/dedup first.
    pub fn new(dates: Vec<Date>) -> Self {
        assert!(
            dates.windows(2).all(|w| w[0] < w[1]),
            "calendar dates must be strictly increasing"
        );
        Self { dates }
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    pub fn date(&self, idx: usize) -> Date {
        self.dates[idx]
    }

    pub fn index_of(&self, date: Date) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }
}

/// One named field's observations over the full panel grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelField {
    pub name: String,
    pub values: Matrix,
}

/// Aligned panel: every field shares the calendar and symbol order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSet {
    calendar: TradingCalendar,
    symbols: Vec<String>,
    fields: BTreeMap<String, PanelField>,
    groups: Option<BTreeMap<String, String>>,
}

impl PanelSet {
    /// Assemble a panel, enforcing alignment invariants.
    pub fn new(
        calendar: TradingCalendar,
        symbols: Vec<String>,
        fields: BTreeMap<String, PanelField>,
        groups: Option<BTreeMap<String, String>>,
    ) -> Self {
        let mut seen = std::collections::BTreeSet::new();
        for s in &symbols {
            assert!(seen.insert(s.clone()), "duplicate symbol {s}");
        }
        for f in fields.values() {
            assert_eq!(
                f.values.shape(),
                (calendar.len(), symbols.len()),
                "field {} misaligned with panel grid",
                f.name
            );
        }
        Self {
            calendar,
            symbols,
            fields,
            groups,
        }
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn n_dates(&self) -> usize {
        self.calendar.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn field_names(&self) -> Vec<String> {
        self.fields.keys().cloned().collect()
    }

    pub fn has_field(&self, name: &str) -> bool {
        self.fields.contains_key(name)
    }

    /// Read-only view of a registered field.
    pub fn get_field(&self, name: &str) -> Result<&PanelField, PanelError> {
        self.fields
            .get(name)
            .ok_or_else(|| PanelError::UnknownField(name.to_string()))
    }

    pub fn groups(&self) -> Option<&BTreeMap<String, String>> {
        self.groups.as_ref()
    }

    pub fn has_groups(&self) -> bool {
        self.groups.is_some()
    }

    /// Attach group labels (symbol → label) after construction.
    pub fn with_groups(mut self, groups: BTreeMap<String, String>) -> Self {
        self.groups = Some(groups);
        self
    }

    /// Group label per symbol index, None for unlabeled symbols.
    pub fn group_labels(&self) -> Option<Vec<Option<&str>>> {
        self.groups.as_ref().map(|g| {
            self.symbols
                .iter()
                .map(|s| g.get(s).map(String::as_str))
                .collect()
        })
    }
}

/// Derive a simple-returns field (close_t / close_{t-1} - 1) from `close`.
/// First row is missing; cells stay missing when either close is absent
/// or the ratio is not finite.
pub(crate) fn derive_returns(close: &Matrix) -> Matrix {
    let (n_dates, n_syms) = close.shape();
    let mut ret = Matrix::missing(n_dates, n_syms);
    for sym in 0..n_syms {
        let col = close.column(sym);
        for t in 1..n_dates {
            let prev = col[t - 1];
            let cur = col[t];
            if !is_missing(prev) && !is_missing(cur) {
                let r = cur / prev - 1.0;
                ret.set(t, sym, if r.is_finite() { r } else { MISSING });
            }
        }
    }
    ret
}
