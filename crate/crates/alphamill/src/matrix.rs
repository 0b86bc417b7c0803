//! Dense date × symbol matrices with explicit missing cells.
//!
//! Missing is encoded as NaN, which is distinguishable from every finite
//! value and propagates naturally through arithmetic. Storage is
//! column-major (one contiguous run per symbol) so that trailing-window
//! kernels walk contiguous memory.

use serde::{Deserialize, Serialize};

/// Marker for an absent observation.
pub const MISSING: f64 = f64::NAN;

/// True when a cell holds no observation.
#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

/// A dates × symbols matrix of f64 with NaN-coded missing cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Matrix {
    n_dates: usize,
    n_symbols: usize,
    /// Column-major: index = symbol * n_dates + date.
    data: Vec<f64>,
}

/// Bit-level equality so missing (NaN) cells compare equal to themselves.
impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.n_dates == other.n_dates
            && self.n_symbols == other.n_symbols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Matrix {
    /// All-missing matrix of the given shape.
    pub fn missing(n_dates: usize, n_symbols: usize) -> Self {
        Self {
            n_dates,
            n_symbols,
            data: vec![MISSING; n_dates * n_symbols],
        }
    }

    /// Matrix filled with a constant.
    pub fn filled(n_dates: usize, n_symbols: usize, value: f64) -> Self {
        Self {
            n_dates,
            n_symbols,
            data: vec![value; n_dates * n_symbols],
        }
    }

    /// Build from a row-major nested Vec (rows = dates). Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_dates = rows.len();
        let n_symbols = rows.first().map_or(0, Vec::len);
        let mut m = Self::missing(n_dates, n_symbols);
        for (t, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_symbols, "ragged row in Matrix::from_rows");
            for (i, &v) in row.iter().enumerate() {
                m.set(t, i, v);
            }
        }
        m
    }

    pub fn n_dates(&self) -> usize {
        self.n_dates
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_dates, self.n_symbols)
    }

    #[inline]
    pub fn get(&self, date: usize, symbol: usize) -> f64 {
        debug_assert!(date < self.n_dates && symbol < self.n_symbols);
        self.data[symbol * self.n_dates + date]
    }

    #[inline]
    pub fn set(&mut self, date: usize, symbol: usize, value: f64) {
        debug_assert!(date < self.n_dates && symbol < self.n_symbols);
        self.data[symbol * self.n_dates + date] = value;
    }

    /// Contiguous time series for one symbol.
    #[inline]
    pub fn column(&self, symbol: usize) -> &[f64] {
        &self.data[symbol * self.n_dates..(symbol + 1) * self.n_dates]
    }

    #[inline]
    pub fn column_mut(&mut self, symbol: usize) -> &mut [f64] {
        &mut self.data[symbol * self.n_dates..(symbol + 1) * self.n_dates]
    }

    /// Copy of one date's cross-section (strided gather).
    pub fn row(&self, date: usize) -> Vec<f64> {
        (0..self.n_symbols).map(|i| self.get(date, i)).collect()
    }

    /// Write one date's cross-section back.
    pub fn set_row(&mut self, date: usize, values: &[f64]) {
        assert_eq!(values.len(), self.n_symbols);
        for (i, &v) in values.iter().enumerate() {
            self.set(date, i, v);
        }
    }

    /// Count of non-missing cells.
    pub fn count_present(&self) -> usize {
        self.data.iter().filter(|v| !is_missing(**v)).count()
    }

    /// Apply `f` to every cell in place (missing cells included).
    pub fn map_inplace<F: Fn(f64) -> f64>(&mut self, f: F) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    /// True when both matrices have the same shape, identical missing masks,
    /// and all present cells differ by at most `tol`.
    pub fn approx_eq(&self, other: &Matrix, tol: f64) -> bool {
        self.max_abs_diff(other).is_some_and(|d| d <= tol)
    }

    /// Maximum absolute difference over present cells; None when shapes or
    /// missing masks differ.
    pub fn max_abs_diff(&self, other: &Matrix) -> Option<f64> {
        if self.shape() != other.shape() {
            return None;
        }
        let mut worst = 0.0f64;
        for (a, b) in self.data.iter().zip(&other.data) {
            match (is_missing(*a), is_missing(*b)) {
                (true, true) => {}
                (false, false) => worst = worst.max((a - b).abs()),
                _ => return None,
            }
        }
        Some(worst)
    }

    /// Raw storage access for bulk operations.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Copy of a contiguous date range (all symbols).
    pub fn slice_dates(&self, range: std::ops::Range<usize>) -> Matrix {
        let mut out = Matrix::missing(range.len(), self.n_symbols);
        for sym in 0..self.n_symbols {
            let src = &self.column(sym)[range.clone()];
            out.column_mut(sym).copy_from_slice(src);
        }
        out
    }
}
