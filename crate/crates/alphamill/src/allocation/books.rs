//! Blend per-alpha position books into one portfolio book.

use super::{AllocationError, PortfolioWeights};
use crate::backtest::PositionMatrix;
use crate::matrix::Matrix;

/// Cell-wise convex combination of books, re-normalized per date to unit
/// gross exposure. Dates where the blend cancels to zero stay flat.
pub fn combine_books(
    weights: &PortfolioWeights,
    books: &[PositionMatrix],
) -> Result<PositionMatrix, AllocationError> {
    if weights.weights.len() != books.len() || books.is_empty() {
        return Err(AllocationError::ShapeMismatch);
    }
    weights.check()?;
    let shape = books[0].weights.shape();
    for book in books {
        if book.weights.shape() != shape {
            return Err(AllocationError::CalendarMismatch);
        }
    }
    let (n_dates, n_syms) = shape;
    let mut out = Matrix::filled(n_dates, n_syms, 0.0);
    for t in 0..n_dates {
        let mut gross = 0.0;
        for i in 0..n_syms {
            let mut v = 0.0;
            for (a, book) in weights.weights.iter().zip(books) {
                v += a * book.weights.get(t, i);
            }
            out.set(t, i, v);
            gross += v.abs();
        }
        if gross > 1e-12 {
            for i in 0..n_syms {
                out.set(t, i, out.get(t, i) / gross);
            }
        } else {
            for i in 0..n_syms {
                out.set(t, i, 0.0);
            }
        }
    }
    Ok(PositionMatrix { weights: out })
}
