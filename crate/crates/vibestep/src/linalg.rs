//! Small shared linear-algebra helpers.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Matrix to row-major nested vectors, for stable JSON serialization.
pub fn mat_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Row-major nested vectors back to a matrix. Rows must be nonempty and
/// rectangular.
pub fn rows_to_mat(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::MalformedModel {
            reason: "empty matrix".into(),
        });
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::MalformedModel {
            reason: "ragged or empty matrix rows".into(),
        });
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Force exact symmetry: (m + m^T) / 2.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// log(sum_i exp(x_i)) without overflow. Returns -inf for empty input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Column vector from a slice.
pub fn vec_of(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let rows = mat_to_rows(&m);
        assert_eq!(rows, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(rows_to_mat(&rows).unwrap(), m);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(rows_to_mat(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(rows_to_mat(&[]).is_err());
    }

    #[test]
    fn logsumexp_matches_naive_and_survives_extremes() {
        let xs = [0.1_f64, -0.4, 2.0];
        let naive: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((logsumexp(&xs) - naive).abs() < 1e-14);
        // would overflow naively
        let big = [1000.0, 1000.0];
        assert!((logsumexp(&big) - (1000.0 + 2.0_f64.ln())).abs() < 1e-12);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }
}
