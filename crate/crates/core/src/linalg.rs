//! Small dense solvers shared by the surrogate and the live evaluators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot size below which a Gram matrix is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

/// Solves `a x = b` for symmetric positive-definite `a` via Cholesky.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Singular);
    }
    let chol = a.cholesky().ok_or(Error::Singular)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if min_pivot < PIVOT_TOLERANCE * scale {
        return Err(Error::Singular);
    }
    Ok(chol.solve(b))
}

/// Weighted ridge regression with an unpenalized intercept.
///
/// Returns `(coefficients, intercepts)` with one column of coefficients per
/// target column of `y`.
pub(crate) fn ridge(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    weights: Option<&[f64]>,
    lambda: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (rows, cols) = x.shape();
    if rows != y.nrows() || rows == 0 {
        return Err(Error::shape(format!("{rows} feature rows vs {} targets", y.nrows())));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("ridge penalty {lambda} must be finite and >= 0")));
    }
    let w = match weights {
        Some(w) if w.len() != rows => return Err(Error::shape("one weight per sample required")),
        Some(w) => DVector::from_column_slice(w),
        None => DVector::from_element(rows, 1.0),
    };
    let total: f64 = w.sum();
    if !(total > 0.0) {
        return Err(Error::invalid("sample weights must sum to a positive value"));
    }
    let x_mean = (x.transpose() * &w) / total;
    let y_mean = (y.transpose() * &w) / total;
    let mut xc = x.clone();
    let mut yc = y.clone();
    for r in 0..rows {
        let sw = w[r].sqrt();
        for c in 0..cols {
            xc[(r, c)] = (xc[(r, c)] - x_mean[c]) * sw;
        }
        for c in 0..y.ncols() {
            yc[(r, c)] = (yc[(r, c)] - y_mean[c]) * sw;
        }
    }
    let mut gram = xc.transpose() * &xc;
    for d in 0..cols {
        gram[(d, d)] += lambda;
    }
    let coef = solve_spd(gram, &(xc.transpose() * &yc))?;
    let intercept = &y_mean - coef.transpose() * &x_mean;
    Ok((coef, intercept))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_fit() {
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 1.0, 0.0, 2.0, 1.0, 3.0, 5.0]);
        let y = DMatrix::from_fn(4, 1, |r, _| 2.0 * x[(r, 0)] - x[(r, 1)] + 0.5);
        let (coef, b) = ridge(&x, &y, None, 0.0).unwrap();
        assert!((coef[(0, 0)] - 2.0).abs() < 1e-10);
        assert!((coef[(1, 0)] + 1.0).abs() < 1e-10);
        assert!((b[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn collinear_columns_are_singular() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = DMatrix::from_element(3, 1, 1.0);
        assert!(matches!(ridge(&x, &y, None, 0.0), Err(Error::Singular)));
        assert!(ridge(&x, &y, None, 1e-3).is_ok());
    }
}
