//! Small dense helpers on top of nalgebra: SPD factorizations that report the
//! smallest eigenvalue on failure, and a few conversions.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::sym::SymMatrix;
use crate::error::{Error, Result};

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

/// Cholesky factorization; on failure returns [`Error::Singular`] carrying
/// the smallest eigenvalue.
pub fn cholesky(m: &SymMatrix, context: &str) -> Result<Cholesky<f64, Dyn>> {
    cholesky_dense(m.as_matrix(), context)
}

pub fn cholesky_dense(m: &DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::singular(format!("{context}: non-finite entries"), None));
    }
    match Cholesky::new(m.clone()) {
        Some(c) if c.l_dirty().diagonal().iter().all(|d| *d > 0.0) => Ok(c),
        _ => Err(Error::singular(
            format!("{context}: matrix is not positive definite (smallest eigenvalue)"),
            Some(min_eigenvalue(m)),
        )),
    }
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn spd_inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let inv = cholesky_dense(m, context)?.inverse();
    let sym = 0.5 * (&inv + inv.transpose());
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::singular(context.to_string(), Some(min_eigenvalue(m))));
    }
    Ok(sym)
}

/// Condition number in the 2-norm of an SPD matrix, from its eigenvalues.
pub fn spd_condition(m: &DMatrix<f64>) -> f64 {
    let ev = m.clone().symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn log_det_from_cholesky(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).iter().copied().collect()
}
