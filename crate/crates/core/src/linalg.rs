//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Reciprocal condition threshold below which a Gram matrix counts as singular.
pub const RCOND_TOL: f64 = 1e-12;

/// Reciprocal 2-norm condition number of a symmetric positive semi-definite
/// matrix after unit-diagonal equilibration.
pub fn sym_rcond(a: &DMatrix<f64>) -> f64 {
    let k = a.nrows();
    if k == 0 {
        return 0.0;
    }
    let mut scaled = a.clone();
    for i in 0..k {
        if !(a[(i, i)] > 0.0) || !a[(i, i)].is_finite() {
            return 0.0;
        }
    }
    for i in 0..k {
        for j in 0..k {
            scaled[(i, j)] = a[(i, j)] / (a[(i, i)] * a[(j, j)]).sqrt();
        }
    }
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) {
        return 0.0;
    }
    (min / max).max(0.0)
}

/// Reciprocal 2-norm condition number of a general square matrix after
/// row and column equilibration.
pub fn general_rcond(a: &DMatrix<f64>) -> f64 {
    let (r, c) = a.shape();
    if r == 0 || r != c {
        return 0.0;
    }
    let mut scaled = a.clone();
    for i in 0..r {
        let norm = a.row(i).norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return 0.0;
        }
        scaled.row_mut(i).scale_mut(1.0 / norm);
    }
    for j in 0..c {
        let norm = scaled.column(j).norm();
        if !(norm > 0.0) {
            return 0.0;
        }
        scaled.column_mut(j).scale_mut(1.0 / norm);
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) {
        return 0.0;
    }
    min / max
}

/// Inverse of a symmetric positive-definite matrix, refusing near-singular input.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rcond = sym_rcond(a);
    if rcond < RCOND_TOL {
        return Err(Error::RankDeficient { rcond });
    }
    let k = a.nrows();
    let d: Vec<f64> = (0..k).map(|i| a[(i, i)].sqrt()).collect();
    let scaled = DMatrix::from_fn(k, k, |i, j| a[(i, j)] / (d[i] * d[j]));
    let chol = scaled.cholesky().ok_or(Error::RankDeficient { rcond })?;
    let inv = chol.inverse();
    Ok(DMatrix::from_fn(k, k, |i, j| inv[(i, j)] / (d[i] * d[j])))
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let rcond = sym_rcond(a);
    if rcond < RCOND_TOL {
        return Err(Error::RankDeficient { rcond });
    }
    let k = a.nrows();
    let d: Vec<f64> = (0..k).map(|i| a[(i, i)].sqrt()).collect();
    let scaled = DMatrix::from_fn(k, k, |i, j| a[(i, j)] / (d[i] * d[j]));
    let rhs = DVector::from_fn(k, |i, _| b[i] / d[i]);
    let chol = scaled.cholesky().ok_or(Error::RankDeficient { rcond })?;
    let x = chol.solve(&rhs);
    Ok(DVector::from_fn(k, |i, _| x[i] / d[i]))
}

/// Ordinary least squares result.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    pub resid: DVector<f64>,
    pub ssr: f64,
    /// `(X'X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
}

/// OLS by Householder QR on the column-equilibrated design.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {n} rows, response has {}",
            y.len()
        )));
    }
    if n < k {
        return Err(Error::RankDeficient { rcond: 0.0 });
    }
    let norms: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    if norms.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::RankDeficient { rcond: 0.0 });
    }
    let mut xs = x.clone();
    for (j, s) in norms.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    let qr = xs.clone().qr();
    let r = qr.r();
    // rcond of the Gram matrix is the square of the rcond of R.
    let sv = r.singular_values();
    let rcond = (sv.min() / sv.max()).powi(2);
    if !(rcond >= RCOND_TOL) {
        return Err(Error::RankDeficient {
            rcond: if rcond.is_finite() { rcond } else { 0.0 },
        });
    }
    let qty = qr.q().transpose() * y;
    let coef_s = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { rcond })?;
    let coef = DVector::from_fn(k, |j, _| coef_s[j] / norms[j]);
    let resid = y - x * &coef;
    let ssr = resid.norm_squared();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::RankDeficient { rcond })?;
    let g_inv_s = &r_inv * r_inv.transpose();
    let xtx_inv = DMatrix::from_fn(k, k, |i, j| g_inv_s[(i, j)] / (norms[i] * norms[j]));
    Ok(LeastSquares {
        coef,
        resid,
        ssr,
        xtx_inv,
    })
}
