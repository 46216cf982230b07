//! Ordinary least squares with an intercept, via Householder QR.

use nalgebra::{DMatrix, DVector};

use crate::data::Covariates;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// Relative pivot size below which a design column is treated as dependent.
const RANK_TOL: f64 = 1e-10;

pub fn fit(x: &Covariates, y: &[f64]) -> Result<OlsFit> {
    let n = y.len();
    let p = x.ncols();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.nrows(),
        });
    }
    if n < p + 1 {
        return Err(invalid(format!("OLS needs n >= p + 1 (n = {n}, p = {p})")));
    }
    let d = p + 1;

    // Centre the covariates so the QR pivots are not swamped by the intercept.
    let means: Vec<f64> = (0..p).map(|j| x.rows().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let design = DMatrix::from_fn(n, d, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) - means[j - 1] });
    let col_norms: Vec<f64> = (0..d).map(|j| design.column(j).norm()).collect();

    let qr = design.qr();
    let r = qr.r();
    for j in 0..d {
        if col_norms[j] == 0.0 || r[(j, j)].abs() <= RANK_TOL * col_norms[j] {
            return Err(Error::RankDeficient { column: j });
        }
    }
    let mut rhs = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut rhs);
    let rhs = rhs.rows(0, d).into_owned();
    let gamma = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Singular("OLS triangular solve".into()))?;

    let coefficients: Vec<f64> = gamma.iter().skip(1).copied().collect();
    let intercept = gamma[0] - coefficients.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    Ok(OlsFit {
        intercept,
        coefficients,
    })
}

/// Max-norm of `(1/n) sum_i xt_i (y_i - yhat_i)`.
pub fn normal_equation_residual(x: &Covariates, y: &[f64], fit: &OlsFit) -> f64 {
    let d = x.ncols() + 1;
    let mut acc = vec![0.0; d];
    for (i, r) in x.rows().enumerate() {
        let yhat = fit.intercept + r.iter().zip(&fit.coefficients).map(|(a, b)| a * b).sum::<f64>();
        let e = y[i] - yhat;
        acc[0] += e;
        for j in 0..r.len() {
            acc[j + 1] += e * r[j];
        }
    }
    acc.iter().map(|v| (v / y.len() as f64).abs()).fold(0.0, f64::max)
}
