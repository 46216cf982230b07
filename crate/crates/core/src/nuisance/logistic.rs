//! Logistic maximum likelihood by Newton-Raphson with step halving.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    /// Convergence threshold on the max-norm of the mean score.
    pub tol: f64,
    pub max_iter: usize,
    /// Ridge penalty on the slopes (not the intercept); 0 gives the plain MLE.
    pub ridge: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            tol: 1e-8,
            max_iter: 100,
            ridge: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// `max_j |(1/n) sum_i xt_ij (t_i - e_i)|` at the solution (penalized score when `ridge > 0`).
    pub score_norm: f64,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let ez = z.exp();
        ez / (1.0 + ez)
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn linear_predictor(x: &Covariates, beta: &[f64]) -> Vec<f64> {
    x.rows()
        .map(|r| beta[0] + r.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// Mean log-likelihood minus the ridge term.
fn objective(eta: &[f64], t: &[f64], beta: &[f64], ridge: f64) -> f64 {
    let n = t.len() as f64;
    let ll: f64 = eta.iter().zip(t).map(|(&z, &ti)| ti * z - softplus(z)).sum::<f64>() / n;
    ll - 0.5 * ridge * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

/// Mean score with the augmented design `(1, x)`.
fn score(x: &Covariates, eta: &[f64], t: &[f64], beta: &[f64], ridge: f64) -> DVector<f64> {
    let d = x.ncols() + 1;
    let n = t.len() as f64;
    let mut s = DVector::zeros(d);
    for (i, r) in x.rows().enumerate() {
        let resid = t[i] - sigmoid(eta[i]);
        s[0] += resid;
        for j in 0..r.len() {
            s[j + 1] += resid * r[j];
        }
    }
    s /= n;
    for j in 1..d {
        s[j] -= ridge * beta[j];
    }
    s
}

fn information(x: &Covariates, eta: &[f64], ridge: f64) -> DMatrix<f64> {
    let d = x.ncols() + 1;
    let n = eta.len() as f64;
    let mut h = DMatrix::zeros(d, d);
    let mut xt = vec![1.0; d];
    for (i, r) in x.rows().enumerate() {
        let e = sigmoid(eta[i]);
        let w = e * (1.0 - e);
        xt[1..].copy_from_slice(r);
        for a in 0..d {
            let wa = w * xt[a];
            for b in a..d {
                h[(a, b)] += wa * xt[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    h /= n;
    for j in 1..d {
        h[(j, j)] += ridge;
    }
    h
}

/// Complete separation: every unit is on the correct side of a large-margin hyperplane.
fn separated(eta: &[f64], t: &[f64]) -> bool {
    let max_abs = eta.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    max_abs > 30.0 && eta.iter().zip(t).all(|(&z, &ti)| (ti == 1.0) == (z > 0.0))
}

pub fn fit(x: &Covariates, t: &[f64], opts: &LogisticOptions) -> Result<LogisticFit> {
    let n = t.len();
    let p = x.ncols();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.nrows(),
        });
    }
    if n < p + 1 {
        return Err(invalid(format!("logistic fit needs n >= p + 1 (n = {n}, p = {p})")));
    }
    let n1 = t.iter().filter(|&&v| v == 1.0).count();
    if n1 == 0 || n1 == n {
        return Err(invalid("logistic fit needs both treatment arms"));
    }
    if opts.ridge < 0.0 || opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(invalid("logistic options: tol must be > 0 and ridge >= 0"));
    }

    let mut beta = vec![0.0; p + 1];
    let mut eta = linear_predictor(x, &beta);
    let mut obj = objective(&eta, t, &beta, opts.ridge);
    let mut s = score(x, &eta, t, &beta, opts.ridge);
    let norm = |b: &[f64]| b.iter().map(|v| v * v).sum::<f64>().sqrt();

    for iter in 0..=opts.max_iter {
        let score_norm = s.amax();
        if score_norm <= opts.tol {
            return Ok(LogisticFit {
                intercept: beta[0],
                coefficients: beta[1..].to_vec(),
                iterations: iter,
                score_norm,
            });
        }
        if separated(&eta, t) {
            return Err(Error::Separation { coef_norm: norm(&beta) });
        }
        if iter == opts.max_iter {
            break;
        }
        let h = information(x, &eta, opts.ridge);
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&s),
            None => return Err(Error::Separation { coef_norm: norm(&beta) }),
        };
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::Separation { coef_norm: norm(&beta) });
        }

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, d)| b + scale * d).collect();
            let cand_eta = linear_predictor(x, &cand);
            let cand_obj = objective(&cand_eta, t, &cand, opts.ridge);
            if cand_obj >= obj - 1e-15 * obj.abs().max(1.0) {
                beta = cand;
                eta = cand_eta;
                obj = cand_obj;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // No ascent direction left at machine precision.
            break;
        }
        s = score(x, &eta, t, &beta, opts.ridge);
    }

    let score_norm = s.amax();
    if score_norm <= opts.tol {
        return Ok(LogisticFit {
            intercept: beta[0],
            coefficients: beta[1..].to_vec(),
            iterations: opts.max_iter,
            score_norm,
        });
    }
    if norm(&beta) > 1e3 || separated(&eta, t) {
        return Err(Error::Separation { coef_norm: norm(&beta) });
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        score_norm,
    })
}

/// Max-norm of the mean unpenalized score at `(intercept, coef)`.
pub fn score_residual(x: &Covariates, t: &[f64], intercept: f64, coef: &[f64]) -> f64 {
    let mut beta = vec![intercept];
    beta.extend_from_slice(coef);
    let eta = linear_predictor(x, &beta);
    score(x, &eta, t, &beta, 0.0).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn sigmoid_and_softplus_are_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0 && sigmoid(-800.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-12);
        assert!(softplus(-1000.0) >= 0.0);
    }

    #[test]
    fn no_signal_gives_near_zero_coefficients() {
        let mut rng = SplitMix64::new(11);
        let n = 20_000;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let t: Vec<f64> = (0..n).map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }).collect();
        let x = Covariates::from_rows(&rows).unwrap();
        let f = fit(&x, &t, &LogisticOptions::default()).unwrap();
        assert!(f.score_norm <= 1e-8);
        assert!(f.intercept.abs() < 0.05);
        for c in &f.coefficients {
            assert!(c.abs() < 0.05, "{c}");
        }
    }

    #[test]
    fn separation_is_reported() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 - 19.5]).collect();
        let t: Vec<f64> = (0..40).map(|i| if i >= 20 { 1.0 } else { 0.0 }).collect();
        let x = Covariates::from_rows(&rows).unwrap();
        match fit(&x, &t, &LogisticOptions::default()) {
            Err(Error::Separation { coef_norm }) => assert!(coef_norm > 1.0),
            other => panic!("expected separation, got {other:?}"),
        }
    }

    #[test]
    fn ridge_rescues_separation() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 - 19.5]).collect();
        let t: Vec<f64> = (0..40).map(|i| if i >= 20 { 1.0 } else { 0.0 }).collect();
        let x = Covariates::from_rows(&rows).unwrap();
        let opts = LogisticOptions {
            ridge: 0.1,
            ..Default::default()
        };
        let f = fit(&x, &t, &opts).unwrap();
        assert!(f.coefficients[0] > 0.0 && f.coefficients[0].is_finite());
    }

    #[test]
    fn preconditions() {
        let x = Covariates::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(fit(&x, &[1.0, 1.0], &LogisticOptions::default()).is_err());
        let x = Covariates::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(fit(&x, &[1.0], &LogisticOptions::default()).is_err());
    }

    #[test]
    fn non_convergence_reports_score() {
        let mut rng = SplitMix64::new(5);
        let rows: Vec<Vec<f64>> = (0..500).map(|_| vec![rng.normal()]).collect();
        let t: Vec<f64> = rows
            .iter()
            .map(|r| if rng.bernoulli(sigmoid(r[0])) { 1.0 } else { 0.0 })
            .collect();
        let x = Covariates::from_rows(&rows).unwrap();
        let opts = LogisticOptions {
            max_iter: 1,
            tol: 1e-14,
            ridge: 0.0,
        };
        match fit(&x, &t, &opts) {
            Err(Error::NonConvergence { iterations, score_norm }) => {
                assert_eq!(iterations, 1);
                assert!(score_norm > 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }
}
