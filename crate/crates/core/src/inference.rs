//! Plug-in asymptotic variances, confidence intervals and design planning.
//!
//! Every variance here is an estimate of the asymptotic variance `V` of
//! `sqrt(n) (estimate - RR)`, so the standard error is `sqrt(V / n)`.
//!
//! Moment conventions. Arm means and arm variances for the Neyman estimator
//! are normalized by the arm size. The Horvitz-Thompson and IPW variances use
//! the inverse-probability weighted moments `(1/n) sum t y^k / e^k` (and the
//! control analogue), which for a constant propensity `e = n1/n` coincide with
//! the arm-normalized ones. Under these conventions, for binary outcomes,
//! `var_neyman / n` equals `RR^2` times the Katz log-scale variance.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::error::{invalid, Arm, Error, Result};
use crate::estimators::CrossFitted;
use crate::nuisance::{OutcomeModel, PropensityKind, PropensityModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiStyle {
    Wald,
    LogDelta,
    Katz,
}

impl CiStyle {
    pub fn name(self) -> &'static str {
        match self {
            CiStyle::Wald => "wald",
            CiStyle::LogDelta => "log_delta",
            CiStyle::Katz => "katz",
        }
    }
}

impl std::fmt::Display for CiStyle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CiStyle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "wald" => Ok(CiStyle::Wald),
            "log_delta" | "log" => Ok(CiStyle::LogDelta),
            "katz" => Ok(CiStyle::Katz),
            _ => Err(invalid(format!(
                "unknown CI style '{s}' (expected wald, log_delta or katz)"
            ))),
        }
    }
}

// Acklam's rational approximation to the inverse normal CDF.
#[allow(clippy::excessive_precision)]
const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ACKLAM_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Standard normal quantile. Acklam's approximation (relative error about
/// 1e-9) followed by one Halley step on `erfc`, which brings it to roughly
/// machine precision.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let (a, b, c, d) = (ACKLAM_A, ACKLAM_B, ACKLAM_C, ACKLAM_D);
    let p_low = 0.02425;
    let x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    };
    let e = 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// `z_{1 - alpha/2}`; `alpha` in `(0, 1]`.
pub fn z_two_sided(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(normal_quantile(1.0 - alpha / 2.0))
}

struct ArmMoments {
    n: f64,
    n1: f64,
    mean1: f64,
    mean0: f64,
    var1: f64,
    var0: f64,
}

fn arm_moments(d: &ObservationalDataset) -> Result<ArmMoments> {
    d.require_both_arms()?;
    let n1 = d.n1() as f64;
    let n0 = d.n0() as f64;
    let (mut s1, mut s0) = (0.0, 0.0);
    for (&t, &y) in d.t().iter().zip(d.y()) {
        if t {
            s1 += y;
        } else {
            s0 += y;
        }
    }
    let (mean1, mean0) = (s1 / n1, s0 / n0);
    let (mut q1, mut q0) = (0.0, 0.0);
    for (&t, &y) in d.t().iter().zip(d.y()) {
        if t {
            q1 += (y - mean1).powi(2);
        } else {
            q0 += (y - mean0).powi(2);
        }
    }
    if mean1 == 0.0 {
        return Err(Error::ZeroArmMean(Arm::Treated));
    }
    if mean0 == 0.0 {
        return Err(Error::ZeroArmMean(Arm::Control));
    }
    Ok(ArmMoments {
        n: d.n() as f64,
        n1,
        mean1,
        mean0,
        var1: q1 / n1,
        var0: q0 / n0,
    })
}

pub fn var_neyman(d: &ObservationalDataset) -> Result<f64> {
    let m = arm_moments(d)?;
    let e = m.n1 / m.n;
    let tau = m.mean1 / m.mean0;
    Ok(tau * tau * (m.var1 / (e * m.mean1 * m.mean1) + m.var0 / ((1.0 - e) * m.mean0 * m.mean0)))
}

/// Horvitz-Thompson variance at design propensity `e`.
pub fn var_ht(d: &ObservationalDataset, e: f64) -> Result<f64> {
    if !(e > 0.0 && e < 1.0) {
        return Err(invalid(format!("design propensity must lie in (0, 1), got {e}")));
    }
    d.require_both_arms()?;
    let w: Vec<f64> = vec![e; d.n()];
    weighted_variance(d, &w)
}

/// IPW variance with the model's (clipped) propensities.
pub fn var_ipw(d: &ObservationalDataset, e_hat: &PropensityModel) -> Result<f64> {
    d.require_dim(e_hat.p)?;
    d.require_both_arms()?;
    let e = e_hat.predict_all(d.x())?;
    weighted_variance(d, &e)
}

/// `tau^2 [ mean(g1^2) / mean(g1)^2 + mean(g0^2) / mean(g0)^2 ]` with
/// `g1 = t y / e`, `g0 = (1 - t) y / (1 - e)` and `tau = mean(g1) / mean(g0)`.
fn weighted_variance(d: &ObservationalDataset, e: &[f64]) -> Result<f64> {
    let n = d.n() as f64;
    let (mut a1, mut a0, mut b1, mut b0) = (0.0, 0.0, 0.0, 0.0);
    for ((&t, &y), &ei) in d.t().iter().zip(d.y()).zip(e) {
        if t {
            let g = y / ei;
            a1 += g;
            b1 += g * g;
        } else {
            let g = y / (1.0 - ei);
            a0 += g;
            b0 += g * g;
        }
    }
    let (a1, a0, b1, b0) = (a1 / n, a0 / n, b1 / n, b0 / n);
    if a1 == 0.0 {
        return Err(Error::ZeroArmMean(Arm::Treated));
    }
    if a0 == 0.0 {
        return Err(Error::ZeroArmMean(Arm::Control));
    }
    let tau = a1 / a0;
    Ok(tau * tau * (b1 / (a1 * a1) + b0 / (a0 * a0)))
}

/// Variance of the G-formula estimator with fixed outcome surfaces:
/// `tau^2 Var_n(mu1 / G1 - mu0 / G0)`, `G_t` the mean prediction over all rows.
pub fn var_g(d: &ObservationalDataset, mu0: &OutcomeModel, mu1: &OutcomeModel) -> Result<f64> {
    d.require_dim(mu0.p)?;
    d.require_dim(mu1.p)?;
    let p0 = mu0.predict_all(d.x())?;
    let p1 = mu1.predict_all(d.x())?;
    ratio_variance(&p1, &p0)
}

/// Variance shared by the one-step and AIPW estimators, from out-of-fold
/// AIPW scores.
pub fn var_os(d: &ObservationalDataset, cf: &CrossFitted) -> Result<f64> {
    let (g1, g0) = cf.scores(d);
    ratio_variance(&g1, &g0)
}

/// `tau^2 (1/n) sum (D_i - mean D)^2` with `D_i = a_i / mean(a) - b_i / mean(b)`
/// and `tau = mean(a) / mean(b)`.
pub fn ratio_variance(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    if a.is_empty() || a.len() != b.len() {
        return Err(invalid(
            "ratio variance needs two equal-length, non-empty score vectors",
        ));
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    if ma == 0.0 {
        return Err(Error::ZeroArmMean(Arm::Treated));
    }
    if mb == 0.0 {
        return Err(Error::ZeroArmMean(Arm::Control));
    }
    let delta: Vec<f64> = a.iter().zip(b).map(|(x, y)| x / ma - y / mb).collect();
    let md = delta.iter().sum::<f64>() / n;
    let ss = delta.iter().map(|v| (v - md).powi(2)).sum::<f64>() / n;
    let tau = ma / mb;
    Ok(tau * tau * ss)
}

/// IPW variance reduced for estimating a logistic propensity by maximum
/// likelihood: `var_ipw - tau^2 w' Q^-1 w` with `Q = mean(e (1-e) xt xt')`,
/// `w = c10 / S0 + c01 / S1`, `c10 = mean((1-t) y e/(1-e) xt)`,
/// `c01 = mean(t y (1-e)/e xt)` and `S_t` the weighted arm means.
///
/// A diagnostic: nothing forces the plug-in value to stay non-negative in
/// finite samples, and it is returned as computed.
pub fn var_ipw_mle_adjusted(d: &ObservationalDataset, e_hat: &PropensityModel) -> Result<f64> {
    if !matches!(e_hat.kind, PropensityKind::Logistic { .. }) {
        return Err(invalid("MLE-adjusted IPW variance needs a logistic propensity model"));
    }
    let base = var_ipw(d, e_hat)?;
    let e = e_hat.predict_all(d.x())?;
    let n = d.n() as f64;
    let dim = d.p() + 1;
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    let mut c10 = DVector::<f64>::zeros(dim);
    let mut c01 = DVector::<f64>::zeros(dim);
    let (mut s1, mut s0) = (0.0, 0.0);
    let mut xt = vec![1.0; dim];
    for (i, &ei) in e.iter().enumerate() {
        xt[1..].copy_from_slice(d.x().row(i));
        let yi = d.y()[i];
        let w = ei * (1.0 - ei);
        for a in 0..dim {
            for b in 0..dim {
                q[(a, b)] += w * xt[a] * xt[b];
            }
        }
        if d.t()[i] {
            s1 += yi / ei;
            let c = yi * (1.0 - ei) / ei;
            for a in 0..dim {
                c01[a] += c * xt[a];
            }
        } else {
            s0 += yi / (1.0 - ei);
            let c = yi * ei / (1.0 - ei);
            for a in 0..dim {
                c10[a] += c * xt[a];
            }
        }
    }
    q /= n;
    c10 /= n;
    c01 /= n;
    let (s1, s0) = (s1 / n, s0 / n);
    let w = &c10 / s0 + &c01 / s1;
    let sol = q
        .cholesky()
        .ok_or_else(|| Error::Singular("propensity information matrix".into()))?
        .solve(&w);
    let tau = s1 / s0;
    Ok(base - tau * tau * w.dot(&sol))
}

fn check_ci_inputs(point: f64, v_hat: f64, n: usize) -> Result<()> {
    if !(v_hat >= 0.0 && v_hat.is_finite()) {
        return Err(invalid(format!("variance must be finite and >= 0, got {v_hat}")));
    }
    if n == 0 {
        return Err(invalid("CI needs n >= 1"));
    }
    if !point.is_finite() {
        return Err(invalid("CI needs a finite point estimate"));
    }
    Ok(())
}

pub fn wald_ci(point: f64, v_hat: f64, n: usize, alpha: f64) -> Result<(f64, f64)> {
    check_ci_inputs(point, v_hat, n)?;
    let half = z_two_sided(alpha)? * (v_hat / n as f64).sqrt();
    Ok((point - half, point + half))
}

/// Interval from the delta method on `log RR`; `v_hat` is on the RR scale.
pub fn log_delta_ci(point: f64, v_hat: f64, n: usize, alpha: f64) -> Result<(f64, f64)> {
    check_ci_inputs(point, v_hat, n)?;
    if point <= 0.0 {
        return Err(invalid(format!(
            "log-scale interval needs a positive estimate, got {point}"
        )));
    }
    let half = z_two_sided(alpha)? * (v_hat / (n as f64 * point * point)).sqrt();
    Ok((point * (-half).exp(), point * half.exp()))
}

/// Katz interval for a binary outcome around the Neyman estimate.
pub fn katz_ci(d: &ObservationalDataset, alpha: f64) -> Result<(f64, f64)> {
    d.require_binary_outcome()?;
    d.require_both_arms()?;
    let (mut a, mut c) = (0.0, 0.0);
    for (&t, &y) in d.t().iter().zip(d.y()) {
        if t {
            a += y;
        } else {
            c += y;
        }
    }
    if a == 0.0 {
        return Err(Error::ZeroEvents(Arm::Treated));
    }
    if c == 0.0 {
        return Err(Error::ZeroEvents(Arm::Control));
    }
    let (n1, n0) = (d.n1() as f64, d.n0() as f64);
    let tau = (a / n1) / (c / n0);
    let s2 = (1.0 / a - 1.0 / n1 + 1.0 / c - 1.0 / n0).max(0.0);
    let half = z_two_sided(alpha)? * s2.sqrt();
    Ok((tau * (-half).exp(), tau * half.exp()))
}

/// Keeps `[EPS, 1 - EPS]` when one arm has zero relative variance.
pub const OPTIMAL_E_EPS: f64 = 1e-9;

/// Design variance (up to the factor `RR^2`) at treated share `e`:
/// `c1 / e + c0 / (1 - e)`.
pub fn design_variance(e: f64, c1: f64, c0: f64) -> f64 {
    c1 / e + c0 / (1.0 - e)
}

fn optimal_share(c1: f64, c0: f64) -> f64 {
    if c1 == c0 {
        return 0.5;
    }
    // Equal to (c1 - sqrt(c1 c0)) / (c1 - c0), without the cancellation.
    let (r1, r0) = (c1.sqrt(), c0.sqrt());
    (r1 / (r1 + r0)).clamp(OPTIMAL_E_EPS, 1.0 - OPTIMAL_E_EPS)
}

fn check_arm(second: f64, mean: f64, what: &str) -> Result<()> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(invalid(format!("arm means must be positive, got {mean}")));
    }
    if !(second >= 0.0 && second.is_finite()) {
        return Err(invalid(format!("{what} must be finite and >= 0, got {second}")));
    }
    Ok(())
}

/// Treated share minimizing the Neyman variance, from arm variances and means.
pub fn optimal_e_neyman(var1: f64, mean1: f64, var0: f64, mean0: f64) -> Result<f64> {
    check_arm(var1, mean1, "variance")?;
    check_arm(var0, mean0, "variance")?;
    Ok(optimal_share(var1 / (mean1 * mean1), var0 / (mean0 * mean0)))
}

/// Treated share minimizing the Horvitz-Thompson variance, from raw second
/// moments and means.
pub fn optimal_e_ht(m2_1: f64, mean1: f64, m2_0: f64, mean0: f64) -> Result<f64> {
    check_arm(m2_1, mean1, "second moment")?;
    check_arm(m2_0, mean0, "second moment")?;
    Ok(optimal_share(m2_1 / (mean1 * mean1), m2_0 / (mean0 * mean0)))
}
