//! Risk-ratio point estimators and cross-fitting.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::error::{invalid, Arm, Error, Result};
use crate::nuisance::{NuisanceRecipe, OutcomeModel, PropensityModel};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Neyman,
    Ht,
    Ipw,
    G,
    Os,
    Aipw,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Neyman,
        Method::Ht,
        Method::Ipw,
        Method::G,
        Method::Os,
        Method::Aipw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Neyman => "neyman",
            Method::Ht => "ht",
            Method::Ipw => "ipw",
            Method::G => "g",
            Method::Os => "os",
            Method::Aipw => "aipw",
        }
    }

    /// Only valid when treatment is randomized independently of covariates.
    pub fn assumes_randomization(self) -> bool {
        matches!(self, Method::Neyman | Method::Ht)
    }

    pub fn needs_propensity(self) -> bool {
        matches!(self, Method::Ipw | Method::Os | Method::Aipw)
    }

    pub fn needs_outcome(self) -> bool {
        matches!(self, Method::G | Method::Os | Method::Aipw)
    }

    pub fn is_crossfit(self) -> bool {
        matches!(self, Method::Os | Method::Aipw)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase();
        let key = key.strip_prefix("rr-").unwrap_or(&key);
        match key {
            "n" => return Ok(Method::Neyman),
            "ht" | "horvitz-thompson" => return Ok(Method::Ht),
            _ => {}
        }
        Method::ALL.into_iter().find(|m| m.name() == key).ok_or_else(|| {
            invalid(format!(
                "unknown estimator '{s}' (expected neyman, ht, ipw, g, os or aipw)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrPoint {
    pub value: f64,
    pub method: Method,
    /// The denominator was exactly zero and `value` was set to 0.
    pub degenerate: bool,
    /// Set for estimators that are only consistent under randomization.
    pub assumes_randomization: bool,
}

impl RrPoint {
    fn ratio(method: Method, num: f64, den: f64) -> Result<RrPoint> {
        let degenerate = den == 0.0;
        let value = if degenerate { 0.0 } else { num / den };
        if !value.is_finite() {
            return Err(Error::Singular(format!(
                "{method} estimate is not finite ({num} / {den})"
            )));
        }
        Ok(RrPoint {
            value,
            method,
            degenerate,
            assumes_randomization: method.assumes_randomization(),
        })
    }
}

pub fn rr_neyman(d: &ObservationalDataset) -> Result<RrPoint> {
    d.require_both_arms()?;
    let (s1, s0) = arm_sums(d);
    RrPoint::ratio(Method::Neyman, s1 / d.n1() as f64, s0 / d.n0() as f64)
}

pub fn rr_ht(d: &ObservationalDataset, e: f64) -> Result<RrPoint> {
    if !(e > 0.0 && e < 1.0) {
        return Err(invalid(format!("design propensity must lie in (0, 1), got {e}")));
    }
    let (s1, s0) = arm_sums(d);
    RrPoint::ratio(Method::Ht, s1 / e, s0 / (1.0 - e))
}

pub fn rr_ipw(d: &ObservationalDataset, e_hat: &PropensityModel) -> Result<RrPoint> {
    d.require_dim(e_hat.p)?;
    let e = e_hat.predict_all(d.x())?;
    let (num, den) = ipw_sums(d, &e);
    RrPoint::ratio(Method::Ipw, num, den)
}

/// `(sum t y / e, sum (1 - t) y / (1 - e))`.
pub(crate) fn ipw_sums(d: &ObservationalDataset, e: &[f64]) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&ti, &yi), &ei) in d.t().iter().zip(d.y()).zip(e) {
        if ti {
            num += yi / ei;
        } else {
            den += yi / (1.0 - ei);
        }
    }
    (num, den)
}

pub fn rr_g(d: &ObservationalDataset, mu0: &OutcomeModel, mu1: &OutcomeModel) -> Result<RrPoint> {
    d.require_dim(mu0.p)?;
    d.require_dim(mu1.p)?;
    let m0: f64 = mu0.predict_all(d.x())?.iter().sum();
    let m1: f64 = mu1.predict_all(d.x())?.iter().sum();
    RrPoint::ratio(Method::G, m1, m0)
}

fn arm_sums(d: &ObservationalDataset) -> (f64, f64) {
    let mut s1 = 0.0;
    let mut s0 = 0.0;
    for (&ti, &yi) in d.t().iter().zip(d.y()) {
        if ti {
            s1 += yi;
        } else {
            s0 += yi;
        }
    }
    (s1, s0)
}

/// Fold ids are `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPartition {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldPartition {
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.assignment {
            s[f] += 1;
        }
        s
    }

    /// First fold whose complement lacks an arm, with the missing arm.
    pub fn empty_complement_arm(&self, t: &[bool]) -> Option<(usize, Arm)> {
        let n1 = t.iter().filter(|&&b| b).count();
        let n0 = t.len() - n1;
        let mut in1 = vec![0; self.k];
        let mut in0 = vec![0; self.k];
        for (&f, &ti) in self.assignment.iter().zip(t) {
            if ti {
                in1[f] += 1;
            } else {
                in0[f] += 1;
            }
        }
        (0..self.k).find_map(|f| {
            if n1 - in1[f] == 0 {
                Some((f, Arm::Treated))
            } else if n0 - in0[f] == 0 {
                Some((f, Arm::Control))
            } else {
                None
            }
        })
    }
}

/// Random balanced partition: a seeded shuffle of `0..n` dealt round-robin.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPartition> {
    if k < 2 || k > n {
        return Err(invalid(format!(
            "fold count must satisfy 2 <= k <= n (k = {k}, n = {n})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPartition { k, assignment })
}

/// Folds for `d`, reshuffled once with a derived seed if some training
/// complement misses an arm.
pub fn make_folds_for(d: &ObservationalDataset, k: usize, seed: u64) -> Result<FoldPartition> {
    let folds = make_folds(d.n(), k, seed)?;
    if folds.empty_complement_arm(d.t()).is_none() {
        return Ok(folds);
    }
    let folds = make_folds(d.n(), k, derive_seed(seed, 1))?;
    match folds.empty_complement_arm(d.t()) {
        None => Ok(folds),
        Some((f, arm)) => Err(Error::EmptyArm(arm).context(format!("training complement of fold {f}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmFunctionals {
    pub tau_g_1: f64,
    pub tau_g_0: f64,
    pub tau_aipw_1: f64,
    pub tau_aipw_0: f64,
}

/// Out-of-fold nuisance predictions: row `i` is scored by models trained
/// without its fold.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossFitted {
    pub functionals: ArmFunctionals,
    pub e: Vec<f64>,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
}

impl CrossFitted {
    /// Per-row AIPW scores `(Gamma_i(1), Gamma_i(0))`.
    pub fn scores(&self, d: &ObservationalDataset) -> (Vec<f64>, Vec<f64>) {
        aipw_scores(d.t(), d.y(), &self.e, &self.mu0, &self.mu1)
    }
}

pub(crate) fn aipw_scores(t: &[bool], y: &[f64], e: &[f64], mu0: &[f64], mu1: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = t.len();
    let mut g1 = Vec::with_capacity(n);
    let mut g0 = Vec::with_capacity(n);
    for i in 0..n {
        if t[i] {
            g1.push(mu1[i] + (y[i] - mu1[i]) / e[i]);
            g0.push(mu0[i]);
        } else {
            g1.push(mu1[i]);
            g0.push(mu0[i] + (y[i] - mu0[i]) / (1.0 - e[i]));
        }
    }
    (g1, g0)
}

pub fn crossfit_arm_functionals(
    d: &ObservationalDataset,
    folds: &FoldPartition,
    recipe: &NuisanceRecipe,
) -> Result<CrossFitted> {
    let n = d.n();
    if folds.assignment.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: folds.assignment.len(),
        });
    }
    if let Some((f, arm)) = folds.empty_complement_arm(d.t()) {
        return Err(Error::EmptyArm(arm).context(format!("training complement of fold {f}")));
    }

    type FoldRows = (Vec<usize>, Vec<[f64; 3]>);
    let per_fold: Vec<Result<FoldRows>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let train = d.select(&folds.complement(f))?;
            let fitted = recipe
                .fit(&train, f as u64)
                .map_err(|e| e.context(format!("fold {f}")))?;
            let rows = folds.members(f);
            let preds = rows
                .iter()
                .map(|&i| {
                    let x = d.x().row(i);
                    Ok([
                        fitted.propensity.predict(x)?,
                        fitted.control.predict(x)?,
                        fitted.treated.predict(x)?,
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((rows, preds))
        })
        .collect();

    let mut e = vec![0.0; n];
    let mut mu0 = vec![0.0; n];
    let mut mu1 = vec![0.0; n];
    for res in per_fold {
        let (rows, preds) = res?;
        for (i, [pe, p0, p1]) in rows.into_iter().zip(preds) {
            e[i] = pe;
            mu0[i] = p0;
            mu1[i] = p1;
        }
    }
    let (g1, g0) = aipw_scores(d.t(), d.y(), &e, &mu0, &mu1);
    let nf = n as f64;
    let functionals = ArmFunctionals {
        tau_g_1: mu1.iter().sum::<f64>() / nf,
        tau_g_0: mu0.iter().sum::<f64>() / nf,
        tau_aipw_1: g1.iter().sum::<f64>() / nf,
        tau_aipw_0: g0.iter().sum::<f64>() / nf,
    };
    if ![
        functionals.tau_g_1,
        functionals.tau_g_0,
        functionals.tau_aipw_1,
        functionals.tau_aipw_0,
    ]
    .iter()
    .all(|v| v.is_finite())
    {
        return Err(Error::Singular("cross-fitted arm means are not finite".into()));
    }
    Ok(CrossFitted {
        functionals,
        e,
        mu0,
        mu1,
    })
}

pub fn rr_os(af: &ArmFunctionals) -> Result<RrPoint> {
    let g0 = af.tau_g_0;
    if g0 == 0.0 {
        return RrPoint::ratio(Method::Os, 0.0, 0.0);
    }
    let value = (af.tau_g_1 / g0) * (1.0 - af.tau_aipw_0 / g0) + af.tau_aipw_1 / g0;
    RrPoint::ratio(Method::Os, value, 1.0)
}

pub fn rr_aipw(af: &ArmFunctionals) -> Result<RrPoint> {
    RrPoint::ratio(Method::Aipw, af.tau_aipw_1, af.tau_aipw_0)
}
