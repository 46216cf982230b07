//! One call from a dataset to a point estimate, variance and interval.

use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    crossfit_arm_functionals, make_folds_for, rr_aipw, rr_g, rr_ht, rr_ipw, rr_neyman, rr_os, Method, RrPoint,
};
use crate::inference::{katz_ci, log_delta_ci, var_g, var_ht, var_ipw, var_neyman, var_os, wald_ci, CiStyle};
use crate::nuisance::{NuisanceRecipe, OutcomeLearner, PropensityLearner};

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    pub recipe: NuisanceRecipe,
    /// Cross-fitting folds (one-step and AIPW only).
    pub folds: usize,
    /// Seed of the fold partition.
    pub seed: u64,
    pub ci_style: CiStyle,
    pub alpha: f64,
    /// Known treatment probability for the Horvitz-Thompson estimator.
    pub design_e: f64,
}

impl EstimatorConfig {
    pub fn new(method: Method, recipe: NuisanceRecipe) -> Self {
        EstimatorConfig {
            method,
            recipe,
            folds: DEFAULT_FOLDS,
            seed: 0,
            ci_style: CiStyle::Wald,
            alpha: DEFAULT_ALPHA,
            design_e: 0.5,
        }
    }

    pub fn with_ci(self, ci_style: CiStyle) -> Self {
        EstimatorConfig { ci_style, ..self }
    }

    /// `method` or `method:nuisance`, e.g. `aipw:parametric`.
    pub fn label(&self) -> String {
        if !(self.method.needs_propensity() || self.method.needs_outcome()) {
            return self.method.name().to_string();
        }
        let tag = match (&self.recipe.propensity, &self.recipe.outcome) {
            (PropensityLearner::Logistic(_), OutcomeLearner::Ols) => "parametric",
            (PropensityLearner::Forest(_), OutcomeLearner::Forest(_)) => "forest",
            (PropensityLearner::Fixed(_), OutcomeLearner::Fixed { .. }) => "oracle",
            (PropensityLearner::Logistic(_), _) if !self.method.needs_outcome() => "parametric",
            (_, OutcomeLearner::Ols) if !self.method.needs_propensity() => "parametric",
            (PropensityLearner::Forest(_), _) if !self.method.needs_outcome() => "forest",
            (_, OutcomeLearner::Forest(_)) if !self.method.needs_propensity() => "forest",
            _ => "custom",
        };
        format!("{}:{}", self.method.name(), tag)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ci_style == CiStyle::Katz && self.method != Method::Neyman {
            return Err(invalid(format!(
                "the Katz interval is only defined for neyman, not {}",
                self.method
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.method.is_crossfit() && self.folds < 2 {
            return Err(invalid(format!(
                "cross-fitting needs at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.method == Method::Ht && !(self.design_e > 0.0 && self.design_e < 1.0) {
            return Err(invalid(format!(
                "design propensity must lie in (0, 1), got {}",
                self.design_e
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrEstimate {
    pub label: String,
    pub point: RrPoint,
    /// Estimated asymptotic variance; `None` for a degenerate point.
    pub v_hat: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub alpha: f64,
    pub ci_style: CiStyle,
    pub n: usize,
    /// A slightly negative variance from rounding was set to 0.
    pub variance_clamped: bool,
}

impl RrEstimate {
    pub fn se(&self) -> Option<f64> {
        self.v_hat.map(|v| (v / self.n as f64).sqrt())
    }

    pub fn covers(&self, truth: f64) -> Option<bool> {
        Some(self.ci_lower? <= truth && truth <= self.ci_upper?)
    }

    pub fn ci_length(&self) -> Option<f64> {
        Some(self.ci_upper? - self.ci_lower?)
    }
}

fn clamp_variance(v: f64, point: f64) -> Result<(f64, bool)> {
    if v >= 0.0 {
        return Ok((v, false));
    }
    if v >= -1e-12 * (1.0 + point * point) {
        return Ok((0.0, true));
    }
    Err(Error::Singular(format!("negative variance estimate {v}")))
}

pub fn estimate(d: &ObservationalDataset, cfg: &EstimatorConfig) -> Result<RrEstimate> {
    cfg.validate()?;
    if cfg.ci_style == CiStyle::Katz {
        d.require_binary_outcome()?;
    }
    let (point, variance) = match cfg.method {
        Method::Neyman => {
            let p = rr_neyman(d)?;
            (p, if p.degenerate { None } else { Some(var_neyman(d)?) })
        }
        Method::Ht => {
            let p = rr_ht(d, cfg.design_e)?;
            (
                p,
                if p.degenerate {
                    None
                } else {
                    Some(var_ht(d, cfg.design_e)?)
                },
            )
        }
        Method::Ipw => {
            d.require_both_arms()?;
            let fit = cfg.recipe.fit(d, 0)?;
            let p = rr_ipw(d, &fit.propensity)?;
            (
                p,
                if p.degenerate {
                    None
                } else {
                    Some(var_ipw(d, &fit.propensity)?)
                },
            )
        }
        Method::G => {
            d.require_both_arms()?;
            let fit = cfg.recipe.fit(d, 0)?;
            let p = rr_g(d, &fit.control, &fit.treated)?;
            (
                p,
                if p.degenerate {
                    None
                } else {
                    Some(var_g(d, &fit.control, &fit.treated)?)
                },
            )
        }
        Method::Os | Method::Aipw => {
            d.require_both_arms()?;
            let folds = make_folds_for(d, cfg.folds, cfg.seed)?;
            let cf = crossfit_arm_functionals(d, &folds, &cfg.recipe)?;
            let p = if cfg.method == Method::Os {
                rr_os(&cf.functionals)?
            } else {
                rr_aipw(&cf.functionals)?
            };
            (p, if p.degenerate { None } else { Some(var_os(d, &cf)?) })
        }
    };

    let n = d.n();
    let mut est = RrEstimate {
        label: cfg.label(),
        point,
        v_hat: None,
        ci_lower: None,
        ci_upper: None,
        alpha: cfg.alpha,
        ci_style: cfg.ci_style,
        n,
        variance_clamped: false,
    };
    let Some(v) = variance else {
        return Ok(est);
    };
    let (v, clamped) = clamp_variance(v, point.value)?;
    let (lo, hi) = match cfg.ci_style {
        CiStyle::Wald => wald_ci(point.value, v, n, cfg.alpha)?,
        CiStyle::LogDelta => log_delta_ci(point.value, v, n, cfg.alpha)?,
        CiStyle::Katz => katz_ci(d, cfg.alpha)?,
    };
    est.v_hat = Some(v);
    est.variance_clamped = clamped;
    est.ci_lower = Some(lo);
    est.ci_upper = Some(hi);
    Ok(est)
}
