//! Nuisance models: propensity score and per-arm outcome surfaces.
//!
//! Fitted models serialize to JSON with a `kind` tag:
//!
//! ```text
//! {"clip":0.01,"p":3,"kind":"logistic","intercept":0.1,"coefficients":[..]}
//! {"clip":0.01,"p":3,"kind":"constant","value":0.5}
//! {"clip":0.01,"p":3,"kind":"forest","forest":{"p":3,"trees":[{"nodes":[..]}]}}
//! {"clip":0.01,"p":6,"kind":"oracle","dgp":"wager_nl_nonlogistic"}
//! {"arm":"treated","p":3,"kind":"ols","intercept":6.0,"coefficients":[..]}
//! ```
//!
//! Tree nodes are `{"node":"leaf","value":..}` or
//! `{"node":"split","feature":j,"threshold":s,"left":a,"right":b}` with
//! `x[j] <= s` going left; node indices refer to the tree's `nodes` array.

pub mod forest;
pub mod logistic;
pub mod ols;

use serde::{Deserialize, Serialize};

use crate::data::{Covariates, ObservationalDataset};
use crate::dgp::DgpKind;
use crate::error::{invalid, Arm, Error, Result};
use crate::rng::derive_seed;

pub use forest::{Forest, ForestConfig, ForestTask};
pub use logistic::LogisticOptions;

pub const DEFAULT_CLIP: f64 = 0.01;

fn check_clip(clip: f64) -> Result<()> {
    if clip > 0.0 && clip <= 0.5 {
        Ok(())
    } else {
        Err(invalid(format!("propensity clip must lie in (0, 0.5], got {clip}")))
    }
}

fn dot(intercept: f64, coef: &[f64], x: &[f64]) -> f64 {
    intercept + coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropensityKind {
    Constant {
        value: f64,
    },
    Logistic {
        intercept: f64,
        coefficients: Vec<f64>,
    },
    Forest {
        forest: Forest,
    },
    /// True propensity of a synthetic design.
    Oracle {
        dgp: DgpKind,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub clip: f64,
    pub p: usize,
    #[serde(flatten)]
    pub kind: PropensityKind,
}

impl PropensityModel {
    pub fn constant(value: f64, p: usize, clip: f64) -> Result<Self> {
        check_clip(clip)?;
        if !(value > 0.0 && value < 1.0) {
            return Err(invalid(format!("constant propensity must lie in (0, 1), got {value}")));
        }
        Ok(PropensityModel {
            clip,
            p,
            kind: PropensityKind::Constant { value },
        })
    }

    pub fn logistic(intercept: f64, coefficients: Vec<f64>, clip: f64) -> Result<Self> {
        check_clip(clip)?;
        Ok(PropensityModel {
            clip,
            p: coefficients.len(),
            kind: PropensityKind::Logistic {
                intercept,
                coefficients,
            },
        })
    }

    pub fn oracle(dgp: DgpKind, clip: f64) -> Result<Self> {
        check_clip(clip)?;
        Ok(PropensityModel {
            clip,
            p: dgp.dim(),
            kind: PropensityKind::Oracle { dgp },
        })
    }

    /// Unclipped model output.
    pub fn raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: x.len(),
            });
        }
        Ok(match &self.kind {
            PropensityKind::Constant { value } => *value,
            PropensityKind::Logistic {
                intercept,
                coefficients,
            } => logistic::sigmoid(dot(*intercept, coefficients, x)),
            PropensityKind::Forest { forest } => forest.predict(x),
            PropensityKind::Oracle { dgp } => dgp.propensity(x),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.raw(x)?.clamp(self.clip, 1.0 - self.clip))
    }

    pub fn predict_all(&self, x: &Covariates) -> Result<Vec<f64>> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("propensity model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: PropensityModel = serde_json::from_str(s).map_err(|e| invalid(format!("propensity model JSON: {e}")))?;
        check_clip(m.clip)?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeKind {
    Ols {
        intercept: f64,
        coefficients: Vec<f64>,
    },
    Constant {
        value: f64,
    },
    Forest {
        forest: Forest,
    },
    /// True conditional mean of a synthetic design for the model's arm.
    Oracle {
        dgp: DgpKind,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub arm: Arm,
    pub p: usize,
    #[serde(flatten)]
    pub kind: OutcomeKind,
}

impl OutcomeModel {
    pub fn linear(arm: Arm, intercept: f64, coefficients: Vec<f64>) -> Self {
        OutcomeModel {
            arm,
            p: coefficients.len(),
            kind: OutcomeKind::Ols {
                intercept,
                coefficients,
            },
        }
    }

    pub fn constant(arm: Arm, value: f64, p: usize) -> Self {
        OutcomeModel {
            arm,
            p,
            kind: OutcomeKind::Constant { value },
        }
    }

    pub fn oracle(arm: Arm, dgp: DgpKind) -> Self {
        OutcomeModel {
            arm,
            p: dgp.dim(),
            kind: OutcomeKind::Oracle { dgp },
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: x.len(),
            });
        }
        Ok(match &self.kind {
            OutcomeKind::Ols {
                intercept,
                coefficients,
            } => dot(*intercept, coefficients, x),
            OutcomeKind::Constant { value } => *value,
            OutcomeKind::Forest { forest } => forest.predict(x),
            OutcomeKind::Oracle { dgp } => dgp.outcome_mean(x, self.arm == Arm::Treated),
        })
    }

    pub fn predict_all(&self, x: &Covariates) -> Result<Vec<f64>> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("outcome model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| invalid(format!("outcome model JSON: {e}")))
    }
}

pub fn fit_logistic_mle(x: &Covariates, t: &[bool], opts: &LogisticOptions, clip: f64) -> Result<PropensityModel> {
    check_clip(clip)?;
    let tn: Vec<f64> = t.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let f = logistic::fit(x, &tn, opts)?;
    PropensityModel::logistic(f.intercept, f.coefficients, clip)
}

pub fn fit_ols(arm: Arm, x: &Covariates, y: &[f64]) -> Result<OutcomeModel> {
    let f = ols::fit(x, y)?;
    Ok(OutcomeModel::linear(arm, f.intercept, f.coefficients))
}

pub fn fit_forest_regressor(arm: Arm, x: &Covariates, y: &[f64], cfg: &ForestConfig) -> Result<OutcomeModel> {
    let forest = Forest::fit(x, y, cfg, ForestTask::Regression)?;
    Ok(OutcomeModel {
        arm,
        p: x.ncols(),
        kind: OutcomeKind::Forest { forest },
    })
}

pub fn fit_forest_classifier(x: &Covariates, t: &[bool], cfg: &ForestConfig, clip: f64) -> Result<PropensityModel> {
    check_clip(clip)?;
    let tn: Vec<f64> = t.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let forest = Forest::fit(x, &tn, cfg, ForestTask::Classification)?;
    Ok(PropensityModel {
        clip,
        p: x.ncols(),
        kind: PropensityKind::Forest { forest },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum PropensityLearner {
    Logistic(LogisticOptions),
    Forest(ForestConfig),
    /// Treated share of the training sample.
    Share,
    /// A given model, used as is on every fold.
    Fixed(PropensityModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum OutcomeLearner {
    Ols,
    Forest(ForestConfig),
    Fixed {
        control: OutcomeModel,
        treated: OutcomeModel,
    },
}

/// How to obtain `(e, mu0, mu1)` from a training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceRecipe {
    pub propensity: PropensityLearner,
    pub outcome: OutcomeLearner,
    pub clip: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedNuisances {
    pub propensity: PropensityModel,
    pub control: OutcomeModel,
    pub treated: OutcomeModel,
}

impl NuisanceRecipe {
    /// Logistic propensity and per-arm OLS.
    pub fn parametric() -> Self {
        NuisanceRecipe {
            propensity: PropensityLearner::Logistic(LogisticOptions::default()),
            outcome: OutcomeLearner::Ols,
            clip: DEFAULT_CLIP,
        }
    }

    pub fn forest(cfg: ForestConfig) -> Self {
        NuisanceRecipe {
            propensity: PropensityLearner::Forest(cfg),
            outcome: OutcomeLearner::Forest(cfg),
            clip: DEFAULT_CLIP,
        }
    }

    pub fn fixed(propensity: PropensityModel, control: OutcomeModel, treated: OutcomeModel) -> Self {
        NuisanceRecipe {
            clip: propensity.clip,
            propensity: PropensityLearner::Fixed(propensity),
            outcome: OutcomeLearner::Fixed { control, treated },
        }
    }

    pub fn oracle(dgp: DgpKind) -> Self {
        NuisanceRecipe::fixed(
            PropensityModel::oracle(dgp, DEFAULT_CLIP).expect("default clip is valid"),
            OutcomeModel::oracle(Arm::Control, dgp),
            OutcomeModel::oracle(Arm::Treated, dgp),
        )
    }

    /// Fits every nuisance on `d`. `stream` decorrelates forest seeds across folds.
    pub fn fit(&self, d: &ObservationalDataset, stream: u64) -> Result<FittedNuisances> {
        check_clip(self.clip)?;
        let reseed = |cfg: &ForestConfig, salt: u64| ForestConfig {
            seed: derive_seed(derive_seed(cfg.seed, stream), salt),
            ..*cfg
        };
        let propensity = match &self.propensity {
            PropensityLearner::Logistic(opts) => {
                fit_logistic_mle(d.x(), d.t(), opts, self.clip).map_err(|e| e.context("propensity (logistic)"))?
            }
            PropensityLearner::Forest(cfg) => fit_forest_classifier(d.x(), d.t(), &reseed(cfg, 0), self.clip)
                .map_err(|e| e.context("propensity (forest)"))?,
            PropensityLearner::Share => {
                d.require_both_arms()?;
                PropensityModel::constant(d.n1() as f64 / d.n() as f64, d.p(), self.clip)?
            }
            PropensityLearner::Fixed(m) => m.clone(),
        };
        let (control, treated) = match &self.outcome {
            OutcomeLearner::Fixed { control, treated } => (control.clone(), treated.clone()),
            learner => {
                d.require_both_arms()?;
                let fit_arm = |arm: Arm| -> Result<OutcomeModel> {
                    let sub = d.select(&d.arm_indices(arm == Arm::Treated))?;
                    match learner {
                        OutcomeLearner::Ols => fit_ols(arm, sub.x(), sub.y()),
                        OutcomeLearner::Forest(cfg) => {
                            let salt = if arm == Arm::Treated { 2 } else { 1 };
                            fit_forest_regressor(arm, sub.x(), sub.y(), &reseed(cfg, salt))
                        }
                        OutcomeLearner::Fixed { .. } => unreachable!(),
                    }
                    .map_err(|e| e.context(format!("outcome model ({arm} arm)")))
                };
                (fit_arm(Arm::Control)?, fit_arm(Arm::Treated)?)
            }
        };
        for m in [&control, &treated] {
            if m.p != d.p() {
                return Err(Error::DimensionMismatch {
                    expected: m.p,
                    got: d.p(),
                });
            }
        }
        if propensity.p != d.p() {
            return Err(Error::DimensionMismatch {
                expected: propensity.p,
                got: d.p(),
            });
        }
        Ok(FittedNuisances {
            propensity,
            control,
            treated,
        })
    }
}
