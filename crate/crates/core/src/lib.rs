//! Risk-ratio treatment-effect estimation for randomized and observational data.
//!
//! The estimators (`neyman`, `ht`, `ipw`, `g`, `os`, `aipw`) live in
//! [`estimators`], their plug-in variances and intervals in [`inference`],
//! and [`pipeline::estimate`] ties them together. [`dgp`] and [`montecarlo`]
//! provide synthetic designs and replicated experiments.

pub mod cli;
pub mod data;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod montecarlo;
pub mod nuisance;
pub mod pipeline;
pub mod rng;

pub use data::{Covariates, DatasetSummary, ObservationalDataset};
pub use dgp::{generate, true_rr, DgpKind, DgpSpec, GeneratedSample, TrueRr};
pub use error::{Arm, Error, ErrorClass, Result};
pub use estimators::{ArmFunctionals, FoldPartition, Method, RrPoint};
pub use inference::CiStyle;
pub use montecarlo::{run_experiment, ExperimentPlan, MonteCarloReport};
pub use nuisance::{ForestConfig, NuisanceRecipe, OutcomeModel, PropensityModel};
pub use pipeline::{estimate, EstimatorConfig, RrEstimate};
