//! Replicated experiments: bias, spread, coverage and interval length.
//!
//! Replication `r` at the `j`-th sample size draws its sample from seed
//! `derive_seed_path(master_seed, [j, r])`; estimator `k` of that replication
//! gets fold and forest seeds derived from the sample seed and `k`. Results
//! are stored per replication and reduced in replication order, so serial and
//! parallel runs give identical reports.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{generate, true_rr, DgpKind, DgpSpec, TrueRr, DEFAULT_TRUTH_DRAWS, DEFAULT_TRUTH_SEED};
use crate::error::{invalid, Error, Result};
use crate::estimators::Method;
use crate::inference::CiStyle;
use crate::nuisance::{NuisanceRecipe, OutcomeLearner, PropensityLearner};
use crate::pipeline::{estimate, EstimatorConfig, RrEstimate};
use crate::rng::{derive_seed, derive_seed_path};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dgp: DgpKind,
    pub noise_sd: f64,
    pub sample_sizes: Vec<usize>,
    pub reps: usize,
    pub estimators: Vec<EstimatorConfig>,
    pub master_seed: u64,
    /// Draws for the Monte-Carlo truth (ignored when the truth is closed form).
    pub truth_draws: u64,
    pub parallel: bool,
}

impl ExperimentPlan {
    pub fn new(dgp: DgpKind, sample_sizes: Vec<usize>, reps: usize, estimators: Vec<EstimatorConfig>) -> Self {
        ExperimentPlan {
            dgp,
            noise_sd: 1.0,
            sample_sizes,
            reps,
            estimators,
            master_seed: 0,
            truth_draws: DEFAULT_TRUTH_DRAWS,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(invalid("experiment needs reps >= 1"));
        }
        if self.sample_sizes.is_empty() {
            return Err(invalid("experiment needs at least one sample size"));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < 10) {
            return Err(invalid(format!("sample sizes must be >= 10, got {n}")));
        }
        if self.estimators.is_empty() {
            return Err(invalid("experiment needs at least one estimator"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(invalid(format!(
                "noise sd must be finite and >= 0, got {}",
                self.noise_sd
            )));
        }
        for cfg in &self.estimators {
            cfg.validate().map_err(|e| e.context(cfg.label()))?;
            if cfg.ci_style == CiStyle::Katz {
                return Err(invalid(format!(
                    "{}: the Katz interval needs a binary outcome, which {} does not produce",
                    cfg.label(),
                    self.dgp
                )));
            }
            if cfg.method == Method::Ht && !self.dgp.is_rct() {
                return Err(invalid(format!(
                    "ht needs a known design propensity; {} is observational",
                    self.dgp
                )));
            }
            if cfg.method.is_crossfit() && self.sample_sizes.iter().any(|&n| n < cfg.folds) {
                return Err(invalid(format!("{}: fold count exceeds a sample size", cfg.label())));
            }
        }
        Ok(())
    }
}

/// One estimator on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Ok(RrEstimate),
    Failed(String),
}

/// All estimators on one replication, in plan order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub size_index: usize,
    pub rep: usize,
    pub seed: u64,
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub estimator: String,
    pub n: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    /// `None` when no usable replication produced an interval.
    pub coverage: Option<f64>,
    pub mean_ci_length: Option<f64>,
    /// Replications entering the moments (neither failed nor degenerate).
    pub used: usize,
    pub degenerate_count: usize,
    pub failure_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub dgp: DgpKind,
    pub truth: TrueRr,
    pub reps: usize,
    pub rows: Vec<ReportRow>,
}

impl MonteCarloReport {
    pub fn row(&self, estimator: &str, n: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.estimator == estimator && r.n == n)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        out.write_record(["estimator", "n", "metric", "value"])
            .map_err(csv_err)?;
        for r in &self.rows {
            let n = r.n.to_string();
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into());
            let metrics: [(&str, String); 10] = [
                ("mean_estimate", r.mean_estimate.to_string()),
                ("bias", r.bias.to_string()),
                ("sd", r.sd.to_string()),
                ("rmse", r.rmse.to_string()),
                ("coverage", opt(r.coverage)),
                ("mean_ci_length", opt(r.mean_ci_length)),
                ("used", r.used.to_string()),
                ("degenerate_count", r.degenerate_count.to_string()),
                ("failure_count", r.failure_count.to_string()),
                ("true_rr", self.truth.value.to_string()),
            ];
            for (name, value) in metrics {
                out.write_record([r.estimator.as_str(), n.as_str(), name, value.as_str()])
                    .map_err(csv_err)?;
            }
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let csv_path = dir.join("report.csv");
        let f = std::fs::File::create(&csv_path).map_err(io(&csv_path))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let json_path = dir.join("report.json");
        std::fs::write(&json_path, self.to_json()).map_err(io(&json_path))?;
        Ok(())
    }
}

/// Copy of `cfg` whose random choices (folds, forests) follow `seed`.
fn reseed(cfg: &EstimatorConfig, seed: u64) -> EstimatorConfig {
    let mut c = cfg.clone();
    c.seed = seed;
    if let PropensityLearner::Forest(f) = &mut c.recipe.propensity {
        f.seed = derive_seed(seed, 1);
    }
    if let OutcomeLearner::Forest(f) = &mut c.recipe.outcome {
        f.seed = derive_seed(seed, 2);
    }
    c
}

fn run_one(plan: &ExperimentPlan, size_index: usize, rep: usize) -> Replication {
    let seed = derive_seed_path(plan.master_seed, &[size_index as u64, rep as u64]);
    let spec = DgpSpec {
        kind: plan.dgp,
        n: plan.sample_sizes[size_index],
        seed,
        noise_sd: plan.noise_sd,
    };
    let outcomes = match generate(&spec) {
        Err(e) => vec![Outcome::Failed(format!("sample generation: {e}")); plan.estimators.len()],
        Ok(sample) => plan
            .estimators
            .iter()
            .enumerate()
            .map(
                |(k, cfg)| match estimate(&sample.dataset, &reseed(cfg, derive_seed(seed, k as u64))) {
                    Ok(est) => Outcome::Ok(est),
                    Err(e) => Outcome::Failed(e.to_string()),
                },
            )
            .collect(),
    };
    Replication {
        size_index,
        rep,
        seed,
        outcomes,
    }
}

/// Runs every replication; results are ordered by sample size, then replication.
pub fn run_replications(plan: &ExperimentPlan) -> Result<Vec<Replication>> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> = (0..plan.sample_sizes.len())
        .flat_map(|j| (0..plan.reps).map(move |r| (j, r)))
        .collect();
    Ok(if plan.parallel {
        jobs.par_iter().map(|&(j, r)| run_one(plan, j, r)).collect()
    } else {
        jobs.iter().map(|&(j, r)| run_one(plan, j, r)).collect()
    })
}

pub fn aggregate(plan: &ExperimentPlan, truth: TrueRr, reps: &[Replication]) -> MonteCarloReport {
    let tau = truth.value;
    let mut rows = Vec::new();
    for (j, &n) in plan.sample_sizes.iter().enumerate() {
        for (k, cfg) in plan.estimators.iter().enumerate() {
            let mut values = Vec::new();
            let mut covered = 0usize;
            let mut with_ci = 0usize;
            let mut length = 0.0;
            let mut degenerate = 0;
            let mut failed = 0;
            for r in reps.iter().filter(|r| r.size_index == j) {
                match &r.outcomes[k] {
                    Outcome::Failed(_) => failed += 1,
                    Outcome::Ok(e) if e.point.degenerate => degenerate += 1,
                    Outcome::Ok(e) => {
                        values.push(e.point.value);
                        if let (Some(c), Some(len)) = (e.covers(tau), e.ci_length()) {
                            with_ci += 1;
                            covered += c as usize;
                            length += len;
                        }
                    }
                }
            }
            let m = values.len() as f64;
            let mean = values.iter().sum::<f64>() / m;
            let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m).sqrt();
            let rmse = (values.iter().map(|v| (v - tau).powi(2)).sum::<f64>() / m).sqrt();
            rows.push(ReportRow {
                estimator: cfg.label(),
                n,
                mean_estimate: mean,
                bias: mean - tau,
                sd,
                rmse,
                coverage: (with_ci > 0).then(|| covered as f64 / with_ci as f64),
                mean_ci_length: (with_ci > 0).then(|| length / with_ci as f64),
                used: values.len(),
                degenerate_count: degenerate,
                failure_count: failed,
            });
        }
    }
    MonteCarloReport {
        dgp: plan.dgp,
        truth,
        reps: plan.reps,
        rows,
    }
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<MonteCarloReport> {
    plan.validate()?;
    let truth = true_rr(plan.dgp, plan.truth_draws, DEFAULT_TRUTH_SEED)?;
    let reps = run_replications(plan)?;
    Ok(aggregate(plan, truth, &reps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub n: usize,
    pub rank: usize,
    pub estimator: String,
    pub abs_bias: f64,
    pub rmse: f64,
}

/// Per sample size, estimators ordered by `|bias|` then RMSE; ties keep
/// plan order.
pub fn compare_estimators(report: &MonteCarloReport) -> Vec<RankedRow> {
    let mut sizes: Vec<usize> = Vec::new();
    for r in &report.rows {
        if !sizes.contains(&r.n) {
            sizes.push(r.n);
        }
    }
    let mut out = Vec::new();
    for n in sizes {
        let mut rows: Vec<&ReportRow> = report.rows.iter().filter(|r| r.n == n).collect();
        rows.sort_by(|a, b| a.bias.abs().total_cmp(&b.bias.abs()).then(a.rmse.total_cmp(&b.rmse)));
        out.extend(rows.into_iter().enumerate().map(|(i, r)| RankedRow {
            n,
            rank: i + 1,
            estimator: r.estimator.clone(),
            abs_bias: r.bias.abs(),
            rmse: r.rmse,
        }));
    }
    out
}

/// Plan-level defaults for a recipe named on the command line.
pub fn recipe_by_name(name: &str, dgp: Option<DgpKind>) -> Result<NuisanceRecipe> {
    match name {
        "parametric" | "linear" => Ok(NuisanceRecipe::parametric()),
        "forest" => Ok(NuisanceRecipe::forest(Default::default())),
        "oracle" => dgp
            .map(NuisanceRecipe::oracle)
            .ok_or_else(|| invalid("oracle nuisances need a synthetic design")),
        _ => Err(invalid(format!(
            "unknown nuisance recipe '{name}' (expected parametric, forest or oracle)"
        ))),
    }
}
