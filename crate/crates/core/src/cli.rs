//! Command-line front end.
//!
//! Every subcommand accepts `--config FILE`, a flat text file of
//! `key = value` lines (`#` starts a comment). Keys are the long flag
//! names without dashes in front, e.g. `ci-style = wald` or
//! `n-list = 500,1000`. A flag given on the command line wins over the
//! same key in the file; a key the subcommand does not know is an error.
//!
//! Each run writes `config.resolved` into its output directory with every
//! setting spelled out, defaults included. Feeding that file back through
//! `--config` repeats the run exactly.
//!
//! Exit codes: 0 success, 2 invalid input or flags, 3 a fit or estimate
//! failed, 4 a file could not be read or written.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::data::ObservationalDataset;
use crate::dgp::{generate, true_rr, DgpKind, DgpSpec, TrueRr, DEFAULT_TRUTH_DRAWS, DEFAULT_TRUTH_SEED};
use crate::error::{invalid, Error, ErrorClass, Result};
use crate::estimators::Method;
use crate::inference::CiStyle;
use crate::montecarlo::{compare_estimators, recipe_by_name, run_experiment, ExperimentPlan};
use crate::nuisance::{ForestConfig, NuisanceRecipe, OutcomeLearner, PropensityLearner, DEFAULT_CLIP};
use crate::pipeline::{estimate, EstimatorConfig, RrEstimate, DEFAULT_ALPHA, DEFAULT_FOLDS};

/// Replications per sample size when a plan does not say.
pub const DEFAULT_REPS: usize = 300;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "riskratio",
    version,
    about = "Risk-ratio estimation from observational and randomized data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate risk ratios from a CSV file.
    Estimate(EstimateArgs),
    /// Draw a synthetic dataset and its oracle quantities.
    Simulate(SimulateArgs),
    /// Run a Monte-Carlo experiment plan.
    Experiment(ExperimentArgs),
    /// Print the true risk ratio of a synthetic design.
    TrueRr(TrueRrArgs),
}

/// Estimator selection and tuning, shared by `estimate` and `experiment`.
#[derive(Debug, Args, Default)]
pub struct EstimatorFlags {
    /// Comma-separated list of `method[:nuisance]`, e.g. `neyman,aipw:forest`.
    #[arg(long)]
    pub estimators: Option<String>,
    /// Nuisance recipe for estimators that do not name one: parametric, forest or oracle.
    #[arg(long)]
    pub nuisance: Option<String>,
    /// Cross-fitting folds.
    #[arg(long = "k", visible_alias = "folds")]
    pub folds: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// wald, log-delta or katz.
    #[arg(long = "ci-style")]
    pub ci_style: Option<String>,
    /// Propensity clipping level.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Known treatment probability used by `ht`.
    #[arg(long = "design-e")]
    pub design_e: Option<f64>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long = "min-leaf")]
    pub min_leaf: Option<usize>,
    /// Maximum tree depth; 0 means unlimited.
    #[arg(long = "max-depth")]
    pub max_depth: Option<usize>,
    /// Features tried per split; 0 means the task default.
    #[arg(long)]
    pub mtry: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV with columns x1..xp, t, y.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub est: EstimatorFlags,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dgp: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Outcome noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dgp: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long = "n-list")]
    pub n_list: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Draws for the Monte-Carlo truth.
    #[arg(long = "truth-draws")]
    pub truth_draws: Option<u64>,
    /// Run replications in parallel.
    #[arg(long)]
    pub parallel: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub est: EstimatorFlags,
}

#[derive(Debug, Args)]
pub struct TrueRrArgs {
    /// Design name, e.g. linear_rct.
    pub dgp_name: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dgp: Option<String>,
    #[arg(long)]
    pub draws: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the result here as `true_rr.json` plus `config.resolved`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Validation => EXIT_VALIDATION,
        ErrorClass::Runtime => EXIT_RUNTIME,
        ErrorClass::Io => EXIT_IO,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::TrueRr(a) => cmd_true_rr(a),
    }
}

/// Settings merged from the config file and the command line.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| e.context(format!("config file {}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut file = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected `key = value`, got '{raw}'", no + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.is_empty() {
                return Err(invalid(format!("line {}: empty key", no + 1)));
            }
            if file.insert(k.clone(), v).is_some() {
                return Err(invalid(format!("line {}: key '{k}' repeated", no + 1)));
            }
        }
        Ok(Settings {
            file,
            resolved: Vec::new(),
        })
    }

    fn record(&mut self, key: &str, value: String) {
        self.file.remove(key);
        self.resolved.push((key.to_string(), value));
    }

    /// Flag value, else file value, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(s) => s
                    .parse::<T>()
                    .map_err(|e| invalid(format!("config key '{key}': cannot parse '{s}': {e}")))?,
                None => default,
            },
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    /// Like [`Settings::get`] for a setting without a default.
    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(s) => Some(
                    s.parse::<T>()
                        .map_err(|e| invalid(format!("config key '{key}': cannot parse '{s}': {e}")))?,
                ),
                None => None,
            },
        };
        let v = v.ok_or_else(|| invalid(format!("missing required setting '{key}'")))?;
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        let s: String = self.require(key, flag.map(|p| p.to_string_lossy().into_owned()))?;
        Ok(PathBuf::from(s))
    }

    /// Errors on any file key that no setting consumed.
    pub fn finish(&self) -> Result<()> {
        match self.file.keys().next() {
            Some(k) => Err(invalid(format!("unknown config key '{k}'"))),
            None => Ok(()),
        }
    }

    pub fn resolved_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.resolved {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("config.resolved"), &self.resolved_text())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn parse_list<T>(key: &str, s: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
    if items.is_empty() {
        return Err(invalid(format!("'{key}' is empty")));
    }
    items
        .into_iter()
        .map(|p| {
            p.parse::<T>()
                .map_err(|e| invalid(format!("'{key}': bad entry '{p}': {e}")))
        })
        .collect()
}

/// Resolved estimator flags, ready to build configs from.
#[derive(Debug, Clone)]
struct EstimatorSettings {
    specs: Vec<(Method, Option<String>)>,
    nuisance: String,
    folds: usize,
    alpha: f64,
    ci_style: CiStyle,
    eta: f64,
    seed: u64,
    design_e: f64,
    forest: ForestConfig,
}

fn resolve_estimators(s: &mut Settings, f: EstimatorFlags, default_list: &str) -> Result<EstimatorSettings> {
    let list: String = s.get("estimators", f.estimators, default_list.to_string())?;
    let mut specs = Vec::new();
    for item in parse_list::<String>("estimators", &list)? {
        let (m, nuis) = match item.split_once(':') {
            Some((m, n)) => (m, Some(n.to_string())),
            None => (item.as_str(), None),
        };
        specs.push((m.parse::<Method>()?, nuis));
    }
    let nuisance: String = s.get("nuisance", f.nuisance, "parametric".to_string())?;
    let folds = s.get("k", f.folds, DEFAULT_FOLDS)?;
    let alpha = s.get("alpha", f.alpha, DEFAULT_ALPHA)?;
    let ci: String = s.get("ci-style", f.ci_style, "wald".to_string())?;
    let ci_style: CiStyle = ci.parse()?;
    let eta = s.get("eta", f.eta, DEFAULT_CLIP)?;
    let seed = s.get("seed", f.seed, 0u64)?;
    let design_e = s.get("design-e", f.design_e, 0.5)?;
    let d = ForestConfig::default();
    let trees = s.get("trees", f.trees, d.n_trees)?;
    let min_leaf = s.get("min-leaf", f.min_leaf, d.min_leaf)?;
    let max_depth = s.get("max-depth", f.max_depth, d.max_depth.unwrap_or(0))?;
    let mtry = s.get("mtry", f.mtry, d.mtry.unwrap_or(0))?;
    let forest = ForestConfig {
        n_trees: trees,
        max_depth: (max_depth > 0).then_some(max_depth),
        min_leaf,
        mtry: (mtry > 0).then_some(mtry),
        seed,
        ..d
    };
    Ok(EstimatorSettings {
        specs,
        nuisance,
        folds,
        alpha,
        ci_style,
        eta,
        seed,
        design_e,
        forest,
    })
}

impl EstimatorSettings {
    fn configs(&self, dgp: Option<DgpKind>) -> Result<Vec<EstimatorConfig>> {
        let mut out: Vec<EstimatorConfig> = Vec::new();
        for (method, nuis) in &self.specs {
            let name = nuis.as_deref().unwrap_or(&self.nuisance);
            let mut recipe = recipe_by_name(name, dgp)?;
            if let (PropensityLearner::Forest(_), OutcomeLearner::Forest(_)) = (&recipe.propensity, &recipe.outcome) {
                recipe = NuisanceRecipe::forest(self.forest);
            }
            if !matches!(recipe.propensity, PropensityLearner::Fixed(_)) {
                recipe.clip = self.eta;
            }
            let cfg = EstimatorConfig {
                method: *method,
                recipe,
                folds: self.folds,
                seed: self.seed,
                ci_style: self.ci_style,
                alpha: self.alpha,
                design_e: self.design_e,
            };
            cfg.validate()
                .map_err(|e| e.context(format!("estimator {}", cfg.label())))?;
            if out.iter().any(|c| c.label() == cfg.label()) {
                return Err(invalid(format!("estimator {} listed twice", cfg.label())));
            }
            out.push(cfg);
        }
        Ok(out)
    }
}

#[derive(Debug, Serialize)]
struct EstimateReport<'a> {
    input: String,
    n: usize,
    n1: usize,
    n0: usize,
    p: usize,
    estimates: &'a [RrEstimate],
}

fn flags(e: &RrEstimate) -> String {
    let mut f = Vec::new();
    if e.point.degenerate {
        f.push("degenerate");
    }
    if e.point.assumes_randomization {
        f.push("assumes_randomization");
    }
    if e.variance_clamped {
        f.push("variance_clamped");
    }
    f.join(";")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:?}"))
}

fn write_estimates_csv(path: &Path, rows: &[RrEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    let io = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record([
        "estimator",
        "method",
        "point",
        "v_hat",
        "se",
        "ci_lower",
        "ci_upper",
        "flags",
    ])
    .map_err(io)?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.point.method.name().to_string(),
            format!("{:?}", r.point.value),
            opt(r.v_hat),
            opt(r.se()),
            opt(r.ci_lower),
            opt(r.ci_upper),
            flags(r),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let mut s = Settings::load(a.config.as_deref())?;
    let input = s.path("input", a.input)?;
    let out = s.path("out", a.out)?;
    let est = resolve_estimators(&mut s, a.est, "neyman")?;
    s.finish()?;
    let configs = est.configs(None)?;

    let d = ObservationalDataset::load_csv(&input)?;
    d.require_both_arms()?;
    if est.ci_style == CiStyle::Katz {
        d.require_binary_outcome()?;
    }

    let mut rows = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let r = estimate(&d, cfg).map_err(|e| e.context(format!("estimator {}", cfg.label())))?;
        rows.push(r);
    }

    create_dir(&out)?;
    write_estimates_csv(&out.join("report.csv"), &rows)?;
    let report = EstimateReport {
        input: input.display().to_string(),
        n: d.n(),
        n1: d.n1(),
        n0: d.n0(),
        p: d.p(),
        estimates: &rows,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| invalid(e.to_string()))?;
    write_file(&out.join("report.json"), &json)?;
    s.write_resolved(&out)?;

    println!(
        "{:<18} {:>12} {:>12} {:>12} {:>12}",
        "estimator", "point", "se", "ci_lower", "ci_upper"
    );
    for r in &rows {
        let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.6}"));
        println!(
            "{:<18} {:>12.6} {:>12} {:>12} {:>12}",
            r.label,
            r.point.value,
            f(r.se()),
            f(r.ci_lower),
            f(r.ci_upper)
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct OracleSidecar<'a> {
    dgp: DgpKind,
    n: usize,
    seed: u64,
    noise_sd: f64,
    y0: &'a [f64],
    y1: &'a [f64],
    e_true: &'a [f64],
    mu0: &'a [f64],
    mu1: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden: Option<Vec<Vec<f64>>>,
}

pub fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut s = Settings::load(a.config.as_deref())?;
    let dgp: DgpKind = s.require::<String>("dgp", a.dgp)?.parse()?;
    let n = s.require("n", a.n)?;
    let seed = s.get("seed", a.seed, 0u64)?;
    let sigma = s.get("sigma", a.sigma, 1.0)?;
    let out = s.path("out", a.out)?;
    s.finish()?;

    let sample = generate(&DgpSpec::new(dgp, n, seed).with_noise(sigma))?;
    create_dir(&out)?;
    sample.dataset.save_csv(out.join("data.csv"))?;
    let sidecar = OracleSidecar {
        dgp,
        n,
        seed,
        noise_sd: sigma,
        y0: &sample.y0,
        y1: &sample.y1,
        e_true: &sample.e_true,
        mu0: &sample.mu0_true,
        mu1: &sample.mu1_true,
        hidden: sample.hidden.as_ref().map(|h| h.rows().map(<[f64]>::to_vec).collect()),
    };
    let json = serde_json::to_string(&sidecar).map_err(|e| invalid(e.to_string()))?;
    write_file(&out.join("oracle.json"), &json)?;
    s.write_resolved(&out)?;
    let summary = sample.dataset.summarize();
    println!(
        "{dgp}: n={} treated={} control={} -> {}",
        summary.n,
        summary.n1,
        summary.n0,
        out.display()
    );
    Ok(())
}

pub fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut s = Settings::load(a.config.as_deref())?;
    let dgp: DgpKind = s.require::<String>("dgp", a.dgp)?.parse()?;
    let n_list: String = s.require("n-list", a.n_list)?;
    let sizes = parse_list::<usize>("n-list", &n_list)?;
    let reps = s.get("reps", a.reps, DEFAULT_REPS)?;
    let sigma = s.get("sigma", a.sigma, 1.0)?;
    let truth_draws = s.get("truth-draws", a.truth_draws, DEFAULT_TRUTH_DRAWS)?;
    let parallel = s.get("parallel", a.parallel, true)?;
    let out = s.path("out", a.out)?;
    let est = resolve_estimators(&mut s, a.est, "neyman,g,aipw")?;
    s.finish()?;

    let mut plan = ExperimentPlan::new(dgp, sizes, reps, est.configs(Some(dgp))?);
    plan.noise_sd = sigma;
    plan.master_seed = est.seed;
    plan.truth_draws = truth_draws;
    plan.parallel = parallel;
    plan.validate()?;

    let report = run_experiment(&plan)?;
    create_dir(&out)?;
    report.save(&out)?;
    s.write_resolved(&out)?;

    println!(
        "{dgp}: true RR {:?} ({})",
        report.truth.value,
        provenance_name(&report.truth)
    );
    println!(
        "{:<18} {:>7} {:>10} {:>10} {:>10} {:>9}",
        "estimator", "n", "bias", "sd", "rmse", "coverage"
    );
    for r in compare_estimators(&report) {
        let row = report.row(&r.estimator, r.n).expect("ranked rows come from the report");
        println!(
            "{:<18} {:>7} {:>10.5} {:>10.5} {:>10.5} {:>9}",
            row.estimator,
            row.n,
            row.bias,
            row.sd,
            row.rmse,
            row.coverage.map_or("NA".to_string(), |c| format!("{c:.3}"))
        );
    }
    Ok(())
}

fn provenance_name(t: &TrueRr) -> &'static str {
    match t.provenance {
        crate::dgp::Provenance::ClosedForm => "closed_form",
        crate::dgp::Provenance::McOracle => "mc_oracle",
    }
}

pub fn cmd_true_rr(a: TrueRrArgs) -> Result<()> {
    if a.dgp_name.is_some() && a.dgp.is_some() {
        return Err(invalid("give the design either as an argument or with --dgp, not both"));
    }
    let mut s = Settings::load(a.config.as_deref())?;
    let dgp: DgpKind = s.require::<String>("dgp", a.dgp_name.or(a.dgp))?.parse()?;
    let draws = s.get("draws", a.draws, DEFAULT_TRUTH_DRAWS)?;
    let seed = s.get("seed", a.seed, DEFAULT_TRUTH_SEED)?;
    let out = match a.out {
        Some(p) => Some(s.path("out", Some(p))?),
        None if s.file.contains_key("out") => Some(s.path("out", None)?),
        None => None,
    };
    s.finish()?;

    let t = true_rr(dgp, draws, seed)?;
    println!("{:?}", t.value);
    println!("provenance {}", provenance_name(&t));
    println!("std_error {}", opt(t.std_error));
    println!("draws {}", t.mc_draws.map_or("NA".to_string(), |d| d.to_string()));
    if let Some(out) = out {
        create_dir(&out)?;
        let json = serde_json::to_string_pretty(&t).map_err(|e| invalid(e.to_string()))?;
        write_file(&out.join("true_rr.json"), &json)?;
        s.write_resolved(&out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flag_precedence() {
        let mut s = Settings::parse("# plan\nreps = 10\nalpha = 0.1 # ten percent\n").unwrap();
        assert_eq!(s.get("reps", None, 1usize).unwrap(), 10);
        assert_eq!(s.get("alpha", Some(0.2), 0.05).unwrap(), 0.2);
        assert_eq!(s.get("seed", None, 7u64).unwrap(), 7);
        s.finish().unwrap();
        assert_eq!(s.resolved_text(), "reps = 10\nalpha = 0.2\nseed = 7\n");
    }

    #[test]
    fn malformed_and_unknown_keys() {
        assert!(Settings::parse("reps 10").is_err());
        assert!(Settings::parse("reps = 1\nreps = 2").is_err());
        let mut s = Settings::parse("reps = 10\ncolour = blue").unwrap();
        s.get("reps", None, 1usize).unwrap();
        assert!(matches!(s.finish(), Err(Error::InvalidArgument(_))));
        let mut s = Settings::parse("reps = ten").unwrap();
        assert!(s.get("reps", None, 1usize).is_err());
    }

    #[test]
    fn estimator_specs() {
        let mut s = Settings::default();
        let f = EstimatorFlags {
            estimators: Some("neyman, aipw:forest ,g".into()),
            trees: Some(10),
            ..Default::default()
        };
        let est = resolve_estimators(&mut s, f, "neyman").unwrap();
        let labels: Vec<String> = est.configs(None).unwrap().iter().map(|c| c.label()).collect();
        assert_eq!(labels, ["neyman", "aipw:forest", "g:parametric"]);
        let cfgs = est.configs(None).unwrap();
        match &cfgs[1].recipe.outcome {
            OutcomeLearner::Forest(c) => assert_eq!(c.n_trees, 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn katz_rejected_for_non_neyman() {
        let mut s = Settings::default();
        let f = EstimatorFlags {
            estimators: Some("aipw".into()),
            ci_style: Some("katz".into()),
            ..Default::default()
        };
        let est = resolve_estimators(&mut s, f, "neyman").unwrap();
        let e = est.configs(None).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_VALIDATION);
    }

    #[test]
    fn oracle_needs_design() {
        let mut s = Settings::default();
        let f = EstimatorFlags {
            estimators: Some("ipw:oracle".into()),
            ..Default::default()
        };
        let est = resolve_estimators(&mut s, f, "neyman").unwrap();
        assert!(est.configs(None).is_err());
        assert_eq!(est.configs(Some(DgpKind::Lunceford)).unwrap()[0].label(), "ipw:oracle");
    }

    #[test]
    fn clap_rejects_unknown_flag() {
        assert_eq!(run(["riskratio", "true-rr", "linear_rct", "--bogus"]), EXIT_VALIDATION);
    }
}
