use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn riskratio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskratio"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Data rows of the report CSV.
fn report_rows(dir: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(dir.join("report.csv")).unwrap();
    r.records().map(Result::unwrap).collect()
}

#[test]
fn true_rr_linear_prints_two() {
    let o = riskratio(&["true-rr", "linear_rct"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(out.lines().next().unwrap(), "2.0");
    assert!(out.contains("provenance closed_form"));
}

#[test]
fn true_rr_monte_carlo_reports_error() {
    let o = riskratio(&["true-rr", "--dgp", "lunceford", "--draws", "200000", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let v: f64 = out.lines().next().unwrap().parse().unwrap();
    assert!((v - (1.0 + 2.0 / 2.55)).abs() < 0.02);
    assert!(out.contains("provenance mc_oracle"));
    assert!(!out.contains("std_error NA"));
}

#[test]
fn estimate_neyman_on_toy_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("toy.csv");
    // Treated mean (3 + 5) / 2 = 4, control mean (1 + 3) / 2 = 2.
    fs::write(&input, "x1,t,y\n0.1,1,3\n0.2,1,5\n0.3,0,1\n0.4,0,3\n").unwrap();
    let out = dir.path().join("out");
    let o = riskratio(&[
        "estimate",
        "--input",
        p(&input),
        "--out",
        p(&out),
        "--estimators",
        "neyman",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = report_rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "neyman");
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 2.0);
    assert_eq!(&rows[0][7], "assumes_randomization");
    assert!(out.join("report.json").exists());
    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("estimators = neyman\n"));
    assert!(resolved.contains("alpha = 0.05\n"));
}

#[test]
fn estimate_katz_on_continuous_outcome_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("toy.csv");
    fs::write(&input, "x1,t,y\n0,1,3\n0,1,5\n0,0,1\n0,0,3\n").unwrap();
    let out = dir.path().join("out");
    let o = riskratio(&["estimate", "--input", p(&input), "--out", p(&out), "--ci-style", "katz"]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn simulate_then_estimate_aipw() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let o = riskratio(&[
        "simulate",
        "--dgp",
        "lunceford",
        "--n",
        "5000",
        "--seed",
        "8",
        "--out",
        p(&sim),
    ]);
    assert_eq!(code(&o), 0);
    for f in ["data.csv", "oracle.json", "config.resolved"] {
        assert!(sim.join(f).exists(), "{f}");
    }
    let oracle: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sim.join("oracle.json")).unwrap()).unwrap();
    for k in ["y0", "y1", "e_true", "mu0", "mu1"] {
        assert_eq!(oracle[k].as_array().unwrap().len(), 5000, "{k}");
    }

    let out = dir.path().join("est");
    let o = riskratio(&[
        "estimate",
        "--input",
        p(&sim.join("data.csv")),
        "--out",
        p(&out),
        "--estimators",
        "aipw",
        "--k",
        "5",
        "--nuisance",
        "parametric",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let point: f64 = report_rows(&out)[0][2].parse().unwrap();
    assert!((point - (1.0 + 2.0 / 2.55)).abs() < 0.1, "{point}");
}

#[test]
fn experiment_from_config_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.cfg");
    fs::write(
        &cfg,
        "# small plan\ndgp = linear_rct\nn-list = 200, 400\nreps = 6\nestimators = neyman, ht, g:parametric\nseed = 4\n",
    )
    .unwrap();
    let out1 = dir.path().join("run1");
    let o = riskratio(&["experiment", "--config", p(&cfg), "--out", p(&out1)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.csv", "report.json", "config.resolved"] {
        assert!(out1.join(f).exists(), "{f}");
    }

    // Replaying the resolved configuration reproduces the report byte for byte.
    let out2 = dir.path().join("run2");
    let o = riskratio(&[
        "experiment",
        "--config",
        p(&out1.join("config.resolved")),
        "--out",
        p(&out2),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(out1.join("report.csv")).unwrap(),
        fs::read(out2.join("report.csv")).unwrap()
    );
    assert_eq!(
        fs::read(out1.join("report.json")).unwrap(),
        fs::read(out2.join("report.json")).unwrap()
    );
    let csv = fs::read_to_string(out1.join("report.csv")).unwrap();
    assert!(csv.starts_with("estimator,n,metric,value\n"));
    assert!(csv.contains("g:parametric,400,coverage,"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.cfg");
    fs::write(&cfg, "dgp = linear_rct\nn-list = 100\nreps = 2\nestimators = neyman\n").unwrap();
    let out = dir.path().join("o");
    let o = riskratio(&["experiment", "--config", p(&cfg), "--reps", "3", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("reps = 3\n"), "{resolved}");
}

#[test]
fn malformed_inputs_fail_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "dgp linear_rct\n").unwrap();
    assert_eq!(
        code(&riskratio(&["experiment", "--config", p(&bad), "--out", p(&out)])),
        2
    );

    let unknown = dir.path().join("unknown.cfg");
    fs::write(&unknown, "dgp = linear_rct\nn-list = 100\nreps = 2\nflavour = mint\n").unwrap();
    assert_eq!(
        code(&riskratio(&["experiment", "--config", p(&unknown), "--out", p(&out)])),
        2
    );

    assert_eq!(code(&riskratio(&["true-rr", "linear_rct", "--frobnicate"])), 2);
    assert_eq!(code(&riskratio(&["true-rr", "nowhere"])), 2);
    assert_eq!(
        code(&riskratio(&["simulate", "--dgp", "lunceford", "--out", p(&out)])),
        2
    );
    assert_eq!(
        code(&riskratio(&[
            "experiment",
            "--dgp",
            "lunceford",
            "--n-list",
            "100",
            "--reps",
            "2",
            "--estimators",
            "ht",
            "--out",
            p(&out)
        ])),
        2
    );
    assert!(!out.exists());
}

#[test]
fn missing_files_fail_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = riskratio(&[
        "estimate",
        "--input",
        p(&dir.path().join("none.csv")),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 4);
    let o = riskratio(&["experiment", "--config", p(&dir.path().join("none.cfg"))]);
    assert_eq!(code(&o), 4);
}

#[test]
fn fit_failure_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("sep.csv");
    // The covariate separates the arms perfectly, so the logistic fit cannot converge.
    fs::write(&input, "x1,t,y\n-2,0,1\n-1,0,2\n1,1,3\n2,1,4\n").unwrap();
    let o = riskratio(&[
        "estimate",
        "--input",
        p(&input),
        "--out",
        p(&dir.path().join("o")),
        "--estimators",
        "ipw",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ipw:parametric"));
}

#[test]
fn help_exits_cleanly() {
    let o = riskratio(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("experiment"));
}
