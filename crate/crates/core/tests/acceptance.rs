//! Acceptance suite: twelve criteria, one PASS/FAIL line each.
//!
//! Runs with its own harness so the lines are printed on every run:
//! `cargo test -p riskratio --test acceptance`. Exits non-zero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use riskratio::data::{Covariates, ObservationalDataset};
use riskratio::dgp::{self, generate, true_rr, DgpKind, DgpSpec, DEFAULT_TRUTH_DRAWS};
use riskratio::estimators::{crossfit_arm_functionals, make_folds_for};
use riskratio::estimators::{rr_aipw, rr_ipw, rr_neyman, rr_os, ArmFunctionals};
use riskratio::inference::{
    design_variance, katz_ci, log_delta_ci, optimal_e_ht, optimal_e_neyman, var_ht, var_neyman,
};
use riskratio::montecarlo::{run_experiment, ExperimentPlan};
use riskratio::nuisance::{logistic, ols, NuisanceRecipe, OutcomeModel, PropensityModel};
use riskratio::rng::SplitMix64;
use riskratio::{Arm, EstimatorConfig, Method};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Random dataset with both arms; outcomes drawn from one of several laws.
fn random_dataset(rng: &mut SplitMix64, binary: bool) -> ObservationalDataset {
    loop {
        let n = 2 + rng.below(300);
        let p = 1 + rng.below(3);
        let share = 0.05 + 0.9 * rng.uniform();
        let law = rng.below(3);
        let x: Vec<f64> = (0..n * p).map(|_| rng.normal()).collect();
        let t: Vec<bool> = (0..n).map(|_| rng.bernoulli(share)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                if binary {
                    let q = if t[i] {
                        0.2 + 0.6 * share
                    } else {
                        0.15 + 0.5 * (1.0 - share)
                    };
                    if rng.bernoulli(q) {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    match law {
                        0 => 0.5 + 3.0 * rng.uniform(),
                        1 => (rng.normal() * 0.7).exp(),
                        _ => (2.0 + rng.normal()).abs(),
                    }
                }
            })
            .collect();
        let n1 = t.iter().filter(|&&b| b).count();
        if n1 == 0 || n1 == n {
            continue;
        }
        if binary {
            let a: f64 = y.iter().zip(&t).filter(|(_, &ti)| ti).map(|(v, _)| v).sum();
            let c: f64 = y.iter().zip(&t).filter(|(_, &ti)| !ti).map(|(v, _)| v).sum();
            if a == 0.0 || c == 0.0 {
                continue;
            }
        }
        let x = Covariates::from_row_major(x, n, p).unwrap();
        return ObservationalDataset::new(x, t, y).unwrap();
    }
}

fn c1_ipw_neyman_collapse() -> Verdict {
    let mut rng = SplitMix64::new(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let binary = rng.bernoulli(0.3);
        let d = random_dataset(&mut rng, binary);
        let share = d.n1() as f64 / d.n() as f64;
        let clip = share.min(1.0 - share).min(0.01);
        let model = PropensityModel::constant(share, d.p(), clip).unwrap();
        let a = rr_ipw(&d, &model).unwrap().value;
        let b = rr_neyman(&d).unwrap().value;
        worst = worst.max((a - b).abs());
    }
    verdict(
        worst <= 1e-12,
        format!("max |ipw - neyman| = {worst:.3e} over 1000 datasets (tol 1e-12)"),
    )
}

fn c2_ht_neyman_variance() -> Verdict {
    let mut rng = SplitMix64::new(202);
    let mut worst = 0.0f64;
    let mut worst_abs = 0.0f64;
    for _ in 0..1000 {
        let binary = rng.bernoulli(0.3);
        let d = random_dataset(&mut rng, binary);
        let e = d.n1() as f64 / d.n() as f64;
        let tau = rr_neyman(&d).unwrap().value;
        let lhs = var_ht(&d, e).unwrap() - var_neyman(&d).unwrap();
        let rhs = tau * tau / (e * (1.0 - e));
        worst_abs = worst_abs.max((lhs - rhs).abs());
        worst = worst.max((lhs - rhs).abs() / rhs.max(1.0));
    }
    verdict(
        worst <= 1e-10,
        format!("max |(V_ht - V_n) - tau^2/(e(1-e))| / max(1, tau^2/(e(1-e))) = {worst:.3e} (tol 1e-10; absolute {worst_abs:.2e})"),
    )
}

fn c3_katz_log_delta() -> Verdict {
    let mut rng = SplitMix64::new(303);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let d = random_dataset(&mut rng, true);
        let tau = rr_neyman(&d).unwrap().value;
        let (kl, ku) = katz_ci(&d, 0.05).unwrap();
        let (ll, lu) = log_delta_ci(tau, var_neyman(&d).unwrap(), d.n(), 0.05).unwrap();
        worst = worst.max((kl - ll).abs()).max((ku - lu).abs());
    }
    verdict(
        worst <= 1e-12,
        format!("max endpoint gap = {worst:.3e} over 500 binary datasets (tol 1e-12)"),
    )
}

fn c4_os_aipw_coincidence() -> Verdict {
    let mut rng = SplitMix64::new(404);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let g0 = 0.1 + 10.0 * rng.uniform();
        let af = ArmFunctionals {
            tau_g_1: 0.1 + 10.0 * rng.uniform(),
            tau_g_0: g0,
            tau_aipw_1: 0.1 + 10.0 * rng.uniform(),
            tau_aipw_0: g0,
        };
        if rr_os(&af).unwrap().value != rr_aipw(&af).unwrap().value {
            mismatches += 1;
        }
    }
    // Cross-fitted case where control residuals vanish: constant outcome,
    // control surface equal to it.
    let s = generate(&DgpSpec::new(DgpKind::Lunceford, 500, 9)).unwrap();
    let d = ObservationalDataset::new(s.dataset.x().clone(), s.dataset.t().to_vec(), vec![3.0; 500]).unwrap();
    let recipe = NuisanceRecipe {
        propensity: riskratio::nuisance::PropensityLearner::Logistic(Default::default()),
        outcome: riskratio::nuisance::OutcomeLearner::Fixed {
            control: OutcomeModel::constant(Arm::Control, 3.0, 3),
            treated: OutcomeModel::linear(Arm::Treated, 1.0, vec![0.5, -0.2, 0.3]),
        },
        clip: 0.01,
    };
    let folds = make_folds_for(&d, 5, 1).unwrap();
    let cf = crossfit_arm_functionals(&d, &folds, &recipe).unwrap();
    let af = cf.functionals;
    let crossfit_ok = af.tau_aipw_0 == af.tau_g_0 && rr_os(&af).unwrap().value == rr_aipw(&af).unwrap().value;
    verdict(
        mismatches == 0 && crossfit_ok,
        format!("{mismatches} mismatches over 1000 constructed cases; cross-fitted case equal: {crossfit_ok}"),
    )
}

fn c5_score_and_normal_equations() -> Verdict {
    let mut worst_score = 0.0f64;
    let mut worst_ols = 0.0f64;
    let mut fits = 0;
    let mut notes = Vec::new();
    for kind in DgpKind::ALL {
        for seed in 0..3 {
            let n = if kind == DgpKind::Lunceford && seed == 0 {
                20_000
            } else {
                5_000
            };
            let s = generate(&DgpSpec::new(kind, n, 500 + seed)).unwrap();
            let d = &s.dataset;
            let t = d.t_numeric();
            let f = logistic::fit(d.x(), &t, &Default::default()).unwrap();
            worst_score = worst_score.max(logistic::score_residual(d.x(), &t, f.intercept, &f.coefficients));
            fits += 1;
            if kind == DgpKind::Lunceford && seed == 0 {
                let target = [-0.6, 0.6, -0.6];
                let err = f
                    .coefficients
                    .iter()
                    .zip(target)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                notes.push(format!("lunceford slopes off by {err:.3}"));
                if err > 0.1 {
                    return verdict(false, format!("logistic slopes off by {err} on lunceford n=20000"));
                }
            }
            for arm in [true, false] {
                let sub = d.select(&d.arm_indices(arm)).unwrap();
                let o = ols::fit(sub.x(), sub.y()).unwrap();
                let scale = sub.y().iter().fold(0.0f64, |m, v| m.max(v.abs()))
                    * sub.x().as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
                worst_ols = worst_ols.max(ols::normal_equation_residual(sub.x(), sub.y(), &o) / scale);
                fits += 1;
            }
        }
    }
    verdict(
        worst_score <= 1e-8 && worst_ols <= 1e-8,
        format!(
            "{fits} fits: max score residual {worst_score:.2e} (tol 1e-8), max normal-equation residual / scale {worst_ols:.2e} (tol 1e-8); {}",
            notes.join(", ")
        ),
    )
}

fn c6_optimal_e_grid() -> Verdict {
    let mut rng = SplitMix64::new(606);
    let grid: Vec<f64> = (0..999).map(|k| 0.001 + k as f64 * (0.998 / 998.0)).collect();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        // Neyman family from variances and means.
        let (v1, m1, v0, m0) = (
            5.0 * rng.uniform(),
            0.1 + 3.0 * rng.uniform(),
            5.0 * rng.uniform(),
            0.1 + 3.0 * rng.uniform(),
        );
        let (c1, c0) = (v1 / (m1 * m1), v0 / (m0 * m0));
        let e = optimal_e_neyman(v1, m1, v0, m0).unwrap();
        let best = design_variance(e, c1, c0);
        let grid_min = grid
            .iter()
            .map(|&g| design_variance(g, c1, c0))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best - grid_min);

        // Horvitz-Thompson family from raw second moments (>= mean^2).
        let (q1, q0) = (m1 * m1 + v1, m0 * m0 + v0);
        let (d1, d0) = (q1 / (m1 * m1), q0 / (m0 * m0));
        let e = optimal_e_ht(q1, m1, q0, m0).unwrap();
        let best = design_variance(e, d1, d0);
        let grid_min = grid
            .iter()
            .map(|&g| design_variance(g, d1, d0))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best - grid_min);
    }
    verdict(
        worst <= 1e-9,
        format!("max (closed form - grid min) = {worst:.3e} over 200 cases (tol 1e-9)"),
    )
}

fn parametric(method: Method) -> EstimatorConfig {
    EstimatorConfig::new(method, NuisanceRecipe::parametric())
}

fn c7_lunceford_coverage() -> Verdict {
    let mut plan = ExperimentPlan::new(
        DgpKind::Lunceford,
        vec![1000],
        300,
        vec![parametric(Method::Aipw), parametric(Method::Neyman)],
    );
    plan.master_seed = 7;
    let rep = run_experiment(&plan).unwrap();
    let aipw = rep.row("aipw:parametric", 1000).unwrap();
    let ney = rep.row("neyman", 1000).unwrap();
    let (ca, cn) = (aipw.coverage.unwrap_or(f64::NAN), ney.coverage.unwrap_or(f64::NAN));
    verdict(
        (0.90..=1.0).contains(&ca) && cn <= 0.20,
        format!(
            "aipw coverage {ca:.3} (want [0.90, 1]) over {} reps, neyman coverage {cn:.3} (want <= 0.20); failures {}/{}",
            aipw.used, aipw.failure_count, ney.failure_count
        ),
    )
}

fn c8_lunceford_consistency() -> Verdict {
    let mut plan = ExperimentPlan::new(
        DgpKind::Lunceford,
        vec![5000],
        200,
        vec![parametric(Method::G), parametric(Method::Os), parametric(Method::Aipw)],
    );
    plan.master_seed = 8;
    plan.truth_draws = DEFAULT_TRUTH_DRAWS;
    let rep = run_experiment(&plan).unwrap();
    let tau = rep.truth.value;
    let mut pass = true;
    let mut parts = vec![format!("tau {tau:.5}")];
    for label in ["g:parametric", "os:parametric", "aipw:parametric"] {
        let r = rep.row(label, 5000).unwrap();
        let gap = (r.mean_estimate - tau).abs();
        pass &= gap <= 0.05 * tau && r.used > 0;
        parts.push(format!("{label} |mean - tau| = {gap:.4}"));
    }
    parts.push(format!("tol {:.4}", 0.05 * tau));
    verdict(pass, parts.join(", "))
}

fn c9_wager_double_robustness() -> Verdict {
    let mut plan = ExperimentPlan::new(
        DgpKind::WagerNlLogistic,
        vec![10_000],
        100,
        vec![parametric(Method::G), parametric(Method::Aipw)],
    );
    plan.master_seed = 9;
    let rep = run_experiment(&plan).unwrap();
    let g = rep.row("g:parametric", 10_000).unwrap();
    let a = rep.row("aipw:parametric", 10_000).unwrap();
    let ratio = g.bias.abs() / a.bias.abs();
    verdict(
        g.bias.abs() >= 2.0 * a.bias.abs(),
        format!(
            "|bias| g {:.4}, aipw {:.4}, ratio {ratio:.1} (want >= 2)",
            g.bias.abs(),
            a.bias.abs()
        ),
    )
}

fn c10_c11_rct_spread() -> (Verdict, Verdict) {
    let mut plan = ExperimentPlan::new(
        DgpKind::LinearRct,
        vec![2000],
        500,
        vec![
            parametric(Method::G),
            parametric(Method::Neyman),
            parametric(Method::Ht),
        ],
    );
    plan.master_seed = 10;
    let rep = run_experiment(&plan).unwrap();
    let g = rep.row("g:parametric", 2000).unwrap().sd;
    let n = rep.row("neyman", 2000).unwrap().sd;
    let h = rep.row("ht", 2000).unwrap().sd;
    (
        verdict(g <= n, format!("sd g:parametric {g:.4} <= sd neyman {n:.4}")),
        verdict(n <= h, format!("sd neyman {n:.4} <= sd ht {h:.4}")),
    )
}

fn c12_truth_two_routes() -> Verdict {
    let mc = true_rr(DgpKind::WagerNlLogistic, 1_000_000, 12).unwrap();
    let quad = dgp::wager_logistic_rr_quadrature(80);
    let gap = (mc.value - quad).abs();
    verdict(
        gap <= 1e-3,
        format!(
            "MC {:.6} (se {:.1e}, {} draws) vs Gauss-Hermite {quad:.6}: gap {gap:.2e} (tol 1e-3)",
            mc.value,
            mc.std_error.unwrap(),
            mc.mc_draws.unwrap()
        ),
    )
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |name: &str| filter.is_empty() || filter.iter().any(|f| name.contains(f.as_str()));

    type Check = fn() -> Verdict;
    let single: [(&str, &str, Check); 10] = [
        ("criterion_01", "IPW/Neyman collapse", c1_ipw_neyman_collapse),
        ("criterion_02", "HT-Neyman variance identity", c2_ht_neyman_variance),
        ("criterion_03", "Katz equals log-delta", c3_katz_log_delta),
        ("criterion_04", "OS/AIPW coincidence", c4_os_aipw_coincidence),
        (
            "criterion_05",
            "score and normal-equation residuals",
            c5_score_and_normal_equations,
        ),
        ("criterion_06", "optimal e beats grid", c6_optimal_e_grid),
        ("criterion_07", "Lunceford coverage", c7_lunceford_coverage),
        ("criterion_08", "Lunceford consistency", c8_lunceford_consistency),
        ("criterion_09", "Wager double robustness", c9_wager_double_robustness),
        ("criterion_12", "true RR by MC and quadrature", c12_truth_two_routes),
    ];

    let mut results: Vec<(String, String, Verdict, f64)> = Vec::new();
    for (id, title, check) in single {
        if !selected(id) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        results.push((id.into(), title.into(), v, start.elapsed().as_secs_f64()));
    }
    if selected("criterion_10") || selected("criterion_11") {
        let start = Instant::now();
        let (v10, v11) = c10_c11_rct_spread();
        let secs = start.elapsed().as_secs_f64();
        results.push((
            "criterion_10".into(),
            "RCT: G-formula spread <= Neyman".into(),
            v10,
            secs,
        ));
        results.push(("criterion_11".into(), "RCT: Neyman spread <= HT".into(), v11, secs));
    }
    results.sort_by(|a, b| a.0.cmp(&b.0));

    let mut failed = 0;
    println!();
    for (id, title, v, secs) in &results {
        if !v.pass {
            failed += 1;
        }
        println!(
            "{id} {} {title}: {} [{secs:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("\nacceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
