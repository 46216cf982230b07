//! Synthetic designs with known risk ratio.
//!
//! Every design is written as `Y(0) = b + eps0`, `Y(1) = b + m + eps1` with
//! `P(T = 1 | X) = e(X)` and independent `N(0, sigma^2)` noise per arm, so the
//! true risk ratio is `E[m] / E[b] + 1`.
//!
//! | kind | X | b | m | e |
//! |---|---|---|---|---|
//! | `linear_rct` | N(0, I6) | 6 + b0.x | 6 + (b1 - b0).x | 0.5 |
//! | `nonlinear_rct` | U(0,1)^6 | 4 max(x1+x2+x3, 0) - min(x4+x6, 0) | sin(x1) x2^2 + x3/(x4+1) - ln(x5+1) + x6^3 + 1 | 0.5 |
//! | `lunceford` | see below | -x1 + x2 - x3 - v1 + v2 + v3 | 2 | logistic(-0.6 x1 + 0.6 x2 - 0.6 x3) |
//! | `wager_nl_logistic` | N(0, I6) | 2 softplus(x1+x2+x3) | 1 | 1/(1+exp(x2+x3)) |
//! | `wager_nl_nonlogistic` | U(0,1)^6 | (x1+x2)/2 | sin(pi x1 x2) + 2(x3-0.5)^2 + x4 + 0.5 x5 - (x1+x2)/4 | clamp(sin(pi x1), 0.1, 0.9) |
//!
//! with `b0 = (3,-7,1,4,-2,2)` and `b1 = (2,-5,2,8,-2,8)` for `linear_rct`.
//!
//! `lunceford` draws `X3 ~ Bern(0.2)`, `V3 | X3 ~ Bern(0.25 + 0.5 X3)` and
//! `(X1, V1, X2, V2) | X3 ~ N(+-(1, 1, -1, -1), S)` (sign + when `X3 = 1`).
//! Only `X = (X1, X2, X3)` enters the dataset; `V` is kept in the sample as
//! hidden prognostic covariates. Its outcome surfaces are therefore
//! `E[b | X] = -(5/3) x1 + (5/3) x2 - (11/6) x3 + 11/12`, plus 2 under treatment.
//! The baseline coefficients are applied to `(X1, X2, X3, V1, V2, V3)` in that order.
//!
//! Per unit the random stream is consumed as: covariate innovations, the
//! treatment uniform, then `eps0` and `eps1`.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Covariates, ObservationalDataset};
use crate::error::{invalid, Arm, Error, Result};
use crate::nuisance::logistic::{sigmoid, softplus};
use crate::nuisance::{OutcomeModel, PropensityModel, DEFAULT_CLIP};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    LinearRct,
    NonlinearRct,
    Lunceford,
    WagerNlLogistic,
    WagerNlNonlogistic,
}

const LINEAR_B0: [f64; 6] = [3.0, -7.0, 1.0, 4.0, -2.0, 2.0];
const LINEAR_B1: [f64; 6] = [2.0, -5.0, 2.0, 8.0, -2.0, 8.0];
const LINEAR_C0: f64 = 6.0;
const LINEAR_C1: f64 = 12.0;

const LUNCEFORD_BASELINE: [f64; 6] = [-1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
const LUNCEFORD_PROPENSITY: [f64; 3] = [-0.6, 0.6, -0.6];
/// Mean of `(X1, V1, X2, V2)` given `X3 = 1`; negated for `X3 = 0`.
const LUNCEFORD_SHIFT: [f64; 4] = [1.0, 1.0, -1.0, -1.0];
const LUNCEFORD_COV: [[f64; 4]; 4] = [
    [1.0, 0.5, -0.5, -0.5],
    [0.5, 1.0, -0.5, -0.5],
    [-0.5, -0.5, 1.0, 0.5],
    [-0.5, -0.5, 0.5, 1.0],
];
/// Mean of the baseline over the joint covariate law, from the moments above.
const LUNCEFORD_MEAN_BASELINE: f64 = 2.55;

impl DgpKind {
    pub const ALL: [DgpKind; 5] = [
        DgpKind::LinearRct,
        DgpKind::NonlinearRct,
        DgpKind::Lunceford,
        DgpKind::WagerNlLogistic,
        DgpKind::WagerNlNonlogistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DgpKind::LinearRct => "linear_rct",
            DgpKind::NonlinearRct => "nonlinear_rct",
            DgpKind::Lunceford => "lunceford",
            DgpKind::WagerNlLogistic => "wager_nl_logistic",
            DgpKind::WagerNlNonlogistic => "wager_nl_nonlogistic",
        }
    }

    /// Number of observed covariates.
    pub fn dim(self) -> usize {
        match self {
            DgpKind::Lunceford => 3,
            _ => 6,
        }
    }

    pub fn is_rct(self) -> bool {
        matches!(self, DgpKind::LinearRct | DgpKind::NonlinearRct)
    }

    pub fn propensity(self, x: &[f64]) -> f64 {
        match self {
            DgpKind::LinearRct | DgpKind::NonlinearRct => 0.5,
            DgpKind::Lunceford => sigmoid(dot(&LUNCEFORD_PROPENSITY, x)),
            DgpKind::WagerNlLogistic => sigmoid(-(x[1] + x[2])),
            DgpKind::WagerNlNonlogistic => (PI * x[0]).sin().clamp(0.1, 0.9),
        }
    }

    /// `E[Y(0) | X = x]`.
    pub fn baseline_mean(self, x: &[f64]) -> f64 {
        match self {
            DgpKind::LinearRct => LINEAR_C0 + dot(&LINEAR_B0, x),
            DgpKind::NonlinearRct => 4.0 * (x[0] + x[1] + x[2]).max(0.0) - (x[3] + x[5]).min(0.0),
            DgpKind::Lunceford => -(5.0 / 3.0) * x[0] + (5.0 / 3.0) * x[1] - (11.0 / 6.0) * x[2] + 11.0 / 12.0,
            DgpKind::WagerNlLogistic => 2.0 * softplus(x[0] + x[1] + x[2]),
            DgpKind::WagerNlNonlogistic => (x[0] + x[1]) / 2.0,
        }
    }

    /// Treatment effect `m(x)`.
    pub fn effect(self, x: &[f64]) -> f64 {
        match self {
            DgpKind::LinearRct => {
                LINEAR_C1 - LINEAR_C0
                    + LINEAR_B1
                        .iter()
                        .zip(&LINEAR_B0)
                        .zip(x)
                        .map(|((a, b), v)| (a - b) * v)
                        .sum::<f64>()
            }
            DgpKind::NonlinearRct => {
                x[0].sin() * x[1] * x[1] + x[2] / (x[3] + 1.0) - (x[4] + 1.0).ln() + x[5].powi(3) + 1.0
            }
            DgpKind::Lunceford => 2.0,
            DgpKind::WagerNlLogistic => 1.0,
            DgpKind::WagerNlNonlogistic => {
                (PI * x[0] * x[1]).sin() + 2.0 * (x[2] - 0.5).powi(2) + x[3] + 0.5 * x[4] - (x[0] + x[1]) / 4.0
            }
        }
    }

    /// `E[Y(t) | X = x]`.
    pub fn outcome_mean(self, x: &[f64], treated: bool) -> f64 {
        let b = self.baseline_mean(x);
        if treated {
            b + self.effect(x)
        } else {
            b
        }
    }

    fn draw(self, rng: &mut SplitMix64) -> Innovations {
        let mut z = [0.0; 6];
        let mut u = [0.0; 2];
        match self {
            DgpKind::LinearRct | DgpKind::WagerNlLogistic => z.iter_mut().for_each(|v| *v = rng.normal()),
            DgpKind::NonlinearRct | DgpKind::WagerNlNonlogistic => z.iter_mut().for_each(|v| *v = rng.uniform()),
            DgpKind::Lunceford => {
                u[0] = rng.uniform();
                u[1] = rng.uniform();
                z[..4].iter_mut().for_each(|v| *v = rng.normal());
            }
        }
        Innovations { z, u }
    }

    /// Antithetic partner: Gaussian innovations negated, uniform covariates
    /// reflected, discrete components shared.
    fn mirror(self, d: &Innovations) -> Innovations {
        let mut z = d.z;
        match self {
            DgpKind::NonlinearRct | DgpKind::WagerNlNonlogistic => z.iter_mut().for_each(|v| *v = 1.0 - *v),
            _ => z.iter_mut().for_each(|v| *v = -*v),
        }
        Innovations { z, u: d.u }
    }

    /// Observed covariates and, for `lunceford`, the hidden `V`.
    fn covariates(self, d: &Innovations) -> (Vec<f64>, [f64; 3]) {
        match self {
            DgpKind::Lunceford => {
                let x3 = if d.u[0] < 0.2 { 1.0 } else { 0.0 };
                let v3 = if d.u[1] < 0.25 + 0.5 * x3 { 1.0 } else { 0.0 };
                let sign = if x3 == 1.0 { 1.0 } else { -1.0 };
                let l = lunceford_factor();
                let mut g = [0.0; 4];
                for i in 0..4 {
                    g[i] = sign * LUNCEFORD_SHIFT[i] + (0..=i).map(|j| l[i][j] * d.z[j]).sum::<f64>();
                }
                (vec![g[0], g[2], x3], [g[1], g[3], v3])
            }
            _ => (d.z.to_vec(), [0.0; 3]),
        }
    }

    /// Realized baseline `b` (uses the hidden covariates for `lunceford`).
    fn baseline(self, x: &[f64], v: &[f64; 3]) -> f64 {
        match self {
            DgpKind::Lunceford => dot(&LUNCEFORD_BASELINE[..3], x) + dot(&LUNCEFORD_BASELINE[3..], v),
            _ => self.baseline_mean(x),
        }
    }
}

impl std::fmt::Display for DgpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DgpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DgpKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = DgpKind::ALL.iter().map(|k| k.name()).collect();
            invalid(format!("unknown design '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

struct Innovations {
    z: [f64; 6],
    u: [f64; 2],
}

/// Lower Cholesky factor of the `lunceford` Gaussian block.
fn lunceford_factor() -> [[f64; 4]; 4] {
    let a = LUNCEFORD_COV;
    let mut l = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub n: usize,
    pub seed: u64,
    pub noise_sd: f64,
}

impl DgpSpec {
    pub fn new(kind: DgpKind, n: usize, seed: u64) -> Self {
        DgpSpec {
            kind,
            n,
            seed,
            noise_sd: 1.0,
        }
    }

    pub fn with_noise(self, noise_sd: f64) -> Self {
        DgpSpec { noise_sd, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub dataset: ObservationalDataset,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub e_true: Vec<f64>,
    pub mu0_true: Vec<f64>,
    pub mu1_true: Vec<f64>,
    /// Prognostic covariates left out of the dataset (`lunceford` only).
    pub hidden: Option<Covariates>,
}

pub fn generate(spec: &DgpSpec) -> Result<GeneratedSample> {
    if spec.n == 0 {
        return Err(invalid("sample size must be >= 1"));
    }
    if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite()) {
        return Err(invalid(format!(
            "noise sd must be finite and >= 0, got {}",
            spec.noise_sd
        )));
    }
    let kind = spec.kind;
    let n = spec.n;
    let p = kind.dim();
    let mut rng = SplitMix64::new(spec.seed);
    let mut xs = Vec::with_capacity(n * p);
    let mut vs = Vec::with_capacity(n * 3);
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    let mut e_true = Vec::with_capacity(n);
    let mut mu0 = Vec::with_capacity(n);
    let mut mu1 = Vec::with_capacity(n);

    for _ in 0..n {
        let (x, v) = kind.covariates(&kind.draw(&mut rng));
        let e = kind.propensity(&x);
        let treated = rng.uniform() < e;
        let eps0 = spec.noise_sd * rng.normal();
        let eps1 = spec.noise_sd * rng.normal();
        let b = kind.baseline(&x, &v);
        let m = kind.effect(&x);
        let (a, c) = (b + eps0, b + m + eps1);
        y0.push(a);
        y1.push(c);
        y.push(if treated { c } else { a });
        t.push(treated);
        e_true.push(e);
        mu0.push(kind.outcome_mean(&x, false));
        mu1.push(kind.outcome_mean(&x, true));
        xs.extend_from_slice(&x);
        vs.extend_from_slice(&v);
    }

    let dataset = ObservationalDataset::new(Covariates::from_row_major(xs, n, p)?, t, y)?;
    let hidden = match kind {
        DgpKind::Lunceford => Some(Covariates::from_row_major(vs, n, 3)?),
        _ => None,
    };
    Ok(GeneratedSample {
        dataset,
        y0,
        y1,
        e_true,
        mu0_true: mu0,
        mu1_true: mu1,
        hidden,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    McOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueRr {
    pub value: f64,
    pub provenance: Provenance,
    pub mc_draws: Option<u64>,
    pub std_error: Option<f64>,
}

pub const MIN_TRUTH_DRAWS: u64 = 100_000;
pub const DEFAULT_TRUTH_DRAWS: u64 = 1_000_000;
pub const DEFAULT_TRUTH_SEED: u64 = 0x005E_ED0F_7A11;

/// True risk ratio: closed form for `linear_rct`, otherwise a Monte-Carlo
/// estimate of `E[m] / E[b] + 1` from `mc_draws` covariate draws taken as
/// antithetic pairs. The standard error is the delta-method one over pairs.
pub fn true_rr(kind: DgpKind, mc_draws: u64, seed: u64) -> Result<TrueRr> {
    if kind == DgpKind::LinearRct {
        return Ok(TrueRr {
            value: LINEAR_C1 / LINEAR_C0,
            provenance: Provenance::ClosedForm,
            mc_draws: None,
            std_error: None,
        });
    }
    if mc_draws < MIN_TRUTH_DRAWS {
        return Err(invalid(format!(
            "true RR needs at least {MIN_TRUTH_DRAWS} draws, got {mc_draws}"
        )));
    }
    let pairs = mc_draws / 2;
    let mut rng = SplitMix64::new(seed);
    let mut ms = Vec::with_capacity(pairs as usize);
    let mut bs = Vec::with_capacity(pairs as usize);
    for _ in 0..pairs {
        let d = kind.draw(&mut rng);
        let mut m = 0.0;
        let mut b = 0.0;
        for draw in [&d, &kind.mirror(&d)] {
            let (x, v) = kind.covariates(draw);
            m += kind.effect(&x);
            b += kind.baseline(&x, &v);
        }
        ms.push(0.5 * m);
        bs.push(0.5 * b);
    }
    let k = pairs as f64;
    let mean_m = ms.iter().sum::<f64>() / k;
    let mean_b = bs.iter().sum::<f64>() / k;
    let ratio = mean_m / mean_b;
    let lin_var = ms.iter().zip(&bs).map(|(m, b)| (m - ratio * b).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(TrueRr {
        value: ratio + 1.0,
        provenance: Provenance::McOracle,
        mc_draws: Some(2 * pairs),
        std_error: Some((lin_var / k).sqrt() / mean_b.abs()),
    })
}

/// Deterministic reference values where an analytic or quadrature route exists.
pub fn reference_rr(kind: DgpKind) -> Option<f64> {
    match kind {
        DgpKind::LinearRct => Some(LINEAR_C1 / LINEAR_C0),
        DgpKind::Lunceford => Some(2.0 / LUNCEFORD_MEAN_BASELINE + 1.0),
        DgpKind::WagerNlLogistic => Some(wager_logistic_rr_quadrature(80)),
        _ => None,
    }
}

/// `1 / E[2 softplus(Z)] + 1` with `Z ~ N(0, 3)`, by `nodes`-point Gauss-Hermite.
pub fn wager_logistic_rr_quadrature(nodes: usize) -> f64 {
    let (xs, ws) = gauss_hermite(nodes);
    let scale = (2.0f64 * 3.0).sqrt();
    let mean_b = xs
        .iter()
        .zip(&ws)
        .map(|(x, w)| w * 2.0 * softplus(scale * x))
        .sum::<f64>()
        / PI.sqrt();
    1.0 / mean_b + 1.0
}

/// Nodes and weights for `int f(x) exp(-x^2) dx`, by Newton iteration on the
/// orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// True `(e, mu0, mu1)` wrapped as fixed models.
pub fn oracle_models(kind: DgpKind) -> (PropensityModel, OutcomeModel, OutcomeModel) {
    (
        PropensityModel::oracle(kind, DEFAULT_CLIP).expect("default clip is valid"),
        OutcomeModel::oracle(Arm::Control, kind),
        OutcomeModel::oracle(Arm::Treated, kind),
    )
}
