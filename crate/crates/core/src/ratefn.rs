//! Finite-`n` large-deviation quantities.
//!
//! * approximative rate functions `-(1/n) ln E(weight; S_n ≥ θn)` (side `ge`)
//!   and `-(1/n) ln E(weight; 0 ≤ S_n ≤ θn)` (side `le`),
//! * the tilted cumulant function `(1/n) ln E(exp(-βH_n') exp(μ S_n); sign)`,
//! * grid Legendre transforms,
//! * the Edwards reference scalings and the `B_n` sum behind `E(G_n)`.

use serde::{Deserialize, Serialize};

use crate::enumerate::{
    enumerate_measure, shifted_log_measure, tilt_log_measure, Constraint, EnumOptions,
    EnumerationResult, SignRestriction,
};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::montecarlo::WeightedEnsemble;
use crate::numeric::LogSum;
use crate::stepdist::{StepDistribution, DEFAULT_SUPPORT_CAP};

/// Edwards-model constants. Approximate literals, never fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceConstants {
    pub a_star: f64,
    pub b_star: f64,
    pub c_star: f64,
    pub b_dstar: f64,
    pub rho_a_dstar: f64,
}

pub const EDWARDS: ReferenceConstants = ReferenceConstants {
    a_star: 2.19,
    b_star: 1.11,
    c_star: 0.63,
    b_dstar: 0.85,
    rho_a_dstar: 0.78,
};

/// Predicted `(θ*, r*)` for step standard deviation `σ` and coupling `β`:
/// `θ = b* σ^{2/3} β^{1/3}`, `r = a* σ^{-2/3} β^{2/3}`. For `β = ∞` the `β`
/// factors are dropped.
pub fn edwards_reference(sigma: f64, beta: f64) -> (f64, f64) {
    let s23 = sigma.powf(2.0 / 3.0);
    let (b13, b23) = if beta.is_infinite() {
        (1.0, 1.0)
    } else {
        (beta.cbrt(), beta.powf(2.0 / 3.0))
    };
    (EDWARDS.b_star * s23 * b13, EDWARDS.a_star / s23 * b23)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Ge,
    Le,
}

impl Side {
    pub fn constraint(self, theta: f64) -> Constraint {
        match self {
            Side::Ge => Constraint::Ge { theta },
            Side::Le => Constraint::Between { theta },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Ge => "ge",
            Side::Le => "le",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    /// `θ`, or `b` on a scaled curve.
    pub x: f64,
    pub value: f64,
    pub side: Side,
    /// The constrained event is empty (`value = +inf`).
    pub infinite: bool,
    /// Legendre maximiser sat at an end of the `μ` grid.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
    pub n: usize,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub strip_l: Option<u32>,
    /// Values are `β^{-2/3}·rate` at `θ = b β^{1/3}`.
    pub scaled: bool,
}

impl RateCurve {
    pub fn for_model(n: usize, model: Model, scaled: bool) -> Self {
        let (beta, gamma, strip_l) = match model {
            Model::DombJoyce { beta } => (beta, None, None),
            Model::Saw => (f64::INFINITY, None, None),
            Model::Attraction { beta, gamma } => (beta, Some(gamma), None),
            Model::Strip { width } => (model.effective_beta(), None, Some(width)),
        };
        Self {
            points: Vec::new(),
            n,
            beta,
            gamma,
            strip_l,
            scaled,
        }
    }

    /// Finite point of smallest value.
    pub fn minimum(&self) -> Option<RatePoint> {
        self.points
            .iter()
            .filter(|p| !p.infinite)
            .copied()
            .min_by(|a, b| a.value.total_cmp(&b.value))
    }

    /// CSV rows `b_or_theta,value,side,n,beta,gamma,L,scaled`.
    pub fn to_csv_rows(&self) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        self.points
            .iter()
            .map(|p| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    p.x,
                    if p.infinite { "inf".to_string() } else { p.value.to_string() },
                    p.side.as_str(),
                    self.n,
                    self.beta,
                    opt(self.gamma.map(|g| g.to_string())),
                    opt(self.strip_l.map(|l| l.to_string())),
                    self.scaled
                )
            })
            .collect()
    }
}

pub const CSV_HEADER: &str = "b_or_theta,value,side,n,beta,gamma,L,scaled";

fn rate_from_log(log_z: f64, n: usize) -> (f64, bool) {
    if log_z == f64::NEG_INFINITY {
        (f64::INFINITY, true)
    } else {
        (-log_z / n as f64, false)
    }
}

/// Rate value of one point from a finished enumeration.
pub fn rate_point(r: &EnumerationResult, theta: f64, side: Side) -> RatePoint {
    let c = side.constraint(theta);
    let (value, infinite) = rate_from_log(r.log_restricted(|x| c.admits(x, r.n)), r.n);
    RatePoint {
        x: theta,
        value,
        side,
        infinite,
        boundary: false,
    }
}

/// `-(1/n) ln` of the constrained partition value; `+inf` (flagged) for an
/// empty event.
pub fn finite_rate(
    dist: &StepDistribution,
    n: usize,
    model: Model,
    theta: f64,
    side: Side,
    opts: &EnumOptions,
) -> Result<RatePoint> {
    let r = enumerate_measure(dist, n, model, opts)?;
    Ok(rate_point(&r, theta, side))
}

pub fn finite_rate_curve(
    dist: &StepDistribution,
    n: usize,
    model: Model,
    thetas: &[f64],
    side: Side,
    opts: &EnumOptions,
) -> Result<RateCurve> {
    let r = enumerate_measure(dist, n, model, opts)?;
    let mut curve = RateCurve::for_model(n, model, false);
    curve.points = thetas.iter().map(|&t| rate_point(&r, t, side)).collect();
    Ok(curve)
}

/// Rate estimate `-(1/n) ln(Σ w 1{S_n ∈ A} / trials)` pooled over replicas.
pub fn finite_rate_mc(ensembles: &[WeightedEnsemble], constraint: Constraint, side: Side, x: f64) -> Result<RatePoint> {
    let first = ensembles
        .first()
        .ok_or(Error::InsufficientReplicas { required: 1, got: 0 })?;
    let n = first.n;
    let mut s = LogSum::new();
    let mut trials = 0u64;
    for e in ensembles {
        trials += e.trials;
        for (&pos, w) in &e.endpoint_weights {
            if constraint.admits(pos, n) {
                s.merge(w);
            }
        }
    }
    let (value, infinite) = rate_from_log(s.ln() - (trials as f64).ln(), n);
    Ok(RatePoint {
        x,
        value,
        side,
        infinite,
        boundary: false,
    })
}

/// `(1/n) ln E(exp(-β H_n') exp(μ S_n); sign)`.
pub fn finite_lambda(
    dist: &StepDistribution,
    n: usize,
    beta: f64,
    mu: f64,
    sign: SignRestriction,
    opts: &EnumOptions,
) -> Result<f64> {
    Ok(lambda_curve(dist, n, beta, &[mu], sign, opts)?[0])
}

/// [`finite_lambda`] on a grid of tilts, from a single enumeration.
pub fn lambda_curve(
    dist: &StepDistribution,
    n: usize,
    beta: f64,
    mus: &[f64],
    sign: SignRestriction,
    opts: &EnumOptions,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::param("n must be >= 1"));
    }
    if mus.iter().any(|m| !m.is_finite()) {
        return Err(Error::param("tilts must be finite"));
    }
    let m = shifted_log_measure(dist, n, beta, opts)?;
    Ok(opts
        .exec
        .map_slice(mus, |&mu| tilt_log_measure(&m, mu, sign) / n as f64))
}

/// `sup_μ (μ b - Λ(μ))` over the grid, for each `b`. Points whose maximiser
/// is a grid endpoint are flagged: the window is too small to trust them.
pub fn legendre(mus: &[f64], lambdas: &[f64], bs: &[f64]) -> Result<RateCurve> {
    if mus.len() < 3 || mus.len() != lambdas.len() {
        return Err(Error::param("Legendre transform needs >= 3 (μ, Λ) pairs"));
    }
    if mus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("μ grid must be strictly increasing"));
    }
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::param("Λ values must be finite"));
    }
    let last = mus.len() - 1;
    let points = bs
        .iter()
        .map(|&b| {
            let (i, v) = mus
                .iter()
                .zip(lambdas)
                .map(|(m, l)| m * b - l)
                .enumerate()
                .max_by(|a, c| a.1.total_cmp(&c.1))
                .unwrap();
            RatePoint {
                x: b,
                value: v,
                side: Side::Ge,
                infinite: false,
                boundary: i == 0 || i == last,
            }
        })
        .collect();
    Ok(RateCurve {
        points,
        n: 0,
        beta: f64::NAN,
        gamma: None,
        strip_l: None,
        scaled: false,
    })
}

/// `β^{-2/3}` times the Domb-Joyce finite rate at `θ = b β^{1/3}`, on the
/// `ge` side for `b ≥ b* σ^{2/3}` and the `le` side below.
pub fn scaled_rate_curve(
    dist: &StepDistribution,
    n: usize,
    beta: f64,
    b_grid: &[f64],
    opts: &EnumOptions,
) -> Result<RateCurve> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("scaled curves need 0 < β < ∞"));
    }
    let model = Model::DombJoyce { beta };
    let r = enumerate_measure(dist, n, model, opts)?;
    let split = EDWARDS.b_star * dist.variance().cbrt();
    let mut curve = RateCurve::for_model(n, model, true);
    curve.points = b_grid
        .iter()
        .map(|&b| {
            let side = if b >= split { Side::Ge } else { Side::Le };
            let mut p = rate_point(&r, b * beta.cbrt(), side);
            p.x = b;
            if !p.infinite {
                p.value *= beta.powf(-2.0 / 3.0);
            }
            p
        })
        .collect();
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BnResult {
    pub n: usize,
    /// `B_n = 2 Σ_{k=1}^n (n-k+1) [2P(S_k=0) - P(S_k=1) - P(S_k=-1)]`.
    pub b_n: f64,
    /// `E(G_n) = 2(n+1) + B_n`.
    pub expected_g: f64,
    /// The summands `2 (n-k+1) a_k`, `k = 1..n`.
    pub summands: Vec<f64>,
}

/// `a_k = 2P(S_k=0) - P(S_k=1) - P(S_k=-1)` for `k = 1..=n_max`.
pub fn bn_coefficients(dist: &StepDistribution, n_max: usize) -> Result<Vec<f64>> {
    let width = 2 * dist.max_step() as usize * n_max + 1;
    if width > DEFAULT_SUPPORT_CAP {
        return Err(Error::Budget {
            what: "convolution support",
            needed: width as f64,
            budget: DEFAULT_SUPPORT_CAP as f64,
        });
    }
    let mut pmf = crate::stepdist::LatticePmf::delta();
    let mut a = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        pmf = pmf.convolve(dist);
        a.push(2.0 * pmf.get(0) - pmf.get(1) - pmf.get(-1));
    }
    Ok(a)
}

pub fn compute_bn(dist: &StepDistribution, n: usize) -> Result<BnResult> {
    let a = bn_coefficients(dist, n)?;
    let summands: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(i, &ak)| 2.0 * (n - i) as f64 * ak)
        .collect();
    let b_n: f64 = summands.iter().sum();
    Ok(BnResult {
        n,
        b_n,
        expected_g: 2.0 * (n as f64 + 1.0) + b_n,
        summands,
    })
}

/// `B_1..B_{n_max}` in one pass, via `B_n = 2[(n+1) Σ a_k - Σ k a_k]`.
pub fn bn_series(dist: &StepDistribution, n_max: usize) -> Result<Vec<f64>> {
    let a = bn_coefficients(dist, n_max)?;
    let (mut s1, mut s2) = (0.0, 0.0);
    Ok(a.iter()
        .enumerate()
        .map(|(i, &ak)| {
            let k = (i + 1) as f64;
            s1 += ak;
            s2 += k * ak;
            2.0 * ((k + 1.0) * s1 - s2)
        })
        .collect())
}
