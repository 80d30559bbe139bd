//! Parameter sweeps towards the weak-interaction limit.
//!
//! Each sweep runs PERM at a list of couplings with `n` growing as the
//! coupling weakens, so that `|S_n|` stays well above the diffusive scale.
//! Rows carry the raw estimates and the same estimates divided by their
//! predicted scaling, which should approach the Edwards constants `b*`
//! (speed) and `a*` (free energy). A weighted log-log fit gives the observed
//! exponent, and one small instance is checked against exact enumeration.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::enumerate::{enumerate_measure, EnumOptions};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::montecarlo::{estimate_clt, perm_replicas, CltEstimate, Estimate, McParams, PermParams};
use crate::ratefn::{compute_bn, EDWARDS};
use crate::stepdist::{DistSpec, FamilyKind, StepDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Beta,
    Sigma,
    Coupled,
    Attraction,
    Strip,
    Flory,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Beta => "beta",
            Experiment::Sigma => "sigma",
            Experiment::Coupled => "coupled",
            Experiment::Attraction => "attraction",
            Experiment::Strip => "strip",
            Experiment::Flory => "flory",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepParams {
    /// `n = ⌈n_scale · s⌉` where `s` is the natural length scale of the point.
    pub n_scale: f64,
    pub perm: PermParams,
    pub mc: McParams,
    /// Run the enumeration-anchored check at the smallest instance.
    pub anchor: bool,
    /// Accept schedules outside the range where the limit theorems apply.
    pub allow_invalid: bool,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            n_scale: 200.0,
            perm: PermParams::default(),
            mc: McParams::default(),
            anchor: true,
            allow_invalid: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// The swept variable, used as `x` in the fits.
    pub coupling: f64,
    pub family: String,
    pub family_l: Option<u32>,
    pub sigma: f64,
    /// `None` for the hard-core (self-avoiding) models.
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub strip_l: Option<u32>,
    pub n: usize,
    pub theta: Estimate,
    pub r: Estimate,
    pub sigma_star: Estimate,
    pub scaled_theta: Estimate,
    pub scaled_r: Option<Estimate>,
    pub ess: f64,
    pub samples: u64,
    pub low_ess: bool,
    /// `(γ/2) E(G_n)/n` under the free walk: size of the attractive term.
    pub g_correction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub slope_se: f64,
    /// `y / x^slope` at the row closest to the limit.
    pub amplitude: f64,
    pub amplitude_se: f64,
    pub points: usize,
}

/// Predicted exponents (in the swept variable) and limiting scaled values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reference {
    pub theta_exponent: f64,
    pub theta_amplitude: f64,
    pub r_exponent: Option<f64>,
    pub r_amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anchor {
    pub n: usize,
    pub model: Model,
    pub family: String,
    pub theta_mc: Estimate,
    pub theta_exact: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub experiment: Experiment,
    pub family: String,
    pub coupling_name: String,
    /// Sorted by `coupling`.
    pub rows: Vec<SweepRow>,
    pub fit_theta: Option<ScalingFit>,
    pub fit_r: Option<ScalingFit>,
    pub reference: Reference,
    pub anchor: Option<Anchor>,
    pub warnings: Vec<String>,
}

pub const CSV_HEADER: &str = "experiment,family,family_L,sigma,beta,gamma,strip_L,coupling,n,\
theta_hat,theta_se,r_hat,r_se,sigma_star_hat,sigma_star_se,scaled_theta,scaled_theta_se,\
scaled_r,scaled_r_se,ess,low_ess";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (sr, sr_se) = match r.scaled_r {
                Some(e) => (e.value.to_string(), e.stderr.to_string()),
                None => (String::new(), String::new()),
            };
            let beta = match r.beta {
                Some(b) => b.to_string(),
                None => "inf".to_string(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.experiment,
                r.family,
                opt(r.family_l),
                r.sigma,
                beta,
                opt(r.gamma),
                opt(r.strip_l),
                r.coupling,
                r.n,
                r.theta.value,
                r.theta.stderr,
                r.r.value,
                r.r.stderr,
                r.sigma_star.value,
                r.sigma_star.stderr,
                r.scaled_theta.value,
                r.scaled_theta.stderr,
                sr,
                sr_se,
                r.ess,
                r.low_ess
            ));
        }
        out
    }

    /// The row closest to the weak-interaction limit.
    pub fn limit_row(&self) -> Option<&SweepRow> {
        match self.limit_end() {
            LimitEnd::Small => self.rows.first(),
            LimitEnd::Large => self.rows.last(),
        }
    }

    fn limit_end(&self) -> LimitEnd {
        limit_end(self.experiment, &self.coupling_name)
    }
}

/// Which end of the swept variable is the weak-interaction limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitEnd {
    Small,
    Large,
}

fn limit_end(exp: Experiment, coupling: &str) -> LimitEnd {
    match exp {
        Experiment::Beta | Experiment::Attraction => LimitEnd::Small,
        Experiment::Sigma | Experiment::Strip | Experiment::Flory => LimitEnd::Large,
        Experiment::Coupled if coupling == "beta_n" => LimitEnd::Small,
        Experiment::Coupled => LimitEnd::Large,
    }
}

/// Weighted least squares of `ln y` on `ln x`, weights `(y/se)²`.
///
/// With any zero or missing standard error the fit falls back to equal
/// weights and a residual-based slope error. The amplitude is read at the
/// point nearest the limit, not from the intercept.
pub fn fit_scaling(points: &[(f64, f64, f64)], limit: LimitEnd) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::RankDeficient(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y, _)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::param("scaling fit needs positive finite x and y"));
    }
    let u: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let v: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let s: Vec<f64> = points.iter().map(|p| p.2 / p.1).collect();
    let weighted = s.iter().all(|&e| e > 0.0 && e.is_finite());
    let w: Vec<f64> = if weighted {
        s.iter().map(|e| 1.0 / (e * e)).collect()
    } else {
        vec![1.0; points.len()]
    };
    let sw: f64 = w.iter().sum();
    let ub = w.iter().zip(&u).map(|(w, u)| w * u).sum::<f64>() / sw;
    let vb = w.iter().zip(&v).map(|(w, v)| w * v).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&u).map(|(w, u)| w * (u - ub).powi(2)).sum();
    let spread = u.iter().fold(0.0f64, |a, x| a.max((x - ub).abs()));
    if spread < 1e-12 {
        return Err(Error::RankDeficient("all x values coincide".into()));
    }
    let sxy: f64 = w.iter().zip(u.iter().zip(&v)).map(|(w, (u, v))| w * (u - ub) * (v - vb)).sum();
    let slope = sxy / sxx;
    let slope_se = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = u.iter().zip(&v).map(|(u, v)| (v - vb - slope * (u - ub)).powi(2)).sum();
        (rss / (points.len() as f64 - 2.0) / sxx).sqrt()
    };
    let k = match limit {
        LimitEnd::Small => (0..points.len()).min_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap(),
        LimitEnd::Large => (0..points.len()).max_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap(),
    };
    let amplitude = (v[k] - slope * u[k]).exp();
    let sk = if weighted { s[k] } else { 0.0 };
    let amplitude_se = amplitude * (sk * sk + (u[k] * slope_se).powi(2)).sqrt();
    Ok(ScalingFit {
        slope,
        slope_se,
        amplitude,
        amplitude_se,
        points: points.len(),
    })
}

/// One sweep point before it is run.
struct Point {
    coupling: f64,
    dist: StepDistribution,
    family: String,
    family_l: Option<u32>,
    model: Model,
    n: usize,
    /// Scaled θ is `θ · theta_scale`, scaled r is `r · r_scale`.
    theta_scale: f64,
    r_scale: Option<f64>,
}

fn scale(e: Estimate, f: f64) -> Estimate {
    Estimate {
        value: e.value * f,
        stderr: e.stderr * f,
    }
}

fn n_rule(n_scale: f64, length: f64) -> Result<usize> {
    let n = (n_scale * length).ceil();
    if !(n >= 1.0 && n < 1e9) {
        return Err(Error::param(format!("n rule gives an unusable length {n}")));
    }
    Ok(n as usize)
}

fn run_point(p: &Point, params: &SweepParams) -> Result<(SweepRow, CltEstimate)> {
    let reps = perm_replicas(&p.dist, p.n, p.model, &params.perm, &params.mc)?;
    let est = estimate_clt(&reps)?;
    let (beta, gamma) = match p.model {
        Model::DombJoyce { beta } => (Some(beta), None),
        Model::Attraction { beta, gamma } => (Some(beta), Some(gamma)),
        Model::Saw | Model::Strip { .. } => (None, None),
    };
    let g_correction = match gamma {
        Some(g) if g > 0.0 => Some(0.5 * g * compute_bn(&p.dist, p.n)?.expected_g / p.n as f64),
        _ => None,
    };
    let row = SweepRow {
        coupling: p.coupling,
        family: p.family.clone(),
        family_l: p.family_l,
        sigma: p.dist.sigma(),
        beta,
        gamma,
        strip_l: p.model.strip_width(),
        n: p.n,
        theta: est.theta_hat,
        r: est.r_hat,
        sigma_star: est.sigma_star_hat,
        scaled_theta: scale(est.theta_hat, p.theta_scale),
        scaled_r: p.r_scale.map(|f| scale(est.r_hat, f)),
        ess: est.ess,
        samples: est.samples,
        low_ess: est.low_ess,
        g_correction,
    };
    Ok((row, est))
}

/// PERM at a small `n` against exact enumeration of the same model.
fn anchor(p: &Point, n_target: usize, params: &SweepParams) -> Result<Anchor> {
    const ANCHOR_LEAVES: f64 = 2e7;
    let k = p.dist.len() as f64;
    let mut n = n_target;
    while n > 1 && k.powi(n as i32) > ANCHOR_LEAVES {
        n -= 1;
    }
    let opts = EnumOptions {
        exec: params.mc.exec,
        ..EnumOptions::default()
    };
    let exact = enumerate_measure(&p.dist, n, p.model, &opts)?;
    let theta_exact = exact.q_expect(|x| x.unsigned_abs() as f64) / n as f64;
    let reps = perm_replicas(&p.dist, n, p.model, &params.perm, &params.mc)?;
    let est = estimate_clt(&reps)?;
    let theta_mc = est.theta_hat;
    Ok(Anchor {
        n,
        model: p.model,
        family: p.family.clone(),
        theta_mc,
        theta_exact,
        agrees: (theta_mc.value - theta_exact).abs() <= 3.0 * theta_mc.stderr,
    })
}

struct Plan {
    experiment: Experiment,
    family: String,
    coupling_name: &'static str,
    points: Vec<Point>,
    reference: Reference,
    anchor_n: usize,
}

fn execute(plan: Plan, params: &SweepParams) -> Result<SweepReport> {
    if plan.points.is_empty() {
        return Err(Error::param("sweep has no points"));
    }
    let results = params.mc.exec.map_slice(&plan.points, |p| run_point(p, params));
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?.0);
    }
    rows.sort_by(|a, b| a.coupling.total_cmp(&b.coupling));

    let mut warnings = Vec::new();
    for r in rows.iter().filter(|r| r.low_ess) {
        warnings.push(format!("low ESS at {} = {} (ess {:.1}), excluded from fits", plan.coupling_name, r.coupling, r.ess));
    }
    let good: Vec<&SweepRow> = rows.iter().filter(|r| !r.low_ess).collect();
    let limit = limit_end(plan.experiment, plan.coupling_name);
    let mut fit = |what: &str, pts: Vec<(f64, f64, f64)>| match fit_scaling(&pts, limit) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("{what} fit skipped: {e}"));
            None
        }
    };
    let fit_theta = fit("theta", good.iter().map(|r| (r.coupling, r.theta.value, r.theta.stderr)).collect());
    let fit_r = if plan.reference.r_exponent.is_some() {
        fit("r", good.iter().map(|r| (r.coupling, r.r.value, r.r.stderr)).collect())
    } else {
        None
    };

    let anchor = if params.anchor {
        let smallest = plan.points.iter().min_by_key(|p| p.n).unwrap();
        let a = anchor(smallest, plan.anchor_n, params)?;
        if !a.agrees {
            warnings.push(format!(
                "anchor at n = {}: PERM theta {} ± {} vs exact {}",
                a.n, a.theta_mc.value, a.theta_mc.stderr, a.theta_exact
            ));
        }
        Some(a)
    } else {
        None
    };

    Ok(SweepReport {
        experiment: plan.experiment,
        family: plan.family,
        coupling_name: plan.coupling_name.to_string(),
        rows,
        fit_theta,
        fit_r,
        reference: plan.reference,
        anchor,
        warnings,
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param(format!("beta must lie in (0, 1], got {beta}")));
    }
    Ok(())
}

/// Domb-Joyce walk at each `β`, with `n = ⌈n_scale · β^{−2/3}⌉`.
pub fn sweep_beta(spec: &DistSpec, betas: &[f64], params: &SweepParams) -> Result<SweepReport> {
    let dist = spec.build()?;
    let s23 = dist.sigma().powf(2.0 / 3.0);
    let mut points = Vec::with_capacity(betas.len());
    for &beta in betas {
        check_beta(beta)?;
        points.push(Point {
            coupling: beta,
            dist: dist.clone(),
            family: spec.label(),
            family_l: spec.range(),
            model: Model::DombJoyce { beta },
            n: n_rule(params.n_scale, beta.powf(-2.0 / 3.0))?,
            theta_scale: 1.0 / (beta.cbrt() * s23),
            r_scale: Some(s23 / beta.powf(2.0 / 3.0)),
        });
    }
    execute(
        Plan {
            experiment: Experiment::Beta,
            family: spec.label(),
            coupling_name: "beta",
            points,
            reference: Reference {
                theta_exponent: 1.0 / 3.0,
                theta_amplitude: EDWARDS.b_star,
                r_exponent: Some(2.0 / 3.0),
                r_amplitude: Some(EDWARDS.a_star),
            },
            anchor_n: 12,
        },
        params,
    )
}

fn sigma_point(kind: FamilyKind, l: u32, n: Option<usize>, params: &SweepParams) -> Result<Point> {
    if l < 2 {
        return Err(Error::param("L = 1 is the trivial simple self-avoiding walk; use L >= 2"));
    }
    let dist = kind.build(l)?;
    let sigma = dist.sigma();
    let s23 = sigma.powf(2.0 / 3.0);
    let spec = match kind {
        FamilyKind::UniformRange => DistSpec::UniformRange { l },
        FamilyKind::GeometricTail => DistSpec::GeometricTail { l },
    };
    Ok(Point {
        coupling: sigma,
        n: match n {
            Some(n) => n,
            None => n_rule(params.n_scale, s23)?,
        },
        dist,
        family: spec.label(),
        family_l: Some(l),
        model: Model::Saw,
        theta_scale: 1.0 / s23,
        r_scale: Some(s23),
    })
}

/// Self-avoiding walk for a family of growing range, `n = ⌈n_scale · σ^{2/3}⌉`.
pub fn sweep_sigma(kind: FamilyKind, ls: &[u32], params: &SweepParams) -> Result<SweepReport> {
    let points = ls.iter().map(|&l| sigma_point(kind, l, None, params)).collect::<Result<Vec<_>>>()?;
    let family = match kind {
        FamilyKind::UniformRange => "uniform_range",
        FamilyKind::GeometricTail => "geometric_tail",
    };
    execute(
        Plan {
            experiment: Experiment::Sigma,
            family: family.to_string(),
            coupling_name: "sigma",
            points,
            reference: Reference {
                theta_exponent: 2.0 / 3.0,
                theta_amplitude: EDWARDS.b_star,
                r_exponent: Some(-2.0 / 3.0),
                r_amplitude: Some(EDWARDS.a_star),
            },
            anchor_n: 12,
        },
        params,
    )
}

fn strip_point(spec: &DistSpec, dist: &StepDistribution, l: u32, n: Option<usize>, params: &SweepParams) -> Result<Point> {
    if l == 0 {
        return Err(Error::param("strip half-width must be >= 1"));
    }
    let f = (4.0 * l as f64).cbrt();
    Ok(Point {
        coupling: l as f64,
        dist: dist.clone(),
        family: spec.label(),
        family_l: spec.range(),
        model: Model::Strip { width: l },
        n: match n {
            Some(n) => n,
            None => n_rule(params.n_scale, f * f)?,
        },
        theta_scale: f / dist.sigma().powf(2.0 / 3.0),
        r_scale: None,
    })
}

/// Self-avoiding walk on `Z × {−L..L}` with `n = ⌈n_scale · (4L)^{2/3}⌉`.
pub fn sweep_strip(spec: &DistSpec, ls: &[u32], params: &SweepParams) -> Result<SweepReport> {
    let dist = spec.build()?;
    let points = ls
        .iter()
        .map(|&l| strip_point(spec, &dist, l, None, params))
        .collect::<Result<Vec<_>>>()?;
    execute(
        Plan {
            experiment: Experiment::Strip,
            family: spec.label(),
            coupling_name: "L",
            points,
            reference: Reference {
                theta_exponent: -1.0 / 3.0,
                theta_amplitude: EDWARDS.b_star,
                r_exponent: None,
                r_amplitude: None,
            },
            anchor_n: 5,
        },
        params,
    )
}

/// Self-attraction `γ = β̃^{exponent}` on top of repulsion `β = β̃ + γ`.
///
/// The limit theorem needs `γ β̃^{−2/3} → 0`, i.e. `exponent > 2/3`. An
/// infinite exponent gives `γ = 0` and reproduces [`sweep_beta`].
pub fn sweep_attraction(
    spec: &DistSpec,
    beta_tildes: &[f64],
    gamma_exponent: f64,
    params: &SweepParams,
) -> Result<SweepReport> {
    if !(gamma_exponent > 2.0 / 3.0) && !params.allow_invalid {
        return Err(Error::InvalidSchedule(format!(
            "gamma = beta_tilde^{gamma_exponent} does not vanish faster than beta_tilde^(2/3)"
        )));
    }
    let dist = spec.build()?;
    let s23 = dist.sigma().powf(2.0 / 3.0);
    let mut points = Vec::with_capacity(beta_tildes.len());
    for &bt in beta_tildes {
        check_beta(bt)?;
        let gamma = bt.powf(gamma_exponent);
        let beta = bt + gamma;
        if !(gamma < beta) {
            return Err(Error::param(format!("need gamma < beta, got gamma = {gamma}, beta = {beta}")));
        }
        points.push(Point {
            coupling: bt,
            dist: dist.clone(),
            family: spec.label(),
            family_l: spec.range(),
            model: Model::Attraction { beta, gamma },
            n: n_rule(params.n_scale, bt.powf(-2.0 / 3.0))?,
            theta_scale: 1.0 / (bt.cbrt() * s23),
            r_scale: None,
        });
    }
    execute(
        Plan {
            experiment: Experiment::Attraction,
            family: spec.label(),
            coupling_name: "beta_minus_gamma",
            points,
            reference: Reference {
                theta_exponent: 1.0 / 3.0,
                theta_amplitude: EDWARDS.b_star,
                r_exponent: None,
                r_amplitude: None,
            },
            anchor_n: 12,
        },
        params,
    )
}

/// Coupling as a function of `n` for the coupled limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `β_n = n^{−a}`; valid for `0 < a < 3/2`.
    BetaPower { a: f64 },
    /// Strip half-width `L_n = ⌈n^b⌉`; valid for `0 < b < 3/2`.
    StripPower { b: f64 },
    /// Self-avoiding walk with range `L_n = ⌈n^b⌉` in the given family;
    /// valid for `0 < b < 3/2`.
    RangePower { family: FamilyKind, b: f64 },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::BetaPower { a: 0.75 }
    }
}

impl Schedule {
    /// `L_n = ⌈n^{3/4}⌉`, where both coordinates live on the scale `n^{3/4}`.
    pub const FLORY: Schedule = Schedule::StripPower { b: 0.75 };

    pub fn validate(&self) -> Result<()> {
        let (name, e) = match *self {
            Schedule::BetaPower { a } => ("beta_n = n^-a", a),
            Schedule::StripPower { b } => ("L_n = n^b", b),
            Schedule::RangePower { b, .. } => ("L_n = n^b", b),
        };
        if !(e > 0.0 && e < 1.5) {
            return Err(Error::InvalidSchedule(format!(
                "{name} needs an exponent in (0, 3/2), got {e}"
            )));
        }
        Ok(())
    }

    fn coupling_name(&self) -> &'static str {
        match self {
            Schedule::BetaPower { .. } => "beta_n",
            Schedule::StripPower { .. } => "L_n",
            Schedule::RangePower { .. } => "sigma_n",
        }
    }
}

fn coupled_plan(
    experiment: Experiment,
    spec: &DistSpec,
    schedule: Schedule,
    ns: &[usize],
    params: &SweepParams,
) -> Result<Plan> {
    if !params.allow_invalid {
        schedule.validate()?;
    }
    if ns.iter().any(|&n| n == 0) {
        return Err(Error::param("n must be >= 1"));
    }
    let dist = spec.build()?;
    let s23 = dist.sigma().powf(2.0 / 3.0);
    let mut points = Vec::with_capacity(ns.len());
    let reference;
    let mut family = spec.label();
    match schedule {
        Schedule::BetaPower { a } => {
            for &n in ns {
                let beta = (n as f64).powf(-a);
                points.push(Point {
                    coupling: beta,
                    dist: dist.clone(),
                    family: spec.label(),
                    family_l: spec.range(),
                    model: Model::DombJoyce { beta },
                    n,
                    theta_scale: 1.0 / (beta.cbrt() * s23),
                    r_scale: Some(s23 / beta.powf(2.0 / 3.0)),
                });
            }
            reference = Reference {
                theta_exponent: 1.0 / 3.0,
                theta_amplitude: EDWARDS.b_star,
                r_exponent: Some(2.0 / 3.0),
                r_amplitude: Some(EDWARDS.a_star),
            };
        }
        Schedule::StripPower { b } => {
            for &n in ns {
                let l = (n as f64).powf(b).ceil().max(1.0) as u32;
                let mut p = strip_point(spec, &dist, l, Some(n), params)?;
                p.coupling = l as f64;
                points.push(p);
            }
            reference = Reference {
                theta_exponent: -1.0 / 3.0,
                theta_amplitude: EDWARDS.b_star,
                r_exponent: None,
                r_amplitude: None,
            };
        }
        Schedule::RangePower { family: kind, b } => {
            family = match kind {
                FamilyKind::UniformRange => "uniform_range".into(),
                FamilyKind::GeometricTail => "geometric_tail".into(),
            };
            for &n in ns {
                let l = (n as f64).powf(b).ceil().max(2.0) as u32;
                points.push(sigma_point(kind, l, Some(n), params)?);
            }
            reference = Reference {
                theta_exponent: 2.0 / 3.0,
                theta_amplitude: EDWARDS.b_star,
                r_exponent: Some(-2.0 / 3.0),
                r_amplitude: Some(EDWARDS.a_star),
            };
        }
    }
    Ok(Plan {
        experiment,
        family,
        coupling_name: schedule.coupling_name(),
        points,
        reference,
        anchor_n: if matches!(schedule, Schedule::StripPower { .. }) { 5 } else { 12 },
    })
}

/// One run per `n`, with the coupling tied to `n` by `schedule`.
pub fn sweep_coupled(spec: &DistSpec, schedule: Schedule, ns: &[usize], params: &SweepParams) -> Result<SweepReport> {
    execute(coupled_plan(Experiment::Coupled, spec, schedule, ns, params)?, params)
}

/// Strip with `L_n = ⌈n^{3/4}⌉`.
pub fn sweep_flory(spec: &DistSpec, ns: &[usize], params: &SweepParams) -> Result<SweepReport> {
    execute(coupled_plan(Experiment::Flory, spec, Schedule::FLORY, ns, params)?, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;

    fn quick() -> SweepParams {
        SweepParams {
            n_scale: 10.0,
            perm: PermParams {
                tours: 100,
                ..PermParams::default()
            },
            mc: McParams {
                replicas: 8,
                seed: 3,
                exec: Exec::Parallel,
            },
            ..SweepParams::default()
        }
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = (1..=5).map(|i| {
            let x = 0.1 * i as f64;
            (x, 2.0 * x.cbrt(), 0.0)
        }).collect();
        let f = fit_scaling(&pts, LimitEnd::Small).unwrap();
        assert!((f.slope - 1.0 / 3.0).abs() < 1e-12);
        assert!(f.slope_se < 1e-10);
        assert!((f.amplitude - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_has_zero_slope() {
        let pts = [(1.0, 3.0, 0.1), (2.0, 3.0, 0.1), (4.0, 3.0, 0.1)];
        let f = fit_scaling(&pts, LimitEnd::Large).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert!((f.amplitude - 3.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_fit_ignores_noisy_points() {
        // the wild point carries a huge error bar
        let pts = [(1.0, 1.0, 0.001), (2.0, 2.0, 0.002), (4.0, 40.0, 1e6), (8.0, 8.0, 0.008)];
        let f = fit_scaling(&pts, LimitEnd::Small).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_fits_are_rejected() {
        assert!(matches!(fit_scaling(&[(1.0, 1.0, 0.1), (2.0, 2.0, 0.1)], LimitEnd::Small), Err(Error::RankDeficient(_))));
        let same = [(2.0, 1.0, 0.1), (2.0, 2.0, 0.1), (2.0, 3.0, 0.1)];
        assert!(matches!(fit_scaling(&same, LimitEnd::Small), Err(Error::RankDeficient(_))));
        assert!(fit_scaling(&[(1.0, -1.0, 0.1), (2.0, 2.0, 0.1), (3.0, 3.0, 0.1)], LimitEnd::Small).is_err());
    }

    #[test]
    fn schedules() {
        assert!(Schedule::default().validate().is_ok());
        assert!(Schedule::FLORY.validate().is_ok());
        assert!(matches!(Schedule::BetaPower { a: 2.0 }.validate(), Err(Error::InvalidSchedule(_))));
        assert!(Schedule::StripPower { b: 1.5 }.validate().is_err());
        let spec = DistSpec::Simple;
        let err = sweep_coupled(&spec, Schedule::BetaPower { a: 2.0 }, &[8, 16, 32], &quick()).unwrap_err();
        assert!(matches!(err, Error::InvalidSchedule(_)));
        let err = sweep_attraction(&spec, &[0.2, 0.1], 0.5, &quick()).unwrap_err();
        assert!(matches!(err, Error::InvalidSchedule(_)));
    }

    #[test]
    fn negative_control_runs_when_allowed() {
        let mut p = quick();
        p.allow_invalid = true;
        p.anchor = false;
        let r = sweep_coupled(&DistSpec::Simple, Schedule::BetaPower { a: 2.0 }, &[8, 16, 32], &p).unwrap();
        assert_eq!(r.rows.len(), 3);
    }

    #[test]
    fn sigma_sweep_rejects_simple_range() {
        assert!(sweep_sigma(FamilyKind::UniformRange, &[1, 2], &quick()).is_err());
    }

    #[test]
    fn beta_sweep_shape() {
        let r = sweep_beta(&DistSpec::Simple, &[0.4, 0.1, 0.2], &quick()).unwrap();
        let xs: Vec<f64> = r.rows.iter().map(|r| r.coupling).collect();
        assert_eq!(xs, vec![0.1, 0.2, 0.4]);
        assert_eq!(r.rows[0].n, (10.0 * 0.1f64.powf(-2.0 / 3.0)).ceil() as usize);
        let a = r.anchor.as_ref().unwrap();
        assert_eq!(a.n, 12);
        assert!(a.agrees, "{a:?}");
        assert!(r.fit_theta.is_some());
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(r.limit_row().unwrap().coupling, 0.1);
    }

    #[test]
    fn attraction_without_gamma_is_the_beta_sweep() {
        let mut p = quick();
        p.anchor = false;
        let a = sweep_attraction(&DistSpec::Simple, &[0.4, 0.2, 0.1], f64::INFINITY, &p).unwrap();
        let b = sweep_beta(&DistSpec::Simple, &[0.4, 0.2, 0.1], &p).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.n, y.n);
            assert!((x.theta.value - y.theta.value).abs() < 1e-12);
        }
    }

    #[test]
    fn attraction_rows_report_the_contact_term() {
        let mut p = quick();
        p.anchor = false;
        let a = sweep_attraction(&DistSpec::Simple, &[0.4, 0.2, 0.1], 7.0 / 6.0, &p).unwrap();
        for r in &a.rows {
            let g = r.gamma.unwrap();
            assert!((g - r.coupling.powf(7.0 / 6.0)).abs() < 1e-15);
            assert!((r.beta.unwrap() - r.coupling - g).abs() < 1e-15);
            assert!(r.g_correction.unwrap() > 0.0);
        }
    }

    #[test]
    fn strip_anchor_uses_the_narrowest_strip() {
        let r = sweep_strip(&DistSpec::Simple, &[2, 1], &quick()).unwrap();
        let a = r.anchor.unwrap();
        assert_eq!(a.n, 5);
        assert_eq!(a.model, Model::Strip { width: 1 });
        assert!(a.agrees, "{a:?}");
        assert_eq!(r.rows[0].strip_l, Some(1));
    }

    #[test]
    fn sweeps_are_reproducible() {
        let mut p = quick();
        p.anchor = false;
        let a = sweep_flory(&DistSpec::Simple, &[16, 32, 64], &p).unwrap();
        p.mc.exec = Exec::Sequential;
        let b = sweep_flory(&DistSpec::Simple, &[16, 32, 64], &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows[2].strip_l, Some(23));
    }
}
