//! Step distributions on the integers.
//!
//! A [`StepDistribution`] is a finitely supported, centred pmf on `Z` with
//! cached mean and variance. The parameterised families are
//!
//! * `simple`: ±1 with probability 1/2,
//! * `uniform_range(L)`: uniform on `{-L,..,-1,1,..,L}`,
//! * `geometric_tail(L)`: `P(x) = (1/2L) ((L-1)/L)^(|x|-1)` for `x != 0`,
//!   truncated where the two-sided tail mass drops below `1e-15` and
//!   renormalised.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tail mass discarded when truncating `geometric_tail`.
pub const GEOMETRIC_TAIL_MASS: f64 = 1e-15;

/// Default cap on the number of lattice sites held by a convolution power.
pub const DEFAULT_SUPPORT_CAP: usize = 10_000_000;

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Simple,
    UniformRange {
        #[serde(rename = "L")]
        l: u32,
    },
    GeometricTail {
        #[serde(rename = "L")]
        l: u32,
    },
    Custom,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Simple => write!(f, "simple"),
            Family::UniformRange { l } => write!(f, "uniform_range({l})"),
            Family::GeometricTail { l } => write!(f, "geometric_tail({l})"),
            Family::Custom => write!(f, "custom"),
        }
    }
}

/// Parameterised family without its range parameter; used by sweeps over `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    UniformRange,
    GeometricTail,
}

impl FamilyKind {
    pub fn build(self, l: u32) -> Result<StepDistribution> {
        match self {
            FamilyKind::UniformRange => StepDistribution::uniform_range(l),
            FamilyKind::GeometricTail => StepDistribution::geometric_tail(l),
        }
    }
}

/// Config-file form of a distribution, e.g. `{"family": "uniform_range", "L": 4}`
/// or `{"family": "custom", "pmf": {"-1": 0.5, "1": 0.5}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistSpec {
    Simple,
    UniformRange {
        #[serde(rename = "L")]
        l: u32,
    },
    GeometricTail {
        #[serde(rename = "L")]
        l: u32,
    },
    Custom {
        pmf: BTreeMap<String, f64>,
    },
}

impl DistSpec {
    /// Short name for report columns, e.g. `uniform_range(4)`.
    pub fn label(&self) -> String {
        match self {
            DistSpec::Simple => Family::Simple.to_string(),
            DistSpec::UniformRange { l } => Family::UniformRange { l: *l }.to_string(),
            DistSpec::GeometricTail { l } => Family::GeometricTail { l: *l }.to_string(),
            DistSpec::Custom { .. } => Family::Custom.to_string(),
        }
    }

    /// Range parameter `L`, when the family has one.
    pub fn range(&self) -> Option<u32> {
        match self {
            DistSpec::UniformRange { l } | DistSpec::GeometricTail { l } => Some(*l),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<StepDistribution> {
        match self {
            DistSpec::Simple => Ok(StepDistribution::simple()),
            DistSpec::UniformRange { l } => StepDistribution::uniform_range(*l),
            DistSpec::GeometricTail { l } => StepDistribution::geometric_tail(*l),
            DistSpec::Custom { pmf } => {
                let mut pairs = Vec::with_capacity(pmf.len());
                for (k, &p) in pmf {
                    let x: i64 = k.trim().parse().map_err(|_| {
                        Error::InvalidDistribution(format!("step key {k:?} is not an integer"))
                    })?;
                    pairs.push((x, p));
                }
                StepDistribution::custom(&pairs)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    steps: Vec<i64>,
    probs: Vec<f64>,
    family: Family,
    mean: f64,
    variance: f64,
}

impl StepDistribution {
    pub fn simple() -> Self {
        Self::uniform_range(1)
            .map(|mut d| {
                d.family = Family::Simple;
                d
            })
            .expect("simple walk is valid")
    }

    pub fn uniform_range(l: u32) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidDistribution("uniform_range needs L >= 1".into()));
        }
        let l = l as i64;
        let p = 1.0 / (2 * l) as f64;
        let pairs: Vec<(i64, f64)> = (-l..=l).filter(|&x| x != 0).map(|x| (x, p)).collect();
        Self::validated(pairs, Family::UniformRange { l: l as u32 })
    }

    pub fn geometric_tail(l: u32) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidDistribution(
                "geometric_tail needs L >= 2 (L = 1 is degenerate)".into(),
            ));
        }
        let lf = l as f64;
        let q = (lf - 1.0) / lf;
        // two-sided tail beyond |x| = K has mass q^K
        let cutoff = (GEOMETRIC_TAIL_MASS.ln() / q.ln()).floor() as i64 + 1;
        let mut pairs = Vec::with_capacity(2 * cutoff as usize);
        for x in (-cutoff..=cutoff).filter(|&x| x != 0) {
            let p = q.powi((x.abs() - 1) as i32) / (2.0 * lf);
            pairs.push((x, p));
        }
        let total: f64 = pairs.iter().map(|&(_, p)| p).sum();
        for pair in &mut pairs {
            pair.1 /= total;
        }
        Self::validated(pairs, Family::GeometricTail { l })
    }

    /// Arbitrary finite pmf. Positive masses are renormalised; the result
    /// must still have zero mean and positive variance.
    pub fn custom(pmf: &[(i64, f64)]) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::InvalidDistribution("empty pmf".into()));
        }
        let mut merged: BTreeMap<i64, f64> = BTreeMap::new();
        for &(x, p) in pmf {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "mass {p} at step {x} is not a finite non-negative number"
                )));
            }
            *merged.entry(x).or_insert(0.0) += p;
        }
        let total: f64 = merged.values().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution("pmf is not normalizable".into()));
        }
        let pairs: Vec<(i64, f64)> = merged
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .map(|(x, p)| (x, p / total))
            .collect();
        Self::validated(pairs, Family::Custom)
    }

    pub fn from_family(family: Family) -> Result<Self> {
        match family {
            Family::Simple => Ok(Self::simple()),
            Family::UniformRange { l } => Self::uniform_range(l),
            Family::GeometricTail { l } => Self::geometric_tail(l),
            Family::Custom => Err(Error::InvalidDistribution(
                "custom family needs an explicit pmf".into(),
            )),
        }
    }

    fn validated(mut pairs: Vec<(i64, f64)>, family: Family) -> Result<Self> {
        pairs.sort_by_key(|&(x, _)| x);
        let total: f64 = pairs.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("pmf sums to {total}")));
        }
        let mean: f64 = pairs.iter().map(|&(x, p)| x as f64 * p).sum();
        let scale = pairs.iter().map(|&(x, _)| x.abs()).max().unwrap_or(1).max(1) as f64;
        if mean.abs() > NORMALIZATION_TOL * scale {
            return Err(Error::InvalidDistribution(format!(
                "step mean is {mean}, walks must be centred"
            )));
        }
        let variance: f64 = pairs.iter().map(|&(x, p)| (x as f64).powi(2) * p).sum::<f64>() - mean * mean;
        if !(variance > 0.0) {
            return Err(Error::InvalidDistribution("step variance must be positive".into()));
        }
        let (steps, probs) = pairs.into_iter().unzip();
        Ok(Self {
            steps,
            probs,
            family,
            mean,
            variance,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Support in increasing order.
    pub fn steps(&self) -> &[i64] {
        &self.steps
    }

    /// Probabilities aligned with [`steps`](Self::steps).
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn prob(&self, x: i64) -> f64 {
        match self.steps.binary_search(&x) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Largest absolute step.
    pub fn max_step(&self) -> i64 {
        self.steps.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.steps
            .iter()
            .zip(&self.probs)
            .all(|(&x, &p)| (self.prob(-x) - p).abs() <= 1e-15)
    }

    /// Characteristic function `sum_x P(x) e^{itx}`.
    pub fn char_fn(&self, t: f64) -> Complex64 {
        self.steps
            .iter()
            .zip(&self.probs)
            .map(|(&x, &p)| Complex64::from_polar(p, t * x as f64))
            .sum()
    }

    /// Exact pmf of `S_k` by repeated convolution.
    pub fn convolution_power(&self, k: usize) -> Result<LatticePmf> {
        self.convolution_power_capped(k, DEFAULT_SUPPORT_CAP)
    }

    pub fn convolution_power_capped(&self, k: usize, cap: usize) -> Result<LatticePmf> {
        let width = 2 * self.max_step() as usize * k + 1;
        if width > cap {
            return Err(Error::Budget {
                what: "convolution support",
                needed: width as f64,
                budget: cap as f64,
            });
        }
        let mut pmf = LatticePmf::delta();
        for _ in 0..k {
            pmf = pmf.convolve(self);
        }
        Ok(pmf)
    }
}

/// A pmf on a contiguous block of integers `offset..offset + probs.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePmf {
    offset: i64,
    probs: Vec<f64>,
}

impl LatticePmf {
    /// Point mass at 0.
    pub fn delta() -> Self {
        Self {
            offset: 0,
            probs: vec![1.0],
        }
    }

    pub fn get(&self, x: i64) -> f64 {
        let i = x - self.offset;
        if i < 0 || i as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[i as usize]
        }
    }

    pub fn min_site(&self) -> i64 {
        self.offset
    }

    pub fn max_site(&self) -> i64 {
        self.offset + self.probs.len() as i64 - 1
    }

    /// `(site, probability)` pairs, including zero entries inside the block.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.offset + i as i64, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// One more step of the walk.
    pub fn convolve(&self, dist: &StepDistribution) -> LatticePmf {
        let lo = dist.steps[0];
        let hi = *dist.steps.last().unwrap();
        let len = self.probs.len() + (hi - lo) as usize;
        let mut out = vec![0.0; len];
        for (&s, &q) in dist.steps.iter().zip(&dist.probs) {
            let shift = (s - lo) as usize;
            for (o, &p) in out[shift..shift + self.probs.len()].iter_mut().zip(&self.probs) {
                *o += p * q;
            }
        }
        LatticePmf {
            offset: self.offset + lo,
            probs: out,
        }
    }
}

/// Values entering the technical conditions on families with growing
/// variance. Reported raw: the constants in those conditions are unnamed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub l: u32,
    pub sigma: f64,
    /// `E((S_1/σ)^2 1{|S_1/σ| > N})`
    pub truncated_second_moment: f64,
    /// `σ^{2/3} max_x P(S_1 = x)`
    pub max_pmf_scaled: f64,
    /// `min σ P(S_1 = x)` over `1 <= |x| <= max(1, floor(c1 σ))`
    pub min_scaled_pmf: f64,
    /// `E(exp(ε |S_1| / σ))`
    pub exp_moment: f64,
}

pub fn condition_report(dist: &StepDistribution, l: u32, c1: f64, n_cut: f64, eps: f64) -> ConditionReport {
    let sigma = dist.sigma();
    let mut truncated = 0.0;
    let mut max_p: f64 = 0.0;
    let mut exp_moment = 0.0;
    for (&x, &p) in dist.steps().iter().zip(dist.probs()) {
        let z = x as f64 / sigma;
        if z.abs() > n_cut {
            truncated += z * z * p;
        }
        max_p = max_p.max(p);
        exp_moment += (eps * z.abs()).exp() * p;
    }
    let reach = ((c1 * sigma).floor() as i64).max(1);
    let min_scaled = (1..=reach)
        .flat_map(|x| [x, -x])
        .map(|x| sigma * dist.prob(x))
        .fold(f64::INFINITY, f64::min);
    ConditionReport {
        l,
        sigma,
        truncated_second_moment: truncated,
        max_pmf_scaled: sigma.powf(2.0 / 3.0) * max_p,
        min_scaled_pmf: min_scaled,
        exp_moment,
    }
}

/// Evaluates [`condition_report`] for each range parameter of a family.
pub fn check_conditions(
    kind: FamilyKind,
    ls: &[u32],
    c1: f64,
    n_cut: f64,
    eps: f64,
) -> Result<Vec<ConditionReport>> {
    if !(c1 > 0.0 && n_cut > 0.0 && eps > 0.0) {
        return Err(Error::param("c1, N and eps must be positive"));
    }
    ls.iter()
        .map(|&l| Ok(condition_report(&kind.build(l)?, l, c1, n_cut, eps)))
        .collect()
}
