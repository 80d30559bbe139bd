//! Exact weighted enumeration over all `n`-step paths.
//!
//! The search is depth-first over a [`PathState`], so memory is `O(n)` and
//! energies stay exact integers. Work is split into jobs by the first few
//! steps (in support order) and the per-job sums are merged in that same
//! order, so the result does not depend on the execution strategy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hamiltonian::PathState;
use crate::model::Model;
use crate::numeric::{log_sum_exp, LogSum};
use crate::stepdist::StepDistribution;

pub const DEFAULT_LEAF_BUDGET: f64 = 1e8;

/// Minimum number of prefix jobs before the search goes depth-first.
const MIN_JOBS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnumOptions {
    /// Upper bound on `|support|^n`, checked before any work is done.
    pub leaf_budget: f64,
    pub exec: Exec,
}

impl Default for EnumOptions {
    fn default() -> Self {
        Self {
            leaf_budget: DEFAULT_LEAF_BUDGET,
            exec: Exec::default(),
        }
    }
}

impl EnumOptions {
    pub fn sequential() -> Self {
        Self {
            exec: Exec::Sequential,
            ..Self::default()
        }
    }
}

/// Callbacks for a full enumeration.
pub trait LeafVisitor: Sync {
    type Acc: Send;

    fn empty(&self) -> Self::Acc;

    fn initial_state(&self, reach: usize) -> PathState {
        PathState::with_reach(reach)
    }

    /// True when every extension of `state` has weight zero.
    fn prune(&self, _state: &PathState) -> bool {
        false
    }

    fn visit(&self, acc: &mut Self::Acc, state: &PathState, log_prob: f64);

    fn merge(&self, into: &mut Self::Acc, from: Self::Acc);
}

pub fn check_budget(dist: &StepDistribution, n: usize, budget: f64) -> Result<()> {
    let leaves = (dist.len() as f64).powi(n as i32);
    if leaves > budget {
        return Err(Error::Budget {
            what: "enumeration leaf visits",
            needed: leaves,
            budget,
        });
    }
    Ok(())
}

/// Visits every `n`-step path not cut off by `prune`.
pub fn walk_leaves<V: LeafVisitor>(
    dist: &StepDistribution,
    n: usize,
    visitor: &V,
    opts: &EnumOptions,
) -> Result<V::Acc> {
    check_budget(dist, n, opts.leaf_budget)?;
    let k = dist.len();
    let mut depth = 0;
    let mut jobs = 1usize;
    while depth < n && jobs < MIN_JOBS {
        depth += 1;
        jobs *= k;
    }
    let reach = n * dist.max_step() as usize + 1;
    let log_p: Vec<f64> = dist.probs().iter().map(|p| p.ln()).collect();
    let steps = dist.steps();

    let run_job = |job: usize| -> V::Acc {
        let mut acc = visitor.empty();
        let mut state = visitor.initial_state(reach);
        let mut lp = 0.0;
        // mixed-radix digits, most significant first = lexicographic in support order
        let mut digits = vec![0usize; depth];
        let mut rem = job;
        for d in digits.iter_mut().rev() {
            *d = rem % k;
            rem /= k;
        }
        if visitor.prune(&state) {
            return acc;
        }
        for &d in &digits {
            state.extend(steps[d]);
            lp += log_p[d];
            if visitor.prune(&state) {
                return acc;
            }
        }
        dfs(visitor, &mut acc, &mut state, steps, &log_p, n - depth, lp);
        acc
    };

    let parts = opts.exec.map_range(jobs, run_job);
    let mut total = visitor.empty();
    for p in parts {
        visitor.merge(&mut total, p);
    }
    Ok(total)
}

fn dfs<V: LeafVisitor>(
    visitor: &V,
    acc: &mut V::Acc,
    state: &mut PathState,
    steps: &[i64],
    log_p: &[f64],
    remaining: usize,
    lp: f64,
) {
    if remaining == 0 {
        visitor.visit(acc, state, lp);
        return;
    }
    for (&s, &q) in steps.iter().zip(log_p) {
        state.extend(s);
        if !visitor.prune(state) {
            dfs(visitor, acc, state, steps, log_p, remaining - 1, lp + q);
        }
        state.retract();
    }
}

/// What multiplies the path probability at a leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Weighting {
    Model(Model),
    /// `exp(-β H_n')`.
    Shifted { beta: f64 },
}

impl Weighting {
    fn log_weight(&self, state: &PathState) -> f64 {
        match *self {
            Weighting::Model(m) => m.log_weight(state),
            Weighting::Shifted { beta } => {
                let h = state.energy().h_prime;
                if h == 0 {
                    0.0
                } else {
                    -beta * h as f64
                }
            }
        }
    }
}

/// Per-endpoint accumulation of `ln E(weight; S_n = x)`.
struct EndpointVisitor {
    weighting: Weighting,
    offset: i64,
    width: usize,
}

impl LeafVisitor for EndpointVisitor {
    type Acc = Vec<LogSum>;

    fn empty(&self) -> Self::Acc {
        vec![LogSum::new(); self.width]
    }

    fn initial_state(&self, reach: usize) -> PathState {
        match self.weighting {
            Weighting::Model(m) => m.initial_state(reach),
            Weighting::Shifted { .. } => PathState::with_reach(reach),
        }
    }

    fn prune(&self, state: &PathState) -> bool {
        match self.weighting {
            Weighting::Model(Model::Saw) => state.energy().h > 0,
            Weighting::Model(Model::Strip { .. }) => state.strip_log_weight() == f64::NEG_INFINITY,
            _ => false,
        }
    }

    fn visit(&self, acc: &mut Self::Acc, state: &PathState, log_prob: f64) {
        let lw = self.weighting.log_weight(state);
        acc[(state.endpoint() + self.offset) as usize].add_log(log_prob + lw);
    }

    fn merge(&self, into: &mut Self::Acc, from: Self::Acc) {
        for (a, b) in into.iter_mut().zip(&from) {
            a.merge(b);
        }
    }
}

fn endpoint_log_measure(
    dist: &StepDistribution,
    n: usize,
    weighting: Weighting,
    opts: &EnumOptions,
) -> Result<BTreeMap<i64, f64>> {
    let reach = n as i64 * dist.max_step();
    let visitor = EndpointVisitor {
        weighting,
        offset: reach,
        width: 2 * reach as usize + 1,
    };
    let acc = walk_leaves(dist, n, &visitor, opts)?;
    Ok(acc
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_zero())
        .map(|(i, s)| (i as i64 - reach, s.ln()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumerationResult {
    pub n: usize,
    pub model: Model,
    /// `Z = E(weight)`.
    pub z: f64,
    pub log_z: f64,
    /// `x -> E(weight; S_n = x)`; only endpoints with positive mass.
    pub raw_measure: BTreeMap<i64, f64>,
    /// `x -> ln E(weight; S_n = x)`, exact even when the raw values underflow.
    pub log_raw_measure: BTreeMap<i64, f64>,
    /// `x -> Q_n(S_n = x)`; empty when `Z = 0`.
    pub endpoint_pmf: BTreeMap<i64, f64>,
}

impl EnumerationResult {
    fn from_log_measure(n: usize, model: Model, log_raw: BTreeMap<i64, f64>) -> Self {
        let logs: Vec<f64> = log_raw.values().copied().collect();
        let log_z = log_sum_exp(&logs);
        let raw_measure = log_raw.iter().map(|(&x, &l)| (x, l.exp())).collect();
        let endpoint_pmf = if log_z.is_finite() {
            log_raw.iter().map(|(&x, &l)| (x, (l - log_z).exp())).collect()
        } else {
            BTreeMap::new()
        };
        Self {
            n,
            model,
            z: log_z.exp(),
            log_z,
            raw_measure,
            log_raw_measure: log_raw,
            endpoint_pmf,
        }
    }

    /// `E_Q(f(S_n))`.
    pub fn q_expect(&self, f: impl Fn(i64) -> f64) -> f64 {
        self.endpoint_pmf.iter().map(|(&x, &p)| p * f(x)).sum()
    }

    /// `E(weight · 1{S_n ∈ A})` in log form.
    pub fn log_restricted(&self, keep: impl Fn(i64) -> bool) -> f64 {
        let logs: Vec<f64> = self
            .log_raw_measure
            .iter()
            .filter(|(&x, _)| keep(x))
            .map(|(_, &l)| l)
            .collect();
        log_sum_exp(&logs)
    }
}

pub fn enumerate_measure(
    dist: &StepDistribution,
    n: usize,
    model: Model,
    opts: &EnumOptions,
) -> Result<EnumerationResult> {
    model.validate()?;
    let log_raw = endpoint_log_measure(dist, n, Weighting::Model(model), opts)?;
    Ok(EnumerationResult::from_log_measure(n, model, log_raw))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignRestriction {
    #[default]
    None,
    /// `S_n >= 0`
    NonNegative,
    /// `S_n <= 0`
    NonPositive,
}

impl SignRestriction {
    pub fn admits(self, x: i64) -> bool {
        match self {
            SignRestriction::None => true,
            SignRestriction::NonNegative => x >= 0,
            SignRestriction::NonPositive => x <= 0,
        }
    }
}

/// `x -> ln E(exp(-β H_n'); S_n = x)`, the untilted input of
/// [`tilted_log_partition`], for evaluating many tilts at once.
pub fn shifted_log_measure(
    dist: &StepDistribution,
    n: usize,
    beta: f64,
    opts: &EnumOptions,
) -> Result<BTreeMap<i64, f64>> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::param(format!("need finite β >= 0, got {beta}")));
    }
    endpoint_log_measure(dist, n, Weighting::Shifted { beta }, opts)
}

/// `ln Σ_x exp(l(x) + μ x)` over admitted `x` of a log endpoint measure.
pub fn tilt_log_measure(log_measure: &BTreeMap<i64, f64>, mu: f64, sign: SignRestriction) -> f64 {
    let terms: Vec<f64> = log_measure
        .iter()
        .filter(|(&x, _)| sign.admits(x))
        .map(|(&x, &l)| l + mu * x as f64)
        .collect();
    log_sum_exp(&terms)
}

/// `ln E(exp(-β H_n') exp(μ S_n) · restriction)`. The tilt `μ` multiplies
/// `S_n` directly, without any `β^{1/3}` rescaling.
pub fn tilted_log_partition(
    dist: &StepDistribution,
    n: usize,
    beta: f64,
    mu: f64,
    sign: SignRestriction,
    opts: &EnumOptions,
) -> Result<f64> {
    if !mu.is_finite() {
        return Err(Error::param(format!("tilt μ must be finite, got {mu}")));
    }
    let log_raw = shifted_log_measure(dist, n, beta, opts)?;
    Ok(tilt_log_measure(&log_raw, mu, sign))
}

pub fn tilted_partition(
    dist: &StepDistribution,
    n: usize,
    beta: f64,
    mu: f64,
    sign: SignRestriction,
    opts: &EnumOptions,
) -> Result<f64> {
    tilted_log_partition(dist, n, beta, mu, sign, opts).map(f64::exp)
}

/// Endpoint events used for constrained partition functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// `S_n >= θ n`
    Ge { theta: f64 },
    /// `0 <= S_n <= θ n`
    Between { theta: f64 },
    /// `S_n ∈ [⌊θn⌋, ⌈θn⌉]`
    Near { theta: f64 },
    /// `|S_n - center| <= half_width`
    Window { center: f64, half_width: f64 },
}

impl Constraint {
    pub fn admits(&self, x: i64, n: usize) -> bool {
        let x = x as f64;
        let n = n as f64;
        match *self {
            Constraint::Ge { theta } => x >= theta * n,
            Constraint::Between { theta } => x >= 0.0 && x <= theta * n,
            Constraint::Near { theta } => x >= (theta * n).floor() && x <= (theta * n).ceil(),
            Constraint::Window { center, half_width } => (x - center).abs() <= half_width,
        }
    }
}

/// `ln E(weight · 1{S_n satisfies the constraint})`, `-inf` for an empty event.
pub fn constrained_log_partition(
    dist: &StepDistribution,
    n: usize,
    model: Model,
    constraint: Constraint,
    opts: &EnumOptions,
) -> Result<f64> {
    let r = enumerate_measure(dist, n, model, opts)?;
    Ok(r.log_restricted(|x| constraint.admits(x, n)))
}

pub fn constrained_partition(
    dist: &StepDistribution,
    n: usize,
    model: Model,
    constraint: Constraint,
    opts: &EnumOptions,
) -> Result<f64> {
    constrained_log_partition(dist, n, model, constraint, opts).map(f64::exp)
}

/// Both sides of `Z_n^β(μ) <= (Z_T^β(μ))^{n/T}` for the shifted, tilted
/// partition function.
pub fn split_bound_check(
    dist: &StepDistribution,
    n: usize,
    t: usize,
    beta: f64,
    mu: f64,
    opts: &EnumOptions,
) -> Result<(f64, f64)> {
    if t == 0 || n % t != 0 {
        return Err(Error::param(format!("piece length {t} must divide n = {n}")));
    }
    let lhs = tilted_partition(dist, n, beta, mu, SignRestriction::None, opts)?;
    let piece = tilted_partition(dist, t, beta, mu, SignRestriction::None, opts)?;
    Ok((lhs, piece.powi((n / t) as i32)))
}

/// `E(weight · f(path))` over all `n`-step paths, for test oracles and small
/// diagnostics.
pub fn expectation(
    dist: &StepDistribution,
    n: usize,
    model: Model,
    f: impl Fn(&PathState) -> f64 + Sync,
    opts: &EnumOptions,
) -> Result<f64> {
    struct Expect<F> {
        model: Model,
        f: F,
    }
    impl<F: Fn(&PathState) -> f64 + Sync> LeafVisitor for Expect<F> {
        type Acc = crate::numeric::KahanSum;
        fn empty(&self) -> Self::Acc {
            Default::default()
        }
        fn initial_state(&self, reach: usize) -> PathState {
            self.model.initial_state(reach)
        }
        fn visit(&self, acc: &mut Self::Acc, state: &PathState, log_prob: f64) {
            let w = (log_prob + self.model.log_weight(state)).exp();
            if w > 0.0 {
                acc.add(w * (self.f)(state));
            }
        }
        fn merge(&self, into: &mut Self::Acc, from: Self::Acc) {
            into.add(from.value());
        }
    }
    model.validate()?;
    walk_leaves(dist, n, &Expect { model, f }, opts).map(|k| k.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{energy, strip_weight, local_times, LatticePath};

    fn dj(beta: f64) -> Model {
        Model::DombJoyce { beta }
    }

    /// All step sequences of length `n`, by explicit iteration.
    fn all_paths(d: &StepDistribution, n: usize) -> Vec<(LatticePath, f64)> {
        let mut out = vec![(vec![], 1.0)];
        for _ in 0..n {
            let mut next = vec![];
            for (steps, p) in &out {
                for (&s, &q) in d.steps().iter().zip(d.probs()) {
                    let mut v: Vec<i64> = steps.clone();
                    v.push(s);
                    next.push((v, p * q));
                }
            }
            out = next;
        }
        out.into_iter().map(|(s, p)| (LatticePath::from_steps(&s), p)).collect()
    }

    #[test]
    fn z2_closed_form() {
        let d = StepDistribution::simple();
        for beta in [0.0, 0.1, 0.5, 1.0, 3.0, 10.0] {
            let r = enumerate_measure(&d, 2, dj(beta), &EnumOptions::default()).unwrap();
            assert!((r.z - (1.0 + (-2.0 * beta).exp()) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn free_walk_and_saw_examples() {
        let d = StepDistribution::simple();
        for n in 0..8 {
            let r = enumerate_measure(&d, n, dj(0.0), &EnumOptions::default()).unwrap();
            assert!((r.z - 1.0).abs() < 1e-12);
        }
        let r = enumerate_measure(&d, 3, Model::Saw, &EnumOptions::default()).unwrap();
        assert!((r.z - 0.25).abs() < 1e-15);
        assert_eq!(r.endpoint_pmf.len(), 2);
    }

    #[test]
    fn tilted_examples() {
        let d = StepDistribution::simple();
        let o = EnumOptions::default();
        let p = tilted_partition(&d, 2, 0.0, 0.0, SignRestriction::NonNegative, &o).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
        let u = StepDistribution::uniform_range(3).unwrap();
        let p = tilted_partition(&u, 4, 0.0, 0.0, SignRestriction::None, &o).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        // H_2' only counts pairs among S_1, S_2, which never coincide
        for beta in [0.1, 1.0] {
            let p = tilted_partition(&d, 2, beta, 0.0, SignRestriction::None, &o).unwrap();
            assert!((p - 1.0).abs() < 1e-15);
        }
        // S_1 = S_3 on the 4 of 8 paths whose last two steps cancel
        let p = tilted_partition(&d, 3, 1.0, 0.0, SignRestriction::None, &o).unwrap();
        assert!((p - (4.0 + 4.0 * (-2.0f64).exp()) / 8.0).abs() < 1e-15);
    }

    #[test]
    fn tilted_matches_brute_force() {
        let o = EnumOptions::default();
        for d in [StepDistribution::simple(), StepDistribution::uniform_range(2).unwrap()] {
            for (beta, mu) in [(0.3, 0.2), (1.0, -0.4)] {
                let n = 5;
                let exact: f64 = all_paths(&d, n)
                    .iter()
                    .map(|(p, q)| {
                        let x = p.positions();
                        let mut hp = 0;
                        for i in 1..x.len() {
                            for j in 1..x.len() {
                                hp += (i != j && x[i] == x[j]) as i32;
                            }
                        }
                        q * (-beta * hp as f64 + mu * p.endpoint() as f64).exp()
                    })
                    .sum();
                let v = tilted_partition(&d, n, beta, mu, SignRestriction::None, &o).unwrap();
                assert!((v - exact).abs() < 1e-12 * exact.max(1.0));
            }
        }
    }

    #[test]
    fn constrained_examples() {
        let d = StepDistribution::simple();
        let o = EnumOptions::default();
        let z = constrained_partition(&d, 4, dj(0.0), Constraint::Ge { theta: 1.5 }, &o).unwrap();
        assert_eq!(z, 0.0);
        let z = constrained_partition(&d, 4, dj(0.0), Constraint::Ge { theta: f64::NEG_INFINITY }, &o).unwrap();
        assert!((z - 1.0).abs() < 1e-12);
        let z = constrained_partition(&d, 2, dj(0.2), Constraint::Ge { theta: 1.0 }, &o).unwrap();
        assert!((z - 0.25).abs() < 1e-15);
        let z = constrained_partition(&d, 3, dj(0.0), Constraint::Near { theta: 0.5 }, &o).unwrap();
        // window [1, 2] at n = 3: only S_3 = 1 is reachable, probability 3/8
        assert!((z - 0.375).abs() < 1e-15);
    }

    #[test]
    fn ge_constraint_is_monotone_in_theta() {
        let d = StepDistribution::uniform_range(2).unwrap();
        let r = enumerate_measure(&d, 6, dj(0.3), &EnumOptions::default()).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..=25 {
            let theta = i as f64 * 0.1;
            let v = r.log_restricted(|x| Constraint::Ge { theta }.admits(x, 6));
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn free_endpoint_law_is_convolution_power() {
        for d in [StepDistribution::simple(), StepDistribution::uniform_range(2).unwrap()] {
            for n in 0..=8 {
                let r = enumerate_measure(&d, n, dj(0.0), &EnumOptions::default()).unwrap();
                let conv = d.convolution_power(n).unwrap();
                for (x, p) in conv.iter() {
                    let q = r.endpoint_pmf.get(&x).copied().unwrap_or(0.0);
                    assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn measure_matches_brute_force_for_all_models() {
        let models = [
            dj(0.4),
            Model::Saw,
            Model::Attraction { beta: 0.9, gamma: 0.4 },
            Model::Strip { width: 1 },
        ];
        for d in [StepDistribution::simple(), StepDistribution::uniform_range(2).unwrap()] {
            for m in models {
                let n = 5;
                let mut exact: BTreeMap<i64, f64> = BTreeMap::new();
                for (p, q) in all_paths(&d, n) {
                    let e = energy(&p);
                    let w = match m {
                        Model::DombJoyce { beta } => (-beta * e.h as f64).exp(),
                        Model::Saw => (e.h == 0) as i32 as f64,
                        Model::Attraction { beta, gamma } => {
                            (-(beta - gamma) * e.h as f64 - gamma / 2.0 * e.g as f64).exp()
                        }
                        Model::Strip { width } => strip_weight(&local_times(&p), width),
                    };
                    *exact.entry(p.endpoint()).or_insert(0.0) += q * w;
                }
                let r = enumerate_measure(&d, n, m, &EnumOptions::default()).unwrap();
                for (x, v) in exact {
                    let got = r.raw_measure.get(&x).copied().unwrap_or(0.0);
                    assert!((got - v).abs() < 1e-14, "{m} x={x}");
                }
            }
        }
    }

    #[test]
    fn symmetric_endpoint_laws() {
        let d = StepDistribution::uniform_range(2).unwrap();
        for m in [dj(0.7), Model::Saw, Model::Strip { width: 2 }] {
            let r = enumerate_measure(&d, 7, m, &EnumOptions::default()).unwrap();
            for (&x, &p) in &r.endpoint_pmf {
                assert!((p - r.endpoint_pmf[&-x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn z_decreases_in_beta() {
        let d = StepDistribution::simple();
        let mut last = f64::INFINITY;
        for i in 0..20 {
            let z = enumerate_measure(&d, 6, dj(i as f64 * 0.25), &EnumOptions::default()).unwrap().z;
            assert!(z < last);
            last = z;
        }
    }

    #[test]
    fn saw_probability_of_simple_walk() {
        let d = StepDistribution::simple();
        for n in 1..=16 {
            let r = enumerate_measure(&d, n, Model::Saw, &EnumOptions::default()).unwrap();
            assert!((r.z - 2f64.powi(1 - n as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn split_bound_grid() {
        let o = EnumOptions::default();
        for d in [StepDistribution::simple(), StepDistribution::uniform_range(2).unwrap()] {
            for beta in [0.1, 0.3, 1.0] {
                for mu in [-0.5, 0.0, 0.5] {
                    for (n, t) in [(4, 2), (6, 2), (6, 3), (8, 4)] {
                        let (l, r) = split_bound_check(&d, n, t, beta, mu, &o).unwrap();
                        assert!(l <= r * (1.0 + 1e-10), "{l} > {r}");
                    }
                }
            }
        }
        let (l, r) = split_bound_check(&StepDistribution::simple(), 4, 2, 0.0, 0.0, &o).unwrap();
        assert!((l - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
        assert!(split_bound_check(&StepDistribution::simple(), 5, 2, 0.1, 0.0, &o).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let d = StepDistribution::uniform_range(2).unwrap();
        let o = EnumOptions {
            leaf_budget: 1000.0,
            ..EnumOptions::default()
        };
        assert!(matches!(
            enumerate_measure(&d, 5, dj(0.1), &o),
            Err(Error::Budget { .. })
        ));
        assert!(enumerate_measure(&d, 4, dj(0.1), &o).is_ok());
    }

    #[test]
    fn collapsed_phase_rejected() {
        let d = StepDistribution::simple();
        let m = Model::Attraction { beta: 0.5, gamma: 0.6 };
        assert!(enumerate_measure(&d, 3, m, &EnumOptions::default()).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let d = StepDistribution::uniform_range(2).unwrap();
        let a = enumerate_measure(&d, 9, dj(0.3), &EnumOptions::sequential()).unwrap();
        let b = enumerate_measure(&d, 9, dj(0.3), &EnumOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn expectation_of_g() {
        let d = StepDistribution::simple();
        let g = expectation(&d, 2, dj(0.0), |s| s.energy().g as f64, &EnumOptions::default()).unwrap();
        assert!((g - 4.0).abs() < 1e-15);
    }
}
