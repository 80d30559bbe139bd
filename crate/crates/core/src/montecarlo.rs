//! Monte Carlo samplers for paths far beyond enumeration range.
//!
//! * [`sample_importance`] draws free-walk paths and weights them by the model
//!   weight. Fine for small `β n^{3/2}`, useless for hard constraints.
//! * [`sample_perm`] is depth-first PERM (pruned-enriched Rosenbluth): chains
//!   grow step by step choosing steps proportional to `P(s)·(step weight)`,
//!   then are enriched or pruned against the running per-depth average.
//!
//! # Random streams
//!
//! Replica `r` of a run with master seed `s` uses
//! `ChaCha8Rng::seed_from_u64(s)` with `set_stream(r)`: the same 256-bit key
//! for every replica and the 64-bit ChaCha stream id set to the replica
//! index. Each replica is therefore reproducible on its own, and results are
//! assembled by replica index, so thread scheduling never changes a number.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::Model;
use crate::numeric::{log_sum_exp, LogSum};
use crate::stepdist::StepDistribution;

/// ESS fraction below which an ensemble carries a warning.
pub const LOW_ESS_FRACTION: f64 = 0.01;

pub fn replica_rng(master_seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Importance,
    Perm,
}

/// Weighted endpoint sample of one replica.
///
/// Samples are stored aggregated by endpoint (the sum of weights of all
/// samples ending at `x`), which is all the endpoint estimators need and keeps
/// memory bounded by the endpoint range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedEnsemble {
    pub method: Method,
    pub n: usize,
    pub model: Model,
    pub seed: u64,
    pub replica: u64,
    /// Independent starts: samples for importance sampling, tours for PERM.
    pub trials: u64,
    /// Chains that reached depth `n`.
    pub samples: u64,
    /// PERM tours without any chain reaching depth `n`.
    pub empty_tours: u64,
    /// Steps performed, a cost measure.
    pub work: u64,
    pub endpoint_weights: BTreeMap<i64, LogSum>,
    pub sum_sq: LogSum,
}

impl WeightedEnsemble {
    fn new(method: Method, n: usize, model: Model, seed: u64, replica: u64) -> Self {
        Self {
            method,
            n,
            model,
            seed,
            replica,
            trials: 0,
            samples: 0,
            empty_tours: 0,
            work: 0,
            endpoint_weights: BTreeMap::new(),
            sum_sq: LogSum::new(),
        }
    }

    fn record(&mut self, endpoint: i64, log_w: f64) {
        self.samples += 1;
        if log_w == f64::NEG_INFINITY {
            return;
        }
        self.endpoint_weights.entry(endpoint).or_default().add_log(log_w);
        self.sum_sq.add_log(2.0 * log_w);
    }

    /// `ln Σ w`.
    pub fn log_total_weight(&self) -> f64 {
        let mut s = LogSum::new();
        for v in self.endpoint_weights.values() {
            s.merge(v);
        }
        s.ln()
    }

    /// `ln Ẑ = ln(Σ w / trials)`.
    pub fn log_z(&self) -> f64 {
        self.log_total_weight() - (self.trials as f64).ln()
    }

    /// `(Σw)^2 / Σw^2`.
    pub fn effective_sample_size(&self) -> f64 {
        if self.sum_sq.is_zero() {
            return 0.0;
        }
        (2.0 * self.log_total_weight() - self.sum_sq.ln()).exp()
    }

    pub fn low_ess(&self) -> bool {
        self.effective_sample_size() < LOW_ESS_FRACTION * self.samples.max(1) as f64
    }

    /// Self-normalised `E_Q f(S_n)`; NaN without weight.
    pub fn q_expect(&self, f: impl Fn(i64) -> f64) -> f64 {
        let lt = self.log_total_weight();
        self.endpoint_weights
            .iter()
            .map(|(&x, w)| (w.ln() - lt).exp() * f(x))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    pub replicas: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for McParams {
    fn default() -> Self {
        Self {
            replicas: 16,
            seed: 1,
            exec: Exec::default(),
        }
    }
}

fn check_n_model(n: usize, model: &Model) -> Result<()> {
    model.validate()?;
    if n == 0 {
        return Err(Error::param("n must be >= 1"));
    }
    Ok(())
}

/// Free-walk importance sampling for a single replica.
pub fn sample_importance(
    dist: &StepDistribution,
    n: usize,
    model: Model,
    samples: u64,
    seed: u64,
    replica: u64,
) -> Result<WeightedEnsemble> {
    check_n_model(n, &model)?;
    if model.has_hard_constraint() && !matches!(model, Model::Strip { .. }) {
        return Err(Error::param("importance sampling needs a finite β; use PERM for the SAW"));
    }
    let mut rng = replica_rng(seed, replica);
    let picker = WeightedIndex::new(dist.probs()).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let steps = dist.steps();
    let mut ens = WeightedEnsemble::new(Method::Importance, n, model, seed, replica);
    let reach = (n * dist.max_step() as usize).min(1 << 16);
    let mut state = model.initial_state(reach);
    for _ in 0..samples {
        while state.n() > 0 {
            state.retract();
        }
        let mut lw = model.initial_log_weight();
        for _ in 0..n {
            let s = steps[picker.sample(&mut rng)];
            lw += model.step_log_weight(&state.peek(s));
            state.extend(s);
        }
        ens.work += n as u64;
        ens.trials += 1;
        ens.record(state.endpoint(), lw);
    }
    Ok(ens)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermParams {
    pub tours: u64,
    pub c_low: f64,
    pub c_high: f64,
    /// Population control on/off. Off gives plain Rosenbluth sampling.
    pub population_control: bool,
    /// Stop enriching within a tour after this many steps (0 = no cap).
    pub max_steps_per_tour: u64,
}

impl Default for PermParams {
    fn default() -> Self {
        Self {
            tours: 1000,
            c_low: 0.2,
            c_high: 5.0,
            population_control: true,
            max_steps_per_tour: 0,
        }
    }
}

struct Frame {
    depth: usize,
    log_w: f64,
    copies: u8,
}

/// Depth-first PERM for a single replica.
///
/// Thresholds at depth `d` are `c_low·Ẑ_d` and `c_high·Ẑ_d`, where `Ẑ_d` is
/// the running mean weight at depth `d`: the sum of all weights that reached
/// `d` so far, this tour included, over the number of tours started.
/// Enrichment makes two copies of weight `W/2`; pruning kills with
/// probability 1/2 and doubles the weight otherwise.
pub fn sample_perm(
    dist: &StepDistribution,
    n: usize,
    model: Model,
    params: &PermParams,
    seed: u64,
    replica: u64,
) -> Result<WeightedEnsemble> {
    check_n_model(n, &model)?;
    if !(params.c_low > 0.0 && params.c_high > params.c_low) {
        return Err(Error::param("PERM thresholds need 0 < c_low < c_high"));
    }
    let mut rng = replica_rng(seed, replica);
    let steps = dist.steps();
    let log_p: Vec<f64> = dist.probs().iter().map(|p| p.ln()).collect();
    let mut ens = WeightedEnsemble::new(Method::Perm, n, model, seed, replica);

    let mut depth_sum: Vec<LogSum> = vec![LogSum::new(); n + 1];
    let reach = (n * dist.max_step() as usize).min(1 << 16);
    let mut state = model.initial_state(reach);
    let mut stack: Vec<Frame> = Vec::with_capacity(n + 1);
    let mut cand = vec![0.0f64; steps.len()];

    for tour in 0..params.tours {
        let ln_tours = ((tour + 1) as f64).ln();
        while state.n() > 0 {
            state.retract();
        }
        let mut reached = false;
        let mut tour_steps = 0u64;

        let w0 = model.initial_log_weight();
        depth_sum[0].add_log(w0);
        stack.push(Frame {
            depth: 0,
            log_w: w0,
            copies: 1,
        });

        while let Some(top) = stack.last_mut() {
            if top.copies == 0 {
                stack.pop();
                continue;
            }
            top.copies -= 1;
            let (depth, log_w) = (top.depth, top.log_w);
            while state.n() > depth {
                state.retract();
            }
            // Rosenbluth choice among the candidate steps
            let mut m = f64::NEG_INFINITY;
            for (i, &s) in steps.iter().enumerate() {
                let a = log_p[i] + model.step_log_weight(&state.peek(s));
                cand[i] = a;
                m = m.max(a);
            }
            if m == f64::NEG_INFINITY {
                continue;
            }
            let mut total = 0.0;
            for a in cand.iter_mut() {
                *a = (*a - m).exp();
                total += *a;
            }
            let mut u = rng.gen::<f64>() * total;
            let mut pick = steps.len() - 1;
            for (i, &a) in cand.iter().enumerate() {
                if u < a {
                    pick = i;
                    break;
                }
                u -= a;
            }
            if cand[pick] == 0.0 {
                // rounding landed on a forbidden step; take the last allowed one
                pick = cand.iter().rposition(|&a| a > 0.0).unwrap();
            }
            state.extend(steps[pick]);
            tour_steps += 1;
            let child_w = log_w + m + total.ln();
            let d = depth + 1;
            depth_sum[d].add_log(child_w);
            if d == n {
                ens.record(state.endpoint(), child_w);
                reached = true;
                continue;
            }
            let (copies, w) = if params.population_control {
                let ln_avg = depth_sum[d].ln() - ln_tours;
                let capped = params.max_steps_per_tour > 0 && tour_steps >= params.max_steps_per_tour;
                population_control(params, child_w, ln_avg, capped, &mut rng)
            } else {
                (1, child_w)
            };
            if copies > 0 {
                stack.push(Frame {
                    depth: d,
                    log_w: w,
                    copies,
                });
            }
        }
        ens.trials += 1;
        ens.work += tour_steps;
        if !reached {
            ens.empty_tours += 1;
        }
    }
    Ok(ens)
}

fn population_control(params: &PermParams, log_w: f64, ln_avg: f64, capped: bool, rng: &mut ChaCha8Rng) -> (u8, f64) {
    use std::f64::consts::LN_2;
    if log_w > params.c_high.ln() + ln_avg && !capped {
        (2, log_w - LN_2)
    } else if log_w < params.c_low.ln() + ln_avg {
        if rng.gen::<bool>() {
            (0, log_w)
        } else {
            (1, log_w + LN_2)
        }
    } else {
        (1, log_w)
    }
}

/// Runs `replicas` independent replicas and returns them in replica order.
pub fn run_replicas<F>(params: &McParams, f: F) -> Result<Vec<WeightedEnsemble>>
where
    F: Fn(u64, u64) -> Result<WeightedEnsemble> + Sync + Send,
{
    params
        .exec
        .map_range(params.replicas, |r| f(params.seed, r as u64))
        .into_iter()
        .collect()
}

pub fn importance_replicas(
    dist: &StepDistribution,
    n: usize,
    model: Model,
    samples: u64,
    params: &McParams,
) -> Result<Vec<WeightedEnsemble>> {
    run_replicas(params, |seed, r| sample_importance(dist, n, model, samples, seed, r))
}

pub fn perm_replicas(
    dist: &StepDistribution,
    n: usize,
    model: Model,
    perm: &PermParams,
    params: &McParams,
) -> Result<Vec<WeightedEnsemble>> {
    run_replicas(params, |seed, r| sample_perm(dist, n, model, perm, seed, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltEstimate {
    pub n: usize,
    /// `E_Q|S_n| / n`.
    pub theta_hat: Estimate,
    /// `-(1/n) ln Ẑ`.
    pub r_hat: Estimate,
    /// `sqrt(Var_Q |S_n|) / sqrt(n)`.
    pub sigma_star_hat: Estimate,
    /// `E_Q S_n`.
    pub mean_endpoint: Estimate,
    /// `ln Ẑ`.
    pub log_z: Estimate,
    pub ess: f64,
    pub samples: u64,
    pub replicas: usize,
    pub low_ess: bool,
}

/// Per-replica sufficient statistics on a common log scale.
struct Moments {
    trials: f64,
    w: f64,
    w_abs: f64,
    w_abs2: f64,
    w_x: f64,
}

/// Pooled self-normalised estimates with jackknife-over-replicas errors.
pub fn estimate_clt(ensembles: &[WeightedEnsemble]) -> Result<CltEstimate> {
    if ensembles.len() < 2 {
        return Err(Error::InsufficientReplicas {
            required: 2,
            got: ensembles.len(),
        });
    }
    let n = ensembles[0].n;
    let logs: Vec<f64> = ensembles.iter().map(|e| e.log_total_weight()).collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Err(Error::param("no replica carries any weight"));
    }
    let reps: Vec<Moments> = ensembles
        .iter()
        .map(|e| {
            let mut m = Moments {
                trials: e.trials as f64,
                w: 0.0,
                w_abs: 0.0,
                w_abs2: 0.0,
                w_x: 0.0,
            };
            for (&x, lw) in &e.endpoint_weights {
                let w = (lw.ln() - shift).exp();
                let ax = x.unsigned_abs() as f64;
                m.w += w;
                m.w_abs += w * ax;
                m.w_abs2 += w * ax * ax;
                m.w_x += w * x as f64;
            }
            m
        })
        .collect();

    let nf = n as f64;
    let stats = |t: f64, w: f64, a: f64, a2: f64, wx: f64| -> [f64; 4] {
        let mean_abs = a / w;
        let var = (a2 / w - mean_abs * mean_abs).max(0.0);
        [
            mean_abs / nf,
            -((w / t).ln() + shift) / nf,
            (var / nf).sqrt(),
            wx / w,
        ]
    };
    let tot = reps.iter().fold([0.0; 5], |acc, m| {
        [acc[0] + m.trials, acc[1] + m.w, acc[2] + m.w_abs, acc[3] + m.w_abs2, acc[4] + m.w_x]
    });
    let full = stats(tot[0], tot[1], tot[2], tot[3], tot[4]);
    let k = reps.len() as f64;
    let leave_out: Vec<[f64; 4]> = reps
        .iter()
        .map(|m| {
            stats(
                tot[0] - m.trials,
                tot[1] - m.w,
                tot[2] - m.w_abs,
                tot[3] - m.w_abs2,
                tot[4] - m.w_x,
            )
        })
        .collect();
    let mut se = [0.0; 4];
    for (j, s) in se.iter_mut().enumerate() {
        let vals: Vec<f64> = leave_out.iter().map(|v| v[j]).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            *s = f64::INFINITY;
            continue;
        }
        let mean = vals.iter().sum::<f64>() / k;
        *s = ((k - 1.0) / k * vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt();
    }
    let est = |j: usize| Estimate {
        value: full[j],
        stderr: se[j],
    };
    let mut sq = LogSum::new();
    for e in ensembles {
        sq.merge(&e.sum_sq);
    }
    let log_total = log_sum_exp(&logs);
    let ess = if sq.is_zero() {
        0.0
    } else {
        (2.0 * log_total - sq.ln()).exp()
    };
    let samples: u64 = ensembles.iter().map(|e| e.samples).sum();
    Ok(CltEstimate {
        n,
        theta_hat: est(0),
        r_hat: est(1),
        sigma_star_hat: est(2),
        mean_endpoint: est(3),
        log_z: Estimate {
            value: -nf * full[1],
            stderr: nf * se[1],
        },
        ess,
        samples,
        replicas: ensembles.len(),
        low_ess: ess < LOW_ESS_FRACTION * samples.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{enumerate_measure, EnumOptions};

    fn params(replicas: usize, seed: u64) -> McParams {
        McParams {
            replicas,
            seed,
            exec: Exec::default(),
        }
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = replica_rng(7, 0).gen();
        let b: u64 = replica_rng(7, 1).gen();
        let c: u64 = replica_rng(7, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn importance_at_beta_zero_has_unit_weights() {
        let d = StepDistribution::simple();
        let e = sample_importance(&d, 10, Model::DombJoyce { beta: 0.0 }, 500, 3, 0).unwrap();
        assert!((e.log_z()).abs() < 1e-12);
        assert!((e.effective_sample_size() - 500.0).abs() < 1e-6);
    }

    #[test]
    fn importance_matches_enumeration() {
        let d = StepDistribution::simple();
        let m = Model::DombJoyce { beta: 0.2 };
        let exact = enumerate_measure(&d, 12, m, &EnumOptions::default()).unwrap();
        let reps = importance_replicas(&d, 12, m, 4000, &params(16, 5)).unwrap();
        let c = estimate_clt(&reps).unwrap();
        let theta = exact.q_expect(|x| x.abs() as f64) / 12.0;
        assert!((c.log_z.value - exact.log_z).abs() < 3.0 * c.log_z.stderr);
        assert!((c.theta_hat.value - theta).abs() < 3.0 * c.theta_hat.stderr);
        assert!(c.mean_endpoint.value.abs() < 3.0 * c.mean_endpoint.stderr);
    }

    #[test]
    fn perm_simple_saw_is_exact() {
        let d = StepDistribution::simple();
        for n in [1, 5, 20] {
            let e = sample_perm(&d, n, Model::Saw, &PermParams { tours: 50, ..Default::default() }, 1, 0).unwrap();
            assert!((e.log_z() - (1.0 - n as f64) * 2f64.ln()).abs() < 1e-12);
            let theta = e.q_expect(|x| x.abs() as f64) / n as f64;
            assert!((theta - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perm_free_walk_without_population_control() {
        let d = StepDistribution::uniform_range(2).unwrap();
        let p = PermParams {
            tours: 100,
            population_control: false,
            ..Default::default()
        };
        let e = sample_perm(&d, 15, Model::DombJoyce { beta: 0.0 }, &p, 9, 2).unwrap();
        assert_eq!(e.log_z(), 0.0);
        assert_eq!(e.samples, 100);
    }

    #[test]
    fn perm_matches_enumeration_for_each_model() {
        let d = StepDistribution::uniform_range(2).unwrap();
        let models = [
            Model::Saw,
            Model::DombJoyce { beta: 0.5 },
            Model::Attraction { beta: 0.6, gamma: 0.2 },
            Model::Strip { width: 1 },
        ];
        for (i, m) in models.into_iter().enumerate() {
            let exact = enumerate_measure(&d, 8, m, &EnumOptions::default()).unwrap();
            let p = PermParams { tours: 3000, ..Default::default() };
            let reps = perm_replicas(&d, 8, m, &p, &params(16, 100 + i as u64)).unwrap();
            let c = estimate_clt(&reps).unwrap();
            let theta = exact.q_expect(|x| x.abs() as f64) / 8.0;
            assert!((c.log_z.value - exact.log_z).abs() < 3.0 * c.log_z.stderr, "{m}: {} vs {}", c.log_z.value, exact.log_z);
            assert!((c.theta_hat.value - theta).abs() < 3.0 * c.theta_hat.stderr, "{m}");
        }
    }

    #[test]
    fn perm_two_step_saw_uniform_two() {
        let d = StepDistribution::uniform_range(2).unwrap();
        let p = PermParams { tours: 4000, ..Default::default() };
        let reps = perm_replicas(&d, 2, Model::Saw, &p, &params(8, 4)).unwrap();
        let c = estimate_clt(&reps).unwrap();
        assert!((c.log_z.value.exp() - 0.75).abs() < 3.0 * c.log_z.stderr * 0.75 + 1e-12);
    }

    #[test]
    fn replicas_are_deterministic_across_strategies() {
        let d = StepDistribution::simple();
        let m = Model::DombJoyce { beta: 0.3 };
        let p = PermParams { tours: 200, ..Default::default() };
        let a = perm_replicas(&d, 30, m, &p, &McParams { exec: Exec::Sequential, ..params(4, 8) }).unwrap();
        let b = perm_replicas(&d, 30, m, &p, &params(4, 8)).unwrap();
        assert_eq!(a, b);
        assert_eq!(estimate_clt(&a).unwrap(), estimate_clt(&b).unwrap());
    }

    #[test]
    fn saw_rejected_by_importance_sampler() {
        let d = StepDistribution::simple();
        assert!(sample_importance(&d, 4, Model::Saw, 10, 1, 0).is_err());
    }

    #[test]
    fn single_replica_has_no_stderr() {
        let d = StepDistribution::simple();
        let e = sample_importance(&d, 4, Model::DombJoyce { beta: 0.1 }, 10, 1, 0).unwrap();
        assert!(matches!(
            estimate_clt(&[e]),
            Err(Error::InsufficientReplicas { required: 2, got: 1 })
        ));
    }
}
