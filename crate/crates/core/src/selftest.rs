//! Exact-identity checks shared by the `selftest` command and the test suite.
//!
//! Each check compares library output against an independent computation
//! (pair counts, brute force over vertical coordinates, closed forms) and
//! returns a [`Check`] instead of panicking, so callers decide how to report.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::enumerate::{enumerate_measure, expectation, split_bound_check, EnumOptions};
use crate::exec::Exec;
use crate::hamiltonian::{attraction_canonical, attraction_literal, energy, local_times, strip_weight, LatticePath};
use crate::model::Model;
use crate::montecarlo::replica_rng;
use crate::ratefn::{bn_series, compute_bn};
use crate::renewal::{compute_sequences, pi_bound_violations, verify_renewal, PieceMode, PieceModel};
use crate::stepdist::StepDistribution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Check {
    let t = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Check {
        name,
        passed,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    }
}

fn families() -> Vec<(&'static str, StepDistribution)> {
    vec![
        ("simple", StepDistribution::simple()),
        ("uniform_range(2)", StepDistribution::uniform_range(2).unwrap()),
        ("geometric_tail(2)", StepDistribution::geometric_tail(2).unwrap()),
    ]
}

fn random_path(dist: &StepDistribution, n: usize, rng: &mut impl Rng) -> LatticePath {
    let steps = dist.steps();
    let cdf: Vec<f64> = dist
        .probs()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let path: Vec<i64> = (0..n)
        .map(|_| {
            let u: f64 = rng.gen::<f64>() * cdf[cdf.len() - 1];
            steps[cdf.iter().position(|&c| u < c).unwrap_or(steps.len() - 1)]
        })
        .collect();
    LatticePath::from_steps(&path)
}

/// Ordered pairs of distinct times with `S_i = S_j` and with `|S_i − S_j| = 1`.
fn pair_counts(pos: &[i64], from: usize) -> (u64, u64) {
    let (mut same, mut adj) = (0, 0);
    for i in from..pos.len() {
        for j in from..pos.len() {
            if i != j {
                match (pos[i] - pos[j]).abs() {
                    0 => same += 1,
                    1 => adj += 1,
                    _ => {}
                }
            }
        }
    }
    (same, adj)
}

/// `H`, `H'` and the attraction energy against direct pair counts on random
/// paths of up to 200 steps.
pub fn energy_identities(paths_per_family: usize, seed: u64) -> Check {
    timed("energy identities", || {
        let grid = [(0.5, 0.0), (0.5, 0.2), (1.0, 0.7), (0.05, 0.01)];
        let mut worst = 0.0f64;
        for (fi, (name, dist)) in families().into_iter().enumerate() {
            let mut rng = replica_rng(seed, fi as u64);
            for _ in 0..paths_per_family {
                let n = rng.gen_range(1..=200);
                let path = random_path(&dist, n, &mut rng);
                let pos = path.positions();
                let e = energy(&path);
                let (same, adj) = pair_counts(pos, 0);
                if e.h != same {
                    return Err(format!("{name}: H = {} but pair count {same}", e.h));
                }
                let (same1, _) = pair_counts(pos, 1);
                let l0 = local_times(&path).get(0);
                if e.h_prime != same1 || e.h_prime != e.h - 2 * (l0 - 1) {
                    return Err(format!("{name}: H' = {} but pair count {same1}", e.h_prime));
                }
                if e.neighbor_pairs != adj {
                    return Err(format!("{name}: neighbour pairs {} vs {adj}", e.neighbor_pairs));
                }
                for (beta, gamma) in grid {
                    let direct = beta * same as f64 - 0.5 * gamma * adj as f64;
                    let lit = attraction_literal(&e, beta, gamma);
                    let can = attraction_canonical(&e, beta, gamma) - gamma * (n as f64 + 1.0);
                    worst = worst.max((lit - direct).abs()).max((can - direct).abs());
                }
            }
        }
        if worst > 1e-10 {
            return Err(format!("attraction identity off by {worst:e}"));
        }
        Ok(format!("{} paths per family, worst attraction residual {worst:e}", paths_per_family))
    })
}

/// Closed forms for small simple walks and `β = 0` convolutions.
pub fn enumeration_oracle(exec: Exec) -> Check {
    timed("enumeration oracle", || {
        let opts = EnumOptions { exec, ..EnumOptions::default() };
        let simple = StepDistribution::simple();
        for beta in [0.0, 0.05, 0.1, 0.3, 0.5, 1.0, 2.0, 5.0] {
            let z = enumerate_measure(&simple, 2, Model::DombJoyce { beta }, &opts).map_err(|e| e.to_string())?.z;
            let want = (1.0 + (-2.0 * beta).exp()) / 2.0;
            if (z - want).abs() > 1e-12 {
                return Err(format!("Z_2 at beta {beta}: {z} vs {want}"));
            }
        }
        for dist in [simple.clone(), StepDistribution::uniform_range(2).unwrap()] {
            for n in 1..=10 {
                let r = enumerate_measure(&dist, n, Model::DombJoyce { beta: 0.0 }, &opts).map_err(|e| e.to_string())?;
                let conv = dist.convolution_power(n).map_err(|e| e.to_string())?;
                for x in conv.min_site()..=conv.max_site() {
                    let got = r.endpoint_pmf.get(&x).copied().unwrap_or(0.0);
                    if (got - conv.get(x)).abs() > 1e-12 {
                        return Err(format!("beta = 0 pmf at n = {n}, x = {x}: {got} vs {}", conv.get(x)));
                    }
                }
            }
        }
        for n in 1..=20 {
            let z = enumerate_measure(&simple, n, Model::Saw, &opts).map_err(|e| e.to_string())?.z;
            let want = 2f64.powi(1 - n as i32);
            if (z - want).abs() > 1e-12 {
                return Err(format!("P(SAW) at n = {n}: {z} vs {want}"));
            }
        }
        Ok("Z_2 closed form, beta = 0 convolutions to n = 10, P(SAW) to n = 20".into())
    })
}

/// Probability that the vertical coordinates avoid each other, by listing
/// every vertical sequence.
fn strip_brute(pos: &[i64], width: u32) -> f64 {
    let m = 2 * width as usize + 1;
    let len = pos.len();
    let total = m.pow(len as u32);
    let mut good = 0u64;
    let mut u = vec![0usize; len];
    for code in 0..total {
        let mut c = code;
        for slot in u.iter_mut() {
            *slot = c % m;
            c /= m;
        }
        let ok = (0..len).all(|i| (i + 1..len).all(|j| pos[i] != pos[j] || u[i] != u[j]));
        if ok {
            good += 1;
        }
    }
    good as f64 / total as f64
}

/// `strip_weight` against brute force, and `strip_weight ≤ exp(−H/(4L+2))`.
pub fn strip_exactness(random_paths: usize, seed: u64) -> Check {
    timed("strip exactness", || {
        let mut compared = 0;
        for dist in [StepDistribution::simple(), StepDistribution::uniform_range(2).unwrap()] {
            let steps = dist.steps();
            for n in 1..=5usize {
                for code in 0..steps.len().pow(n as u32) {
                    let mut c = code;
                    let path: Vec<i64> = (0..n)
                        .map(|_| {
                            let s = steps[c % steps.len()];
                            c /= steps.len();
                            s
                        })
                        .collect();
                    let path = LatticePath::from_steps(&path);
                    for width in 1..=2 {
                        let w = strip_weight(&local_times(&path), width);
                        let b = strip_brute(path.positions(), width);
                        if (w - b).abs() > 1e-12 {
                            return Err(format!("{:?}, L = {width}: {w} vs {b}", path.positions()));
                        }
                        compared += 1;
                    }
                }
            }
        }
        let mut rng = replica_rng(seed, 0);
        for (fi, (name, dist)) in families().into_iter().enumerate() {
            for _ in 0..random_paths {
                let n = rng.gen_range(1..=200);
                let path = random_path(&dist, n, &mut rng);
                let h = energy(&path).h as f64;
                for width in [1u32, 2, 4, 8] {
                    let w = strip_weight(&local_times(&path), width);
                    let bound = (-h / (4.0 * width as f64 + 2.0)).exp();
                    if w > bound * (1.0 + 1e-12) {
                        return Err(format!("{name} (#{fi}): strip weight {w} above {bound}"));
                    }
                }
            }
        }
        Ok(format!("{compared} exact comparisons, {random_paths} random paths per family under the bound"))
    })
}

/// `Z_n^β(μ) ≤ (Z_T^β(μ))^{n/T}` on a small grid.
pub fn split_bound(exec: Exec) -> Check {
    timed("split bound", || {
        let opts = EnumOptions { exec, ..EnumOptions::default() };
        let mut cases = 0;
        for dist in [StepDistribution::simple(), StepDistribution::uniform_range(2).unwrap()] {
            for beta in [0.1, 0.3, 1.0] {
                for mu in [-0.5, 0.0, 0.5] {
                    for (n, t) in [(4, 2), (6, 2), (6, 3), (8, 4)] {
                        let (l, r) = split_bound_check(&dist, n, t, beta, mu, &opts).map_err(|e| e.to_string())?;
                        if l > r * (1.0 + 1e-12) {
                            return Err(format!("n = {n}, T = {t}, beta = {beta}, mu = {mu}: {l} > {r}"));
                        }
                        cases += 1;
                    }
                }
            }
        }
        Ok(format!("{cases} cases, no violations"))
    })
}

/// Renewal relation and the `π_m` bound on the small-piece grid, plus the
/// worked simple-walk values.
pub fn renewal_identity(exec: Exec) -> Check {
    timed("renewal identity", || {
        let opts = EnumOptions { exec, ..EnumOptions::default() };
        let s = compute_sequences(&PieceModel::new(StepDistribution::simple(), 2, PieceMode::Saw), 3, &opts)
            .map_err(|e| e.to_string())?;
        if s.c != [1.0, 0.5, 0.125, 0.03125] || s.pi != [0.5, 0.125, 0.03125] {
            return Err(format!("simple T = 2 values: c = {:?}, pi = {:?}", s.c, s.pi));
        }
        if (s.eps - 0.5f64.sqrt()).abs() > 1e-15 {
            return Err(format!("eps = {}", s.eps));
        }
        let mut worst = 0.0f64;
        let mut cases = 0;
        for dist in [StepDistribution::simple(), StepDistribution::uniform_range(2).unwrap()] {
            for t in [2, 3] {
                for mode in [PieceMode::Saw, PieceMode::DombJoyce { beta: 0.05 }, PieceMode::DombJoyce { beta: 0.3 }] {
                    for mu in [0.0, 0.2] {
                        let mut m = PieceModel::new(dist.clone(), t, mode);
                        m.tilt = mu;
                        let s = compute_sequences(&m, 5, &opts).map_err(|e| e.to_string())?;
                        let r = verify_renewal(&s);
                        worst = worst.max(r);
                        if r > 1e-12 {
                            return Err(format!("{mode:?}, T = {t}, mu = {mu}: residual {r:e}"));
                        }
                        let v = pi_bound_violations(&s);
                        if !v.is_empty() {
                            return Err(format!("{mode:?}, T = {t}, mu = {mu}: pi bound fails at m = {}", v[0].m));
                        }
                        cases += 1;
                    }
                }
            }
        }
        Ok(format!("{cases} configurations, worst residual {worst:e}"))
    })
}

/// `E(G_n)` from the return-probability series against enumeration, and
/// `|B_n|/n` stays bounded.
pub fn lemma_bn(exec: Exec) -> Check {
    timed("E(G_n) and B_n", || {
        let opts = EnumOptions { exec, ..EnumOptions::default() };
        let mut notes = Vec::new();
        for (name, dist) in [
            ("simple", StepDistribution::simple()),
            ("uniform_range(2)", StepDistribution::uniform_range(2).unwrap()),
        ] {
            for n in 1..=10 {
                let direct = expectation(
                    &dist,
                    n,
                    Model::DombJoyce { beta: 0.0 },
                    |s| {
                        let lt = s.local_times();
                        let (lo, hi) = lt.iter().fold((i64::MAX, i64::MIN), |(a, b), (x, _)| (a.min(x), b.max(x)));
                        (lo - 1..=hi).map(|x| (lt.get(x) as f64 - lt.get(x + 1) as f64).powi(2)).sum()
                    },
                    &opts,
                )
                .map_err(|e| e.to_string())?;
                let bn = compute_bn(&dist, n).map_err(|e| e.to_string())?;
                if (bn.expected_g - direct).abs() > 1e-10 {
                    return Err(format!("{name}, n = {n}: E(G_n) {} vs {direct}", bn.expected_g));
                }
            }
            let series = bn_series(&dist, 2000).map_err(|e| e.to_string())?;
            let ratio = |n: usize| series[n - 1].abs() / n as f64;
            let cap = 1.1 * ratio(100);
            let worst = (100..=2000).map(ratio).fold(0.0, f64::max);
            if worst > cap {
                return Err(format!("{name}: |B_n|/n reaches {worst} above {cap}"));
            }
            notes.push(format!("{name} max |B_n|/n {worst:.4} (cap {cap:.4})"));
        }
        Ok(notes.join("; "))
    })
}

/// The exact-identity suite in a fixed order.
pub fn run_all(exec: Exec) -> Vec<Check> {
    vec![
        energy_identities(1000, 1),
        enumeration_oracle(exec),
        strip_exactness(1000, 2),
        split_bound(exec),
        renewal_identity(exec),
        lemma_bn(exec),
    ]
}
