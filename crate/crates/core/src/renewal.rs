//! Piece decomposition and the renewal identity for `c_N`.
//!
//! A path of `N·T` steps is cut into `N` pieces of `T` steps, each shifted to
//! start at the origin. Every piece gets a weight `X` and every pair of
//! consecutive pieces an interaction `U ∈ [0, 1]`, with
//!
//! ```text
//! c_N = E[ ∏_{i<N} (1 − U_i) ∏_{i≤N} X_i ],   π_m = E[ ∏_{i<m} U_i ∏_{i≤m} X_i ].
//! ```
//!
//! Expanding the product over `1 − U_i` around the first factor gives the
//! exact relation `c_N = c_1 c_{N−1} + Σ_{m=2}^N (−1)^{m−1} π_m c_{N−m}`.
//!
//! Pieces are i.i.d., `X` sees one piece and `U` sees two neighbours, so both
//! expectations are sums over piece sequences that factor into a chain. We
//! enumerate the `|support|^T` single pieces once, tabulate `X` and `U`, and
//! push a vector along the chain. This is the full-path sum reorganised, not
//! an approximation; the tests compare it against brute force over paths.

use serde::{Deserialize, Serialize};

use crate::enumerate::EnumOptions;
use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::stepdist::StepDistribution;

/// How a piece is weighted and how neighbouring pieces interact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PieceMode {
    /// `X` requires the piece to be self-avoiding; `U = 1` when two
    /// neighbours share a site other than their connecting point.
    Saw,
    /// `X` carries `exp(−β H')` of the piece; `U = 1 − exp(−2β Σ_x ℓ_a(x) ℓ_b(x))`
    /// with local times over steps `1..T` of each piece.
    DombJoyce { beta: f64 },
}

/// Endpoint window for a single piece: `|S_T − center| ≤ half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PieceWindow {
    pub center: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PieceModel {
    pub dist: StepDistribution,
    pub piece_len: usize,
    /// Exponential tilt `e^{μ S_T}` per piece.
    pub tilt: f64,
    pub window: Option<PieceWindow>,
    /// Piece must stay inside `[−δ, S_T + δ]`. `None` or `∞` disables it.
    pub confinement: Option<f64>,
    pub mode: PieceMode,
    /// Forces `U ≡ 0`; the pieces then decouple and `c_N = c_1^N`.
    pub decoupled: bool,
}

impl PieceModel {
    pub fn new(dist: StepDistribution, piece_len: usize, mode: PieceMode) -> Self {
        Self {
            dist,
            piece_len,
            tilt: 0.0,
            window: None,
            confinement: None,
            mode,
            decoupled: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.piece_len == 0 {
            return Err(Error::param("piece length must be at least 1"));
        }
        if !self.tilt.is_finite() {
            return Err(Error::param("tilt must be finite"));
        }
        if let PieceMode::DombJoyce { beta } = self.mode {
            if !(beta.is_finite() && beta >= 0.0) {
                return Err(Error::param(format!("beta must be finite and >= 0, got {beta}")));
            }
        }
        if let Some(w) = self.window {
            if !(w.center.is_finite() && w.half_width >= 0.0) {
                return Err(Error::param("window needs a finite center and half-width >= 0"));
            }
        }
        if let Some(d) = self.confinement {
            if d.is_nan() || d < 0.0 {
                return Err(Error::param("confinement must be >= 0"));
            }
        }
        Ok(())
    }

    /// `X` for a piece given by its positions at times `0..=T`.
    pub fn piece_weight(&self, pos: &[i64]) -> f64 {
        let end = *pos.last().unwrap();
        if let Some(w) = self.window {
            if (end as f64 - w.center).abs() > w.half_width {
                return 0.0;
            }
        }
        if let Some(d) = self.confinement {
            if d.is_finite() {
                let (lo, hi) = (-d, end as f64 + d);
                if pos.iter().any(|&x| (x as f64) < lo || (x as f64) > hi) {
                    return 0.0;
                }
            }
        }
        let tilt = (self.tilt * end as f64).exp();
        match self.mode {
            PieceMode::Saw => {
                if has_repeat(pos) {
                    0.0
                } else {
                    tilt
                }
            }
            PieceMode::DombJoyce { beta } => {
                // H' = ordered pairs of distinct times in 1..=T at the same site
                let mut h = 0u64;
                for j in 1..pos.len() {
                    for k in 1..pos.len() {
                        if j != k && pos[j] == pos[k] {
                            h += 1;
                        }
                    }
                }
                tilt * (-beta * h as f64).exp()
            }
        }
    }

    /// `(U, 1 − U)` for piece `b` following piece `a`. Both are given in their
    /// own frame; `b` is moved to start at the endpoint of `a`.
    pub fn interaction(&self, a: &[i64], b: &[i64]) -> (f64, f64) {
        if self.decoupled {
            return (0.0, 1.0);
        }
        let shift = *a.last().unwrap();
        match self.mode {
            PieceMode::Saw => {
                let mut shared = 0usize;
                let mut seen: Vec<i64> = Vec::with_capacity(a.len());
                for &x in a {
                    if seen.contains(&x) {
                        continue;
                    }
                    seen.push(x);
                    if b.iter().any(|&y| y + shift == x) {
                        shared += 1;
                    }
                }
                if shared > 1 {
                    (1.0, 0.0)
                } else {
                    (0.0, 1.0)
                }
            }
            PieceMode::DombJoyce { beta } => {
                let mut overlap = 0u64;
                for &x in &a[1..] {
                    for &y in &b[1..] {
                        if x == y + shift {
                            overlap += 1;
                        }
                    }
                }
                let t = -2.0 * beta * overlap as f64;
                (-t.exp_m1(), t.exp())
            }
        }
    }
}

fn has_repeat(pos: &[i64]) -> bool {
    let mut sorted = pos.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).any(|w| w[0] == w[1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalSequences {
    pub piece_len: usize,
    /// `c_0 = 1, c_1, …, c_N`.
    pub c: Vec<f64>,
    /// `π_1, …, π_N` with `π_1 = c_1`.
    pub pi: Vec<f64>,
    /// `√π_2 / c_1`; infinite when `c_1 = 0`, NaN when `N < 2`.
    pub eps: f64,
}

impl RenewalSequences {
    pub fn n_max(&self) -> usize {
        self.c.len() - 1
    }

    pub fn c1(&self) -> f64 {
        self.c[1]
    }

    /// `π_m` for `m ≥ 1`.
    pub fn pi_m(&self, m: usize) -> f64 {
        self.pi[m - 1]
    }
}

/// All single pieces with their probabilities and weights.
struct PieceTable {
    positions: Vec<Vec<i64>>,
    /// `P(piece) · X(piece)`.
    mass: Vec<f64>,
}

fn piece_table(model: &PieceModel) -> PieceTable {
    let steps = model.dist.steps();
    let probs = model.dist.probs();
    let t = model.piece_len;
    let k = steps.len().pow(t as u32);
    let mut positions = Vec::with_capacity(k);
    let mut mass = Vec::with_capacity(k);
    let mut digits = vec![0usize; t];
    for _ in 0..k {
        let mut pos = Vec::with_capacity(t + 1);
        let mut x = 0i64;
        let mut p = 1.0;
        pos.push(0);
        for &d in &digits {
            x += steps[d];
            p *= probs[d];
            pos.push(x);
        }
        mass.push(p * model.piece_weight(&pos));
        positions.push(pos);
        // mixed-radix increment, last step fastest
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < steps.len() {
                break;
            }
            *d = 0;
        }
    }
    PieceTable { positions, mass }
}

/// Exact `c_0..c_N` and `π_1..π_N`.
///
/// Pieces with `X = 0` are dropped before the pair table is built, which
/// keeps SAW mode cheap. The budget applies to the number of single pieces
/// and to the number of piece pairs.
pub fn compute_sequences(model: &PieceModel, n: usize, opts: &EnumOptions) -> Result<RenewalSequences> {
    model.validate()?;
    if n == 0 {
        return Err(Error::param("need at least one piece"));
    }
    let pieces = (model.dist.len() as f64).powi(model.piece_len as i32);
    if pieces > opts.leaf_budget {
        return Err(Error::Budget {
            what: "single pieces",
            needed: pieces,
            budget: opts.leaf_budget,
        });
    }
    let table = piece_table(model);
    let live: Vec<usize> = (0..table.mass.len()).filter(|&i| table.mass[i] != 0.0).collect();
    let k = live.len();
    let pairs = (k as f64) * (k as f64);
    if pairs > opts.leaf_budget {
        return Err(Error::Budget {
            what: "piece pairs",
            needed: pairs,
            budget: opts.leaf_budget,
        });
    }

    // row q holds (U, 1-U) for every predecessor p, so one step of the chain
    // is a row-wise dot product and rows can be computed independently.
    let rows: Vec<Vec<(f64, f64)>> = opts.exec.map_range(k, |qi| {
        let b = &table.positions[live[qi]];
        live.iter().map(|&p| model.interaction(&table.positions[p], b)).collect()
    });
    let mass: Vec<f64> = live.iter().map(|&i| table.mass[i]).collect();

    let step = |v: &[f64], coupled: bool| -> Vec<f64> {
        opts.exec.map_range(k, |qi| {
            let row = &rows[qi];
            let mut acc = KahanSum::new();
            for (p, &vp) in v.iter().enumerate() {
                if vp != 0.0 {
                    let f = if coupled { row[p].0 } else { row[p].1 };
                    acc.add(vp * f);
                }
            }
            acc.value() * mass[qi]
        })
    };
    let total = |v: &[f64]| {
        let mut acc = KahanSum::new();
        v.iter().for_each(|&x| acc.add(x));
        acc.value()
    };

    let mut c = vec![1.0];
    let mut pi = Vec::with_capacity(n);
    let mut vc = mass.clone();
    let mut vp = mass.clone();
    c.push(total(&vc));
    pi.push(total(&vp));
    for _ in 2..=n {
        vc = step(&vc, false);
        vp = step(&vp, true);
        c.push(total(&vc));
        pi.push(total(&vp));
    }
    let eps = if n < 2 {
        f64::NAN
    } else if c[1] > 0.0 {
        pi[1].sqrt() / c[1]
    } else {
        f64::INFINITY
    };
    Ok(RenewalSequences {
        piece_len: model.piece_len,
        c,
        pi,
        eps,
    })
}

/// `c_N − [c_1 c_{N−1} + Σ_{m=2}^N (−1)^{m−1} π_m c_{N−m}]` for `N = 1..`.
pub fn renewal_residuals(seq: &RenewalSequences) -> Vec<f64> {
    (1..=seq.n_max())
        .map(|nn| {
            let mut acc = KahanSum::new();
            for m in 1..=nn {
                let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
                acc.add(sign * seq.pi_m(m) * seq.c[nn - m]);
            }
            seq.c[nn] - acc.value()
        })
        .collect()
}

/// Largest absolute residual of the renewal relation.
pub fn verify_renewal(seq: &RenewalSequences) -> f64 {
    renewal_residuals(seq).into_iter().fold(0.0, |a, r| a.max(r.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiBoundRow {
    pub m: usize,
    pub pi: f64,
    /// `ε^{m−1} c_1^m`.
    pub bound: f64,
    pub violated: bool,
}

/// Checks `π_m ≤ ε^{m−1} c_1^m` for `2 ≤ m ≤ N`. Equality at `m = 2` is exact
/// in principle, so a relative slack of `1e-12` absorbs rounding.
pub fn verify_pi_bound(seq: &RenewalSequences) -> Vec<PiBoundRow> {
    let c1 = seq.c1();
    (2..=seq.n_max())
        .map(|m| {
            let pi = seq.pi_m(m);
            let bound = seq.eps.powi(m as i32 - 1) * c1.powi(m as i32);
            PiBoundRow {
                m,
                pi,
                bound,
                violated: pi > bound * (1.0 + 1e-12) + 1e-300,
            }
        })
        .collect()
}

pub fn pi_bound_violations(seq: &RenewalSequences) -> Vec<PiBoundRow> {
    verify_pi_bound(seq).into_iter().filter(|r| r.violated).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub eta: f64,
    pub eps: f64,
    pub z: f64,
    /// Bound on the part of the series beyond `m = N` at `z`.
    pub tail_bound: f64,
    /// `A_0 = 1, A_1, …, A_N`.
    pub a: Vec<f64>,
    /// `|A_N − A_{N−1}|` for `N = 1..`.
    pub increments: Vec<f64>,
    /// Least-squares fit `|A_N − A_{N−1}| ≈ K q^N`; `None` with fewer than two
    /// nonzero increments.
    pub decay_rate: Option<f64>,
    pub decay_amplitude: Option<f64>,
    /// `q = √(η z)` used in the induction.
    pub q: f64,
    /// Whether `η z² / ((1 − q)(q − η z)) ≤ 1/2`.
    pub induction_condition: bool,
    pub z_lower_bound_holds: bool,
}

const BISECTION_TOL: f64 = 1e-12;

/// Solves `1 − z = Σ_{m=2}^N (−1)^{m−1} π_m (z/c_1)^m` and builds
/// `A_N = c_N (z/c_1)^N`.
///
/// Fails with [`Error::Hypothesis`] when `ε ≥ η` or no root exists below
/// `1/ε`, where the bound on the series stops being useful.
pub fn contraction_iteration(seq: &RenewalSequences, eta: f64) -> Result<ContractionReport> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param(format!("eta must lie in (0, 1), got {eta}")));
    }
    let n = seq.n_max();
    if n < 2 {
        return Err(Error::param("need N >= 2 to define eps"));
    }
    let c1 = seq.c1();
    let eps = seq.eps;
    if !(eps < eta) {
        return Err(Error::Hypothesis(format!("eps = {eps} is not below eta = {eta}")));
    }

    let rhs = |z: f64| {
        let r = z / c1;
        let mut acc = KahanSum::new();
        let mut pw = r;
        for m in 2..=n {
            pw *= r;
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            acc.add(sign * seq.pi_m(m) * pw);
        }
        acc.value()
    };
    let f = |z: f64| 1.0 - z - rhs(z);

    let z = if seq.pi[1..].iter().all(|&p| p == 0.0) {
        1.0
    } else {
        let limit = if eps > 0.0 { (1.0 / eps).min(4.0) } else { 4.0 };
        // scan for the first sign change, then bisect
        let grid = 400;
        let mut lo = 0.0;
        let mut hi = None;
        for i in 1..=grid {
            let z = limit * i as f64 / grid as f64;
            if f(z) <= 0.0 {
                hi = Some(z);
                break;
            }
            lo = z;
        }
        let Some(mut hi) = hi else {
            return Err(Error::Hypothesis(format!("no root of the z equation below {limit}")));
        };
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            let v = f(mid);
            if v == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if v > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let ez = eps * z;
    let tail_bound = if ez < 1.0 {
        eps.powi(n as i32) * z.powi(n as i32 + 1) / (1.0 - ez)
    } else {
        f64::INFINITY
    };
    let r = z / c1;
    let a: Vec<f64> = seq.c.iter().enumerate().map(|(k, &ck)| ck * r.powi(k as i32)).collect();
    let increments: Vec<f64> = a.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let (decay_rate, decay_amplitude) = fit_geometric(&increments);
    let q = (eta * z).sqrt();
    let induction_condition = q < 1.0 && q > eta * z && eta * z * z / ((1.0 - q) * (q - eta * z)) <= 0.5;
    Ok(ContractionReport {
        eta,
        eps,
        z,
        tail_bound,
        a,
        increments,
        decay_rate,
        decay_amplitude,
        q,
        induction_condition,
        z_lower_bound_holds: 1.0 / z >= 1.0 - 3.0 * eta,
    })
}

/// Least squares on `ln d_N = ln K + N ln q` over the positive entries, with
/// `N` starting at 1.
fn fit_geometric(d: &[f64]) -> (Option<f64>, Option<f64>) {
    let pts: Vec<(f64, f64)> = d
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(i, &v)| ((i + 1) as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return (None, None);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (Some(slope.exp()), Some((my - slope * mx).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation over all paths of `n·T` steps.
    fn brute_force(model: &PieceModel, n: usize) -> (f64, f64) {
        let steps = model.dist.steps();
        let probs = model.dist.probs();
        let t = model.piece_len;
        let len = n * t;
        let total = steps.len().pow(len as u32);
        let (mut c, mut pi) = (0.0, 0.0);
        for code in 0..total {
            let mut rest = code;
            let mut path = vec![0i64];
            let mut p = 1.0;
            for _ in 0..len {
                let d = rest % steps.len();
                rest /= steps.len();
                path.push(path.last().unwrap() + steps[d]);
                p *= probs[d];
            }
            let pieces: Vec<Vec<i64>> = (0..n)
                .map(|i| path[i * t..=(i + 1) * t].iter().map(|&x| x - path[i * t]).collect())
                .collect();
            let x: f64 = pieces.iter().map(|pc| model.piece_weight(pc)).product();
            let (mut keep, mut hit) = (1.0, 1.0);
            for i in 0..n - 1 {
                let (u, v) = model.interaction(&pieces[i], &pieces[i + 1]);
                keep *= v;
                hit *= u;
            }
            c += p * x * keep;
            pi += p * x * hit;
        }
        (c, pi)
    }

    fn simple_saw(t: usize) -> PieceModel {
        PieceModel::new(StepDistribution::simple(), t, PieceMode::Saw)
    }

    #[test]
    fn simple_saw_worked_values() {
        let s = compute_sequences(&simple_saw(2), 3, &EnumOptions::sequential()).unwrap();
        assert_eq!(s.c, vec![1.0, 0.5, 0.125, 0.03125]);
        assert_eq!(s.pi, vec![0.5, 0.125, 0.03125]);
        assert!((s.eps - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(verify_renewal(&s), 0.0);
        let rows = verify_pi_bound(&s);
        assert!(rows.iter().all(|r| !r.violated));
        assert!((rows[1].bound - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn simple_saw_fails_the_hypothesis() {
        let s = compute_sequences(&simple_saw(2), 4, &EnumOptions::sequential()).unwrap();
        assert!(matches!(contraction_iteration(&s, 0.1), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn matches_brute_force() {
        let mut cases = vec![simple_saw(2), simple_saw(3)];
        let mut dj = PieceModel::new(StepDistribution::uniform_range(2).unwrap(), 2, PieceMode::DombJoyce { beta: 0.3 });
        dj.tilt = 0.2;
        cases.push(dj.clone());
        dj.window = Some(PieceWindow { center: 2.0, half_width: 2.0 });
        dj.confinement = Some(1.0);
        cases.push(dj);
        for model in &cases {
            let s = compute_sequences(model, 3, &EnumOptions::sequential()).unwrap();
            for n in 1..=3 {
                let (c, pi) = brute_force(model, n);
                assert!((s.c[n] - c).abs() < 1e-13 * c.max(1.0), "{model:?} c_{n}");
                assert!((s.pi_m(n) - pi).abs() < 1e-13 * pi.max(1.0), "{model:?} pi_{n}");
            }
        }
    }

    #[test]
    fn renewal_grid() {
        let dists = [StepDistribution::simple(), StepDistribution::uniform_range(2).unwrap()];
        let modes = [
            PieceMode::Saw,
            PieceMode::DombJoyce { beta: 0.05 },
            PieceMode::DombJoyce { beta: 0.3 },
        ];
        for dist in &dists {
            for t in [2, 3] {
                for mode in modes {
                    for mu in [0.0, 0.2] {
                        let mut m = PieceModel::new(dist.clone(), t, mode);
                        m.tilt = mu;
                        let s = compute_sequences(&m, 5, &EnumOptions::default()).unwrap();
                        assert!(verify_renewal(&s) <= 1e-12, "{m:?}");
                        assert!(pi_bound_violations(&s).is_empty(), "{m:?}");
                        assert!(s.c.iter().chain(&s.pi).all(|&v| v >= 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn decoupled_pieces_factorise() {
        let mut m = PieceModel::new(StepDistribution::uniform_range(2).unwrap(), 3, PieceMode::DombJoyce { beta: 0.3 });
        m.decoupled = true;
        let s = compute_sequences(&m, 5, &EnumOptions::sequential()).unwrap();
        for n in 0..=5 {
            let want = s.c1().powi(n as i32);
            assert!((s.c[n] - want).abs() <= 1e-15 * want);
        }
        assert!(s.pi[1..].iter().all(|&p| p == 0.0));
        let rep = contraction_iteration(&s, 0.1).unwrap();
        assert_eq!(rep.z, 1.0);
        assert!(rep.a.iter().all(|&a| (a - 1.0).abs() < 1e-14));
    }

    #[test]
    fn weak_coupling_contracts() {
        let m = PieceModel::new(StepDistribution::simple(), 2, PieceMode::DombJoyce { beta: 0.05 });
        let s = compute_sequences(&m, 6, &EnumOptions::sequential()).unwrap();
        let rep = contraction_iteration(&s, 0.5).unwrap();
        assert!((rep.z - 1.0).abs() < 0.2, "z = {}", rep.z);
        assert!(rep.decay_rate.unwrap() < 1.0);
        let d = &rep.increments;
        assert!(d[d.len() - 1] < d[0]);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut m = PieceModel::new(StepDistribution::uniform_range(2).unwrap(), 3, PieceMode::DombJoyce { beta: 0.3 });
        m.tilt = 0.2;
        let a = compute_sequences(&m, 5, &EnumOptions::sequential()).unwrap();
        let b = compute_sequences(&m, 5, &EnumOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_is_enforced() {
        let opts = EnumOptions { leaf_budget: 10.0, ..EnumOptions::default() };
        let err = compute_sequences(&simple_saw(4), 2, &opts).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }
}
