//! Local times and interaction energies of a lattice path.
//!
//! All pair counts use the *ordered* convention: `H_n = #{(i, j) : i != j,
//! S_i = S_j}` counts every self-intersection twice, so `H_n = Σ ℓ(x)^2 - (n+1)`.
//! A single unordered coincidence therefore costs `e^{-2β}`.
//!
//! Energies are exact integers; couplings are applied only when a weight is
//! requested. [`PathState`] keeps the same quantities up to date in O(1) per
//! step for the enumerator and the samplers.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticePath {
    positions: Vec<i64>,
}

impl LatticePath {
    /// Positions `S_0..S_n`; `S_0` must be 0.
    pub fn new(positions: Vec<i64>) -> Result<Self> {
        match positions.first() {
            Some(0) => Ok(Self { positions }),
            Some(x) => Err(Error::param(format!("path starts at {x}, not 0"))),
            None => Err(Error::param("empty path")),
        }
    }

    pub fn from_steps(steps: &[i64]) -> Self {
        let mut positions = Vec::with_capacity(steps.len() + 1);
        positions.push(0);
        let mut x = 0;
        for &s in steps {
            x += s;
            positions.push(x);
        }
        Self { positions }
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    /// Number of steps.
    pub fn n(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn endpoint(&self) -> i64 {
        *self.positions.last().unwrap()
    }
}

/// Visit counts `ℓ_n(x)`; only visited sites are stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LocalTimeField {
    counts: BTreeMap<i64, u64>,
}

impl LocalTimeField {
    pub fn from_counts(counts: impl IntoIterator<Item = (i64, u64)>) -> Self {
        Self {
            counts: counts.into_iter().filter(|&(_, c)| c > 0).collect(),
        }
    }

    pub fn get(&self, x: i64) -> u64 {
        self.counts.get(&x).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts.iter().map(|(&x, &c)| (x, c))
    }

    /// `Σ_x ℓ(x) = n + 1`.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn sum_of_squares(&self) -> u64 {
        self.counts.values().map(|&c| c * c).sum()
    }
}

pub fn local_times(path: &LatticePath) -> LocalTimeField {
    let mut counts = BTreeMap::new();
    for &x in path.positions() {
        *counts.entry(x).or_insert(0) += 1;
    }
    LocalTimeField { counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EnergyState {
    /// Ordered self-intersection count `H_n`.
    pub h: u64,
    /// `H_n - 2(ℓ_n(0) - 1)`: intersections not involving the origin's first visit.
    pub h_prime: u64,
    /// `G_n = Σ_x (ℓ(x) - ℓ(x+1))^2`.
    pub g: u64,
    /// Ordered nearest-neighbour pair count `2 Σ_x ℓ(x) ℓ(x+1)`.
    pub neighbor_pairs: u64,
}

impl EnergyState {
    fn from_local_times(lt: &LocalTimeField) -> Self {
        let n_plus_1 = lt.total();
        let h = lt.sum_of_squares() - n_plus_1;
        let h_prime = h - 2 * (lt.get(0).max(1) - 1);
        let (lo, hi) = match (lt.counts.keys().next(), lt.counts.keys().next_back()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return Self::default(),
        };
        let mut g = 0u64;
        let mut np = 0u64;
        for x in lo - 1..=hi {
            let (a, b) = (lt.get(x), lt.get(x + 1));
            g += a.abs_diff(b).pow(2);
            np += 2 * a * b;
        }
        Self {
            h,
            h_prime,
            g,
            neighbor_pairs: np,
        }
    }
}

pub fn energy(path: &LatticePath) -> EnergyState {
    EnergyState::from_local_times(&local_times(path))
}

fn check_attraction(beta: f64, gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && beta.is_finite()) {
        return Err(Error::param(format!("need finite β and γ >= 0, got β={beta}, γ={gamma}")));
    }
    if gamma >= beta {
        return Err(Error::param(format!(
            "γ={gamma} >= β={beta} is the collapsed phase, not supported"
        )));
    }
    Ok(())
}

/// Canonical self-attraction energy `(β-γ) H + (γ/2) G`.
pub fn energy_attraction(path: &LatticePath, beta: f64, gamma: f64) -> Result<f64> {
    check_attraction(beta, gamma)?;
    Ok(attraction_canonical(&energy(path), beta, gamma))
}

pub fn attraction_canonical(e: &EnergyState, beta: f64, gamma: f64) -> f64 {
    (beta - gamma) * e.h as f64 + 0.5 * gamma * e.g as f64
}

/// Pair-count form `β H - (γ/2) · neighbor_pairs`; equals the canonical form
/// minus `γ (n+1)`.
pub fn attraction_literal(e: &EnergyState, beta: f64, gamma: f64) -> f64 {
    beta * e.h as f64 - 0.5 * gamma * e.neighbor_pairs as f64
}

pub fn is_saw(path: &LatticePath) -> bool {
    let mut seen: Vec<i64> = path.positions().to_vec();
    seen.sort_unstable();
    seen.windows(2).all(|w| w[0] != w[1])
}

/// `ln(1 - k/(2L+1))` for one more visit to a site already visited `k` times.
pub fn strip_log_factor(k: u64, width: u32) -> f64 {
    let m = 2 * width as u64 + 1;
    if k >= m {
        f64::NEG_INFINITY
    } else {
        (-(k as f64) / m as f64).ln_1p()
    }
}

/// Probability that i.i.d. uniform vertical coordinates on `{-L..L}` are
/// distinct at every repeated horizontal site.
pub fn strip_weight(lt: &LocalTimeField, width: u32) -> f64 {
    strip_log_weight(lt, width).exp()
}

pub fn strip_log_weight(lt: &LocalTimeField, width: u32) -> f64 {
    let mut s = 0.0;
    for (_, c) in lt.iter() {
        for k in 0..c {
            s += strip_log_factor(k, width);
        }
    }
    s
}

/// Occupation numbers around a site about to be visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepDelta {
    pub site: i64,
    /// `ℓ(site)` before the visit.
    pub here: u64,
    pub left: u64,
    pub right: u64,
}

impl StepDelta {
    pub fn dh(&self) -> u64 {
        2 * self.here
    }

    pub fn dh_prime(&self) -> u64 {
        2 * self.here - if self.site == 0 { 2 } else { 0 }
    }

    pub fn dg(&self) -> i64 {
        2 * (2 * self.here as i64 - self.left as i64 - self.right as i64) + 2
    }

    pub fn dneighbor(&self) -> u64 {
        2 * (self.left + self.right)
    }
}

/// Incrementally maintained path with local times and energies.
///
/// Local times live in a dense window that grows on demand; `retract` undoes
/// the last `extend` exactly.
#[derive(Debug, Clone)]
pub struct PathState {
    positions: Vec<i64>,
    counts: Vec<u64>,
    offset: i64,
    energy: EnergyState,
    strip: Option<u32>,
    strip_log: Vec<f64>,
}

impl Default for PathState {
    fn default() -> Self {
        Self::new()
    }
}

impl PathState {
    /// The zero-step path `[0]`.
    pub fn new() -> Self {
        Self::with_reach(16)
    }

    /// Pre-sizes the local-time window for positions in `-reach..=reach`.
    pub fn with_reach(reach: usize) -> Self {
        let reach = reach.max(1) as i64;
        let mut counts = vec![0; 2 * reach as usize + 3];
        let offset = reach + 1;
        counts[offset as usize] = 1;
        Self {
            positions: vec![0],
            counts,
            offset,
            energy: EnergyState {
                g: 2,
                ..EnergyState::default()
            },
            strip: None,
            strip_log: vec![0.0],
        }
    }

    /// Tracks the strip conditional weight for vertical width `L`.
    pub fn with_strip(mut self, width: u32) -> Self {
        self.strip = Some(width);
        self
    }

    pub fn from_path(path: &LatticePath, strip: Option<u32>) -> Self {
        let reach = path.positions().iter().map(|x| x.unsigned_abs()).max().unwrap_or(1);
        let mut s = Self::with_reach(reach as usize);
        s.strip = strip;
        for w in path.positions().windows(2) {
            s.extend(w[1] - w[0]);
        }
        s
    }

    pub fn n(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn endpoint(&self) -> i64 {
        *self.positions.last().unwrap()
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn energy(&self) -> EnergyState {
        self.energy
    }

    pub fn local_time(&self, x: i64) -> u64 {
        let i = x + self.offset;
        if i < 0 || i as usize >= self.counts.len() {
            0
        } else {
            self.counts[i as usize]
        }
    }

    pub fn local_times(&self) -> LocalTimeField {
        LocalTimeField::from_counts(
            self.counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as i64 - self.offset, c)),
        )
    }

    /// `ln` of the strip weight so far, or 0 when strip tracking is off.
    pub fn strip_log_weight(&self) -> f64 {
        *self.strip_log.last().unwrap()
    }

    pub fn strip_width(&self) -> Option<u32> {
        self.strip
    }

    /// Occupations relevant to a step, without changing the state.
    pub fn peek(&self, step: i64) -> StepDelta {
        let site = self.endpoint() + step;
        StepDelta {
            site,
            here: self.local_time(site),
            left: self.local_time(site - 1),
            right: self.local_time(site + 1),
        }
    }

    fn ensure(&mut self, site: i64) {
        let i = site + self.offset;
        if i >= 1 && i + 1 < self.counts.len() as i64 {
            return;
        }
        let need = (site.unsigned_abs() as usize).max(self.counts.len());
        let new_reach = 2 * need as i64;
        let new_offset = new_reach + 1;
        let mut counts = vec![0; 2 * new_reach as usize + 3];
        let shift = (new_offset - self.offset) as usize;
        counts[shift..shift + self.counts.len()].copy_from_slice(&self.counts);
        self.counts = counts;
        self.offset = new_offset;
    }

    /// Appends one step. Returns the occupation numbers seen by the new
    /// site. In strip mode a site visited `2L+1` times already drives the
    /// strip weight to zero (`strip_log_weight() == -inf`).
    pub fn extend(&mut self, step: i64) -> StepDelta {
        let d = self.peek(step);
        self.ensure(d.site);
        let e = &mut self.energy;
        e.h += d.dh();
        e.h_prime += d.dh_prime();
        e.g = (e.g as i64 + d.dg()) as u64;
        e.neighbor_pairs += d.dneighbor();
        self.counts[(d.site + self.offset) as usize] += 1;
        self.positions.push(d.site);
        let lw = self.strip_log_weight()
            + match self.strip {
                Some(w) => strip_log_factor(d.here, w),
                None => 0.0,
            };
        self.strip_log.push(lw);
        d
    }

    /// Removes the last step; a no-op on the zero-step path.
    pub fn retract(&mut self) {
        if self.positions.len() == 1 {
            return;
        }
        let site = self.positions.pop().unwrap();
        self.strip_log.pop();
        self.counts[(site + self.offset) as usize] -= 1;
        let d = StepDelta {
            site,
            here: self.local_time(site),
            left: self.local_time(site - 1),
            right: self.local_time(site + 1),
        };
        let e = &mut self.energy;
        e.h -= d.dh();
        e.h_prime -= d.dh_prime();
        e.g = (e.g as i64 - d.dg()) as u64;
        e.neighbor_pairs -= d.dneighbor();
    }
}
