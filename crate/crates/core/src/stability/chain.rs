//! Stationary distributions of queue-length chains on truncated boxes.
//!
//! One-dimensional chains are solved exactly by banded GTH elimination;
//! joint chains by symmetric Gauss-Seidel on a sparse kernel. Transitions
//! leaving the box are reflected onto its boundary, and the box grows per
//! dimension until the boundary carries less than the tolerance.

use alloc::vec;
use alloc::vec::Vec;

use super::StabilityError;
use crate::model::{QueueState, SystemParams};
use crate::schedulers::GreedyScratch;

/// A time-homogeneous chain on `Z_+^dims`.
pub trait MarkovChain {
    fn dims(&self) -> usize;

    /// Largest reachable value in dimension `d`, if the chain is finite there.
    fn natural_bound(&self, _d: usize) -> Option<u64> {
        None
    }

    /// Calls `emit(next_state, probability)` for each successor of `state`.
    fn transitions(&self, state: &[u64], emit: &mut dyn FnMut(&[u64], f64));
}

/// Chain given by a closure.
pub struct FnChain<F> {
    dims: usize,
    bounds: Option<Vec<u64>>,
    f: F,
}

impl<F: Fn(&[u64], &mut dyn FnMut(&[u64], f64))> FnChain<F> {
    /// Infinite chain in every dimension.
    pub fn new(dims: usize, f: F) -> Self {
        Self { dims, bounds: None, f }
    }

    /// Finite chain on `[0, bounds[d]]`.
    pub fn finite(bounds: Vec<u64>, f: F) -> Self {
        Self { dims: bounds.len(), bounds: Some(bounds), f }
    }
}

impl<F: Fn(&[u64], &mut dyn FnMut(&[u64], f64))> MarkovChain for FnChain<F> {
    fn dims(&self) -> usize {
        self.dims
    }
    fn natural_bound(&self, d: usize) -> Option<u64> {
        self.bounds.as_ref().map(|b| b[d])
    }
    fn transitions(&self, state: &[u64], emit: &mut dyn FnMut(&[u64], f64)) {
        (self.f)(state, emit)
    }
}

/// Truncation controls.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruncationConfig {
    /// Starting bound for one-dimensional chains.
    pub scalar_bound: u64,
    /// Starting per-dimension bound for joint chains.
    pub joint_bound: u64,
    /// Largest box the solver may build.
    pub max_states: usize,
    /// Accept once the boundary carries less than this mass.
    pub tol: f64,
    /// Sweep limit for joint chains.
    pub max_sweeps: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { scalar_bound: 200, joint_bound: 60, max_states: 1_000_000, tol: 1e-9, max_sweeps: 20_000 }
    }
}

/// Stationary law on a box `[0, bounds[0]] x ... `, row-major with the last
/// dimension fastest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StationaryDist {
    pub bounds: Vec<u64>,
    pub probs: Vec<f64>,
    /// Mass not represented in `probs`.
    pub residual_mass: f64,
}

impl StationaryDist {
    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn index(&self, x: &[u64]) -> Option<usize> {
        let mut idx = 0usize;
        for (d, &b) in self.bounds.iter().enumerate() {
            if x[d] > b {
                return None;
            }
            idx = idx * (b as usize + 1) + x[d] as usize;
        }
        Some(idx)
    }

    pub fn state(&self, mut idx: usize) -> Vec<u64> {
        let mut x = vec![0u64; self.dims()];
        for d in (0..self.dims()).rev() {
            let w = self.bounds[d] as usize + 1;
            x[d] = (idx % w) as u64;
            idx /= w;
        }
        x
    }

    pub fn prob(&self, x: &[u64]) -> f64 {
        self.index(x).map_or(0.0, |i| self.probs[i])
    }

    /// Mass of the states satisfying `pred`.
    pub fn mass_where(&self, mut pred: impl FnMut(&[u64]) -> bool) -> f64 {
        let mut x = vec![0u64; self.dims()];
        let mut total = 0.0;
        for &p in &self.probs {
            if pred(&x) {
                total += p;
            }
            advance(&mut x, &self.bounds);
        }
        total
    }

    pub fn marginal(&self, d: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.bounds[d] as usize + 1];
        let mut x = vec![0u64; self.dims()];
        for &p in &self.probs {
            m[x[d] as usize] += p;
            advance(&mut x, &self.bounds);
        }
        m
    }

    pub fn mean(&self, d: usize) -> f64 {
        self.marginal(d).iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Mass on states with some coordinate at its bound.
    pub fn boundary_mass(&self) -> f64 {
        let b = self.bounds.clone();
        self.mass_where(|x| x.iter().zip(&b).any(|(v, n)| v == n))
    }

    /// Total-variation distance for 1-D laws, residuals counted as disjoint.
    pub fn total_variation_1d(&self, other: &StationaryDist) -> f64 {
        let n = self.probs.len().max(other.probs.len());
        let get = |d: &StationaryDist, k: usize| d.probs.get(k).copied().unwrap_or(0.0);
        let diff: f64 = (0..n).map(|k| (get(self, k) - get(other, k)).abs()).sum();
        0.5 * (diff + (self.residual_mass - other.residual_mass).abs())
    }
}

fn advance(x: &mut [u64], bounds: &[u64]) {
    for d in (0..x.len()).rev() {
        if x[d] < bounds[d] {
            x[d] += 1;
            return;
        }
        x[d] = 0;
    }
}

/// Solves the chain on a growing box until the boundary is negligible.
pub fn stationary_truncated(
    chain: &dyn MarkovChain,
    config: &TruncationConfig,
) -> Result<StationaryDist, StabilityError> {
    let dims = chain.dims();
    if dims == 0 {
        return Err(StabilityError::Malformed("chain without dimensions"));
    }
    let start = if dims == 1 { config.scalar_bound } else { config.joint_bound };
    let mut bounds: Vec<u64> =
        (0..dims).map(|d| chain.natural_bound(d).unwrap_or(start.max(1))).collect();
    loop {
        let states = box_size(&bounds);
        if states > config.max_states {
            return Err(StabilityError::BudgetExceeded { states, budget: config.max_states });
        }
        let probs = if dims == 1 { gth_banded(chain, bounds[0])? } else { gauss_seidel(chain, &bounds, config)? };
        let mut dist = StationaryDist { bounds: bounds.clone(), probs, residual_mass: 0.0 };

        let mut grow = Vec::new();
        let mut residual = 0.0;
        for d in 0..dims {
            if chain.natural_bound(d).is_some() {
                continue;
            }
            let m = dist.marginal(d);
            let edge = *m.last().unwrap_or(&0.0);
            residual += edge;
            if edge >= config.tol {
                grow.push(d);
            }
        }
        if grow.is_empty() {
            if residual > 0.0 {
                for p in &mut dist.probs {
                    *p *= 1.0 - residual;
                }
                dist.residual_mass = residual;
            }
            return Ok(dist);
        }
        for d in grow {
            bounds[d] = bounds[d].saturating_mul(2);
        }
    }
}

fn box_size(bounds: &[u64]) -> usize {
    bounds.iter().fold(1usize, |acc, &b| acc.saturating_mul(b as usize + 1))
}

/// GTH elimination for a 1-D chain; fill stays inside the band.
fn gth_banded(chain: &dyn MarkovChain, n: u64) -> Result<Vec<f64>, StabilityError> {
    let size = n as usize + 1;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(size);
    let (mut lo, mut hi) = (0usize, 0usize);
    for x in 0..size {
        let mut row: Vec<(usize, f64)> = Vec::new();
        chain.transitions(&[x as u64], &mut |y, p| {
            if p > 0.0 {
                let y = (y[0].min(n)) as usize;
                match row.iter_mut().find(|e| e.0 == y) {
                    Some(e) => e.1 += p,
                    None => row.push((y, p)),
                }
            }
        });
        for &(y, _) in &row {
            if y < x {
                lo = lo.max(x - y);
            } else {
                hi = hi.max(y - x);
            }
        }
        rows.push(row);
    }
    let width = lo + hi + 1;
    let mut band = vec![0.0; size * width];
    let at = |x: usize, y: usize| x * width + (y + lo - x);
    for (x, row) in rows.iter().enumerate() {
        for &(y, p) in row {
            band[at(x, y)] += p;
        }
    }
    drop(rows);

    let mut s = vec![0.0; size];
    for k in (1..size).rev() {
        let jmin = k.saturating_sub(lo);
        let sk: f64 = (jmin..k).map(|j| band[at(k, j)]).sum();
        if !(sk > 0.0) {
            return Err(StabilityError::Reducible(k as u64));
        }
        s[k] = sk;
        let imin = k.saturating_sub(hi);
        for i in imin..k {
            let pik = band[at(i, k)];
            if pik == 0.0 {
                continue;
            }
            let f = pik / sk;
            for j in jmin..k {
                let pkj = band[at(k, j)];
                if pkj != 0.0 {
                    band[at(i, j)] += f * pkj;
                }
            }
        }
    }
    let mut pi = vec![0.0; size];
    pi[0] = 1.0;
    for k in 1..size {
        let imin = k.saturating_sub(hi);
        let num: f64 = (imin..k).map(|i| pi[i] * band[at(i, k)]).sum();
        pi[k] = num / s[k];
    }
    let total: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= total;
    }
    Ok(pi)
}

fn gauss_seidel(
    chain: &dyn MarkovChain,
    bounds: &[u64],
    config: &TruncationConfig,
) -> Result<Vec<f64>, StabilityError> {
    let dims = bounds.len();
    let n = box_size(bounds);
    let strides: Vec<usize> = {
        let mut s = vec![1usize; dims];
        for d in (0..dims.saturating_sub(1)).rev() {
            s[d] = s[d + 1] * (bounds[d + 1] as usize + 1);
        }
        s
    };

    // Incoming kernel in CSR form, diagonal kept apart.
    let mut counts = vec![0u32; n + 1];
    let mut triples: Vec<(u32, u32, f64)> = Vec::new();
    let mut diag = vec![0.0; n];
    let mut x = vec![0u64; dims];
    for src in 0..n {
        chain.transitions(&x, &mut |y, p| {
            if p <= 0.0 {
                return;
            }
            let mut dst = 0usize;
            for d in 0..dims {
                dst += y[d].min(bounds[d]) as usize * strides[d];
            }
            if dst == src {
                diag[src] += p;
            } else {
                triples.push((dst as u32, src as u32, p));
                counts[dst + 1] += 1;
            }
        });
        advance(&mut x, bounds);
    }
    for k in 0..n {
        counts[k + 1] += counts[k];
    }
    let mut fill = counts.clone();
    let mut src_idx = vec![0u32; triples.len()];
    let mut prob = vec![0.0; triples.len()];
    for &(dst, src, p) in &triples {
        let slot = fill[dst as usize] as usize;
        src_idx[slot] = src;
        prob[slot] = p;
        fill[dst as usize] += 1;
    }
    drop(triples);
    drop(fill);

    let mut pi = vec![1.0 / n as f64; n];
    let update = |pi: &mut [f64], y: usize| -> Result<(), StabilityError> {
        let (a, b) = (counts[y] as usize, counts[y + 1] as usize);
        let mut num = 0.0;
        for k in a..b {
            num += pi[src_idx[k] as usize] * prob[k];
        }
        let out = 1.0 - diag[y];
        if out <= 0.0 {
            return Err(StabilityError::Reducible(y as u64));
        }
        pi[y] = num / out;
        Ok(())
    };
    let residual = |pi: &[f64]| -> f64 {
        let mut r = 0.0;
        for y in 0..n {
            let (a, b) = (counts[y] as usize, counts[y + 1] as usize);
            let mut inflow = pi[y] * diag[y];
            for k in a..b {
                inflow += pi[src_idx[k] as usize] * prob[k];
            }
            r += (inflow - pi[y]).abs();
        }
        r
    };
    let target = (config.tol * 1e-3).max(1e-15);
    for sweep in 0..config.max_sweeps {
        for y in 0..n {
            update(&mut pi, y)?;
        }
        for y in (0..n).rev() {
            update(&mut pi, y)?;
        }
        let total: f64 = pi.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(StabilityError::NonConvergence { sweeps: sweep });
        }
        for p in &mut pi {
            *p /= total;
        }
        if sweep % 8 == 7 && residual(&pi) < target {
            return Ok(pi);
        }
    }
    if residual(&pi) < target * 1e3 {
        return Ok(pi);
    }
    Err(StabilityError::NonConvergence { sweeps: config.max_sweeps })
}

/// Joint chain of a set of queues served greedily by a static priority
/// order, all other queues held empty. Valid when the set is closed under
/// priority predecessors, so nobody outside it can take its servers.
pub struct PriorityChain<'a> {
    params: &'a SystemParams,
    edges: &'a [(usize, usize)],
    queues: Vec<usize>,
}

impl<'a> PriorityChain<'a> {
    pub fn new(params: &'a SystemParams, edges: &'a [(usize, usize)], queues: Vec<usize>) -> Self {
        Self { params, edges, queues }
    }

    pub fn queues(&self) -> &[usize] {
        &self.queues
    }
}

impl MarkovChain for PriorityChain<'_> {
    fn dims(&self) -> usize {
        self.queues.len()
    }

    fn transitions(&self, state: &[u64], emit: &mut dyn FnMut(&[u64], f64)) {
        let u = self.params.num_queues();
        let mut full = QueueState::zeros(u);
        for (d, &i) in self.queues.iter().enumerate() {
            full.q[i] = state[d];
        }
        let mut a = crate::model::Assignment::new();
        GreedyScratch::default().solve(self.edges, &full, &mut a);
        // Per-dimension (delta, prob) lists: Poisson-binomial service, then arrival.
        let moves: Vec<Vec<(i64, f64)>> = self
            .queues
            .iter()
            .map(|&i| {
                let mut served = vec![1.0];
                for &(qi, j) in a.pairs() {
                    if qi == i {
                        served = convolve_bernoulli(&served, self.params.mu(i, j));
                    }
                }
                let lam = self.params.lambda()[i];
                let mut m: Vec<(i64, f64)> = Vec::with_capacity(2 * served.len());
                for (s, &ps) in served.iter().enumerate() {
                    if ps > 0.0 {
                        if lam < 1.0 {
                            m.push((-(s as i64), ps * (1.0 - lam)));
                        }
                        if lam > 0.0 {
                            m.push((1 - s as i64, ps * lam));
                        }
                    }
                }
                m
            })
            .collect();
        let mut next = state.to_vec();
        product(&moves, 0, state, &mut next, 1.0, emit);
    }
}

fn convolve_bernoulli(pmf: &[f64], p: f64) -> Vec<f64> {
    let mut out = vec![0.0; pmf.len() + 1];
    for (k, &v) in pmf.iter().enumerate() {
        out[k] += v * (1.0 - p);
        out[k + 1] += v * p;
    }
    out
}

fn product(
    moves: &[Vec<(i64, f64)>],
    d: usize,
    base: &[u64],
    next: &mut Vec<u64>,
    p: f64,
    emit: &mut dyn FnMut(&[u64], f64),
) {
    if d == moves.len() {
        emit(next, p);
        return;
    }
    for &(delta, q) in &moves[d] {
        if q == 0.0 {
            continue;
        }
        next[d] = (base[d] as i64 + delta) as u64;
        product(moves, d + 1, base, next, p * q, emit);
    }
}
