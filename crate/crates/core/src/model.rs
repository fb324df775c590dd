//! Problem instances: arrival rates, service matrix, holding costs.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::lp::{self, LpError};

/// Largest queue or server count accepted by the capacity LP.
pub const MAX_DIM: usize = 16;

/// Margins at or below this are treated as the boundary of the region.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("instance needs at least one queue and one server")]
    Empty,
    #[error("mu has {rows} rows but lambda has {queues} entries")]
    RowMismatch { rows: usize, queues: usize },
    #[error("mu row {row} has {len} entries, expected {servers}")]
    RaggedMu { row: usize, len: usize, servers: usize },
    #[error("cost has {len} entries, expected {queues}")]
    CostLength { len: usize, queues: usize },
    #[error("lambda[{0}] = {1} is outside [0, 1)")]
    Lambda(usize, f64),
    #[error("mu[{0}][{1}] = {2} is outside [0, 1]")]
    Mu(usize, usize, f64),
    #[error("cost[{0}] = {1} is not a positive finite number")]
    Cost(usize, f64),
    #[error("capacity LP too large: {queues} queues x {servers} servers (limit {MAX_DIM})")]
    DimensionOverflow { queues: usize, servers: usize },
    #[error("capacity LP failed: {0}")]
    Lp(#[from] LpError),
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SystemParams {
    lambda: Vec<f64>,
    mu: Vec<Vec<f64>>,
    cost: Vec<f64>,
}

impl SystemParams {
    /// `mu` is indexed as `mu[queue][server]`.
    pub fn new(lambda: Vec<f64>, mu: Vec<Vec<f64>>, cost: Vec<f64>) -> Result<Self, ModelError> {
        let u = lambda.len();
        if u == 0 || mu.first().is_none_or(|r| r.is_empty()) {
            return Err(ModelError::Empty);
        }
        if mu.len() != u {
            return Err(ModelError::RowMismatch { rows: mu.len(), queues: u });
        }
        let k = mu[0].len();
        for (i, row) in mu.iter().enumerate() {
            if row.len() != k {
                return Err(ModelError::RaggedMu { row: i, len: row.len(), servers: k });
            }
            for (j, &m) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&m) {
                    return Err(ModelError::Mu(i, j, m));
                }
            }
        }
        if cost.len() != u {
            return Err(ModelError::CostLength { len: cost.len(), queues: u });
        }
        for (i, &l) in lambda.iter().enumerate() {
            if !(0.0..1.0).contains(&l) {
                return Err(ModelError::Lambda(i, l));
            }
        }
        for (i, &c) in cost.iter().enumerate() {
            if !(c.is_finite() && c > 0.0) {
                return Err(ModelError::Cost(i, c));
            }
        }
        Ok(Self { lambda, mu, cost })
    }

    /// Unit costs.
    pub fn uniform_cost(lambda: Vec<f64>, mu: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let c = vec![1.0; lambda.len()];
        Self::new(lambda, mu, c)
    }

    pub fn num_queues(&self) -> usize {
        self.lambda.len()
    }

    pub fn num_servers(&self) -> usize {
        self.mu[0].len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu(&self, i: usize, j: usize) -> f64 {
        self.mu[i][j]
    }

    pub fn mu_rows(&self) -> &[Vec<f64>] {
        &self.mu
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    /// `c_i mu_ij`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.cost[i] * self.mu[i][j]
    }

    /// The cmu weight matrix, row per queue.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        (0..self.num_queues())
            .map(|i| (0..self.num_servers()).map(|j| self.weight(i, j)).collect())
            .collect()
    }

    pub fn with_lambda(&self, lambda: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(lambda, self.mu.clone(), self.cost.clone())
    }

    pub fn with_cost(&self, cost: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(self.lambda.clone(), self.mu.clone(), cost)
    }

    pub fn total_cost(&self, q: &[u64]) -> f64 {
        self.cost.iter().zip(q).map(|(c, &x)| c * x as f64).sum()
    }
}

/// Queue lengths at the start of a slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QueueState {
    pub q: Vec<u64>,
}

impl QueueState {
    pub fn zeros(u: usize) -> Self {
        Self { q: vec![0; u] }
    }

    pub fn from_slice(q: &[u64]) -> Self {
        Self { q: q.to_vec() }
    }

    pub fn is_empty(&self) -> bool {
        self.q.iter().all(|&x| x == 0)
    }

    pub fn total(&self) -> u64 {
        self.q.iter().sum()
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &QueueState) -> bool {
        self.q.iter().zip(&other.q).all(|(a, b)| a <= b)
    }
}

/// Server-to-queue pairs chosen for one slot, kept sorted by (queue, server).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Assignment {
    pairs: Vec<(usize, usize)>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        Self { pairs }
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Adds a pair; call [`Assignment::finish`] after the last push.
    pub fn push(&mut self, i: usize, j: usize) {
        self.pairs.push((i, j));
    }

    pub fn finish(&mut self) {
        self.pairs.sort_unstable();
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.binary_search(&(i, j)).is_ok()
    }

    pub fn count_for(&self, i: usize) -> usize {
        self.pairs.iter().filter(|p| p.0 == i).count()
    }

    pub fn total_weight(&self, weights: &[Vec<f64>]) -> f64 {
        self.pairs.iter().map(|&(i, j)| weights[i][j]).sum()
    }

    /// Checks index ranges, server uniqueness and per-queue job counts.
    pub fn check(&self, state: &QueueState, servers: usize) -> Result<(), String> {
        let mut used = vec![false; servers];
        for &(i, j) in &self.pairs {
            if i >= state.q.len() || j >= servers {
                return Err(format!("pair ({}, {}) out of range", i + 1, j + 1));
            }
            if used[j] {
                return Err(format!("server {} assigned twice", j + 1));
            }
            used[j] = true;
        }
        for (i, &qi) in state.q.iter().enumerate() {
            let n = self.count_for(i);
            if n as u64 > qi {
                return Err(format!("queue {} has {} jobs but {} servers", i + 1, qi, n));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    /// `f64::INFINITY` when there is nothing to compare.
    pub delta_gap: f64,
    pub is_cmu_well_defined: bool,
    pub warnings: Vec<String>,
}

/// Computes the cmu gap and flags unservable queues.
pub fn validate(params: &SystemParams) -> ValidationReport {
    let u = params.num_queues();
    let k = params.num_servers();
    let mut delta = f64::INFINITY;
    for i in 0..u {
        for j in 0..k {
            if params.mu(i, j) == 0.0 {
                continue;
            }
            let w = params.weight(i, j);
            for i2 in (0..u).filter(|&x| x != i) {
                delta = delta.min((w - params.weight(i2, j)).abs());
            }
            for j2 in (0..k).filter(|&x| x != j) {
                delta = delta.min((w - params.weight(i, j2)).abs());
            }
        }
    }
    let mut warnings = Vec::new();
    for i in 0..u {
        if (0..k).all(|j| params.mu(i, j) == 0.0) {
            warnings.push(format!("queue {} has no server with positive rate", i + 1));
        }
    }
    if delta == 0.0 {
        warnings.push(String::from("cmu weights tie (delta = 0); edit the costs to break the tie"));
    }
    ValidationReport { delta_gap: delta, is_cmu_well_defined: delta > 0.0, warnings }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CapacityResult {
    pub inside: bool,
    /// Optimal `t` of `max t : sum_j mu_ij M_ji - lambda_i >= t`.
    pub margin: f64,
    /// Right-stochastic, `witness[j][i]` is the share of server `j` given to queue `i`.
    pub witness: Vec<Vec<f64>>,
    pub boundary: bool,
    pub warnings: Vec<String>,
}

/// Capacity-region membership via the static-split LP.
pub fn capacity_contains(params: &SystemParams) -> Result<CapacityResult, ModelError> {
    let u = params.num_queues();
    let k = params.num_servers();
    if u > MAX_DIM || k > MAX_DIM {
        return Err(ModelError::DimensionOverflow { queues: u, servers: k });
    }
    // Variables: M_ji at j*u + i, then s = t + 1 >= 0.
    let nv = k * u + 1;
    let s = nv - 1;
    let mut a = Vec::with_capacity(u + k);
    let mut b = Vec::with_capacity(u + k);
    for i in 0..u {
        let mut row = vec![0.0; nv];
        for j in 0..k {
            row[j * u + i] = -params.mu(i, j);
        }
        row[s] = 1.0;
        a.push(row);
        b.push(1.0 - params.lambda()[i]);
    }
    for j in 0..k {
        let mut row = vec![0.0; nv];
        for i in 0..u {
            row[j * u + i] = 1.0;
        }
        a.push(row);
        b.push(1.0);
    }
    let mut c = vec![0.0; nv];
    c[s] = 1.0;
    let sol = lp::maximize(&a, &b, &c)?;

    let mut witness: Vec<Vec<f64>> =
        (0..k).map(|j| (0..u).map(|i| sol.x[j * u + i].max(0.0)).collect()).collect();
    for (j, row) in witness.iter_mut().enumerate() {
        let total: f64 = row.iter().sum();
        if total < 1.0 {
            let best = (0..u)
                .max_by(|&x, &y| params.mu(x, j).total_cmp(&params.mu(y, j)).then(y.cmp(&x)))
                .unwrap_or(0);
            row[best] += 1.0 - total;
        } else if total > 1.0 {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
    }
    let margin = witness_margin(params, &witness);
    let boundary = margin.abs() <= BOUNDARY_TOL;
    let mut warnings = Vec::new();
    if boundary {
        warnings.push(String::from("arrival vector lies on the capacity boundary"));
    }
    Ok(CapacityResult { inside: margin > BOUNDARY_TOL, margin, witness, boundary, warnings })
}

/// `min_i sum_j mu_ij M_ji - lambda_i` for a split `m[j][i]`.
pub fn witness_margin(params: &SystemParams, m: &[Vec<f64>]) -> f64 {
    (0..params.num_queues())
        .map(|i| {
            (0..params.num_servers()).map(|j| params.mu(i, j) * m[j][i]).sum::<f64>()
                - params.lambda()[i]
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lambda: &[f64], mu: &[&[f64]], cost: &[f64]) -> SystemParams {
        SystemParams::new(lambda.to_vec(), mu.iter().map(|r| r.to_vec()).collect(), cost.to_vec())
            .unwrap()
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            SystemParams::new(vec![1.0], vec![vec![0.5]], vec![1.0]),
            Err(ModelError::Lambda(0, _))
        ));
        assert!(matches!(
            SystemParams::new(vec![0.5], vec![vec![1.5]], vec![1.0]),
            Err(ModelError::Mu(0, 0, _))
        ));
        assert!(matches!(
            SystemParams::new(vec![0.5], vec![vec![0.5]], vec![0.0]),
            Err(ModelError::Cost(0, _))
        ));
        assert!(matches!(
            SystemParams::new(vec![0.5, 0.1], vec![vec![0.5]], vec![1.0, 1.0]),
            Err(ModelError::RowMismatch { .. })
        ));
    }

    #[test]
    fn delta_sentinel_and_tie() {
        let r = validate(&p(&[0.1], &[&[0.5]], &[1.0]));
        assert!(r.delta_gap.is_infinite() && r.is_cmu_well_defined);
        let r = validate(&p(&[0.1, 0.1], &[&[0.5], &[0.5]], &[1.0, 1.0]));
        assert_eq!(r.delta_gap, 0.0);
        assert!(!r.is_cmu_well_defined);
    }

    #[test]
    fn unservable_queue_warns() {
        let r = validate(&p(&[0.1, 0.1], &[&[0.5], &[0.0]], &[1.0, 1.0]));
        assert_eq!(r.warnings.len(), 1);
        assert!(r.is_cmu_well_defined);
    }

    #[test]
    fn capacity_examples() {
        let r = capacity_contains(&p(&[0.4, 0.3], &[&[0.7, 0.1], &[0.1, 0.6]], &[1.0, 1.0])).unwrap();
        assert!(r.inside);
        let r = capacity_contains(&p(&[0.9], &[&[0.5]], &[1.0])).unwrap();
        assert!(!r.inside);
        assert!((r.margin + 0.4).abs() < 1e-12);
        let r = capacity_contains(&p(&[0.3, 0.3], &[&[0.5], &[0.5]], &[1.0, 1.0])).unwrap();
        assert!(!r.inside);
        assert!((r.margin + 0.05).abs() < 1e-12);
    }

    #[test]
    fn boundary_is_not_inside() {
        let r = capacity_contains(&p(&[0.5], &[&[0.5]], &[1.0])).unwrap();
        assert!(!r.inside && r.boundary && !r.warnings.is_empty());
    }

    #[test]
    fn assignment_check() {
        let s = QueueState::from_slice(&[1, 0]);
        assert!(Assignment::from_pairs(vec![(0, 0)]).check(&s, 2).is_ok());
        assert!(Assignment::from_pairs(vec![(0, 0), (0, 1)]).check(&s, 2).is_err());
        assert!(Assignment::from_pairs(vec![(1, 0)]).check(&s, 2).is_err());
        let s = QueueState::from_slice(&[2, 2]);
        assert!(Assignment::from_pairs(vec![(0, 0), (1, 0)]).check(&s, 2).is_err());
    }
}
