//! Analytic stability classification.

mod chain;
mod closed_form;
mod hierarchy;
mod two_by_two;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use chain::{
    stationary_truncated, FnChain, MarkovChain, PriorityChain, StationaryDist, TruncationConfig,
};
pub use closed_form::{stationary_1x2_closed_form, OneByTwo};
pub use hierarchy::{
    decompose, hierarchical_verdict, is_hierarchical, m_network_counterexample, m_network_orders,
    m_network_params, HierarchyCheck, HierarchyDecomposition, MNetworkReport,
};
pub use two_by_two::{check_structure, classify_2x2, two_by_two_threshold};

use crate::lp::{self, LpError};
use crate::model::{Assignment, ModelError, QueueState, SystemParams};
use crate::schedulers::{GreedyScratch, MaxWeightSolver, PriorityOrder};

/// Margins within this distance of zero are reported as `Boundary`.
pub const VERDICT_TOL: f64 = 1e-9;

/// Largest state set `feasibility_alpha` will enumerate.
pub const MAX_GAME_STATES: usize = 200_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StabilityError {
    #[error("arrival rate {lambda} is not below the service capacity {capacity}")]
    UnstableChain { lambda: f64, capacity: f64 },
    #[error("{name} = {value} is outside [0, 1]")]
    Parameter { name: &'static str, value: f64 },
    #[error("degenerate chain: {0}")]
    Degenerate(&'static str),
    #[error("structure precondition violated: {0}")]
    Structure(String),
    #[error("truncated box of {states} states exceeds the budget of {budget}")]
    BudgetExceeded { states: usize, budget: usize },
    #[error("stationary solve did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },
    #[error("chain is reducible at state {0}")]
    Reducible(u64),
    #[error("malformed chain: {0}")]
    Malformed(&'static str),
    #[error("priority rule is not hierarchical: queues {0} and {1} are not ordered")]
    NotHierarchical(usize, usize),
    #[error("arrival vector is outside the capacity region (margin {0})")]
    OutsideCapacity(f64),
    #[error("too many states to enumerate: {0}")]
    TooManyStates(usize),
    #[error("epsilon = {0} does not give a valid M network (need 0 < eps < 1/3)")]
    Epsilon(f64),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Status {
    GeometricallyErgodic,
    Unstable,
    Boundary,
    Inconclusive,
}

/// `pi(0)` and `pi({0,1})` of one chain used in a verdict. For joint chains
/// these are the masses of "all queues empty" and "all queues at most one".
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PiSummary {
    pub queues: Vec<usize>,
    pub pi_zero: f64,
    pub pi_le_one: f64,
    /// Truncation box; empty for closed forms.
    pub bounds: Vec<u64>,
    pub residual_mass: f64,
}

/// Stationary mass of the lower-level states in which `server` is free for
/// `queue`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Availability {
    pub queue: usize,
    pub server: usize,
    /// Lower-level queues whose state decides availability.
    pub lower_queues: Vec<usize>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelReport {
    pub queues: Vec<usize>,
    /// `sum_j pi(A_ij) mu_ij - lambda_i` for each queue of the level.
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityVerdict {
    pub status: Status,
    pub per_level_margins: Vec<f64>,
    pub alpha_witness: Option<Vec<f64>>,
    pub levels: Vec<LevelReport>,
    pub availability: Vec<Availability>,
    pub pi_summaries: Vec<PiSummary>,
    pub diagnostics: Vec<String>,
}

impl StabilityVerdict {
    pub(crate) fn empty() -> Self {
        Self {
            status: Status::Inconclusive,
            per_level_margins: Vec::new(),
            alpha_witness: None,
            levels: Vec::new(),
            availability: Vec::new(),
            pi_summaries: Vec::new(),
            diagnostics: Vec::new(),
        }
    }
}

/// Deterministic allocation rule used for analysis.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceRule {
    Greedy(PriorityOrder),
    MaxWeight(Vec<Vec<f64>>),
}

impl ServiceRule {
    pub fn assignment(&self, state: &QueueState) -> Assignment {
        let mut out = Assignment::new();
        match self {
            ServiceRule::Greedy(o) => GreedyScratch::default().solve(o.edges(), state, &mut out),
            ServiceRule::MaxWeight(w) => MaxWeightSolver::default().solve(w, state, &mut out),
        }
        out
    }
}

/// Total service rate the rule gives each queue at `q`.
pub fn r_vector(params: &SystemParams, rule: &ServiceRule, q: &QueueState) -> Vec<f64> {
    let mut r = vec![0.0; params.num_queues()];
    for &(i, j) in rule.assignment(q).pairs() {
        r[i] += params.mu(i, j);
    }
    r
}

/// All `q` with `|q|_1 = total` over `parts` coordinates.
pub fn compositions(total: u64, parts: usize) -> Vec<QueueState> {
    let mut out = Vec::new();
    let mut cur = vec![0u64; parts];
    fn rec(d: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<QueueState>) {
        if d + 1 == cur.len() {
            cur[d] = left;
            out.push(QueueState { q: cur.clone() });
            return;
        }
        for v in (0..=left).rev() {
            cur[d] = v;
            rec(d + 1, left - v, cur, out);
        }
    }
    if parts > 0 {
        rec(0, total, &mut cur, &mut out);
    }
    out
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut r: u64 = 1;
    for i in 0..k {
        r = r.checked_mul(n - i)? / (i + 1);
    }
    Some(r)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeasibilityResult {
    /// Present only when the game value is positive.
    pub alpha: Option<Vec<f64>>,
    /// `max_alpha min_q (R(q) - lambda) . alpha`.
    pub game_value: f64,
    /// Maximizing alpha, whatever the sign of the value.
    pub optimal_alpha: Vec<f64>,
    pub num_states: usize,
}

/// Solves the drift game over all states with exactly `K` jobs.
pub fn feasibility_alpha(params: &SystemParams, rule: &ServiceRule) -> Result<FeasibilityResult, StabilityError> {
    let u = params.num_queues();
    let k = params.num_servers() as u64;
    let count = binomial(k + u as u64 - 1, u as u64 - 1).unwrap_or(u64::MAX);
    if count > MAX_GAME_STATES as u64 {
        return Err(StabilityError::TooManyStates(count as usize));
    }
    let states = compositions(k, u);
    let payoff: Vec<Vec<f64>> = states
        .iter()
        .map(|q| {
            r_vector(params, rule, q).iter().zip(params.lambda()).map(|(r, l)| r - l).collect()
        })
        .collect();
    let g = lp::solve_zero_sum(&payoff)?;
    let alpha = (g.value > 0.0).then(|| g.column_strategy.clone());
    Ok(FeasibilityResult {
        alpha,
        game_value: g.value,
        optimal_alpha: g.column_strategy,
        num_states: states.len(),
    })
}

/// `min_q (R(q) - lambda) . alpha` for a given alpha.
pub fn drift_for_alpha(params: &SystemParams, rule: &ServiceRule, alpha: &[f64]) -> f64 {
    compositions(params.num_servers() as u64, params.num_queues())
        .iter()
        .map(|q| {
            r_vector(params, rule, q)
                .iter()
                .zip(params.lambda())
                .zip(alpha)
                .map(|((r, l), a)| (r - l) * a)
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedulers::cmu_order;

    fn structured_2x2() -> SystemParams {
        SystemParams::new(vec![0.3, 0.2], vec![vec![0.7, 0.6], vec![0.1, 0.4]], vec![2.0, 1.0]).unwrap()
    }

    #[test]
    fn r_vector_examples() {
        let p = structured_2x2();
        let rule = ServiceRule::Greedy(cmu_order(&p).unwrap());
        assert_eq!(r_vector(&p, &rule, &QueueState::zeros(2)), vec![0.0, 0.0]);
        let r = r_vector(&p, &rule, &QueueState::from_slice(&[2, 0]));
        assert!((r[0] - 1.3).abs() < 1e-15 && r[1] == 0.0);
        assert_eq!(r_vector(&p, &rule, &QueueState::from_slice(&[1, 1])), vec![0.7, 0.4]);
    }

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(2, 2).len(), 3);
        assert_eq!(compositions(4, 3).len(), 15);
        assert!(compositions(3, 3).iter().all(|q| q.total() == 3));
    }

    #[test]
    fn far_outside_capacity_has_negative_value() {
        let p = SystemParams::uniform_cost(vec![0.9, 0.9], vec![vec![0.3, 0.2], vec![0.1, 0.4]]).unwrap();
        let rule = ServiceRule::Greedy(cmu_order(&p).unwrap());
        let f = feasibility_alpha(&p, &rule).unwrap();
        assert!(f.game_value < 0.0 && f.alpha.is_none());
    }

    #[test]
    fn alpha_is_sound() {
        let p = structured_2x2();
        let rule = ServiceRule::Greedy(cmu_order(&p).unwrap());
        let f = feasibility_alpha(&p, &rule).unwrap();
        let a = f.alpha.expect("feasible");
        assert!((drift_for_alpha(&p, &rule, &a) - f.game_value).abs() < 1e-9);
    }
}
