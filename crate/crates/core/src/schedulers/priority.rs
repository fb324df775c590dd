//! Static link priorities and the greedy allocation they induce.

use alloc::vec;
use alloc::vec::Vec;

use super::ScheduleError;
use crate::model::{validate, Assignment, QueueState, SystemParams};

/// Link ranking: `edges()[0]` has the highest priority.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriorityOrder {
    edges: Vec<(usize, usize)>,
}

impl PriorityOrder {
    /// Rejects duplicate edges. Edges left out are never used.
    pub fn new(edges: Vec<(usize, usize)>) -> Result<Self, ScheduleError> {
        for (a, e) in edges.iter().enumerate() {
            if edges[..a].contains(e) {
                return Err(ScheduleError::DuplicateEdge(e.0 + 1, e.1 + 1));
            }
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Zero-based rank, lower is better.
    pub fn rank(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.iter().position(|&e| e == (i, j))
    }

    /// Dense lookup table `rank[i][j]`, `usize::MAX` for unranked edges.
    pub fn rank_table(&self, queues: usize, servers: usize) -> Vec<Vec<usize>> {
        let mut t = vec![vec![usize::MAX; servers]; queues];
        for (r, &(i, j)) in self.edges.iter().enumerate() {
            if i < queues && j < servers {
                t[i][j] = r;
            }
        }
        t
    }

    /// Checks that every edge fits a `queues x servers` system.
    pub fn check_dims(&self, queues: usize, servers: usize) -> Result<(), ScheduleError> {
        match self.edges.iter().find(|&&(i, j)| i >= queues || j >= servers) {
            Some(&(i, j)) => Err(ScheduleError::EdgeOutOfRange(i + 1, j + 1)),
            None => Ok(()),
        }
    }
}

pub fn greedy_priority_assignment(order: &PriorityOrder, state: &QueueState) -> Assignment {
    let mut out = Assignment::new();
    GreedyScratch::default().solve(order.edges(), state, &mut out);
    out
}

/// Reusable buffers for greedy allocation.
#[derive(Debug, Default, Clone)]
pub struct GreedyScratch {
    busy: Vec<bool>,
    taken: Vec<u64>,
}

impl GreedyScratch {
    /// Scans `edges` in order, accepting a link when its server is free and
    /// its queue still has an unmatched job.
    pub fn solve(&mut self, edges: &[(usize, usize)], state: &QueueState, out: &mut Assignment) {
        out.clear();
        if state.is_empty() {
            return;
        }
        self.taken.clear();
        self.taken.resize(state.q.len(), 0);
        self.busy.clear();
        for &(i, j) in edges {
            if j >= self.busy.len() {
                self.busy.resize(j + 1, false);
            }
            if !self.busy[j] && self.taken[i] < state.q[i] {
                self.taken[i] += 1;
                self.busy[j] = true;
                out.push(i, j);
            }
        }
        out.finish();
    }
}

/// Links by descending `c_i mu_ij`; zero-rate links trail in index order.
pub fn cmu_order(params: &SystemParams) -> Result<PriorityOrder, ScheduleError> {
    let report = validate(params);
    if !report.is_cmu_well_defined {
        return Err(ScheduleError::Tie);
    }
    let w = params.weights();
    Ok(PriorityOrder { edges: order_by_weight(&w) })
}

/// Descending weight order with lexicographic tie-break; zero weights last.
pub fn order_by_weight(w: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> =
        (0..w.len()).flat_map(|i| (0..w[i].len()).map(move |j| (i, j))).collect();
    edges.sort_by(|&a, &b| w[b.0][b.1].total_cmp(&w[a.0][a.1]).then(a.cmp(&b)));
    edges
}
