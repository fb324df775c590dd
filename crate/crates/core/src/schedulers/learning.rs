//! Sample bookkeeping and the two learning rules (single-server greedy cmu-hat
//! and the conditional epsilon-greedy parallel rule).

use alloc::vec;
use alloc::vec::Vec;

use super::matching::MaxWeightSolver;
use super::priority::{order_by_weight, GreedyScratch};
use super::ScheduleError;
use crate::model::{Assignment, QueueState};
use crate::rng::Tape;

/// Per-link sample counts and success counts.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmpiricalStats {
    queues: usize,
    servers: usize,
    n: Vec<u64>,
    successes: Vec<u64>,
}

impl EmpiricalStats {
    pub fn new(queues: usize, servers: usize) -> Self {
        Self { queues, servers, n: vec![0; queues * servers], successes: vec![0; queues * servers] }
    }

    pub fn queues(&self) -> usize {
        self.queues
    }

    pub fn servers(&self) -> usize {
        self.servers
    }

    pub fn n(&self, i: usize, j: usize) -> u64 {
        self.n[i * self.servers + j]
    }

    pub fn successes(&self, i: usize, j: usize) -> u64 {
        self.successes[i * self.servers + j]
    }

    /// Zero for unsampled links.
    pub fn mu_hat(&self, i: usize, j: usize) -> f64 {
        let n = self.n(i, j);
        if n == 0 {
            0.0
        } else {
            self.successes(i, j) as f64 / n as f64
        }
    }

    pub fn n_min(&self) -> u64 {
        self.n.iter().copied().min().unwrap_or(0)
    }

    pub fn record(&mut self, i: usize, j: usize, success: bool) {
        let k = i * self.servers + j;
        self.n[k] += 1;
        if success {
            self.successes[k] += 1;
        }
    }

    /// `c_i mu_hat_ij`, row per queue.
    pub fn weights(&self, cost: &[f64]) -> Vec<Vec<f64>> {
        let mut w = vec![vec![0.0; self.servers]; self.queues];
        self.weights_into(cost, &mut w);
        w
    }

    pub fn weights_into(&self, cost: &[f64], w: &mut [Vec<f64>]) {
        for (i, row) in w.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = cost[i] * self.mu_hat(i, j);
            }
        }
    }
}

/// Adds one sample per scheduled pair and one success per served pair.
pub fn update_stats(
    stats: &mut EmpiricalStats,
    assignment: &Assignment,
    successes: &[(usize, usize)],
) -> Result<(), ScheduleError> {
    if let Some(&(i, j)) = successes.iter().find(|&&(i, j)| !assignment.contains(i, j)) {
        return Err(ScheduleError::SuccessNotScheduled(i + 1, j + 1));
    }
    for &(i, j) in assignment.pairs() {
        stats.record(i, j, successes.contains(&(i, j)));
    }
    Ok(())
}

/// Single-server rule: serve the nonempty queue with the largest
/// `c_i mu_hat_i`, lowest index on ties.
pub fn cmu_hat_single(stats: &EmpiricalStats, cost: &[f64], state: &QueueState) -> Assignment {
    let mut out = Assignment::new();
    cmu_hat_single_into(stats, cost, state, &mut out);
    out
}

pub(crate) fn cmu_hat_single_into(
    stats: &EmpiricalStats,
    cost: &[f64],
    state: &QueueState,
    out: &mut Assignment,
) {
    out.clear();
    let mut best: Option<(usize, f64)> = None;
    for (i, &q) in state.q.iter().enumerate() {
        if q == 0 {
            continue;
        }
        let w = cost[i] * stats.mu_hat(i, 0);
        if best.is_none_or(|(_, bw)| w > bw) {
            best = Some((i, w));
        }
    }
    if let Some((i, _)) = best {
        out.push(i, 0);
    }
}

/// `U` full assignments; assignment `m` sends server `j` to queue `(j + m) mod U`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExploreSet {
    pub assignments: Vec<Vec<usize>>,
}

pub fn explore_set(queues: usize, servers: usize) -> ExploreSet {
    let assignments =
        (0..queues).map(|m| (0..servers).map(|j| (j + m) % queues).collect()).collect();
    ExploreSet { assignments }
}

impl ExploreSet {
    /// Assignment `m` restricted to what the state can serve.
    pub fn restricted(&self, m: usize, state: &QueueState, out: &mut Assignment) {
        out.clear();
        let mut taken = vec![0u64; state.q.len()];
        for (j, &i) in self.assignments[m].iter().enumerate() {
            if taken[i] < state.q[i] {
                taken[i] += 1;
                out.push(i, j);
            }
        }
        out.finish();
    }
}

/// Exploration threshold `max{1, 2 ln^3 (t - 1)}`.
pub fn upsilon(t: u64) -> f64 {
    if t <= 2 {
        return 1.0;
    }
    let l = libm::log((t - 1) as f64);
    (2.0 * l * l * l).max(1.0)
}

/// Explore-coin probability `min{1, 3 U ln^2 t / t}`.
pub fn explore_probability(t: u64, queues: usize) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let l = libm::log(t as f64);
    (3.0 * queues as f64 * l * l / t as f64).min(1.0)
}

/// How the parallel learner exploits its estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ExploitRule {
    #[default]
    MaxWeight,
    GreedyPriority,
}

/// Coin and explore-choice streams, read at position `t`.
#[derive(Debug, Clone)]
pub struct ExploreStreams {
    pub coin: Tape,
    pub choice: Tape,
}

/// Scratch buffers for the exploit step.
#[derive(Debug, Default, Clone)]
pub struct ExploitScratch {
    weights: Vec<Vec<f64>>,
    matcher: MaxWeightSolver,
    greedy: GreedyScratch,
}

/// One decision of the conditional epsilon-greedy rule. Returns whether the
/// slot explored.
#[allow(clippy::too_many_arguments)]
pub fn cmu_hat_parallel(
    t: u64,
    stats: &EmpiricalStats,
    cost: &[f64],
    state: &QueueState,
    explore: &ExploreSet,
    rule: ExploitRule,
    streams: &mut ExploreStreams,
    scratch: &mut ExploitScratch,
    out: &mut Assignment,
) -> bool {
    let u = stats.queues();
    if (stats.n_min() as f64) < upsilon(t) {
        let p = explore_probability(t, u);
        if p > 0.0 && streams.coin.uniform(t) < p {
            let m = ((streams.choice.uniform(t) * u as f64) as usize).min(u - 1);
            explore.restricted(m, state, out);
            return true;
        }
    }
    if scratch.weights.len() != u {
        scratch.weights = vec![vec![0.0; stats.servers()]; u];
    }
    stats.weights_into(cost, &mut scratch.weights);
    match rule {
        ExploitRule::MaxWeight => scratch.matcher.solve(&scratch.weights, state, out),
        ExploitRule::GreedyPriority => {
            let edges = order_by_weight(&scratch.weights);
            scratch.greedy.solve(&edges, state, out);
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn thresholds() {
        assert_eq!(upsilon(1), 1.0);
        assert_eq!(upsilon(2), 1.0);
        assert!((upsilon(10) - 21.2155).abs() < 1e-4);
        assert_eq!(explore_probability(1, 2), 0.0);
        assert_eq!(explore_probability(10, 2), 1.0);
        let raw = 6.0 * libm::log(10.0) * libm::log(10.0) / 10.0;
        assert!((raw - 3.181).abs() < 1e-3);
    }

    #[test]
    fn explore_sets() {
        let e = explore_set(2, 2);
        assert_eq!(e.assignments, vec![vec![0, 1], vec![1, 0]]);
        for (u, k) in [(2, 3), (3, 2), (4, 7), (1, 3)] {
            let e = explore_set(u, k);
            assert_eq!(e.assignments.len(), u);
            for i in 0..u {
                for j in 0..k {
                    let hits = e.assignments.iter().filter(|a| a[j] == i).count();
                    assert_eq!(hits, 1);
                }
            }
            for a in &e.assignments {
                for i in 0..u {
                    let c = a.iter().filter(|&&x| x == i).count();
                    assert!(c == k / u || c == k.div_ceil(u));
                }
            }
        }
    }

    #[test]
    fn explore_restriction_respects_state() {
        let e = explore_set(2, 3);
        let mut out = Assignment::new();
        e.restricted(0, &QueueState::from_slice(&[1, 0]), &mut out);
        assert_eq!(out.pairs(), &[(0, 0)]);
    }

    #[test]
    fn single_rule() {
        let stats = EmpiricalStats::new(2, 1);
        let a = cmu_hat_single(&stats, &[1.0, 1.0], &QueueState::from_slice(&[3, 2]));
        assert_eq!(a.pairs(), &[(0, 0)]);
        let mut stats = EmpiricalStats::new(2, 1);
        for k in 0..10 {
            stats.record(0, 0, k < 5);
            stats.record(1, 0, k < 9);
        }
        let a = cmu_hat_single(&stats, &[1.0, 1.0], &QueueState::from_slice(&[1, 1]));
        assert_eq!(a.pairs(), &[(1, 0)]);
        let a = cmu_hat_single(&stats, &[1.0, 1.0], &QueueState::from_slice(&[1, 0]));
        assert_eq!(a.pairs(), &[(0, 0)]);
    }

    #[test]
    fn stats_updates() {
        let mut s = EmpiricalStats::new(2, 2);
        update_stats(&mut s, &Assignment::new(), &[]).unwrap();
        assert_eq!(s, EmpiricalStats::new(2, 2));
        update_stats(&mut s, &Assignment::from_pairs(vec![(0, 0)]), &[(0, 0)]).unwrap();
        assert_eq!((s.n(0, 0), s.successes(0, 0)), (1, 1));
        assert!(update_stats(&mut s, &Assignment::from_pairs(vec![(0, 0)]), &[(1, 1)]).is_err());
    }
}
