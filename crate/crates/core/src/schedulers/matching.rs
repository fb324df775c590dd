//! Exact max-weight server allocation (Hungarian method over job slots).

use alloc::vec::Vec;

use crate::model::{Assignment, QueueState};

/// Reusable scratch space for [`max_weight_into`].
#[derive(Debug, Default, Clone)]
pub struct MaxWeightSolver {
    col_queue: Vec<usize>,
    cost: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    p: Vec<usize>,
    way: Vec<usize>,
    minv: Vec<f64>,
    used: Vec<bool>,
    taken: Vec<u64>,
    busy: Vec<bool>,
}

/// Maximizes `sum w_ij x_ij` with one job per server and at most `Q_i`
/// servers per queue. Only strictly positive edges come from the optimizer;
/// the result is then extended by zero-weight edges in (queue, server)
/// order so that it is maximal.
pub fn max_weight_assignment(weights: &[Vec<f64>], state: &QueueState) -> Assignment {
    let mut out = Assignment::new();
    MaxWeightSolver::default().solve(weights, state, &mut out);
    out
}

impl MaxWeightSolver {
    pub fn solve(&mut self, weights: &[Vec<f64>], state: &QueueState, out: &mut Assignment) {
        out.clear();
        let nq = weights.len();
        if nq == 0 {
            return;
        }
        let ns = weights[0].len();
        if state.is_empty() {
            return;
        }
        // Columns: each queue contributes min(Q_i, K) identical job slots.
        self.col_queue.clear();
        for i in 0..nq {
            let copies = state.q[i].min(ns as u64) as usize;
            if weights[i].iter().any(|&w| w > 0.0) {
                self.col_queue.extend(core::iter::repeat_n(i, copies));
            }
        }
        let real = self.col_queue.len();
        let m = real.max(ns);
        let n = ns;

        self.taken.clear();
        self.taken.resize(nq, 0);
        self.busy.clear();
        self.busy.resize(ns, false);

        if real > 0 {
            // cost[(r) * (m + 1) + c], 1-based rows/cols as in the classic
            // potentials formulation.
            let w1 = m + 1;
            self.cost.clear();
            self.cost.resize((n + 1) * w1, 0.0);
            for r in 1..=n {
                for c in 1..=real {
                    self.cost[r * w1 + c] = -weights[self.col_queue[c - 1]][r - 1];
                }
            }
            hungarian(
                n,
                m,
                &self.cost,
                &mut self.u,
                &mut self.v,
                &mut self.p,
                &mut self.way,
                &mut self.minv,
                &mut self.used,
            );
            for c in 1..=real {
                let r = self.p[c];
                if r == 0 {
                    continue;
                }
                let i = self.col_queue[c - 1];
                let j = r - 1;
                if weights[i][j] > 0.0 {
                    out.push(i, j);
                    self.taken[i] += 1;
                    self.busy[j] = true;
                }
            }
        }
        for i in 0..nq {
            for j in 0..ns {
                if !self.busy[j] && self.taken[i] < state.q[i] && weights[i][j] == 0.0 {
                    out.push(i, j);
                    self.taken[i] += 1;
                    self.busy[j] = true;
                }
            }
        }
        out.finish();
    }
}

#[allow(clippy::too_many_arguments)]
fn hungarian(
    n: usize,
    m: usize,
    a: &[f64],
    u: &mut Vec<f64>,
    v: &mut Vec<f64>,
    p: &mut Vec<usize>,
    way: &mut Vec<usize>,
    minv: &mut Vec<f64>,
    used: &mut Vec<bool>,
) {
    let w1 = m + 1;
    u.clear();
    u.resize(n + 1, 0.0);
    v.clear();
    v.resize(m + 1, 0.0);
    p.clear();
    p.resize(m + 1, 0);
    way.clear();
    way.resize(m + 1, 0);
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.clear();
        minv.resize(m + 1, f64::INFINITY);
        used.clear();
        used.resize(m + 1, false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = a[i0 * w1 + j] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
}
