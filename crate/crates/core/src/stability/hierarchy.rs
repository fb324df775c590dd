//! Hierarchical static priority rules and their level-by-level ergodicity check.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::chain::{stationary_truncated, PriorityChain, StationaryDist, TruncationConfig};
use super::{Availability, LevelReport, PiSummary, StabilityError, StabilityVerdict, Status, VERDICT_TOL};
use crate::model::{capacity_contains, Assignment, QueueState, SystemParams};
use crate::schedulers::{GreedyScratch, PriorityOrder};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HierarchyCheck {
    pub hierarchical: bool,
    /// Pairs `(a, b)` meaning queue `a` is ahead of queue `b` on every shared server.
    pub relation: Vec<(usize, usize)>,
    pub counterexample: Option<(usize, usize)>,
    pub reason: Option<String>,
}

fn servers_of(params: &SystemParams) -> Vec<Vec<usize>> {
    (0..params.num_queues())
        .map(|i| (0..params.num_servers()).filter(|&j| params.mu(i, j) > 0.0).collect())
        .collect()
}

/// Checks that every pair of queues sharing a server is ordered the same way
/// on all shared servers, and that the induced relation has no cycle.
pub fn is_hierarchical(params: &SystemParams, order: &PriorityOrder) -> HierarchyCheck {
    let u = params.num_queues();
    let rank = order.rank_table(u, params.num_servers());
    let js = servers_of(params);
    let fail = |a: usize, b: usize, reason: String| HierarchyCheck {
        hierarchical: false,
        relation: Vec::new(),
        counterexample: Some((a, b)),
        reason: Some(reason),
    };
    for i in 0..u {
        for &j in &js[i] {
            if rank[i][j] == usize::MAX {
                return fail(i, i, format!("link ({}, {}) has no rank", i + 1, j + 1));
            }
        }
    }
    let mut relation = Vec::new();
    for a in 0..u {
        for b in a + 1..u {
            let shared: Vec<usize> = js[a].iter().copied().filter(|j| js[b].contains(j)).collect();
            if shared.is_empty() {
                continue;
            }
            if shared.iter().all(|&j| rank[a][j] < rank[b][j]) {
                relation.push((a, b));
            } else if shared.iter().all(|&j| rank[b][j] < rank[a][j]) {
                relation.push((b, a));
            } else {
                return fail(a, b, format!("queues {} and {} swap priority across shared servers", a + 1, b + 1));
            }
        }
    }
    if let Some((a, b)) = find_cycle(u, &relation) {
        return fail(a, b, String::from("priority relation contains a cycle"));
    }
    HierarchyCheck { hierarchical: true, relation, counterexample: None, reason: None }
}

fn find_cycle(u: usize, rel: &[(usize, usize)]) -> Option<(usize, usize)> {
    // Kahn's algorithm; any edge between leftover nodes lies on or feeds a cycle.
    let mut indeg = vec![0usize; u];
    for &(_, b) in rel {
        indeg[b] += 1;
    }
    let mut stack: Vec<usize> = (0..u).filter(|&x| indeg[x] == 0).collect();
    let mut seen = vec![false; u];
    while let Some(x) = stack.pop() {
        seen[x] = true;
        for &(a, b) in rel {
            if a == x {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    stack.push(b);
                }
            }
        }
    }
    rel.iter().copied().find(|&(a, b)| !seen[a] && !seen[b])
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HierarchyDecomposition {
    /// Level 1 first; each level holds queues with all predecessors earlier.
    pub levels: Vec<Vec<usize>>,
    pub relation: Vec<(usize, usize)>,
    /// Transitive predecessors of each queue.
    pub predecessors: Vec<Vec<usize>>,
    /// Servers with positive rate for each queue.
    pub servers: Vec<Vec<usize>>,
}

pub fn decompose(params: &SystemParams, order: &PriorityOrder) -> Result<HierarchyDecomposition, StabilityError> {
    let check = is_hierarchical(params, order);
    if !check.hierarchical {
        let (a, b) = check.counterexample.unwrap_or((0, 0));
        return Err(StabilityError::NotHierarchical(a + 1, b + 1));
    }
    let u = params.num_queues();
    let rel = check.relation;
    let mut placed = vec![false; u];
    let mut levels = Vec::new();
    while placed.iter().any(|p| !p) {
        let level: Vec<usize> = (0..u)
            .filter(|&x| !placed[x] && !rel.iter().any(|&(a, b)| b == x && !placed[a]))
            .collect();
        for &x in &level {
            placed[x] = true;
        }
        levels.push(level);
    }
    let mut predecessors = vec![Vec::new(); u];
    for x in 0..u {
        let mut stack = vec![x];
        let mut seen = vec![false; u];
        while let Some(y) = stack.pop() {
            for &(a, b) in &rel {
                if b == y && !seen[a] {
                    seen[a] = true;
                    stack.push(a);
                }
            }
        }
        predecessors[x] = (0..u).filter(|&a| seen[a]).collect();
    }
    Ok(HierarchyDecomposition { levels, relation: rel, predecessors, servers: servers_of(params) })
}

/// Splits `set` into groups connected through shared servers.
fn components(set: &[usize], servers: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut comp: Vec<Vec<usize>> = Vec::new();
    let mut left: Vec<usize> = set.to_vec();
    while let Some(seed) = left.pop() {
        let mut group = vec![seed];
        let mut k = 0;
        while k < group.len() {
            let g = group[k];
            left.retain(|&o| {
                let touch = servers[o].iter().any(|j| servers[g].contains(j));
                if touch {
                    group.push(o);
                }
                !touch
            });
            k += 1;
        }
        group.sort_unstable();
        comp.push(group);
    }
    comp.sort();
    comp
}

fn summarize(queues: &[usize], d: &StationaryDist) -> PiSummary {
    PiSummary {
        queues: queues.to_vec(),
        pi_zero: d.prob(&vec![0; d.dims()]),
        pi_le_one: d.mass_where(|x| x.iter().all(|&v| v <= 1)),
        bounds: d.bounds.clone(),
        residual_mass: d.residual_mass,
    }
}

/// Level-by-level check: each queue needs `sum_j pi(A_ij) mu_ij > lambda_i`,
/// where `A_ij` is the set of lower-level states leaving server `j` free.
pub fn hierarchical_verdict(
    params: &SystemParams,
    order: &PriorityOrder,
    config: &TruncationConfig,
) -> Result<StabilityVerdict, StabilityError> {
    let dec = decompose(params, order)?;
    let cap = capacity_contains(params)?;
    if !cap.inside {
        return Err(StabilityError::OutsideCapacity(cap.margin));
    }
    let k = params.num_servers() as u64;
    let mut cache: BTreeMap<Vec<usize>, StationaryDist> = BTreeMap::new();
    let mut verdict = StabilityVerdict::empty();
    let mut scratch = GreedyScratch::default();
    let mut out = Assignment::new();

    for (lvl, queues) in dec.levels.iter().enumerate() {
        let mut report = LevelReport { queues: queues.clone(), margins: Vec::new() };
        for &i in queues {
            let comps = components(&dec.predecessors[i], &dec.servers);
            for c in &comps {
                if cache.contains_key(c) {
                    continue;
                }
                let chain = PriorityChain::new(params, order.edges(), c.clone());
                match stationary_truncated(&chain, config) {
                    Ok(d) => {
                        verdict.pi_summaries.push(summarize(c, &d));
                        cache.insert(c.clone(), d);
                    }
                    Err(e @ (StabilityError::BudgetExceeded { .. }
                    | StabilityError::NonConvergence { .. }
                    | StabilityError::Reducible(_))) => {
                        verdict.status = Status::Inconclusive;
                        verdict.levels.push(report);
                        verdict.diagnostics.push(format!(
                            "level {}: chain of queues {:?}: {e}",
                            lvl + 1,
                            one_based(c)
                        ));
                        return Ok(verdict);
                    }
                    Err(e) => return Err(e),
                }
            }
            let mut prob = vec![0.0; params.num_servers()];
            let mut owner: Vec<Option<usize>> = vec![None; params.num_servers()];
            for &j in &dec.servers[i] {
                owner[j] = comps.iter().position(|c| c.iter().any(|q| dec.servers[*q].contains(&j)));
                if owner[j].is_none() {
                    prob[j] = 1.0;
                }
            }
            for (ci, c) in comps.iter().enumerate() {
                let d = &cache[c];
                let mut full = QueueState::zeros(params.num_queues());
                full.q[i] = k;
                let mut x = vec![0u64; d.dims()];
                for &p in &d.probs {
                    for (dd, &qq) in c.iter().enumerate() {
                        full.q[qq] = x[dd];
                    }
                    scratch.solve(order.edges(), &full, &mut out);
                    for &j in &dec.servers[i] {
                        if owner[j] == Some(ci) && out.contains(i, j) {
                            prob[j] += p;
                        }
                    }
                    step_box(&mut x, &d.bounds);
                }
            }
            let mut served = 0.0;
            for &j in &dec.servers[i] {
                served += prob[j] * params.mu(i, j);
                let lower = owner[j].map(|ci| comps[ci].clone()).unwrap_or_default();
                verdict.availability.push(Availability { queue: i, server: j, lower_queues: lower, probability: prob[j] });
            }
            let margin = served - params.lambda()[i];
            report.margins.push(margin);
            verdict.per_level_margins.push(margin);
        }
        let worst = report.margins.iter().copied().fold(f64::INFINITY, f64::min);
        verdict.levels.push(report);
        if worst < -VERDICT_TOL {
            verdict.status = Status::Unstable;
            verdict.diagnostics.push(format!("level {} fails (margin {worst})", lvl + 1));
            return Ok(verdict);
        }
        if worst <= VERDICT_TOL {
            verdict.status = Status::Boundary;
            verdict.diagnostics.push(format!("level {} is on the boundary (margin {worst})", lvl + 1));
            return Ok(verdict);
        }
    }
    verdict.status = Status::GeometricallyErgodic;
    Ok(verdict)
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|x| x + 1).collect()
}

fn step_box(x: &mut [u64], bounds: &[u64]) {
    for d in (0..x.len()).rev() {
        if x[d] < bounds[d] {
            x[d] += 1;
            return;
        }
        x[d] = 0;
    }
}

/// Two queues, three servers: queue 1 on servers 1 and 2, queue 2 on 2 and 3.
pub fn m_network_params(eps: f64) -> Result<SystemParams, StabilityError> {
    if !(eps > 0.0 && eps < 1.0 / 3.0) {
        return Err(StabilityError::Epsilon(eps));
    }
    let base = 0.5;
    Ok(SystemParams::uniform_cost(
        vec![base + eps, base + eps],
        vec![vec![base, 3.0 * eps, 0.0], vec![0.0, 3.0 * eps, base]],
    )?)
}

/// The two static priority orders: queue 1 or queue 2 ahead on server 2.
pub fn m_network_orders() -> (PriorityOrder, PriorityOrder) {
    let a = PriorityOrder::new(vec![(0, 0), (1, 2), (0, 1), (1, 1)]).expect("distinct");
    let b = PriorityOrder::new(vec![(0, 0), (1, 2), (1, 1), (0, 1)]).expect("distinct");
    (a, b)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MNetworkReport {
    pub params: SystemParams,
    pub in_capacity: bool,
    pub capacity_margin: f64,
    pub verdict_order_a: StabilityVerdict,
    pub verdict_order_b: StabilityVerdict,
}

pub fn m_network_counterexample(eps: f64, config: &TruncationConfig) -> Result<MNetworkReport, StabilityError> {
    let params = m_network_params(eps)?;
    let cap = capacity_contains(&params)?;
    let (a, b) = m_network_orders();
    let verdict_order_a = hierarchical_verdict(&params, &a, config)?;
    let verdict_order_b = hierarchical_verdict(&params, &b, config)?;
    Ok(MNetworkReport {
        params,
        in_capacity: cap.inside,
        capacity_margin: cap.margin,
        verdict_order_a,
        verdict_order_b,
    })
}
