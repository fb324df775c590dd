//! Scheduling policies and the object-safe interface the engine drives.

mod learning;
mod matching;
mod priority;

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub use learning::{
    cmu_hat_parallel, cmu_hat_single, explore_probability, explore_set, update_stats, upsilon,
    EmpiricalStats, ExploitRule, ExploitScratch, ExploreSet, ExploreStreams,
};
pub use matching::{max_weight_assignment, MaxWeightSolver};
pub use priority::{
    cmu_order, greedy_priority_assignment, order_by_weight, GreedyScratch, PriorityOrder,
};

use crate::model::{Assignment, QueueState, SystemParams};
use crate::rng::{StreamHandle, StreamId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("cmu order is ambiguous: tied weights (delta = 0)")]
    Tie,
    #[error("edge ({0}, {1}) listed twice in priority order")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) is outside the system")]
    EdgeOutOfRange(usize, usize),
    #[error("success reported for ({0}, {1}) which was not scheduled")]
    SuccessNotScheduled(usize, usize),
    #[error("{0} requires a single server")]
    NeedsSingleServer(&'static str),
    #[error("unknown scheduler '{0}'")]
    Unknown(String),
    #[error("bad rank list: {0}")]
    BadRankList(String),
}

/// A policy queried once per slot.
pub trait Scheduler {
    /// Fills `out` for slot `t` (first slot is 1) and returns the explore flag.
    fn decide(&mut self, t: u64, state: &QueueState, out: &mut Assignment) -> bool;

    /// Feedback after service; learners update their statistics here.
    fn observe(&mut self, _assignment: &Assignment, _successes: &[(usize, usize)]) {}

    /// Learners expose their sample statistics.
    fn stats(&self) -> Option<&EmpiricalStats> {
        None
    }

    fn name(&self) -> String;
}

impl<S: Scheduler + ?Sized> Scheduler for Box<S> {
    fn decide(&mut self, t: u64, state: &QueueState, out: &mut Assignment) -> bool {
        (**self).decide(t, state, out)
    }
    fn observe(&mut self, a: &Assignment, s: &[(usize, usize)]) {
        (**self).observe(a, s)
    }
    fn stats(&self) -> Option<&EmpiricalStats> {
        (**self).stats()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// Max-weight allocation on a fixed weight matrix.
#[derive(Debug, Clone)]
pub struct MaxWeight {
    weights: Vec<Vec<f64>>,
    solver: MaxWeightSolver,
}

impl MaxWeight {
    pub fn new(weights: Vec<Vec<f64>>) -> Self {
        Self { weights, solver: MaxWeightSolver::default() }
    }

    /// The genie: weights `c_i mu_ij` from the true rates.
    pub fn genie(params: &SystemParams) -> Self {
        Self::new(params.weights())
    }
}

impl Scheduler for MaxWeight {
    fn decide(&mut self, _t: u64, state: &QueueState, out: &mut Assignment) -> bool {
        self.solver.solve(&self.weights, state, out);
        false
    }
    fn name(&self) -> String {
        "cmu-maxweight".to_string()
    }
}

/// Greedy allocation by a fixed link ranking.
#[derive(Debug, Clone)]
pub struct StaticPriority {
    order: PriorityOrder,
    scratch: GreedyScratch,
}

impl StaticPriority {
    pub fn new(order: PriorityOrder) -> Self {
        Self { order, scratch: GreedyScratch::default() }
    }

    pub fn cmu(params: &SystemParams) -> Result<Self, ScheduleError> {
        Ok(Self::new(cmu_order(params)?))
    }

    pub fn order(&self) -> &PriorityOrder {
        &self.order
    }
}

impl Scheduler for StaticPriority {
    fn decide(&mut self, _t: u64, state: &QueueState, out: &mut Assignment) -> bool {
        self.scratch.solve(self.order.edges(), state, out);
        false
    }
    fn name(&self) -> String {
        let ranks: Vec<String> =
            self.order.edges().iter().map(|(i, j)| alloc::format!("{}-{}", i + 1, j + 1)).collect();
        alloc::format!("static-priority:{}", ranks.join(","))
    }
}

/// Single-server greedy learner.
#[derive(Debug, Clone)]
pub struct CmuHatSingle {
    cost: Vec<f64>,
    stats: EmpiricalStats,
}

impl CmuHatSingle {
    pub fn new(params: &SystemParams) -> Result<Self, ScheduleError> {
        if params.num_servers() != 1 {
            return Err(ScheduleError::NeedsSingleServer("cmuhat-single"));
        }
        Ok(Self { cost: params.cost().to_vec(), stats: EmpiricalStats::new(params.num_queues(), 1) })
    }
}

impl Scheduler for CmuHatSingle {
    fn decide(&mut self, _t: u64, state: &QueueState, out: &mut Assignment) -> bool {
        learning::cmu_hat_single_into(&self.stats, &self.cost, state, out);
        false
    }
    fn observe(&mut self, a: &Assignment, s: &[(usize, usize)]) {
        for &(i, j) in a.pairs() {
            self.stats.record(i, j, s.contains(&(i, j)));
        }
    }
    fn stats(&self) -> Option<&EmpiricalStats> {
        Some(&self.stats)
    }
    fn name(&self) -> String {
        "cmuhat-single".to_string()
    }
}

/// Conditional epsilon-greedy learner for parallel servers.
#[derive(Debug, Clone)]
pub struct CmuHatParallel {
    cost: Vec<f64>,
    stats: EmpiricalStats,
    explore: ExploreSet,
    rule: ExploitRule,
    streams: ExploreStreams,
    scratch: ExploitScratch,
}

impl CmuHatParallel {
    pub fn new(params: &SystemParams, rule: ExploitRule, seed: u64) -> Self {
        let u = params.num_queues();
        let k = params.num_servers();
        Self {
            cost: params.cost().to_vec(),
            stats: EmpiricalStats::new(u, k),
            explore: explore_set(u, k),
            rule,
            streams: ExploreStreams {
                coin: StreamHandle::new(seed, StreamId::ExploreCoin).tape(),
                choice: StreamHandle::new(seed, StreamId::ExploreChoice).tape(),
            },
            scratch: ExploitScratch::default(),
        }
    }
}

impl Scheduler for CmuHatParallel {
    fn decide(&mut self, t: u64, state: &QueueState, out: &mut Assignment) -> bool {
        cmu_hat_parallel(
            t,
            &self.stats,
            &self.cost,
            state,
            &self.explore,
            self.rule,
            &mut self.streams,
            &mut self.scratch,
            out,
        )
    }
    fn observe(&mut self, a: &Assignment, s: &[(usize, usize)]) {
        for &(i, j) in a.pairs() {
            self.stats.record(i, j, s.contains(&(i, j)));
        }
    }
    fn stats(&self) -> Option<&EmpiricalStats> {
        Some(&self.stats)
    }
    fn name(&self) -> String {
        match self.rule {
            ExploitRule::MaxWeight => "cmuhat-parallel".to_string(),
            ExploitRule::GreedyPriority => "cmuhat-parallel:greedy".to_string(),
        }
    }
}

/// Parsed scheduler selection string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchedulerSpec {
    CmuMaxWeight,
    CmuGreedyPriority,
    CmuHatSingle,
    CmuHatParallel(ExploitRule),
    StaticPriority(Vec<(usize, usize)>),
}

impl SchedulerSpec {
    /// Accepts `cmu-maxweight`, `cmu-greedy-priority`, `cmuhat-single`,
    /// `cmuhat-parallel[:greedy]` and `static-priority:1-1,2-1,...` (1-based).
    pub fn parse(s: &str) -> Result<Self, ScheduleError> {
        let s = s.trim();
        match s {
            "cmu-maxweight" => return Ok(Self::CmuMaxWeight),
            "cmu-greedy-priority" => return Ok(Self::CmuGreedyPriority),
            "cmuhat-single" => return Ok(Self::CmuHatSingle),
            "cmuhat-parallel" | "cmuhat-parallel:maxweight" => {
                return Ok(Self::CmuHatParallel(ExploitRule::MaxWeight))
            }
            "cmuhat-parallel:greedy" => return Ok(Self::CmuHatParallel(ExploitRule::GreedyPriority)),
            _ => {}
        }
        let Some(list) = s.strip_prefix("static-priority:") else {
            return Err(ScheduleError::Unknown(s.to_string()));
        };
        let mut edges = Vec::new();
        for item in list.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (a, b) = item
                .split_once('-')
                .ok_or_else(|| ScheduleError::BadRankList(alloc::format!("'{item}' is not i-j")))?;
            let parse = |x: &str| -> Result<usize, ScheduleError> {
                match x.trim().parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v - 1),
                    _ => Err(ScheduleError::BadRankList(alloc::format!("'{item}' needs 1-based indices"))),
                }
            };
            edges.push((parse(a)?, parse(b)?));
        }
        if edges.is_empty() {
            return Err(ScheduleError::BadRankList("empty".to_string()));
        }
        PriorityOrder::new(edges.clone())?;
        Ok(Self::StaticPriority(edges))
    }

    pub fn is_learner(&self) -> bool {
        matches!(self, Self::CmuHatSingle | Self::CmuHatParallel(_))
    }

    pub fn build(&self, params: &SystemParams, seed: u64) -> Result<Box<dyn Scheduler>, ScheduleError> {
        Ok(match self {
            Self::CmuMaxWeight => Box::new(MaxWeight::genie(params)),
            Self::CmuGreedyPriority => Box::new(StaticPriority::cmu(params)?),
            Self::CmuHatSingle => Box::new(CmuHatSingle::new(params)?),
            Self::CmuHatParallel(rule) => Box::new(CmuHatParallel::new(params, *rule, seed)),
            Self::StaticPriority(edges) => {
                let order = PriorityOrder::new(edges.clone())?;
                order.check_dims(params.num_queues(), params.num_servers())?;
                Box::new(StaticPriority::new(order))
            }
        })
    }
}
