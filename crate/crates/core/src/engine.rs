//! Slot-by-slot simulation with shared, addressable service randomness.
//!
//! Service outcomes follow the per-job uniform construction: queue `i` owns a
//! uniform tape `U_i`, and the job with FCFS index `n` in slot `t` succeeds on
//! server `j` iff `U_i(Z_i(t-1) + n) > 1 - mu_ij`. A single run advances
//! `Z_i` by `Q_i(t)`; coupled runs advance it by the larger of the two queue
//! lengths so both systems read the same uniforms for the same job index.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{Assignment, QueueState, SystemParams};
use crate::rng::{StreamHandle, StreamId, Tape};
use crate::schedulers::{EmpiricalStats, Scheduler};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("slot {t}, system {system} ({scheduler}): invalid assignment: {reason}")]
    SchedulerViolation { t: u64, system: usize, scheduler: String, reason: String },
    #[error("success ({0}, {1}) is not part of the assignment")]
    SuccessNotAssigned(usize, usize),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("initial state has {got} queues, expected {expected}")]
    InitialState { got: usize, expected: usize },
    #[error("geometric workload runs need exactly one server, got {0}")]
    NotSingleServer(usize),
    #[error("scheduler {scheduler} idled at slot {t} with work present")]
    NotWorkConserving { t: u64, scheduler: String },
    #[error("discount must lie in (0, 1), got {0}")]
    Discount(f64),
}

/// Applies service and arrivals: `Q' = (Q - served)^+ + A`.
pub fn step(
    state: &QueueState,
    assignment: &Assignment,
    arrivals: &[bool],
    successes: &[(usize, usize)],
) -> Result<QueueState, EngineError> {
    let servers = assignment.pairs().iter().map(|p| p.1 + 1).max().unwrap_or(0);
    assignment.check(state, servers).map_err(EngineError::InvalidAssignment)?;
    if let Some(&(i, j)) = successes.iter().find(|&&(i, j)| !assignment.contains(i, j)) {
        return Err(EngineError::SuccessNotAssigned(i + 1, j + 1));
    }
    let mut q = state.q.clone();
    for &(i, _) in successes {
        q[i] = q[i].saturating_sub(1);
    }
    for (x, &a) in q.iter_mut().zip(arrivals) {
        *x += a as u64;
    }
    Ok(QueueState { q })
}

/// One slot of one system, owned.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRecord {
    pub t: u64,
    pub q: QueueState,
    pub arrivals: Vec<bool>,
    pub assignment: Assignment,
    pub successes: Vec<(usize, usize)>,
    pub slot_cost: f64,
    pub explored: bool,
}

/// Borrowed view of a slot handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct SlotView<'a> {
    pub t: u64,
    pub q: &'a [u64],
    pub arrivals: &'a [bool],
    pub assignment: &'a Assignment,
    pub successes: &'a [(usize, usize)],
    pub slot_cost: f64,
    pub explored: bool,
    /// Learner statistics after this slot's update.
    pub stats: Option<&'a EmpiricalStats>,
}

impl SlotView<'_> {
    pub fn to_record(&self) -> TraceRecord {
        TraceRecord {
            t: self.t,
            q: QueueState::from_slice(self.q),
            arrivals: self.arrivals.to_vec(),
            assignment: self.assignment.clone(),
            successes: self.successes.to_vec(),
            slot_cost: self.slot_cost,
            explored: self.explored,
        }
    }
}

/// Empty-system hitting times and the cycle lengths between them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BusyCycleLog {
    pub zero_hit_times: Vec<u64>,
    pub cycle_lengths: Vec<u64>,
}

impl BusyCycleLog {
    pub fn from_zero_hits(zero_hit_times: Vec<u64>) -> Self {
        let cycle_lengths = zero_hit_times.windows(2).map(|w| w[1] - w[0]).collect();
        Self { zero_hit_times, cycle_lengths }
    }

    pub fn from_trace(trace: &[TraceRecord]) -> Self {
        Self::from_zero_hits(trace.iter().filter(|r| r.q.is_empty()).map(|r| r.t).collect())
    }

    pub fn push_zero_hit(&mut self, t: u64) {
        if let Some(&last) = self.zero_hit_times.last() {
            self.cycle_lengths.push(t - last);
        }
        self.zero_hit_times.push(t);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Queue lengths at slot 1; zero when absent.
    pub initial: Option<QueueState>,
    /// Discount factor applied as `beta^t` to slot costs.
    pub discount: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub busy: BusyCycleLog,
    pub cum_cost: f64,
    /// State after the last slot.
    pub final_state: QueueState,
}

/// Per-system totals from [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSummary {
    pub cum_cost: f64,
    pub busy: BusyCycleLog,
    pub final_state: QueueState,
}

/// Runs one or more systems on common arrivals and service uniforms,
/// reporting each slot to `observer(system, view)`.
pub fn simulate(
    params: &SystemParams,
    systems: &mut [&mut dyn Scheduler],
    initial: &[QueueState],
    horizon: u64,
    seed: u64,
    discount: Option<f64>,
    observer: &mut dyn FnMut(usize, &SlotView<'_>),
) -> Result<Vec<SystemSummary>, EngineError> {
    let u = params.num_queues();
    let k = params.num_servers();
    let ns = systems.len();
    if horizon == 0 {
        return Err(EngineError::ZeroHorizon);
    }
    if let Some(b) = discount {
        if !(b > 0.0 && b < 1.0) {
            return Err(EngineError::Discount(b));
        }
    }
    let mut states: Vec<QueueState> = (0..ns)
        .map(|s| initial.get(s).cloned().unwrap_or_else(|| QueueState::zeros(u)))
        .collect();
    if let Some(bad) = states.iter().find(|s| s.q.len() != u) {
        return Err(EngineError::InitialState { got: bad.q.len(), expected: u });
    }

    let mut arrival_tapes: Vec<Tape> =
        (0..u).map(|i| StreamHandle::new(seed, StreamId::Arrival(i)).tape()).collect();
    let mut service_tapes: Vec<Tape> =
        (0..u).map(|i| StreamHandle::new(seed, StreamId::Service(i)).tape()).collect();
    let mut z = vec![0u64; u];
    let mut uniforms: Vec<Vec<f64>> = vec![Vec::with_capacity(k); u];
    let mut assignments: Vec<Assignment> = vec![Assignment::new(); ns];
    let mut explored = vec![false; ns];
    let mut successes: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(k); ns];
    let mut per_queue: Vec<(usize, f64)> = Vec::with_capacity(k);
    let mut arrivals = vec![false; u];
    let mut summaries: Vec<SystemSummary> = (0..ns)
        .map(|_| SystemSummary {
            cum_cost: 0.0,
            busy: BusyCycleLog::default(),
            final_state: QueueState::zeros(u),
        })
        .collect();
    let mut weight = 1.0;

    for t in 1..=horizon {
        if let Some(b) = discount {
            weight *= b;
        }
        for s in 0..ns {
            explored[s] = systems[s].decide(t, &states[s], &mut assignments[s]);
            if let Err(reason) = assignments[s].check(&states[s], k) {
                return Err(EngineError::SchedulerViolation {
                    t,
                    system: s,
                    scheduler: systems[s].name(),
                    reason,
                });
            }
        }
        for i in 0..u {
            let need = assignments.iter().map(|a| a.count_for(i)).max().unwrap_or(0);
            let buf = &mut uniforms[i];
            buf.clear();
            for n in 0..need as u64 {
                buf.push(service_tapes[i].uniform(z[i] + n));
            }
        }
        for s in 0..ns {
            successes[s].clear();
            let pairs = assignments[s].pairs();
            let mut start = 0;
            while start < pairs.len() {
                let i = pairs[start].0;
                let mut end = start;
                per_queue.clear();
                while end < pairs.len() && pairs[end].0 == i {
                    let j = pairs[end].1;
                    per_queue.push((j, params.mu(i, j)));
                    end += 1;
                }
                // Fastest server takes the oldest job.
                per_queue.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                for (n, &(j, mu)) in per_queue.iter().enumerate() {
                    if uniforms[i][n] > 1.0 - mu {
                        successes[s].push((i, j));
                    }
                }
                start = end;
            }
            successes[s].sort_unstable();
        }
        for i in 0..u {
            z[i] += states.iter().map(|st| st.q[i]).max().unwrap_or(0);
            arrivals[i] = arrival_tapes[i].next_uniform() < params.lambda()[i];
        }
        for s in 0..ns {
            systems[s].observe(&assignments[s], &successes[s]);
            let slot_cost = params.total_cost(&states[s].q);
            summaries[s].cum_cost += weight * slot_cost;
            if states[s].is_empty() {
                summaries[s].busy.push_zero_hit(t);
            }
            let view = SlotView {
                t,
                q: &states[s].q,
                arrivals: &arrivals,
                assignment: &assignments[s],
                successes: &successes[s],
                slot_cost,
                explored: explored[s],
                stats: systems[s].stats(),
            };
            observer(s, &view);
            let q = &mut states[s].q;
            for &(i, _) in &successes[s] {
                q[i] -= 1;
            }
            for (x, &a) in q.iter_mut().zip(&arrivals) {
                *x += a as u64;
            }
        }
    }
    for (sum, st) in summaries.iter_mut().zip(states) {
        sum.final_state = st;
    }
    Ok(summaries)
}

/// Single system with a stored trace.
pub fn run(
    params: &SystemParams,
    scheduler: &mut dyn Scheduler,
    horizon: u64,
    seed: u64,
    options: &RunOptions,
) -> Result<RunOutput, EngineError> {
    let mut trace = Vec::with_capacity(horizon.min(1 << 22) as usize);
    let initial: Vec<QueueState> = options.initial.iter().cloned().collect();
    let mut sched = [scheduler];
    let mut out = simulate(params, &mut sched, &initial, horizon, seed, options.discount, &mut |_, v| {
        trace.push(v.to_record())
    })?;
    let s = out.pop().expect("one system");
    Ok(RunOutput { trace, busy: s.busy, cum_cost: s.cum_cost, final_state: s.final_state })
}

/// Two systems on common random numbers.
pub fn coupled_run<'s>(
    params: &SystemParams,
    scheduler_a: &'s mut dyn Scheduler,
    scheduler_b: &'s mut dyn Scheduler,
    horizon: u64,
    seed: u64,
    options_a: &RunOptions,
    options_b: &RunOptions,
) -> Result<(RunOutput, RunOutput), EngineError> {
    let u = params.num_queues();
    let initial = [
        options_a.initial.clone().unwrap_or_else(|| QueueState::zeros(u)),
        options_b.initial.clone().unwrap_or_else(|| QueueState::zeros(u)),
    ];
    if options_a.discount != options_b.discount {
        return Err(EngineError::Discount(options_b.discount.unwrap_or(f64::NAN)));
    }
    let mut traces: [Vec<TraceRecord>; 2] = [Vec::new(), Vec::new()];
    let mut sched = [scheduler_a, scheduler_b];
    let out = simulate(params, &mut sched, &initial, horizon, seed, options_a.discount, &mut |s, v| {
        traces[s].push(v.to_record())
    })?;
    let [ta, tb] = traces;
    let mut it = out.into_iter();
    let (a, b) = (it.next().expect("system a"), it.next().expect("system b"));
    Ok((
        RunOutput { trace: ta, busy: a.busy, cum_cost: a.cum_cost, final_state: a.final_state },
        RunOutput { trace: tb, busy: b.busy, cum_cost: b.cum_cost, final_state: b.final_state },
    ))
}

/// Number of service slots a job needs when each slot completes it w.p. `mu`.
pub fn geometric_requirement(u: f64, mu: f64) -> u64 {
    if mu >= 1.0 {
        return 1;
    }
    if mu <= 0.0 {
        return u64::MAX;
    }
    let k = libm::floor(libm::log1p(-u) / libm::log1p(-mu));
    if k >= (u64::MAX - 1) as f64 {
        u64::MAX
    } else {
        k as u64 + 1
    }
}

/// Replays one sampled workload (Bernoulli arrivals, geometric work per job)
/// under each single-server scheduler and returns every busy-cycle log.
pub fn geometric_workload_run(
    params: &SystemParams,
    schedulers: &mut [&mut dyn Scheduler],
    horizon: u64,
    seed: u64,
) -> Result<Vec<BusyCycleLog>, EngineError> {
    if params.num_servers() != 1 {
        return Err(EngineError::NotSingleServer(params.num_servers()));
    }
    if horizon == 0 {
        return Err(EngineError::ZeroHorizon);
    }
    let u = params.num_queues();
    let mut logs = Vec::with_capacity(schedulers.len());
    for sched in schedulers.iter_mut() {
        let mut arrivals: Vec<Tape> =
            (0..u).map(|i| StreamHandle::new(seed, StreamId::WorkloadArrival(i)).tape()).collect();
        let mut work: Vec<Tape> =
            (0..u).map(|i| StreamHandle::new(seed, StreamId::WorkloadService(i)).tape()).collect();
        let mut jobs: Vec<VecDeque<u64>> = vec![VecDeque::new(); u];
        let mut state = QueueState::zeros(u);
        let mut out = Assignment::new();
        let mut log = BusyCycleLog::default();
        let mut done: Vec<(usize, usize)> = Vec::with_capacity(1);
        for t in 1..=horizon {
            for (x, jq) in state.q.iter_mut().zip(&jobs) {
                *x = jq.len() as u64;
            }
            if state.is_empty() {
                log.push_zero_hit(t);
            }
            sched.decide(t, &state, &mut out);
            if let Err(reason) = out.check(&state, 1) {
                return Err(EngineError::SchedulerViolation {
                    t,
                    system: 0,
                    scheduler: sched.name(),
                    reason,
                });
            }
            if !state.is_empty() && out.is_empty() {
                return Err(EngineError::NotWorkConserving { t, scheduler: sched.name() });
            }
            done.clear();
            if let Some(&(i, j)) = out.pairs().first() {
                let head = jobs[i].front_mut().expect("checked nonempty");
                *head -= 1;
                if *head == 0 {
                    jobs[i].pop_front();
                    done.push((i, j));
                }
            }
            sched.observe(&out, &done);
            for i in 0..u {
                if arrivals[i].next_uniform() < params.lambda()[i] {
                    jobs[i].push_back(geometric_requirement(work[i].next_uniform(), params.mu(i, 0)));
                }
            }
        }
        logs.push(log);
    }
    Ok(logs)
}
