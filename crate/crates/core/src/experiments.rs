//! Experiment harnesses built on coupled runs.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{self, BusyCycleLog, EngineError, TraceRecord};
use crate::model::{validate, Assignment, QueueState, SystemParams};
use crate::rng::{replication_seed, StreamHandle, StreamId};
use crate::schedulers::{cmu_order, upsilon, MaxWeight, ScheduleError, Scheduler, SchedulerSpec, StaticPriority};
use crate::stability::{classify_2x2, StabilityError, Status};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error("{0}")]
    Setup(String),
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (m, libm::sqrt(var / n as f64))
}

/// Two-sided 95% Student t quantile.
pub fn t_quantile_975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179,
        2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
        2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    if df == 0 {
        return f64::INFINITY;
    }
    if df <= 30 {
        return TABLE[df - 1];
    }
    let z = 1.959964;
    let d = df as f64;
    z + (z * z * z + z) / (4.0 * d) + (5.0 * libm::pow(z, 5.0) + 16.0 * z * z * z + 3.0 * z) / (96.0 * d * d)
}

/// Log-spaced default horizon grid.
pub const DEFAULT_GRID: [u64; 7] = [1_000, 2_000, 5_000, 10_000, 20_000, 50_000, 100_000];

/// One coupled learner/genie replication, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicationOutcome {
    pub seed: u64,
    pub j: Vec<f64>,
    pub j_star: Vec<f64>,
    /// `|Q(t) - Q*(t)|_1` at each grid point.
    pub gap: Vec<f64>,
    /// Learner's smallest link sample count at each grid point.
    pub n_min: Vec<u64>,
    pub last_explore_slot: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlateauTest {
    pub delta_psi: f64,
    pub pooled_se: f64,
    pub within_two_se: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegretReport {
    pub grid: Vec<u64>,
    pub j: Vec<f64>,
    pub j_star: Vec<f64>,
    pub psi: Vec<f64>,
    /// Standard error of `psi`, from paired per-replication differences.
    pub stderr: Vec<f64>,
    pub queue_gap: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub plateau: Option<PlateauTest>,
    /// Share of replications whose last exploration came before half the horizon.
    pub explore_stopped_fraction: f64,
    pub last_explore_slots: Vec<Option<u64>>,
    /// Share of replications with `N_min(T) >= Upsilon(T)`.
    pub n_min_ok_fraction: f64,
}

impl RegretReport {
    pub fn aggregate(grid: &[u64], outcomes: &[ReplicationOutcome], seed: u64) -> Self {
        let g = grid.len();
        let col = |f: &dyn Fn(&ReplicationOutcome) -> f64| -> (f64, f64) {
            let xs: Vec<f64> = outcomes.iter().map(f).collect();
            mean_se(&xs)
        };
        let mut j = Vec::with_capacity(g);
        let mut j_star = Vec::with_capacity(g);
        let mut psi = Vec::with_capacity(g);
        let mut stderr = Vec::with_capacity(g);
        let mut queue_gap = Vec::with_capacity(g);
        for k in 0..g {
            j.push(col(&|o| o.j[k]).0);
            j_star.push(col(&|o| o.j_star[k]).0);
            let (m, se) = col(&|o| o.j[k] - o.j_star[k]);
            psi.push(m);
            stderr.push(se);
            queue_gap.push(col(&|o| o.gap[k]).0);
        }
        let plateau = (g >= 2).then(|| {
            let delta = psi[g - 1] - psi[g - 2];
            let pooled = libm::sqrt(stderr[g - 1] * stderr[g - 1] + stderr[g - 2] * stderr[g - 2]);
            PlateauTest { delta_psi: delta, pooled_se: pooled, within_two_se: delta.abs() <= 2.0 * pooled }
        });
        let horizon = grid.last().copied().unwrap_or(0);
        let n = outcomes.len().max(1) as f64;
        let stopped = outcomes
            .iter()
            .filter(|o| o.last_explore_slot.is_none_or(|s| 2 * s < horizon))
            .count() as f64
            / n;
        let ups = upsilon(horizon);
        let nmin_ok =
            outcomes.iter().filter(|o| o.n_min.last().is_some_and(|&v| v as f64 >= ups)).count() as f64 / n;
        Self {
            grid: grid.to_vec(),
            j,
            j_star,
            psi,
            stderr,
            queue_gap,
            reps: outcomes.len(),
            seed,
            plateau,
            explore_stopped_fraction: stopped,
            last_explore_slots: outcomes.iter().map(|o| o.last_explore_slot).collect(),
            n_min_ok_fraction: nmin_ok,
        }
    }
}

/// Checks the learner/instance pairing of a regret experiment.
pub fn check_learner(params: &SystemParams, learner: &SchedulerSpec) -> Result<(), ExperimentError> {
    if *learner == SchedulerSpec::CmuHatSingle && params.num_servers() != 1 {
        return Err(ExperimentError::Setup(format!(
            "cmuhat-single needs one server, instance has {}",
            params.num_servers()
        )));
    }
    if !validate(params).is_cmu_well_defined {
        return Err(ExperimentError::Setup(String::from("cmu rule is ambiguous on this instance (delta = 0)")));
    }
    Ok(())
}

fn check_grid(grid: &[u64]) -> Result<(), ExperimentError> {
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Setup(String::from("horizon grid must be positive and increasing")));
    }
    Ok(())
}

/// One replication of learner against genie on common random numbers.
pub fn regret_replication(
    params: &SystemParams,
    learner: &SchedulerSpec,
    genie: &SchedulerSpec,
    grid: &[u64],
    seed: u64,
    discount: Option<f64>,
) -> Result<ReplicationOutcome, ExperimentError> {
    check_grid(grid)?;
    let mut a = learner.build(params, seed)?;
    let mut b = genie.build(params, seed)?;
    let horizon = *grid.last().expect("nonempty grid");
    let g = grid.len();
    let mut out = ReplicationOutcome {
        seed,
        j: vec![0.0; g],
        j_star: vec![0.0; g],
        gap: vec![0.0; g],
        n_min: vec![0; g],
        last_explore_slot: None,
    };
    let mut cost = [0.0f64; 2];
    let mut weight = 1.0;
    let mut next = 0usize;
    let mut q_learner: Vec<u64> = vec![0; params.num_queues()];
    {
        let mut systems: [&mut dyn Scheduler; 2] = [&mut *a, &mut *b];
        engine::simulate(params, &mut systems, &[], horizon, seed, discount, &mut |s, v| {
            if s == 0 {
                if let Some(beta) = discount {
                    weight *= beta;
                }
                if v.explored {
                    out.last_explore_slot = Some(v.t);
                }
                q_learner.copy_from_slice(v.q);
            }
            cost[s] += weight * v.slot_cost;
            if s == 0 && next < g && v.t == grid[next] {
                out.n_min[next] = v.stats.map(|st| st.n_min()).unwrap_or(0);
            }
            if s == 1 && next < g && v.t == grid[next] {
                out.j[next] = cost[0];
                out.j_star[next] = cost[1];
                out.gap[next] = q_learner.iter().zip(v.q).map(|(x, y)| x.abs_diff(*y) as f64).sum();
                next += 1;
            }
        })?;
    }
    Ok(out)
}

/// Sequential regret experiment; replication `r` uses `replication_seed(seed, r)`.
pub fn regret_experiment(
    params: &SystemParams,
    learner: &SchedulerSpec,
    grid: &[u64],
    reps: usize,
    seed: u64,
    discount: Option<f64>,
) -> Result<RegretReport, ExperimentError> {
    check_learner(params, learner)?;
    let genie = genie_for(learner);
    let outcomes = (0..reps as u64)
        .map(|r| regret_replication(params, learner, &genie, grid, replication_seed(seed, r), discount))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RegretReport::aggregate(grid, &outcomes, seed))
}

/// Genie matching the learner's exploit rule.
pub fn genie_for(learner: &SchedulerSpec) -> SchedulerSpec {
    match learner {
        SchedulerSpec::CmuHatParallel(crate::schedulers::ExploitRule::GreedyPriority)
        | SchedulerSpec::CmuGreedyPriority => SchedulerSpec::CmuGreedyPriority,
        SchedulerSpec::StaticPriority(e) => SchedulerSpec::StaticPriority(e.clone()),
        _ => SchedulerSpec::CmuMaxWeight,
    }
}

/// Growth rate of one queue over the second half of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlopeEstimate {
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub final_length: u64,
}

impl SlopeEstimate {
    pub fn significantly_positive(&self) -> bool {
        self.ci_low > 0.0
    }

    pub fn includes_zero(&self) -> bool {
        self.ci_low <= 0.0 && self.ci_high >= 0.0
    }
}

pub const SLOPE_BATCHES: usize = 20;

/// Batch-means slope from queue lengths at equally spaced checkpoints.
pub fn batch_slope(checkpoints: &[u64], batch_len: u64, final_length: u64) -> SlopeEstimate {
    let slopes: Vec<f64> = checkpoints
        .windows(2)
        .map(|w| (w[1] as f64 - w[0] as f64) / batch_len as f64)
        .collect();
    let (m, se) = mean_se(&slopes);
    let h = t_quantile_975(slopes.len().saturating_sub(1)) * se;
    SlopeEstimate { slope: m, ci_low: m - h, ci_high: m + h, final_length }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlopeReport {
    pub queue: usize,
    pub horizon: u64,
    pub per_replication: Vec<SlopeEstimate>,
    pub mean_slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub positive_replications: usize,
}

/// Runs `scheduler` and estimates the growth rate of queue `queue`.
pub fn slope_test(
    params: &SystemParams,
    scheduler: &SchedulerSpec,
    queue: usize,
    horizon: u64,
    reps: usize,
    seed: u64,
) -> Result<SlopeReport, ExperimentError> {
    if queue >= params.num_queues() {
        return Err(ExperimentError::Setup(format!("queue {} does not exist", queue + 1)));
    }
    let half = horizon / 2;
    let batch = (horizon - half) / SLOPE_BATCHES as u64;
    if batch == 0 {
        return Err(ExperimentError::Setup(format!("horizon {horizon} too short for {SLOPE_BATCHES} batches")));
    }
    let marks: Vec<u64> = (0..=SLOPE_BATCHES as u64).map(|k| horizon - (SLOPE_BATCHES as u64 - k) * batch).collect();
    let mut per = Vec::with_capacity(reps);
    for r in 0..reps as u64 {
        let s = replication_seed(seed, r);
        let mut sched = scheduler.build(params, s)?;
        let mut values = Vec::with_capacity(marks.len());
        let mut next = 0;
        let mut systems: [&mut dyn Scheduler; 1] = [&mut *sched];
        let out = engine::simulate(params, &mut systems, &[], horizon, s, None, &mut |_, v| {
            if next < marks.len() && v.t == marks[next] {
                values.push(v.q[queue]);
                next += 1;
            }
        })?;
        per.push(batch_slope(&values, batch, out[0].final_state.q[queue]));
    }
    let slopes: Vec<f64> = per.iter().map(|e| e.slope).collect();
    let (m, se) = mean_se(&slopes);
    let h = t_quantile_975(reps.saturating_sub(1)) * se;
    Ok(SlopeReport {
        queue,
        horizon,
        positive_replications: per.iter().filter(|e| e.significantly_positive()).count(),
        per_replication: per,
        mean_slope: m,
        ci_low: m - h,
        ci_high: m + h,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstabilityReport {
    pub slopes: SlopeReport,
    /// Half the mean fitted slope.
    pub b: f64,
    /// Share of replications with `Q2(T) > b T`.
    pub fraction_above_bt: f64,
    pub capacity_inside: bool,
    pub threshold_margin: f64,
}

/// Simulates the greedy cmu rule on a 2x2 instance classified unstable.
pub fn instability_demo(
    params: &SystemParams,
    horizon: u64,
    reps: usize,
    seed: u64,
) -> Result<InstabilityReport, ExperimentError> {
    let verdict = classify_2x2(params)?;
    if verdict.status != Status::Unstable {
        return Err(ExperimentError::Setup(format!("instance is classified {:?}, not Unstable", verdict.status)));
    }
    let cap = crate::model::capacity_contains(params).map_err(StabilityError::from)?;
    let slopes = slope_test(params, &SchedulerSpec::CmuGreedyPriority, 1, horizon, reps, seed)?;
    let b = 0.5 * slopes.mean_slope;
    let above = slopes.per_replication.iter().filter(|e| e.final_length as f64 > b * horizon as f64).count();
    Ok(InstabilityReport {
        fraction_above_bt: above as f64 / reps.max(1) as f64,
        b,
        slopes,
        capacity_inside: cap.inside,
        threshold_margin: *verdict.per_level_margins.last().unwrap_or(&f64::NAN),
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BusyCycleEquality {
    pub equal: bool,
    pub logs: Vec<BusyCycleLog>,
    /// `(scheduler index, cycle index)` of the first difference from scheduler 0.
    pub first_mismatch: Option<(usize, usize)>,
    pub scheduler_names: Vec<String>,
}

/// Replays one geometric workload under every scheduler and compares cycles.
pub fn busy_cycle_equality(
    params: &SystemParams,
    specs: &[SchedulerSpec],
    horizon: u64,
    seed: u64,
) -> Result<BusyCycleEquality, ExperimentError> {
    if specs.is_empty() {
        return Err(ExperimentError::Setup(String::from("no schedulers given")));
    }
    let mut built: Vec<Box<dyn Scheduler>> =
        specs.iter().map(|s| s.build(params, seed)).collect::<Result<_, _>>()?;
    let names = built.iter().map(|s| s.name()).collect();
    let mut refs: Vec<&mut dyn Scheduler> = built.iter_mut().map(|b| &mut **b as &mut dyn Scheduler).collect();
    let logs = engine::geometric_workload_run(params, &mut refs, horizon, seed)?;
    let mut first_mismatch = None;
    for (s, log) in logs.iter().enumerate().skip(1) {
        let base = &logs[0].cycle_lengths;
        let other = &log.cycle_lengths;
        if base != other {
            let idx = base.iter().zip(other).position(|(a, b)| a != b).unwrap_or(base.len().min(other.len()));
            first_mismatch = Some((s, idx));
            break;
        }
    }
    Ok(BusyCycleEquality { equal: first_mismatch.is_none(), logs, first_mismatch, scheduler_names: names })
}

/// Per-cycle probability floor of the sample-generating event.
pub fn free_exploration_rate(params: &SystemParams) -> f64 {
    let u = params.num_queues();
    let k = params.num_servers() as f64;
    (0..u).map(|i| queue_event_probability(params, i, k)).fold(f64::INFINITY, f64::min)
}

fn queue_event_probability(params: &SystemParams, i: usize, k: f64) -> f64 {
    let l = params.lambda();
    let arrive: f64 = l[i] * (0..l.len()).filter(|&x| x != i).map(|x| 1.0 - l[x]).product::<f64>();
    let miss: f64 = (0..params.num_servers()).map(|j| 1.0 - params.mu(i, j)).product();
    libm::pow(arrive, k) * libm::pow(miss, k - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExplorationEventEstimate {
    /// Per queue: cycles where the event held.
    pub hits: Vec<u64>,
    pub cycles: u64,
    /// Formula value per queue.
    pub predicted: Vec<f64>,
}

impl ExplorationEventEstimate {
    pub fn frequency(&self, i: usize) -> f64 {
        self.hits[i] as f64 / self.cycles.max(1) as f64
    }

    pub fn standard_error(&self, i: usize) -> f64 {
        let p = self.predicted[i];
        libm::sqrt(p * (1.0 - p) / self.cycles.max(1) as f64)
    }
}

/// Monte Carlo frequency of the event at busy-cycle starts, using explicit
/// per-link service draws under the max-weight genie.
pub fn exploration_event_frequency(
    params: &SystemParams,
    horizon: u64,
    seed: u64,
) -> Result<ExplorationEventEstimate, ExperimentError> {
    let u = params.num_queues();
    let k = params.num_servers();
    let mut arr = StreamHandle::new(seed, StreamId::Custom(1, 0)).tape();
    let mut srv = StreamHandle::new(seed, StreamId::Custom(2, 0)).tape();
    let total = horizon as usize + k;
    // Draws are pre-generated so that events can look ahead K slots.
    let mut a = vec![false; total * u];
    let mut s = vec![false; total * u * k];
    for t in 0..total {
        for i in 0..u {
            a[t * u + i] = arr.next_uniform() < params.lambda()[i];
            for j in 0..k {
                s[(t * u + i) * k + j] = srv.next_uniform() < params.mu(i, j);
            }
        }
    }
    let mut genie = MaxWeight::genie(params);
    let mut state = QueueState::zeros(u);
    let mut out = Assignment::new();
    let mut hits = vec![0u64; u];
    let mut cycles = 0u64;
    for t in 0..horizon as usize {
        if state.is_empty() {
            cycles += 1;
            for (i, h) in hits.iter_mut().enumerate() {
                let ok = (0..k).all(|d| (0..u).all(|x| a[(t + d) * u + x] == (x == i)))
                    && (0..k.saturating_sub(1)).all(|d| (0..k).all(|j| !s[((t + d) * u + i) * k + j]));
                if ok {
                    *h += 1;
                }
            }
        }
        genie.decide(t as u64 + 1, &state, &mut out);
        for &(i, j) in out.pairs() {
            if s[(t * u + i) * k + j] {
                state.q[i] -= 1;
            }
        }
        for i in 0..u {
            state.q[i] += a[t * u + i] as u64;
        }
    }
    let predicted = (0..u).map(|i| queue_event_probability(params, i, k as f64)).collect();
    Ok(ExplorationEventEstimate { hits, cycles, predicted })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoExploreOnset {
    pub last_explore_slot: Option<u64>,
    /// `(t, N_min(t))` at every slot where `N_min` changed.
    pub n_min_trajectory: Vec<(u64, u64)>,
}

/// Last exploring slot and the minimum link sample count over a learner trace.
pub fn no_explore_onset(trace: &[TraceRecord], queues: usize, servers: usize) -> NoExploreOnset {
    let mut n = vec![0u64; queues * servers];
    let mut last = None;
    let mut traj: Vec<(u64, u64)> = Vec::new();
    let mut cur = 0u64;
    for r in trace {
        if r.explored {
            last = Some(r.t);
        }
        for &(i, j) in r.assignment.pairs() {
            n[i * servers + j] += 1;
        }
        let m = n.iter().copied().min().unwrap_or(0);
        if traj.is_empty() || m != cur {
            traj.push((r.t, m));
            cur = m;
        }
    }
    NoExploreOnset { last_explore_slot: last, n_min_trajectory: traj }
}

/// Convenience: the greedy cmu scheduler for an instance.
pub fn cmu_priority(params: &SystemParams) -> Result<StaticPriority, ExperimentError> {
    Ok(StaticPriority::new(cmu_order(params)?))
}
