//! File-based front end for `cmu-core`: instance loading, artifact export,
//! parallel replications and the subcommands behind the `cmu` binary.

pub mod config;
pub mod export;

use std::path::Path;

use cmu_core::engine::{self, RunOptions};
use cmu_core::experiments::{self, RegretReport, DEFAULT_GRID};
use cmu_core::model::{capacity_contains, validate};
use cmu_core::rng::replication_seed;
use cmu_core::schedulers::{cmu_order, PriorityOrder, SchedulerSpec};
use cmu_core::stability::{self, check_structure, classify_2x2, hierarchical_verdict, ServiceRule, Status};
use cmu_core::SystemParams;
use rayon::prelude::*;
use serde::Serialize;

pub use config::{Overrides, RunConfig};

/// Usage and configuration problems exit with 2, analysis failures with 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn parse_scheduler(s: &str) -> Result<SchedulerSpec, CliError> {
    SchedulerSpec::parse(s).map_err(|e| CliError::Config(format!("scheduler '{s}': {e}")))
}

fn fmt_list<T: std::fmt::Display>(xs: &[T]) -> String {
    format!("[{}]", xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
}

/// Log-spaced grid points below `horizon`, then `horizon` itself.
pub fn horizon_grid(horizon: u64) -> Vec<u64> {
    let mut g: Vec<u64> = DEFAULT_GRID.iter().copied().filter(|&t| t < horizon).collect();
    let mut extra = 1_000_000u64;
    while extra < horizon {
        for m in [1, 2, 5] {
            if m * extra < horizon {
                g.push(m * extra);
            }
        }
        extra *= 10;
    }
    if g.is_empty() && horizon >= 2 {
        g.push(horizon / 2);
    }
    g.push(horizon);
    g
}

/// Regret replications spread over the rayon pool; the result does not
/// depend on the number of threads.
pub fn regret_parallel(
    params: &SystemParams,
    learner: &SchedulerSpec,
    grid: &[u64],
    reps: usize,
    seed: u64,
    discount: Option<f64>,
) -> Result<RegretReport, CliError> {
    experiments::check_learner(params, learner).map_err(|e| CliError::Config(e.to_string()))?;
    let genie = experiments::genie_for(learner);
    let outcomes = (0..reps as u64)
        .into_par_iter()
        .map(|r| experiments::regret_replication(params, learner, &genie, grid, replication_seed(seed, r), discount))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?;
    Ok(RegretReport::aggregate(grid, &outcomes, seed))
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<String, CliError> {
    let name = cfg.scheduler.as_deref().unwrap_or("cmu-maxweight");
    let spec = parse_scheduler(name)?;
    let mut sched = spec.build(&cfg.params, cfg.seed).map_err(|e| CliError::Config(e.to_string()))?;
    let opts = RunOptions { initial: None, discount: cfg.discount };
    let out = engine::run(&cfg.params, &mut *sched, cfg.horizon, cfg.seed, &opts).map_err(runtime)?;
    export::write_trace_csv(&cfg.out.join("trace.csv"), &out.trace, cfg.params.num_queues())?;
    export::write_busy_csv(&cfg.out.join("busy_cycles.csv"), &out.busy)?;
    Ok(format!(
        "simulate scheduler={name} T={} seed={} cum_cost={} final_q={} cycles={}",
        cfg.horizon,
        cfg.seed,
        out.cum_cost,
        fmt_list(&out.final_state.q),
        out.busy.cycle_lengths.len()
    ))
}

pub fn cmd_regret(cfg: &RunConfig) -> Result<String, CliError> {
    let default = if cfg.params.num_servers() == 1 { "cmuhat-single" } else { "cmuhat-parallel" };
    let name = cfg.scheduler.as_deref().unwrap_or(default);
    let learner = parse_scheduler(name)?;
    let grid = horizon_grid(cfg.horizon);
    let report = regret_parallel(&cfg.params, &learner, &grid, cfg.reps, cfg.seed, cfg.discount)?;
    export::write_json(&cfg.out.join("regret.json"), &report)?;
    export::write_regret_csv(&cfg.out.join("regret.csv"), &report)?;
    let last = grid.len() - 1;
    let plateau = match &report.plateau {
        Some(p) => format!("{} delta_psi={} pooled_se={}", if p.within_two_se { "pass" } else { "fail" }, p.delta_psi, p.pooled_se),
        None => "n/a".into(),
    };
    Ok(format!(
        "regret learner={name} reps={} T={} psi={} stderr={} plateau={plateau}",
        cfg.reps, grid[last], report.psi[last], report.stderr[last]
    ))
}

#[derive(Debug, Serialize)]
struct StabilityReport {
    method: &'static str,
    order: Vec<(usize, usize)>,
    verdict: stability::StabilityVerdict,
    feasibility: Option<stability::FeasibilityResult>,
}

fn analysis_order(cfg: &RunConfig) -> Result<PriorityOrder, CliError> {
    match cfg.scheduler.as_deref().map(parse_scheduler).transpose()? {
        Some(SchedulerSpec::StaticPriority(edges)) => PriorityOrder::new(edges).map_err(|e| CliError::Config(e.to_string())),
        _ => cmu_order(&cfg.params).map_err(|e| CliError::Config(e.to_string())),
    }
}

pub fn cmd_stability(cfg: &RunConfig) -> Result<String, CliError> {
    let p = &cfg.params;
    let order = analysis_order(cfg)?;
    let is_cmu = cmu_order(p).ok().as_ref() == Some(&order);
    let (method, mut verdict) = if is_cmu && check_structure(p).is_ok() {
        ("two-by-two", classify_2x2(p).map_err(runtime)?)
    } else {
        ("hierarchical", hierarchical_verdict(p, &order, &cfg.truncation).map_err(runtime)?)
    };
    let feasibility = stability::feasibility_alpha(p, &ServiceRule::Greedy(order.clone())).ok();
    if let Some(f) = &feasibility {
        verdict.alpha_witness = f.alpha.clone();
    }
    let levels = if verdict.levels.is_empty() { verdict.per_level_margins.len() } else { verdict.levels.len() };
    let summary = format!(
        "stability method={method} status={:?} margins={} levels={levels}",
        verdict.status,
        fmt_list(&verdict.per_level_margins),
    );
    let inconclusive = verdict.status == Status::Inconclusive;
    let report = StabilityReport { method, order: order.edges().iter().map(|&(i, j)| (i + 1, j + 1)).collect(), verdict, feasibility };
    export::write_json(&cfg.out.join("stability.json"), &report)?;
    if inconclusive && cfg.strict {
        return Err(CliError::Runtime(format!("{summary} (inconclusive under --strict)")));
    }
    Ok(summary)
}

pub fn cmd_capacity(cfg: &RunConfig) -> Result<String, CliError> {
    let c = capacity_contains(&cfg.params).map_err(runtime)?;
    let v = validate(&cfg.params);
    #[derive(Serialize)]
    struct Out<'a> {
        capacity: &'a cmu_core::CapacityResult,
        validation: &'a cmu_core::ValidationReport,
    }
    export::write_json(&cfg.out.join("capacity.json"), &Out { capacity: &c, validation: &v })?;
    Ok(format!("capacity inside={} margin={} boundary={} delta={}", c.inside, c.margin, c.boundary, v.delta_gap))
}

pub fn cmd_demo_instability(cfg: &RunConfig) -> Result<String, CliError> {
    let r = experiments::instability_demo(&cfg.params, cfg.horizon, cfg.reps, cfg.seed).map_err(|e| match e {
        experiments::ExperimentError::Setup(s) => CliError::Config(s),
        other => runtime(other),
    })?;
    export::write_json(&cfg.out.join("instability.json"), &r)?;
    Ok(format!(
        "demo-instability T={} reps={} slope={} ci=[{},{}] positive={}/{} b={} above_bt={} inside={}",
        cfg.horizon,
        cfg.reps,
        r.slopes.mean_slope,
        r.slopes.ci_low,
        r.slopes.ci_high,
        r.slopes.positive_replications,
        cfg.reps,
        r.b,
        r.fraction_above_bt,
        r.capacity_inside
    ))
}

/// Comma-separated scheduler names; bare `i-j` tokens continue the
/// preceding `static-priority:` list.
pub fn split_scheduler_list(list: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for tok in list.split(',').map(str::trim) {
        let is_rank = tok.split_once('-').is_some_and(|(a, b)| {
            !a.is_empty() && !b.is_empty() && a.bytes().all(|c| c.is_ascii_digit()) && b.bytes().all(|c| c.is_ascii_digit())
        });
        match out.last_mut() {
            Some(prev) if is_rank && prev.starts_with("static-priority:") => {
                prev.push(',');
                prev.push_str(tok);
            }
            _ => out.push(tok.to_string()),
        }
    }
    out
}

/// Default comparison set: cmu priority, its reverse and the learner.
fn busy_cycle_specs(cfg: &RunConfig) -> Result<Vec<SchedulerSpec>, CliError> {
    if let Some(list) = &cfg.scheduler {
        let specs = split_scheduler_list(list).iter().map(|s| parse_scheduler(s)).collect::<Result<Vec<_>, _>>()?;
        if specs.len() < 2 {
            return Err(CliError::Config(format!("busy-cycle-check needs at least two schedulers, got '{list}'")));
        }
        return Ok(specs);
    }
    let order = cmu_order(&cfg.params).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rev = order.edges().to_vec();
    rev.reverse();
    Ok(vec![SchedulerSpec::CmuGreedyPriority, SchedulerSpec::StaticPriority(rev), SchedulerSpec::CmuHatSingle])
}

pub fn cmd_busy_cycle_check(cfg: &RunConfig) -> Result<String, CliError> {
    let specs = busy_cycle_specs(cfg)?;
    let r = experiments::busy_cycle_equality(&cfg.params, &specs, cfg.horizon, cfg.seed).map_err(runtime)?;
    export::write_busy_csv(&cfg.out.join("busy_cycles.csv"), &r.logs[0])?;
    export::write_json(&cfg.out.join("busy_cycle_check.json"), &r)?;
    let line = format!(
        "busy-cycle-check equal={} schedulers={} cycles={} T={} seed={}",
        r.equal,
        specs.len(),
        r.logs[0].cycle_lengths.len(),
        cfg.horizon,
        cfg.seed
    );
    if !r.equal {
        return Err(CliError::Runtime(format!("{line} first_mismatch={:?}", r.first_mismatch)));
    }
    Ok(line)
}

/// Loads `instance` and runs the named subcommand.
pub fn dispatch(command: &str, instance: &Path, over: Overrides) -> Result<String, CliError> {
    let cfg = RunConfig::load(instance, over)?;
    match command {
        "simulate" => cmd_simulate(&cfg),
        "regret" => cmd_regret(&cfg),
        "stability" => cmd_stability(&cfg),
        "capacity" => cmd_capacity(&cfg),
        "demo-instability" => cmd_demo_instability(&cfg),
        "busy-cycle-check" => cmd_busy_cycle_check(&cfg),
        other => Err(CliError::Config(format!("unknown command {other}"))),
    }
}
