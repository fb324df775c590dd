use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cmu::{dispatch, Overrides};

#[derive(Parser)]
#[command(name = "cmu", version, about = "Simulate, learn and analyse cmu scheduling on parallel-server queues")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheduler and write trace.csv and busy_cycles.csv.
    Simulate(Flags),
    /// Coupled learner-vs-genie replications; writes regret.json and regret.csv.
    Regret(Flags),
    /// Stability verdict of the cmu rule (or a static priority); writes stability.json.
    Stability(Flags),
    /// Capacity-region membership and the cmu gap; writes capacity.json.
    Capacity(Flags),
    /// Queue-2 growth under greedy cmu on an unstable 2x2 instance.
    DemoInstability(Flags),
    /// Compare busy cycles of single-server schedulers on one workload.
    BusyCycleCheck(Flags),
}

#[derive(Args)]
struct Flags {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Scheduler string, e.g. cmu-maxweight or static-priority:1-1,2-1.
    #[arg(long)]
    scheduler: Option<String>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Discount factor in (0, 1).
    #[arg(long)]
    discount: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Starting truncation bound for stationary solves.
    #[arg(long)]
    truncation: Option<u64>,
    /// Treat an inconclusive verdict as a failure.
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (name, f) = match cli.command {
        Command::Simulate(f) => ("simulate", f),
        Command::Regret(f) => ("regret", f),
        Command::Stability(f) => ("stability", f),
        Command::Capacity(f) => ("capacity", f),
        Command::DemoInstability(f) => ("demo-instability", f),
        Command::BusyCycleCheck(f) => ("busy-cycle-check", f),
    };
    let over = Overrides {
        scheduler: f.scheduler,
        horizon: f.horizon,
        reps: f.reps,
        seed: f.seed,
        discount: f.discount,
        out: f.out,
        truncation: f.truncation,
        strict: f.strict,
    };
    match dispatch(name, &f.instance, over) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
