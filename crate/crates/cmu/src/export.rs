//! CSV and JSON artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use cmu_core::engine::{BusyCycleLog, TraceRecord};
use cmu_core::experiments::RegretReport;
use serde::Serialize;

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

fn create(path: &Path) -> Result<File, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map_err(|e| io_err(path, e))
}

/// `i-j` pairs, one-based, joined by `;`.
pub fn format_pairs(pairs: &[(usize, usize)]) -> String {
    pairs.iter().map(|(i, j)| format!("{}-{}", i + 1, j + 1)).collect::<Vec<_>>().join(";")
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRecord], queues: usize) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(create(path)?));
    let mut header = vec!["t".to_string()];
    header.extend((1..=queues).map(|i| format!("q_{i}")));
    header.extend((1..=queues).map(|i| format!("a_{i}")));
    header.extend(["assign", "served", "slot_cost", "explored"].map(String::from));
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for r in trace {
        row.clear();
        row.push(r.t.to_string());
        row.extend(r.q.q.iter().map(|x| x.to_string()));
        row.extend(r.arrivals.iter().map(|&a| (a as u8).to_string()));
        row.push(format_pairs(r.assignment.pairs()));
        row.push(format_pairs(&r.successes));
        row.push(r.slot_cost.to_string());
        row.push((r.explored as u8).to_string());
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_busy_csv(path: &Path, log: &BusyCycleLog) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(create(path)?));
    w.write_record(["cycle_index", "length"]).map_err(|e| io_err(path, e))?;
    for (k, len) in log.cycle_lengths.iter().enumerate() {
        w.write_record([(k + 1).to_string(), len.to_string()]).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_regret_csv(path: &Path, report: &RegretReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(create(path)?));
    w.write_record(["T", "J", "J_star", "psi", "stderr"]).map_err(|e| io_err(path, e))?;
    for k in 0..report.grid.len() {
        w.write_record([
            report.grid[k].to_string(),
            report.j[k].to_string(),
            report.j_star[k].to_string(),
            report.psi[k].to_string(),
            report.stderr[k].to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| io_err(path, e))?;
    f.write_all(b"\n").map_err(|e| io_err(path, e))?;
    f.flush().map_err(|e| io_err(path, e))
}
