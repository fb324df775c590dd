//! Instance files and run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use cmu_core::stability::TruncationConfig;
use cmu_core::SystemParams;
use serde::Deserialize;

use crate::CliError;

/// Optional overrides of the truncation defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationFields {
    pub scalar_bound: Option<u64>,
    pub joint_bound: Option<u64>,
    pub max_states: Option<usize>,
    pub tol: Option<f64>,
    pub max_sweeps: Option<usize>,
}

/// On-disk instance: the model keys plus optional run fields.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(rename = "U")]
    pub u: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub cost: Vec<f64>,
    pub scheduler: Option<String>,
    pub horizon: Option<u64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub discount: Option<f64>,
    pub out: Option<PathBuf>,
    pub truncation: Option<TruncationFields>,
}

impl InstanceFile {
    pub fn params(&self) -> Result<SystemParams, CliError> {
        if self.lambda.len() != self.u || self.mu.len() != self.u {
            return Err(CliError::Config(format!(
                "U = {} but lambda has {} entries and mu has {} rows",
                self.u,
                self.lambda.len(),
                self.mu.len()
            )));
        }
        if let Some(row) = self.mu.iter().position(|r| r.len() != self.k) {
            return Err(CliError::Config(format!("K = {} but mu row {} has {} entries", self.k, row + 1, self.mu[row].len())));
        }
        SystemParams::new(self.lambda.clone(), self.mu.clone(), self.cost.clone())
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

pub fn read_instance(path: &Path) -> Result<InstanceFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read instance {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("malformed instance {}: {e}", path.display())))
}

/// Command-line values; `None` falls back to the instance file, then defaults.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scheduler: Option<String>,
    pub horizon: Option<u64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub discount: Option<f64>,
    pub out: Option<PathBuf>,
    pub truncation: Option<u64>,
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub instance: PathBuf,
    pub params: SystemParams,
    pub scheduler: Option<String>,
    pub horizon: u64,
    pub reps: usize,
    pub seed: u64,
    pub discount: Option<f64>,
    pub out: PathBuf,
    pub truncation: TruncationConfig,
    pub strict: bool,
}

pub const DEFAULT_HORIZON: u64 = 100_000;
pub const DEFAULT_REPS: usize = 200;

impl RunConfig {
    pub fn load(instance: &Path, over: Overrides) -> Result<Self, CliError> {
        let file = read_instance(instance)?;
        let params = file.params()?;
        let horizon = over.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON);
        let reps = over.reps.or(file.reps).unwrap_or(DEFAULT_REPS);
        if horizon == 0 {
            return Err(CliError::Config("horizon must be at least 1".into()));
        }
        if reps == 0 {
            return Err(CliError::Config("reps must be at least 1".into()));
        }
        let discount = over.discount.or(file.discount);
        if let Some(b) = discount {
            if !(b > 0.0 && b < 1.0) {
                return Err(CliError::Config(format!("discount {b} is not in (0, 1)")));
            }
        }
        let mut truncation = TruncationConfig::default();
        if let Some(t) = &file.truncation {
            truncation.scalar_bound = t.scalar_bound.unwrap_or(truncation.scalar_bound);
            truncation.joint_bound = t.joint_bound.unwrap_or(truncation.joint_bound);
            truncation.max_states = t.max_states.unwrap_or(truncation.max_states);
            truncation.tol = t.tol.unwrap_or(truncation.tol);
            truncation.max_sweeps = t.max_sweeps.unwrap_or(truncation.max_sweeps);
        }
        if let Some(n) = over.truncation {
            if n == 0 {
                return Err(CliError::Config("truncation bound must be positive".into()));
            }
            truncation.scalar_bound = n;
            truncation.joint_bound = n;
        }
        Ok(Self {
            instance: instance.to_path_buf(),
            params,
            scheduler: over.scheduler.or(file.scheduler),
            horizon,
            reps,
            seed: over.seed.or(file.seed).unwrap_or(0),
            discount,
            out: over.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            truncation,
            strict: over.strict,
        })
    }
}
