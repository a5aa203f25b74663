//! Experiment runner behind the `nca-lab` binary.
//!
//! Every command writes into an output directory containing a
//! `manifest.json` (the resolved invocation plus a timestamp) and CSV
//! artifacts that depend only on the invocation, so replaying a manifest
//! reproduces them byte for byte regardless of worker count.

mod analyze;
mod config;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shapes::TargetSpec;

pub use analyze::{cmd_analyze, AnalysisConfig, MetricRow, METRICS_HEADER};
pub use config::{ExperimentConfig, Preset, Variant};
pub use run::{
    cmd_evolve, cmd_finetune, cmd_simulate, cmd_sweep_k, load_champions, ReplicateOutcome, RunOptions,
    SimulateOptions, SimulateOutcome, SweepOutcome, SUMMARY_HEADER,
};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "NCA_LAB_WORKERS";

pub const MANIFEST_FILE: &str = "manifest.json";

/// How replicate-level 95% confidence intervals are computed.
pub const CI_METHOD: &str = "normal approximation: mean +/- 1.96 * sample sd / sqrt(n) over replicate champions";

/// The command that produced a run directory, with everything needed to
/// replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Invocation {
    Evolve {
        config: ExperimentConfig,
    },
    SweepK {
        config: ExperimentConfig,
        k_list: Vec<usize>,
    },
    Finetune {
        config: ExperimentConfig,
        champions_dir: PathBuf,
        target: TargetSpec,
        variant: Variant,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub invocation: Invocation,
    pub tool_version: String,
    pub created_unix: u64,
    pub ci_method: String,
}

impl Manifest {
    pub fn new(invocation: Invocation) -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Manifest {
            invocation,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            ci_method: CI_METHOD.to_string(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }
}

/// Re-runs the invocation recorded in a manifest into `out`.
pub fn replay(manifest_path: impl AsRef<Path>, out: &Path, options: &RunOptions) -> Result<PathBuf> {
    let manifest = Manifest::load(manifest_path)?;
    match manifest.invocation {
        Invocation::Evolve { config } => {
            cmd_evolve(&config, out, options)?;
        }
        Invocation::SweepK { config, k_list } => {
            cmd_sweep_k(&config, &k_list, out, options)?;
        }
        Invocation::Finetune {
            config,
            champions_dir,
            target,
            variant,
        } => {
            cmd_finetune(&champions_dir, &target, variant, &config, out, options)?;
        }
    }
    Ok(out.to_path_buf())
}

/// Worker count from `NCA_LAB_WORKERS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
