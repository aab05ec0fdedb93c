//! Experiment orchestration: configs, episodes, training phases,
//! evaluation, reports and the run manifest.

pub mod config;
pub mod episode;
pub mod eval;
pub mod report;
pub mod train;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use config::{derive_seed, RunConfig};
pub use episode::{run_episode, AgentRole, Driver, EpisodeContext, EpisodeMetrics, StepRecord, TerminalCause};
pub use eval::{aggregate, evaluate_scenario, trial_seeds, AdversaryPolicy, EvalPolicy, EvaluationReport};
pub use report::{emit_report, pct_change, report_rows, ReportFormat, ReportRow};
pub use train::{
    checkpoint_meta, eval_frame_skip, freeze_state, load_checkpoint, restore_agent, save_checkpoint, train_baseline,
    train_coupled, TrainSummary,
};

use crate::error::{Error, Result};
use crate::qnet::FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    /// Episode or trial seeds, in order.
    pub seeds: Vec<u64>,
    /// Output files relative to the run directory.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub crate_version: String,
    pub checkpoint_format: u32,
    pub phases: BTreeMap<String, PhaseRecord>,
}

/// Adds or replaces one phase in `out/manifest.json`. A manifest written
/// under a different config hash is replaced.
pub fn record_phase(out: &Path, cfg: &RunConfig, phase: &str, record: PhaseRecord) -> Result<()> {
    let path = out.join("manifest.json");
    let hash = cfg.hash();
    let mut manifest = std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str::<Manifest>(&t).ok())
        .filter(|m| m.config_hash == hash && m.seed == cfg.seed)
        .unwrap_or(Manifest {
            config_hash: hash,
            seed: cfg.seed,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            checkpoint_format: FORMAT_VERSION,
            phases: BTreeMap::new(),
        });
    manifest.phases.insert(phase.into(), record);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

/// Writes the resolved config next to the outputs.
pub fn write_config(out: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("config.json");
    std::fs::write(&path, cfg.to_json_pretty()).map_err(|e| Error::io(&path, e))
}

pub fn relative(out: &Path, p: &Path) -> String {
    p.strip_prefix(out).unwrap_or(p).to_string_lossy().into_owned()
}
