//! Baseline training, coupled protagonist/adversary training and the
//! checkpoint plumbing they share.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{derive_seed, RunConfig};
use super::episode::{run_episode, AgentRole, Driver, EpisodeContext, EpisodeMetrics, StepRecord};
use crate::agent::{epsilon_at, frame_skip_k, DqnAgent};
use crate::error::{Error, Result};
use crate::qnet::{deserialize_params, serialize_params, CheckpointMeta, DuelingNet};
use crate::sim::{spawn_scenario, ScenarioKind, ScenarioSpec, TrackSpec};

pub(crate) const STREAM_BASELINE: u64 = 1;
pub(crate) const STREAM_COUPLED: u64 = 2;
pub(crate) const STREAM_AGENT: u64 = 3;
pub(crate) const STREAM_EVAL: u64 = 16;

pub fn checkpoint_meta(agent: &DqnAgent, cfg: &RunConfig, role: AgentRole, tag: &str, episodes: u64) -> CheckpointMeta {
    CheckpointMeta {
        shapes: agent.online.shapes(),
        layout: cfg.world.sensor.layout(),
        actions: agent.online.actions(),
        config_hash: cfg.hash(),
        role: role.name().into(),
        tag: tag.into(),
        steps: agent.steps,
        learn_steps: agent.learn_steps,
        episodes,
    }
}

pub fn save_checkpoint(path: &Path, net: &DuelingNet, meta: &CheckpointMeta) -> Result<()> {
    fs::write(path, serialize_params(net, meta)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path, cfg: &RunConfig) -> Result<(CheckpointMeta, DuelingNet)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    deserialize_params(&bytes, Some(&cfg.world.sensor.layout()))
}

/// Rebuilds a learner from stored parameters and counters. Replay and
/// optimizer moments start empty; the target network equals the online one.
pub fn restore_agent(
    cfg: &RunConfig,
    role: AgentRole,
    coupled: bool,
    meta: &CheckpointMeta,
    net: DuelingNet,
    seed: u64,
) -> DqnAgent {
    let mut agent = DqnAgent::from_params(cfg.agent_config(role, coupled), cfg.per.clone(), net, seed);
    agent.steps = meta.steps;
    agent.learn_steps = meta.learn_steps;
    agent
}

/// Action repeat a greedy evaluation uses for a checkpoint: the value the
/// schedule had reached when it was saved.
pub fn eval_frame_skip(cfg: &RunConfig, meta: &CheckpointMeta) -> usize {
    let role = if meta.role == AgentRole::Adversary.name() { AgentRole::Adversary } else { AgentRole::Protagonist };
    let sched = cfg.epsilon_schedule(role, meta.tag == "coupled");
    frame_skip_k(&cfg.schedules.frame_skip, epsilon_at(&sched, meta.steps))
}

/// CSV sink that can resume: rows for episodes at or after `start` are
/// dropped from an existing file before appending.
pub(crate) struct CsvLog {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvLog {
    pub(crate) fn open(path: &Path, resume_from: Option<u64>) -> Result<CsvLog> {
        let keep_header = match resume_from {
            Some(start) if path.exists() => {
                truncate_episode_rows(path, start)?;
                true
            }
            _ => false,
        };
        let file = if keep_header {
            OpenOptions::new().append(true).open(path)
        } else {
            File::create(path)
        }
        .map_err(|e| Error::io(path, e))?;
        let writer = csv::WriterBuilder::new().has_headers(!keep_header).from_writer(BufWriter::new(file));
        Ok(CsvLog { writer })
    }

    pub(crate) fn write<T: Serialize>(&mut self, row: &T) -> Result<()> {
        Ok(self.writer.serialize(row)?)
    }

    pub(crate) fn flush(&mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::Io { path: PathBuf::from("<csv log>"), source: e })
    }
}

/// Keeps the header and the rows whose first column is an episode index
/// below `start`.
fn truncate_episode_rows(path: &Path, start: u64) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut kept = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let ep = line.split(',').next().and_then(|s| s.parse::<u64>().ok());
        if i == 0 || ep.is_some_and(|ep| ep < start) {
            kept.push(line);
        }
    }
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for line in kept {
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub dir: PathBuf,
    /// Final protagonist checkpoint.
    pub protagonist: PathBuf,
    /// Final adversary checkpoint (coupled training only).
    pub adversary: Option<PathBuf>,
    /// Metrics of the episodes run by this call (resumed episodes excluded).
    pub metrics: Vec<EpisodeMetrics>,
    pub seeds: Vec<u64>,
}

fn episode_context<'a>(
    cfg: &'a RunConfig,
    p_rewards: &'a crate::rewards::ProtagonistRewardConfig,
    a_rewards: &'a crate::rewards::AdversaryRewardConfig,
    seed: u64,
    episode: u64,
) -> EpisodeContext<'a> {
    EpisodeContext {
        sensor: &cfg.world.sensor,
        protagonist_rewards: p_rewards,
        adversary_rewards: a_rewards,
        max_steps: cfg.world.max_steps,
        seed,
        episode,
    }
}

fn spawn(cfg: &RunConfig, track: &TrackSpec, kind: ScenarioKind, seed: u64) -> Result<crate::sim::World> {
    let spec = ScenarioSpec { kind, seed, spawn: cfg.world.spawn.clone() };
    spawn_scenario(&spec, track, &cfg.world.vehicle, cfg.world.dt)
}

/// Trains the protagonist alone on the empty course for
/// `training.baseline_episodes` episodes. Outputs go to `out/baseline`:
/// `episodes.csv`, `steps.csv`, periodic `protagonist_epN.ckpt` and the
/// final `protagonist.ckpt` (tag `baseline`). With `resume`, training
/// continues from `protagonist_latest.ckpt` when present.
pub fn train_baseline(cfg: &RunConfig, out: &Path, resume: bool) -> Result<TrainSummary> {
    let dir = out.join("baseline");
    create_dir(&dir)?;
    let track = cfg.track()?;
    let p_rewards = cfg.protagonist_rewards(&track);
    let a_rewards = cfg.adversary_rewards(&track);
    let latest = dir.join("protagonist_latest.ckpt");

    let (mut agent, start) = if resume && latest.exists() {
        let (meta, net) = load_checkpoint(&latest, cfg)?;
        let seed = derive_seed(cfg.seed, STREAM_AGENT, meta.episodes);
        (restore_agent(cfg, AgentRole::Protagonist, false, &meta, net, seed), meta.episodes)
    } else {
        let seed = derive_seed(cfg.seed, STREAM_AGENT, 0);
        (DqnAgent::new(cfg.agent_config(AgentRole::Protagonist, false), cfg.per.clone(), cfg.world.sensor.layout().len(), seed), 0)
    };
    let resume_from = resume.then_some(start);
    let mut episodes_log = CsvLog::open(&dir.join("episodes.csv"), resume_from)?;
    let mut steps_log = if cfg.training.step_log { Some(CsvLog::open(&dir.join("steps.csv"), resume_from)?) } else { None };

    let total = cfg.training.baseline_episodes;
    let mut metrics = Vec::new();
    let mut seeds = Vec::new();
    for e in start..total {
        let seed = derive_seed(cfg.seed, STREAM_BASELINE, e);
        let mut world = spawn(cfg, &track, ScenarioKind::NoTraffic, seed)?;
        let ctx = episode_context(cfg, &p_rewards, &a_rewards, seed, e);
        let mut log_err = Ok(());
        let mut sink = |r: &StepRecord| {
            if let Some(l) = steps_log.as_mut() {
                if log_err.is_ok() {
                    log_err = l.write(r);
                }
            }
        };
        let mut m = run_episode(&mut world, Driver::Learner(&mut agent), None, &ctx, Some(&mut sink))?;
        log_err?;
        m.scenario = ScenarioKind::NoTraffic.name().into();
        episodes_log.write(&m)?;
        metrics.push(m);
        seeds.push(seed);
        let done = e + 1;
        if cfg.training.checkpoint_every > 0 && done % cfg.training.checkpoint_every == 0 && done < total {
            let meta = checkpoint_meta(&agent, cfg, AgentRole::Protagonist, "baseline", done);
            save_checkpoint(&dir.join(format!("protagonist_ep{done}.ckpt")), &agent.online, &meta)?;
            save_checkpoint(&latest, &agent.online, &meta)?;
            episodes_log.flush()?;
        }
    }
    episodes_log.flush()?;
    if let Some(l) = steps_log.as_mut() {
        l.flush()?;
    }
    let meta = checkpoint_meta(&agent, cfg, AgentRole::Protagonist, "baseline", total.max(start));
    let final_path = dir.join("protagonist.ckpt");
    save_checkpoint(&final_path, &agent.online, &meta)?;
    save_checkpoint(&latest, &agent.online, &meta)?;
    Ok(TrainSummary { dir, protagonist: final_path, adversary: None, metrics, seeds })
}

/// Which agents are frozen in coupled episode `e` (0-based): windows of
/// `window` episodes alternate, starting with the adversary frozen.
pub fn freeze_state(e: u64, window: u64, simultaneous: bool) -> (bool, bool) {
    if simultaneous {
        return (false, false);
    }
    let adversary_frozen = (e / window) % 2 == 0;
    (!adversary_frozen, adversary_frozen)
}

/// Coupled training from a baseline checkpoint: both agents start as exact
/// copies of the baseline network. The protagonist keeps the baseline's
/// step counter; the adversary restarts its own exploration schedule.
/// Outputs go to `out/coupled`.
pub fn train_coupled(cfg: &RunConfig, out: &Path, baseline: &Path, resume: bool) -> Result<TrainSummary> {
    let dir = out.join("coupled");
    create_dir(&dir)?;
    let track = cfg.track()?;
    let p_rewards = cfg.protagonist_rewards(&track);
    let a_rewards = cfg.adversary_rewards(&track);
    let p_latest = dir.join("protagonist_latest.ckpt");
    let a_latest = dir.join("adversary_latest.ckpt");

    let (mut prot, mut adv, start) = if resume && p_latest.exists() && a_latest.exists() {
        let (pm, pn) = load_checkpoint(&p_latest, cfg)?;
        let (am, an) = load_checkpoint(&a_latest, cfg)?;
        let start = pm.episodes;
        (
            restore_agent(cfg, AgentRole::Protagonist, true, &pm, pn, derive_seed(cfg.seed, STREAM_AGENT, 1 << 32 | start)),
            restore_agent(cfg, AgentRole::Adversary, true, &am, an, derive_seed(cfg.seed, STREAM_AGENT, 2 << 32 | start)),
            start,
        )
    } else {
        let (bm, bn) = load_checkpoint(baseline, cfg)?;
        let mut prot =
            restore_agent(cfg, AgentRole::Protagonist, true, &bm, bn.clone(), derive_seed(cfg.seed, STREAM_AGENT, 1 << 32));
        if cfg.schedules.coupled_epsilon.is_some() {
            prot.steps = 0;
        }
        let mut adv = DqnAgent::from_params(cfg.agent_config(AgentRole::Adversary, true), cfg.per.clone(), bn, derive_seed(cfg.seed, STREAM_AGENT, 2 << 32));
        adv.steps = 0;
        (prot, adv, 0)
    };
    let resume_from = resume.then_some(start);
    let mut episodes_log = CsvLog::open(&dir.join("episodes.csv"), resume_from)?;
    let mut steps_log = if cfg.training.step_log { Some(CsvLog::open(&dir.join("steps.csv"), resume_from)?) } else { None };

    let total = cfg.training.coupled_episodes;
    let save_pair = |prot: &DqnAgent, adv: &DqnAgent, tag: &str, episodes: u64, suffix: &str| -> Result<(PathBuf, PathBuf)> {
        let p = dir.join(format!("protagonist{suffix}.ckpt"));
        let a = dir.join(format!("adversary{suffix}.ckpt"));
        save_checkpoint(&p, &prot.online, &checkpoint_meta(prot, cfg, AgentRole::Protagonist, tag, episodes))?;
        save_checkpoint(&a, &adv.online, &checkpoint_meta(adv, cfg, AgentRole::Adversary, tag, episodes))?;
        Ok((p, a))
    };

    let mut metrics = Vec::new();
    let mut seeds = Vec::new();
    for e in start..total {
        let (p_frozen, a_frozen) = freeze_state(e, cfg.training.freeze_window, cfg.training.simultaneous);
        prot.frozen = p_frozen;
        adv.frozen = a_frozen;
        let seed = derive_seed(cfg.seed, STREAM_COUPLED, e);
        let n = cfg.training.rehearsal_every;
        let rehearsal = !p_frozen && n > 0 && e % n == 0;
        let kind = if rehearsal { ScenarioKind::NoTraffic } else { ScenarioKind::VersusAdversary };
        let mut world = spawn(cfg, &track, kind.clone(), seed)?;
        let ctx = episode_context(cfg, &p_rewards, &a_rewards, seed, e);
        let mut log_err = Ok(());
        let mut sink = |r: &StepRecord| {
            if let Some(l) = steps_log.as_mut() {
                if log_err.is_ok() {
                    log_err = l.write(r);
                }
            }
        };
        let adversary = (!rehearsal).then_some(Driver::Learner(&mut adv));
        let mut m = run_episode(&mut world, Driver::Learner(&mut prot), adversary, &ctx, Some(&mut sink))?;
        log_err?;
        m.scenario = kind.name().into();
        episodes_log.write(&m)?;
        metrics.push(m);
        seeds.push(seed);
        let done = e + 1;
        if cfg.training.checkpoint_every > 0 && done % cfg.training.checkpoint_every == 0 && done < total {
            save_pair(&prot, &adv, "coupled", done, &format!("_ep{done}"))?;
            save_pair(&prot, &adv, "coupled", done, "_latest")?;
            episodes_log.flush()?;
        }
    }
    prot.frozen = false;
    adv.frozen = false;
    episodes_log.flush()?;
    if let Some(l) = steps_log.as_mut() {
        l.flush()?;
    }
    let episodes = total.max(start);
    let (p, a) = save_pair(&prot, &adv, "coupled", episodes, "")?;
    save_pair(&prot, &adv, "coupled", episodes, "_latest")?;
    Ok(TrainSummary { dir, protagonist: p, adversary: Some(a), metrics, seeds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn freeze_windows_alternate() {
        let states: Vec<_> = (0..4).map(|e| freeze_state(e, 2, false)).collect();
        assert_eq!(states, vec![(false, true), (false, true), (true, false), (true, false)]);
        assert_eq!(freeze_state(3, 2, true), (false, false));
    }
}
