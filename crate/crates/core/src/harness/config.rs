//! Run configuration: one JSON document with sections `world`, `rewards`,
//! `agent`, `per`, `schedules`, `scenario` and `training`. Missing keys take
//! their defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{AgentConfig, EpsilonSchedule, FrameSkipSchedule};
use crate::error::{Error, Result};
use crate::harness::episode::AgentRole;
use crate::perception::SensorConfig;
use crate::replay::PerConfig;
use crate::rewards::{AdversaryRewardConfig, ProtagonistRewardConfig};
use crate::sim::{ScenarioKind, SpawnParams, TrackSpec, VehicleParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Track file; the built-in course when absent. Relative paths resolve
    /// against the config file's directory.
    pub track: Option<PathBuf>,
    pub dt: f64,
    /// Simulation steps before an episode times out.
    pub max_steps: usize,
    pub vehicle: VehicleParams,
    pub sensor: SensorConfig,
    pub spawn: SpawnParams,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            track: None,
            dt: 0.05,
            max_steps: 3000,
            vehicle: VehicleParams::default(),
            sensor: SensorConfig::default(),
            spawn: SpawnParams::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardsConfig {
    /// `route_length`, `road_width` and `goal_threshold` are overwritten
    /// from the track at run time.
    pub protagonist: ProtagonistRewardConfig,
    pub adversary: AdversaryRewardConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub epsilon: EpsilonSchedule,
    /// The adversary restarts exploration when cloned from the baseline.
    pub adversary_epsilon: EpsilonSchedule,
    /// When set, the protagonist also restarts exploration in coupled
    /// training with this schedule instead of continuing the baseline's.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupled_epsilon: Option<EpsilonSchedule>,
    pub frame_skip: FrameSkipSchedule,
    pub pid_share: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            epsilon: EpsilonSchedule::default(),
            adversary_epsilon: EpsilonSchedule::default(),
            coupled_epsilon: None,
            frame_skip: FrameSkipSchedule::default(),
            pid_share: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub traffic_vehicles: usize,
    pub static_obstacles: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig { traffic_vehicles: 50, static_obstacles: 5 }
    }
}

impl ScenarioConfig {
    /// Resolves a scenario name with this config's vehicle counts.
    pub fn resolve(&self, name: &str) -> Option<ScenarioKind> {
        Some(match ScenarioKind::from_name(name)? {
            ScenarioKind::AutopilotTraffic { .. } => ScenarioKind::AutopilotTraffic { n: self.traffic_vehicles },
            ScenarioKind::StaticObstacles { .. } => ScenarioKind::StaticObstacles { n: self.static_obstacles },
            k => k,
        })
    }

    pub fn all(&self) -> [ScenarioKind; 4] {
        [
            ScenarioKind::NoTraffic,
            ScenarioKind::AutopilotTraffic { n: self.traffic_vehicles },
            ScenarioKind::StaticObstacles { n: self.static_obstacles },
            ScenarioKind::VersusAdversary,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub baseline_episodes: u64,
    pub coupled_episodes: u64,
    /// Coupled training alternates which agent learns every this many episodes.
    pub freeze_window: u64,
    /// Both agents learn in every coupled episode.
    pub simultaneous: bool,
    /// While the protagonist learns, every n-th coupled episode is an
    /// empty-road episode without the adversary (0 disables).
    #[serde(skip_serializing_if = "is_zero")]
    pub rehearsal_every: u64,
    /// Periodic checkpoint interval in episodes (0 disables).
    pub checkpoint_every: u64,
    /// Write one CSV row per decision step.
    pub step_log: bool,
    pub eval_trials: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            baseline_episodes: 2000,
            coupled_episodes: 2000,
            freeze_window: 50,
            simultaneous: false,
            rehearsal_every: 0,
            checkpoint_every: 500,
            step_log: true,
            eval_trials: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub world: WorldConfig,
    pub rewards: RewardsConfig,
    pub agent: AgentConfig,
    pub per: PerConfig,
    pub schedules: ScheduleConfig,
    pub scenario: ScenarioConfig,
    pub training: TrainingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            world: WorldConfig::default(),
            rewards: RewardsConfig::default(),
            agent: AgentConfig::default(),
            per: PerConfig::default(),
            schedules: ScheduleConfig::default(),
            scenario: ScenarioConfig::default(),
            training: TrainingConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::from_json_str(&text)?;
        if let (Some(track), Some(dir)) = (&cfg.world.track, path.parent()) {
            if track.is_relative() {
                cfg.world.track = Some(dir.join(track));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.world.dt > 0.0 && self.world.dt.is_finite()) {
            return Err(Error::Config("world.dt must be positive".into()));
        }
        if self.world.max_steps == 0 {
            return Err(Error::Config("world.max_steps must be positive".into()));
        }
        if self.world.sensor.beams == 0 || !(self.world.sensor.max_range > 0.0) {
            return Err(Error::Config("sensor needs at least one beam and a positive range".into()));
        }
        let sp = &self.world.spawn;
        if !(sp.adversary_min_distance > 0.0 && sp.adversary_min_distance <= sp.adversary_max_distance) {
            return Err(Error::Config("adversary spawn distances must satisfy 0 < min <= max".into()));
        }
        self.rewards.protagonist.validate()?;
        self.rewards.adversary.validate()?;
        self.agent_config(AgentRole::Protagonist, false).validate()?;
        self.agent_config(AgentRole::Protagonist, true).validate()?;
        self.agent_config(AgentRole::Adversary, true).validate()?;
        self.per.validate(self.agent.batch_size)?;
        if !(0.0..=1.0).contains(&self.schedules.pid_share) {
            return Err(Error::Config("schedules.pid_share must lie in [0, 1]".into()));
        }
        if self.training.freeze_window == 0 {
            return Err(Error::Config("training.freeze_window must be positive".into()));
        }
        Ok(())
    }

    /// Exploration schedule of `role` in the baseline or coupled phase.
    pub fn epsilon_schedule(&self, role: AgentRole, coupled: bool) -> EpsilonSchedule {
        match role {
            AgentRole::Adversary => self.schedules.adversary_epsilon,
            AgentRole::Protagonist if coupled => self.schedules.coupled_epsilon.unwrap_or(self.schedules.epsilon),
            AgentRole::Protagonist => self.schedules.epsilon,
        }
    }

    /// Agent settings with the schedules filled in.
    pub fn agent_config(&self, role: AgentRole, coupled: bool) -> AgentConfig {
        AgentConfig {
            epsilon: self.epsilon_schedule(role, coupled),
            frame_skip: self.schedules.frame_skip,
            pid_share: self.schedules.pid_share,
            ..self.agent.clone()
        }
    }

    pub fn track(&self) -> Result<TrackSpec> {
        match &self.world.track {
            Some(p) => TrackSpec::load(p),
            None => Ok(TrackSpec::default_course()),
        }
    }

    pub fn protagonist_rewards(&self, track: &TrackSpec) -> ProtagonistRewardConfig {
        ProtagonistRewardConfig {
            route_length: track.route_length(),
            road_width: track.road_width(),
            goal_threshold: track.goal_threshold(),
            ..self.rewards.protagonist.clone()
        }
    }

    /// Adversary reward template; `route_length` is set per episode.
    pub fn adversary_rewards(&self, track: &TrackSpec) -> AdversaryRewardConfig {
        AdversaryRewardConfig {
            road_width: track.road_width(),
            goal_threshold: track.goal_threshold(),
            ..self.rewards.adversary.clone()
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn is_zero(n: &u64) -> bool {
    *n == 0
}

/// Independent seed for stream `stream`, item `index` of a run (splitmix64).
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0xd1b5_4a32_d192_ed03))
        .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
