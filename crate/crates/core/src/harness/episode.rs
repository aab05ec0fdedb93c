//! One episode of protagonist (and optional adversary) driving with frame
//! skip, reward accounting, replay recording and termination rules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{greedy_action, select_action, DqnAgent};
use crate::error::{Error, Result};
use crate::perception::{build_observation, raycast, ScanHistory, SensorConfig};
use crate::qnet::DuelingNet;
use crate::replay::Transition;
use crate::rewards::{
    adversary_reward, protagonist_reward, AdversaryRewardConfig, CollisionKind, ProtagonistRewardConfig,
    StepOutcome,
};
use crate::sim::{
    apply_action, Action, CollisionEvent, CollisionTarget, ControlCommand, PidController, TrackSpec, VehicleId,
    World, NUM_ACTIONS, PROTAGONIST,
};

/// Progress fractions at which success is recorded.
pub const CHECKPOINTS: [f64; 4] = [0.25, 0.50, 0.75, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalCause {
    Goal,
    Collision,
    Timeout,
}

/// How a vehicle picks its actions.
pub enum Driver<'a> {
    /// Exploring learner; records transitions and learns unless frozen.
    Learner(&'a mut DqnAgent),
    /// Pure greedy policy with a fixed action repeat.
    Greedy { net: &'a DuelingNet, frame_skip: usize },
    /// Uniform random actions.
    Random { frame_skip: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Protagonist,
    Adversary,
}

impl AgentRole {
    pub fn name(self) -> &'static str {
        match self {
            AgentRole::Protagonist => "protagonist",
            AgentRole::Adversary => "adversary",
        }
    }
}

/// One row of the per-decision training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: u64,
    pub role: AgentRole,
    pub t: u64,
    pub epsilon: f64,
    pub k: usize,
    pub loss: Option<f64>,
    pub buffer_size: usize,
    pub episode_return: f64,
}

pub struct EpisodeContext<'a> {
    pub sensor: &'a SensorConfig,
    pub protagonist_rewards: &'a ProtagonistRewardConfig,
    /// `route_length` is replaced by the adversary's own route length.
    pub adversary_rewards: &'a AdversaryRewardConfig,
    pub max_steps: usize,
    /// Seeds the random-policy driver.
    pub seed: u64,
    pub episode: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub seed: u64,
    pub scenario: String,
    pub success_25: bool,
    pub success_50: bool,
    pub success_75: bool,
    pub success_95: bool,
    pub reached_goal: bool,
    /// Simulated seconds until termination.
    pub duration: f64,
    /// Furthest progress along the route, as a fraction of its length.
    pub distance: f64,
    pub cause: TerminalCause,
    pub collision_intensity: Option<f64>,
    pub episode_return: f64,
    pub adversary_return: Option<f64>,
    /// An adversary-protagonist contact happened.
    pub adversary_hit: bool,
    pub steps: usize,
}

impl EpisodeMetrics {
    pub fn success(&self) -> [bool; 4] {
        [self.success_25, self.success_50, self.success_75, self.success_95]
    }
}

/// Success flags for a furthest progress value.
pub fn success_flags(distance: f64) -> [bool; 4] {
    CHECKPOINTS.map(|c| distance >= c)
}

struct Slot<'a> {
    id: VehicleId,
    role: AgentRole,
    driver: Driver<'a>,
    route: TrackSpec,
    pid: Option<PidController>,
    history: ScanHistory,
    pending: Option<(Vec<f64>, usize, f64)>,
    action: Action,
    hold: usize,
    done: bool,
    ret: f64,
}

impl<'a> Slot<'a> {
    fn new(id: VehicleId, role: AgentRole, driver: Driver<'a>, route: TrackSpec) -> Self {
        let pid = match &driver {
            Driver::Learner(agent) => Some(PidController::new(agent.cfg.pid.clone(), Some(route.clone()))),
            _ => None,
        };
        Slot {
            id,
            role,
            driver,
            route,
            pid,
            history: ScanHistory::new(),
            pending: None,
            action: Action::IDLE,
            hold: 0,
            done: false,
            ret: 0.0,
        }
    }

    fn observe(&mut self, world: &World, sensor: &SensorConfig) -> Vec<f64> {
        self.history.push(raycast(world, self.id, sensor));
        build_observation(&self.history, &world.vehicle(self.id).state, &world.params, sensor).flatten()
    }

    /// Closes the open frame-skip window as one transition.
    fn close_window(&mut self, next_obs: Vec<f64>, terminal: bool) -> Result<Option<f64>> {
        let Some((obs, action, reward)) = self.pending.take() else {
            return Ok(None);
        };
        match &mut self.driver {
            Driver::Learner(agent) => agent.observe(Transition { obs, action, reward, next_obs, terminal }),
            _ => Ok(None),
        }
    }

    fn decide(&mut self, obs: Vec<f64>, world: &World, rng: &mut ChaCha8Rng) -> Result<usize> {
        let state = &world.vehicle(self.id).state;
        let (action, k) = match &mut self.driver {
            Driver::Learner(agent) => {
                let eps = agent.epsilon();
                let k = agent.frame_skip();
                let draws = agent.draws();
                let pid = self.pid.as_mut().expect("learner has a PID helper");
                let (a, _, _) = select_action(
                    &agent.online,
                    &obs,
                    eps,
                    agent.cfg.pid_share,
                    &draws,
                    pid,
                    state,
                    &world.params,
                    world.dt,
                )?;
                (a, k)
            }
            Driver::Greedy { net, frame_skip } => (Action::from_index(greedy_action(net, &obs)?).unwrap(), *frame_skip),
            Driver::Random { frame_skip } => (Action::from_index(rng.gen_range(0..NUM_ACTIONS)).unwrap(), *frame_skip),
        };
        self.action = action;
        self.hold = k.max(1);
        self.pending = Some((obs, action.index(), 0.0));
        Ok(k)
    }

    fn add_reward(&mut self, r: f64) {
        self.ret += r;
        if let Some(p) = self.pending.as_mut() {
            p.2 += r;
        }
    }

    fn log_record(&self, episode: u64, k: usize, loss: Option<f64>) -> Option<StepRecord> {
        match &self.driver {
            Driver::Learner(agent) => Some(StepRecord {
                episode,
                role: self.role,
                t: agent.steps,
                epsilon: agent.epsilon(),
                k,
                loss,
                buffer_size: agent.buffer.len(),
                episode_return: self.ret,
            }),
            _ => None,
        }
    }
}

fn events_for(events: &[CollisionEvent], id: VehicleId) -> impl Iterator<Item = &CollisionEvent> {
    events.iter().filter(move |e| e.subject == id)
}

/// Runs one episode in `world`. The protagonist is vehicle 0; `adversary`
/// drives the world's adversary vehicle when both are present.
///
/// The episode ends when the protagonist reaches its goal, collides, or the
/// step cap is hit. The adversary's own episode also ends when it collides
/// or reaches its goal; it then stays in place (crashed) or leaves the road.
pub fn run_episode(
    world: &mut World,
    protagonist: Driver,
    adversary: Option<Driver>,
    ctx: &EpisodeContext,
    mut log: Option<&mut dyn FnMut(&StepRecord)>,
) -> Result<EpisodeMetrics> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let p_track = world.track.clone();
    let mut slots = vec![Slot::new(PROTAGONIST, AgentRole::Protagonist, protagonist, p_track.clone())];
    let adv_id = world.adversary();
    if let Some(driver) = adversary {
        let id = adv_id.ok_or_else(|| Error::Config("adversary driver given but world has no adversary".into()))?;
        let route = world.vehicle(id).route.clone().unwrap_or_else(|| p_track.clone());
        slots.push(Slot::new(id, AgentRole::Adversary, driver, route));
    }
    let a_rewards = slots.get(1).map(|s| ctx.adversary_rewards.with_route_length(s.route.route_length()));

    let start = p_track.route_metrics(world.vehicle(PROTAGONIST).state.position, 0.0);
    let mut distance = start.progress;
    let mut cause = TerminalCause::Timeout;
    let mut intensity = None;
    let mut hit = false;
    let mut steps = 0;

    while steps < ctx.max_steps {
        for slot in slots.iter_mut().filter(|s| !s.done) {
            if slot.hold == 0 {
                let obs = slot.observe(world, ctx.sensor);
                let loss = slot.close_window(obs.clone(), false)?;
                let k = slot.decide(obs, world, &mut rng)?;
                if let (Some(f), Some(rec)) = (log.as_mut(), slot.log_record(ctx.episode, k, loss)) {
                    f(&rec);
                }
            }
        }
        for slot in &slots {
            let v = world.vehicle_mut(slot.id);
            v.state.command = if slot.done { ControlCommand { brake: 1.0, ..ControlCommand::IDLE } } else { apply_action(v.state.command, slot.action) };
        }

        let events = world.step();
        steps += 1;
        let p_pos = world.vehicle(PROTAGONIST).state.position;

        let mut p_terminal = false;
        for (i, slot) in slots.iter_mut().enumerate() {
            if slot.done {
                continue;
            }
            let v = world.vehicle(slot.id);
            let m = slot.route.route_metrics(v.state.position, v.state.heading);
            let mut mine = events_for(&events, slot.id).peekable();
            let collided = mine.peek().is_some();
            let with_protagonist = events_for(&events, slot.id).any(|e| e.other == CollisionTarget::Vehicle(PROTAGONIST));
            let reached_goal = m.dis_goal < slot.route.goal_threshold();
            let outcome = StepOutcome {
                v: v.state.speed,
                a: v.state.accel_magnitude(),
                st: v.state.command.steer,
                theta: m.theta,
                e_cross: m.e_cross,
                dis_goal: m.dis_goal,
                dis_pro: (slot.role == AgentRole::Adversary).then(|| v.state.position.dist(p_pos)),
                collision: if with_protagonist {
                    CollisionKind::WithProtagonist
                } else if collided {
                    CollisionKind::Other
                } else {
                    CollisionKind::None
                },
                reached_goal,
            };
            let r = match slot.role {
                AgentRole::Protagonist => protagonist_reward(&outcome, ctx.protagonist_rewards),
                AgentRole::Adversary => adversary_reward(&outcome, a_rewards.as_ref().unwrap()),
            };
            slot.add_reward(r);

            if i == 0 {
                distance = distance.max(m.progress);
                if collided {
                    cause = TerminalCause::Collision;
                    intensity = events_for(&events, slot.id).map(|e| e.intensity).reduce(f64::max);
                    p_terminal = true;
                } else if reached_goal {
                    cause = TerminalCause::Goal;
                    distance = 1.0;
                    p_terminal = true;
                }
            } else if collided || reached_goal {
                let obs = slot.observe(world, ctx.sensor);
                slot.close_window(obs, true)?;
                slot.done = true;
                if reached_goal && !collided {
                    world.vehicle_mut(slot.id).present = false;
                }
            }
        }
        if let Some(a) = adv_id {
            hit |= events.iter().any(|e| {
                (e.subject == PROTAGONIST && e.other == CollisionTarget::Vehicle(a))
                    || (e.subject == a && e.other == CollisionTarget::Vehicle(PROTAGONIST))
            });
        }
        for slot in slots.iter_mut() {
            slot.hold = slot.hold.saturating_sub(1);
        }
        if p_terminal {
            break;
        }
    }

    // Goal and collision end every open window; a timeout bootstraps.
    let terminal = cause != TerminalCause::Timeout;
    for slot in slots.iter_mut().filter(|s| !s.done) {
        let obs = slot.observe(world, ctx.sensor);
        slot.close_window(obs, terminal)?;
    }

    let flags = success_flags(distance);
    Ok(EpisodeMetrics {
        episode: ctx.episode,
        seed: ctx.seed,
        scenario: String::new(),
        success_25: flags[0],
        success_50: flags[1],
        success_75: flags[2],
        success_95: flags[3],
        reached_goal: cause == TerminalCause::Goal,
        duration: steps as f64 * world.dt,
        distance,
        cause,
        collision_intensity: intensity,
        episode_return: slots[0].ret,
        adversary_return: slots.get(1).map(|s| s.ret),
        adversary_hit: hit,
        steps,
    })
}
