//! The fixed-timestep world: vehicles on a track, scenario population,
//! autopilot traffic and first-contact collision reporting.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::control::{apply_action, Action, ControlCommand, PidConfig, PidController};
use super::geometry::{OrientedRect, Vec2};
use super::track::TrackSpec;
use super::vehicle::{step_dynamics, VehicleParams, VehicleState};
use crate::error::{Error, Result};

pub type VehicleId = usize;

/// The protagonist is always spawned first.
pub const PROTAGONIST: VehicleId = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Protagonist,
    Adversary,
    Autopilot,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CollisionTarget {
    Vehicle(VehicleId),
    RoadEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub subject: VehicleId,
    pub other: CollisionTarget,
    /// Relative impact speed, m/s.
    pub intensity: f64,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct AutopilotDriver {
    pub lane: TrackSpec,
    pub target_speed: f64,
    pub pid: PidController,
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: VehicleId,
    pub role: Role,
    pub state: VehicleState,
    /// Crashed vehicles stay in place as obstacles and stop moving.
    pub crashed: bool,
    /// Autopilot vehicles leave the world when their lane ends.
    pub present: bool,
    pub autopilot: Option<AutopilotDriver>,
    /// Planned route for agent-driven vehicles (protagonist: the track).
    pub route: Option<TrackSpec>,
}

impl Vehicle {
    pub fn is_moving_body(&self) -> bool {
        self.present && !self.crashed && self.role != Role::Static
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    NoTraffic,
    AutopilotTraffic { n: usize },
    StaticObstacles { n: usize },
    VersusAdversary,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::NoTraffic => "none",
            ScenarioKind::AutopilotTraffic { .. } => "traffic",
            ScenarioKind::StaticObstacles { .. } => "static",
            ScenarioKind::VersusAdversary => "adversary",
        }
    }

    /// Parses a scenario name as used on the command line.
    pub fn from_name(name: &str) -> Option<ScenarioKind> {
        match name {
            "none" | "no-traffic" | "1" => Some(ScenarioKind::NoTraffic),
            "traffic" | "autopilot" | "2" => Some(ScenarioKind::AutopilotTraffic { n: 50 }),
            "static" | "obstacles" | "3" => Some(ScenarioKind::StaticObstacles { n: 5 }),
            "adversary" | "versus" | "4" => Some(ScenarioKind::VersusAdversary),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpawnParams {
    pub adversary_min_distance: f64,
    pub adversary_max_distance: f64,
    /// Uniform jitter applied to the opposing heading, radians.
    pub adversary_heading_jitter: f64,
    /// Obstacles and traffic are placed no closer than this to the start.
    pub min_spawn_arc: f64,
    /// ... and no closer than this to the goal.
    pub goal_margin: f64,
    /// Minimum clearance between spawned footprints, m.
    pub clearance: f64,
    /// Lateral offset of the two autopilot lanes from the route.
    pub lane_offset: f64,
    pub traffic_speed_min: f64,
    pub traffic_speed_max: f64,
    /// Probability that an autopilot vehicle takes a random action.
    pub traffic_noise: f64,
    pub max_retries: usize,
}

impl Default for SpawnParams {
    fn default() -> Self {
        SpawnParams {
            adversary_min_distance: 20.0,
            adversary_max_distance: 60.0,
            adversary_heading_jitter: 15f64.to_radians(),
            min_spawn_arc: 25.0,
            goal_margin: 12.0,
            clearance: 1.0,
            lane_offset: 2.0,
            traffic_speed_min: 4.0,
            traffic_speed_max: 8.0,
            traffic_noise: 0.02,
            max_retries: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub seed: u64,
    #[serde(default)]
    pub spawn: SpawnParams,
}

#[derive(Debug, Clone)]
pub struct World {
    pub track: TrackSpec,
    pub params: VehicleParams,
    pub dt: f64,
    pub time: f64,
    pub vehicles: Vec<Vehicle>,
    contacts: BTreeSet<(VehicleId, CollisionTarget)>,
    rng: ChaCha8Rng,
    traffic_noise: f64,
}

impl World {
    /// An empty world holding only the protagonist at the route start.
    pub fn new(track: TrackSpec, params: VehicleParams, dt: f64, seed: u64) -> World {
        let (start, heading) = track.point_at(0.0);
        let protagonist = Vehicle {
            id: PROTAGONIST,
            role: Role::Protagonist,
            state: VehicleState::at_rest(start, heading),
            crashed: false,
            present: true,
            autopilot: None,
            route: Some(track.clone()),
        };
        World {
            track,
            params,
            dt,
            time: 0.0,
            vehicles: vec![protagonist],
            contacts: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            traffic_noise: 0.0,
        }
    }

    pub fn vehicle(&self, id: VehicleId) -> &Vehicle {
        &self.vehicles[id]
    }

    pub fn vehicle_mut(&mut self, id: VehicleId) -> &mut Vehicle {
        &mut self.vehicles[id]
    }

    pub fn adversary(&self) -> Option<VehicleId> {
        self.vehicles.iter().find(|v| v.role == Role::Adversary).map(|v| v.id)
    }

    /// Adds a vehicle, refusing placements that overlap an existing body.
    pub fn add_vehicle(&mut self, role: Role, state: VehicleState, clearance: f64) -> Option<VehicleId> {
        let fp = state.footprint(&self.params);
        let clear = self
            .vehicles
            .iter()
            .filter(|v| v.present)
            .all(|v| v.state.footprint(&self.params).separation(&fp) > clearance);
        if !clear {
            return None;
        }
        let id = self.vehicles.len();
        self.vehicles.push(Vehicle {
            id,
            role,
            state,
            crashed: false,
            present: true,
            autopilot: None,
            route: None,
        });
        Some(id)
    }

    pub fn footprints(&self) -> impl Iterator<Item = (VehicleId, OrientedRect)> + '_ {
        self.vehicles
            .iter()
            .filter(|v| v.present)
            .map(|v| (v.id, v.state.footprint(&self.params)))
    }

    /// Sets the command an agent-driven vehicle will hold during the next step.
    pub fn set_command(&mut self, id: VehicleId, cmd: ControlCommand) {
        self.vehicles[id].state.command = cmd;
    }

    /// All current overlaps, reported once per subject (a vehicle pair yields
    /// two events). Intensity is the relative speed at this instant.
    pub fn detect_collisions(&self) -> Vec<CollisionEvent> {
        let mut events = Vec::new();
        let fps: Vec<(usize, OrientedRect, Vec2, f64)> = self
            .vehicles
            .iter()
            .filter(|v| v.present)
            .map(|v| {
                let fp = v.state.footprint(&self.params);
                (v.id, fp, v.state.velocity(), fp.bounding_radius())
            })
            .collect();
        for (i, a) in fps.iter().enumerate() {
            for b in &fps[i + 1..] {
                let va = &self.vehicles[a.0];
                let vb = &self.vehicles[b.0];
                if !va.is_moving_body() && !vb.is_moving_body() {
                    continue;
                }
                if a.1.center.dist(b.1.center) > a.3 + b.3 {
                    continue;
                }
                if a.1.overlaps(&b.1) {
                    let ci = (a.2 - b.2).norm();
                    events.push(CollisionEvent { subject: a.0, other: CollisionTarget::Vehicle(b.0), intensity: ci, time: self.time });
                    events.push(CollisionEvent { subject: b.0, other: CollisionTarget::Vehicle(a.0), intensity: ci, time: self.time });
                }
            }
        }
        for (id, fp, vel, radius) in &fps {
            if !self.vehicles[*id].is_moving_body() {
                continue;
            }
            let hit = self.track.edges().iter().any(|e| {
                let mid = (e.a + e.b) * 0.5;
                mid.dist(fp.center) <= radius + 0.5 * e.length() && fp.intersects_segment(e)
            });
            if hit {
                events.push(CollisionEvent { subject: *id, other: CollisionTarget::RoadEdge, intensity: vel.norm(), time: self.time });
            }
        }
        events.sort_by_key(|e| (e.subject, e.other));
        events
    }

    /// Advances every moving vehicle by one timestep and returns the
    /// collisions that began during this step. Colliding vehicles stop.
    pub fn step(&mut self) -> Vec<CollisionEvent> {
        let dt = self.dt;
        for i in 0..self.vehicles.len() {
            if self.vehicles[i].autopilot.is_some() && self.vehicles[i].is_moving_body() {
                let a = self.autopilot_action(i);
                let v = &mut self.vehicles[i];
                v.state.command = apply_action(v.state.command, a);
            }
        }
        for v in self.vehicles.iter_mut().filter(|v| v.is_moving_body()) {
            v.state = step_dynamics(&v.state, v.state.command, &self.params, dt);
        }
        self.time += dt;

        for v in self.vehicles.iter_mut() {
            if let Some(ap) = &v.autopilot {
                if v.present && ap.lane.route_metrics(v.state.position, v.state.heading).dis_goal < ap.lane.goal_threshold() {
                    v.present = false;
                }
            }
        }

        let current = self.detect_collisions();
        let mut fresh = Vec::new();
        let mut now = BTreeSet::new();
        for e in current {
            now.insert((e.subject, e.other));
            if !self.contacts.contains(&(e.subject, e.other)) {
                fresh.push(e);
            }
        }
        self.contacts = now;
        for e in &fresh {
            let v = &mut self.vehicles[e.subject];
            if v.role != Role::Static {
                v.crashed = true;
                v.state.speed = 0.0;
                v.state.command = ControlCommand::IDLE;
            }
        }
        fresh
    }

    fn autopilot_action(&mut self, id: VehicleId) -> Action {
        let gap = self.gap_ahead(id);
        let noise = self.traffic_noise;
        let params = self.params.clone();
        let dt = self.dt;
        let v = &mut self.vehicles[id];
        let ap = v.autopilot.as_mut().expect("autopilot vehicle");
        autopilot_step(&v.state, ap, &params, gap, noise, dt, &mut self.rng)
    }

    /// Distance to the nearest body ahead within the vehicle's lane corridor.
    fn gap_ahead(&self, id: VehicleId) -> f64 {
        let me = &self.vehicles[id].state;
        let fwd = Vec2::from_heading(me.heading);
        let right = fwd.right_normal();
        self.vehicles
            .iter()
            .filter(|o| o.id != id && o.present)
            .filter_map(|o| {
                let d = o.state.position - me.position;
                let ahead = d.dot(fwd);
                (ahead > 0.0 && d.dot(right).abs() < self.params.width * 1.2).then_some(ahead - self.params.length)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Lane-following decision for one autopilot vehicle: a PID tracker at the
/// driver's target speed, slowed for a leader closer than 15 m, with a small
/// seeded chance of a random action.
pub fn autopilot_step(
    state: &VehicleState,
    driver: &mut AutopilotDriver,
    params: &VehicleParams,
    gap_ahead: f64,
    noise: f64,
    dt: f64,
    rng: &mut impl Rng,
) -> Action {
    let draw: f64 = rng.gen();
    let random_idx = rng.gen_range(0..super::control::NUM_ACTIONS);
    let follow = ((gap_ahead - 3.0) / 12.0).clamp(0.0, 1.0);
    let target = driver.target_speed * follow;
    let a = driver
        .pid
        .suggest_at_speed(state, params, target, dt)
        .unwrap_or(Action::IDLE);
    if draw < noise {
        Action::from_index(random_idx).unwrap()
    } else {
        a
    }
}

/// Route shifted sideways by `offset` (positive to the right).
fn offset_route(track: &TrackSpec, offset: f64) -> Result<TrackSpec> {
    let pts = track.waypoints();
    let n = pts.len();
    let shifted: Vec<Vec2> = (0..n)
        .map(|i| {
            let a = if i == 0 { pts[1] - pts[0] } else { pts[i] - pts[i - 1] };
            let b = if i == n - 1 { pts[n - 1] - pts[n - 2] } else { pts[i + 1] - pts[i] };
            let normal = (a.normalized() + b.normalized()).normalized().right_normal();
            pts[i] + normal * offset
        })
        .collect();
    TrackSpec::new(shifted, track.road_width(), track.goal_threshold())
}

/// Populates a world for `spec`. The protagonist (id 0) starts at rest at the
/// route start; everything else is placed from the spec's seed.
pub fn spawn_scenario(
    spec: &ScenarioSpec,
    track: &TrackSpec,
    params: &VehicleParams,
    dt: f64,
) -> Result<World> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sp = &spec.spawn;
    let mut world = World::new(track.clone(), params.clone(), dt, rng.gen());
    world.traffic_noise = sp.traffic_noise;
    let len = track.route_length();
    let lo = sp.min_spawn_arc.min(len);
    let hi = (len - sp.goal_margin).max(lo);

    match spec.kind {
        ScenarioKind::NoTraffic => {}
        ScenarioKind::StaticObstacles { n } => {
            let candidates: Vec<usize> = (0..track.waypoints().len())
                .filter(|&i| (lo..=hi).contains(&track.arc_at_waypoint(i)))
                .collect();
            if n > 0 && candidates.is_empty() {
                return Err(Error::SpawnInfeasible("no waypoints in the spawn window".into()));
            }
            let mut placed = 0;
            let mut tries = 0;
            while placed < n {
                if tries >= sp.max_retries {
                    return Err(Error::SpawnInfeasible(format!("placed {placed} of {n} obstacles")));
                }
                tries += 1;
                let i = candidates[rng.gen_range(0..candidates.len())];
                let (pos, heading) = track.point_at(track.arc_at_waypoint(i));
                if world.add_vehicle(Role::Static, VehicleState::at_rest(pos, heading), sp.clearance).is_some() {
                    placed += 1;
                }
            }
        }
        ScenarioKind::VersusAdversary => {
            let d = rng.gen_range(sp.adversary_min_distance..=sp.adversary_max_distance).min(len);
            let jitter = rng.gen_range(-sp.adversary_heading_jitter..=sp.adversary_heading_jitter);
            let (pos, tangent) = track.point_at(d);
            let state = VehicleState::at_rest(pos, tangent + PI + jitter);
            let id = world
                .add_vehicle(Role::Adversary, state, 0.0)
                .ok_or_else(|| Error::SpawnInfeasible("adversary overlaps protagonist".into()))?;
            world.vehicles[id].route = Some(track.reversed_from(d)?);
        }
        ScenarioKind::AutopilotTraffic { n } => {
            let right = offset_route(track, sp.lane_offset)?;
            let left = offset_route(track, -sp.lane_offset)?;
            let mut placed = 0;
            let mut tries = 0;
            while placed < n {
                if tries >= sp.max_retries {
                    return Err(Error::SpawnInfeasible(format!("placed {placed} of {n} traffic vehicles")));
                }
                tries += 1;
                let s = rng.gen_range(lo..=len);
                let with_flow = rng.gen_bool(0.5);
                let speed = rng.gen_range(sp.traffic_speed_min..=sp.traffic_speed_max);
                let lane = if with_flow {
                    right.clone()
                } else {
                    let along = left.project(track.point_at(s).0).arc;
                    left.reversed_from(along)?
                };
                let s_lane = if with_flow { right.project(track.point_at(s).0).arc } else { 0.0 };
                if lane.route_length() - s_lane < 2.0 * lane.goal_threshold() {
                    continue;
                }
                let (pos, heading) = lane.point_at(s_lane);
                let mut state = VehicleState::at_rest(pos, heading);
                state.speed = speed;
                let mut pid = PidController::new(PidConfig { target_speed: speed, ..PidConfig::default() }, Some(lane.clone()));
                // Start already holding the curve instead of from neutral steer.
                state.command = pid.desired_command(&state, params, speed, dt)?;
                pid.reset();
                if let Some(id) = world.add_vehicle(Role::Autopilot, state, sp.clearance) {
                    world.vehicles[id].autopilot = Some(AutopilotDriver { lane, target_speed: speed, pid });
                    placed += 1;
                }
            }
        }
    }
    Ok(world)
}
