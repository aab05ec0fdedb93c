//! Browser bindings for three small views of drivelab: a PID-driven car
//! with its ray scan, reward terms swept along one input, and how the
//! prioritized replay buffer spreads its draws.
//!
//! Everything returns JSON strings so the page needs no generated types.
//! The plain Rust functions underneath are what the tests exercise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use drivelab::perception::{raycast, HitClass, SensorConfig};
use drivelab::replay::{PerConfig, PrioritizedReplay, Transition};
use drivelab::rewards::{p_reward_terms, CollisionKind, ProtagonistRewardConfig, StepOutcome};
use drivelab::sim::{
    apply_action, spawn_scenario, PidConfig, PidController, ScenarioKind, ScenarioSpec, SpawnParams, TrackSpec,
    VehicleParams, World, PROTAGONIST,
};

const DT: f64 = 0.05;

#[derive(Serialize)]
pub struct TrackView {
    pub centerline: Vec<[f64; 2]>,
    pub edges: Vec<[[f64; 2]; 2]>,
    pub goal: [f64; 2],
}

#[derive(Serialize)]
pub struct CarView {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
    pub protagonist: bool,
}

#[derive(Serialize)]
pub struct RayView {
    /// World-frame beam direction, rad.
    pub angle: f64,
    pub distance: f64,
    pub class: &'static str,
}

#[derive(Serialize)]
pub struct Frame {
    pub time: f64,
    pub speed: f64,
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
    pub progress: f64,
    pub cars: Vec<CarView>,
    pub rays: Vec<RayView>,
    /// `goal`, `collision` or `timeout` once the run is over.
    pub ended: Option<String>,
}

/// A protagonist steered by the PID helper through the discrete action set,
/// exactly as during assisted exploration.
pub struct PidDrive {
    world: World,
    sensor: SensorConfig,
    pid: PidController,
    max_time: f64,
    ended: Option<String>,
}

impl PidDrive {
    /// `scenario` is `none`, `traffic` or `static`.
    pub fn new(scenario: &str, seed: u64, target_speed: f64) -> Result<PidDrive, String> {
        let kind = match ScenarioKind::from_name(scenario) {
            Some(ScenarioKind::VersusAdversary) | None => return Err(format!("unsupported scenario `{scenario}`")),
            Some(k) => k,
        };
        let track = TrackSpec::default_course();
        let spec = ScenarioSpec { kind, seed, spawn: SpawnParams::default() };
        let world = spawn_scenario(&spec, &track, &VehicleParams::default(), DT).map_err(|e| e.to_string())?;
        let pid = PidController::new(PidConfig { target_speed, ..PidConfig::default() }, Some(track));
        Ok(PidDrive { world, sensor: SensorConfig::default(), pid, max_time: 120.0, ended: None })
    }

    pub fn track(&self) -> TrackView {
        let t = &self.world.track;
        let g = t.goal();
        TrackView {
            centerline: t.waypoints().iter().map(|p| [p.x, p.y]).collect(),
            edges: t.edges().iter().map(|s| [[s.a.x, s.a.y], [s.b.x, s.b.y]]).collect(),
            goal: [g.x, g.y],
        }
    }

    /// Advances up to `ticks` world steps and returns the resulting frame.
    pub fn advance(&mut self, ticks: usize) -> Frame {
        for _ in 0..ticks {
            if self.ended.is_some() {
                break;
            }
            let v = self.world.vehicle(PROTAGONIST);
            let action = match self.pid.suggest(&v.state, &self.world.params, DT) {
                Ok(a) => a,
                Err(_) => {
                    self.ended = Some("timeout".into());
                    break;
                }
            };
            let cmd = apply_action(v.state.command, action);
            self.world.set_command(PROTAGONIST, cmd);
            let events = self.world.step();
            let v = self.world.vehicle(PROTAGONIST);
            let m = self.world.track.route_metrics(v.state.position, v.state.heading);
            if events.iter().any(|e| e.subject == PROTAGONIST) {
                self.ended = Some("collision".into());
            } else if m.dis_goal < self.world.track.goal_threshold() {
                self.ended = Some("goal".into());
            } else if self.world.time >= self.max_time {
                self.ended = Some("timeout".into());
            }
        }
        self.frame()
    }

    pub fn frame(&self) -> Frame {
        let v = self.world.vehicle(PROTAGONIST);
        let s = &v.state;
        let scan = raycast(&self.world, PROTAGONIST, &self.sensor);
        let rays = (0..scan.beams())
            .map(|i| RayView {
                angle: s.heading + self.sensor.beam_angle(i),
                distance: scan.distances[i] * self.sensor.max_range,
                class: match scan.classes[i] {
                    HitClass::Free => "free",
                    HitClass::RoadEdge => "edge",
                    HitClass::Vehicle => "vehicle",
                },
            })
            .collect();
        let cars = self
            .world
            .vehicles
            .iter()
            .filter(|c| c.present)
            .map(|c| CarView {
                x: c.state.position.x,
                y: c.state.position.y,
                heading: c.state.heading,
                length: self.world.params.length,
                width: self.world.params.width,
                protagonist: c.id == PROTAGONIST,
            })
            .collect();
        Frame {
            time: self.world.time,
            speed: s.speed,
            steer: s.command.steer,
            throttle: s.command.throttle,
            brake: s.command.brake,
            progress: self.world.track.route_metrics(s.position, s.heading).progress,
            cars,
            rays,
            ended: self.ended.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct RewardCurves {
    pub variable: String,
    pub x: Vec<f64>,
    pub velocity: Vec<f64>,
    pub accel: Vec<f64>,
    pub steer: Vec<f64>,
    pub cross: Vec<f64>,
    pub total: Vec<f64>,
}

/// Protagonist reward terms with one input swept over its range and the
/// rest held at `base`. Penalty terms are returned as positive magnitudes.
pub fn reward_curves(variable: &str, base: &StepOutcome, points: usize) -> Result<RewardCurves, String> {
    let cfg = ProtagonistRewardConfig {
        route_length: TrackSpec::default_course().route_length(),
        ..ProtagonistRewardConfig::default()
    };
    let (lo, hi) = match variable {
        "speed" => (0.0, 30.0),
        "accel" => (0.0, 10.0),
        "steer" => (-1.0, 1.0),
        "heading" => (-std::f64::consts::PI, std::f64::consts::PI),
        "cross" => (0.0, cfg.road_width / 2.0),
        _ => return Err(format!("unknown variable `{variable}`")),
    };
    let n = points.max(2);
    let mut c = RewardCurves {
        variable: variable.into(),
        x: vec![],
        velocity: vec![],
        accel: vec![],
        steer: vec![],
        cross: vec![],
        total: vec![],
    };
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let mut o = base.clone();
        match variable {
            "speed" => o.v = x,
            "accel" => o.a = x,
            "steer" => o.st = x,
            "heading" => o.theta = x,
            _ => o.e_cross = x,
        }
        let t = p_reward_terms(&o, &cfg);
        c.x.push(x);
        c.velocity.push(t.velocity);
        c.accel.push(t.accel);
        c.steer.push(t.steer);
        c.cross.push(t.cross);
        c.total.push(t.total());
    }
    Ok(c)
}

pub fn cruising_outcome() -> StepOutcome {
    StepOutcome {
        v: 10.0,
        a: 1.0,
        st: 0.0,
        theta: 0.0,
        e_cross: 0.0,
        dis_goal: 100.0,
        dis_pro: None,
        collision: CollisionKind::None,
        reached_goal: false,
    }
}

#[derive(Serialize)]
pub struct SamplingView {
    pub priorities: Vec<f64>,
    pub expected: Vec<f64>,
    pub empirical: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Draws `batches` stratified batches of 32 from a buffer holding the given
/// priorities and reports the slot frequencies next to p_i and the
/// normalized importance weights at exponent `mu`.
pub fn per_sampling(priorities: &[f64], lambda: f64, mu: f64, batches: usize, seed: u64) -> Result<SamplingView, String> {
    if priorities.len() < 32 || priorities.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err("need at least 32 positive priorities".into());
    }
    let n = priorities.len();
    let cfg = PerConfig { capacity: n, lambda, priority_floor: 0.0, ..PerConfig::default() };
    let mut buf = PrioritizedReplay::new(cfg);
    for i in 0..n {
        buf.push(Transition { obs: vec![i as f64], action: 0, reward: 0.0, next_obs: vec![0.0], terminal: false });
    }
    let idx: Vec<usize> = (0..n).collect();
    buf.update_priorities(&idx, priorities).map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; n];
    for _ in 0..batches {
        for i in buf.sample_indices(32, &mut rng).map_err(|e| e.to_string())? {
            counts[i] += 1;
        }
    }
    let expected: Vec<f64> = (0..n).map(|i| buf.probability(i)).collect();
    // Batch weights are scaled by their batch's maximum; over the whole
    // buffer the largest weight belongs to the least likely slot.
    let p_min = expected.iter().copied().fold(f64::INFINITY, f64::min);
    let weights = expected.iter().map(|p| (p_min / p).powf(mu)).collect();
    let total = (batches * 32) as f64;
    Ok(SamplingView {
        priorities: priorities.to_vec(),
        expected,
        empirical: counts.iter().map(|&c| c as f64 / total).collect(),
        weights,
    })
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo views serialize")
}

#[wasm_bindgen]
pub struct Drive {
    inner: PidDrive,
}

#[wasm_bindgen]
impl Drive {
    #[wasm_bindgen(constructor)]
    pub fn new(scenario: &str, seed: u32, target_speed: f64) -> Result<Drive, JsValue> {
        PidDrive::new(scenario, seed as u64, target_speed).map(|inner| Drive { inner }).map_err(|e| JsValue::from_str(&e))
    }

    pub fn track(&self) -> String {
        json(&self.inner.track())
    }

    pub fn advance(&mut self, ticks: usize) -> String {
        json(&self.inner.advance(ticks))
    }
}

#[wasm_bindgen(js_name = rewardCurves)]
pub fn reward_curves_js(variable: &str, speed: f64, steer: f64, cross: f64, points: usize) -> Result<String, JsValue> {
    let base = StepOutcome { v: speed, st: steer, e_cross: cross, ..cruising_outcome() };
    reward_curves(variable, &base, points).map(|c| json(&c)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = perSampling)]
pub fn per_sampling_js(priorities: &[f64], lambda: f64, mu: f64, batches: usize, seed: u32) -> Result<String, JsValue> {
    per_sampling(priorities, lambda, mu, batches, seed as u64).map(|v| json(&v)).map_err(|e| JsValue::from_str(&e))
}
