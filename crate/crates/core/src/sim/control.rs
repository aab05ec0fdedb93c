//! The nine-action incremental control map and the PID path follower that
//! both the autopilot traffic and assisted exploration use.

use serde::{Deserialize, Serialize};

use super::geometry::wrap_angle;
use super::track::TrackSpec;
use super::vehicle::{VehicleParams, VehicleState};
use crate::error::{Error, Result};

/// Increment applied by every non-constant operation.
pub const CONTROL_STEP: f64 = 0.2;

pub const NUM_ACTIONS: usize = 9;

/// Continuous actuation: steer in [-1, 1] (positive is right), throttle and
/// brake in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
}

impl ControlCommand {
    pub const IDLE: ControlCommand = ControlCommand { steer: 0.0, throttle: 0.0, brake: 0.0 };

    pub fn new(steer: f64, throttle: f64, brake: f64) -> Self {
        ControlCommand { steer, throttle, brake }
    }

    pub fn is_valid(&self) -> bool {
        (-1.0..=1.0).contains(&self.steer)
            && (0.0..=1.0).contains(&self.throttle)
            && (0.0..=1.0).contains(&self.brake)
    }

    /// Projects each field onto its admissible interval.
    pub fn clamped(self) -> Self {
        ControlCommand {
            steer: self.steer.clamp(-1.0, 1.0),
            throttle: self.throttle.clamp(0.0, 1.0),
            brake: self.brake.clamp(0.0, 1.0),
        }
    }

    fn dist_sq(&self, o: &ControlCommand) -> f64 {
        (self.steer - o.steer).powi(2)
            + (self.throttle - o.throttle).powi(2)
            + (self.brake - o.brake).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThrottleOp {
    Constant,
    Accelerate,
    Decelerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SteerOp {
    Constant,
    SteerLeft,
    SteerRight,
}

/// One of the nine (throttle, steer) operation pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub throttle: ThrottleOp,
    pub steer: SteerOp,
}

impl Action {
    pub const IDLE: Action = Action { throttle: ThrottleOp::Constant, steer: SteerOp::Constant };

    pub fn new(throttle: ThrottleOp, steer: SteerOp) -> Self {
        Action { throttle, steer }
    }

    /// `3 * throttle + steer`, both in declaration order.
    pub fn index(self) -> usize {
        let t = match self.throttle {
            ThrottleOp::Constant => 0,
            ThrottleOp::Accelerate => 1,
            ThrottleOp::Decelerate => 2,
        };
        let s = match self.steer {
            SteerOp::Constant => 0,
            SteerOp::SteerLeft => 1,
            SteerOp::SteerRight => 2,
        };
        3 * t + s
    }

    pub fn from_index(i: usize) -> Option<Action> {
        if i >= NUM_ACTIONS {
            return None;
        }
        let throttle = [ThrottleOp::Constant, ThrottleOp::Accelerate, ThrottleOp::Decelerate][i / 3];
        let steer = [SteerOp::Constant, SteerOp::SteerLeft, SteerOp::SteerRight][i % 3];
        Some(Action { throttle, steer })
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..NUM_ACTIONS).map(|i| Action::from_index(i).unwrap())
    }
}

/// Incremental control update from the previous command.
pub fn apply_action(prev: ControlCommand, a: Action) -> ControlCommand {
    let steer = match a.steer {
        SteerOp::Constant => prev.steer,
        SteerOp::SteerRight => (prev.steer + CONTROL_STEP).min(1.0),
        SteerOp::SteerLeft => (prev.steer - CONTROL_STEP).max(-1.0),
    };
    let (throttle, brake) = match a.throttle {
        ThrottleOp::Constant => (prev.throttle, prev.brake),
        ThrottleOp::Accelerate => ((prev.throttle + CONTROL_STEP).min(1.0), 0.0),
        ThrottleOp::Decelerate => {
            ((prev.throttle - CONTROL_STEP).max(0.0), (prev.brake + CONTROL_STEP).min(1.0))
        }
    };
    ControlCommand { steer, throttle, brake }
}

/// The action whose incremental result lies nearest to `desired` (squared
/// Euclidean distance in command space, ties to the lower index).
pub fn nearest_action(prev: ControlCommand, desired: ControlCommand) -> Action {
    let mut best = (f64::INFINITY, Action::IDLE);
    for a in Action::all() {
        let d = apply_action(prev, a).dist_sq(&desired);
        if d < best.0 {
            best = (d, a);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidConfig {
    /// Acts on the heading error toward a lookahead point on the path.
    pub lateral: PidGains,
    /// Acts on the speed error (m/s) on top of drag feed-forward.
    pub speed: PidGains,
    pub lookahead: f64,
    pub target_speed: f64,
    /// Anti-windup bound on each integral state.
    pub integral_limit: f64,
}

impl Default for PidConfig {
    fn default() -> Self {
        PidConfig {
            lateral: PidGains { kp: 1.6, ki: 0.0, kd: 0.1 },
            speed: PidGains { kp: 0.15, ki: 0.02, kd: 0.0 },
            lookahead: 8.0,
            target_speed: 8.0,
            integral_limit: 5.0,
        }
    }
}

/// Stateful lateral + longitudinal PID tracker of a route at a target speed.
#[derive(Debug, Clone)]
pub struct PidController {
    pub config: PidConfig,
    path: Option<TrackSpec>,
    lat_integral: f64,
    lat_prev: Option<f64>,
    speed_integral: f64,
    speed_prev: Option<f64>,
}

impl PidController {
    pub fn new(config: PidConfig, path: Option<TrackSpec>) -> Self {
        PidController {
            config,
            path,
            lat_integral: 0.0,
            lat_prev: None,
            speed_integral: 0.0,
            speed_prev: None,
        }
    }

    pub fn path(&self) -> Option<&TrackSpec> {
        self.path.as_ref()
    }

    pub fn set_path(&mut self, path: TrackSpec) {
        self.path = Some(path);
        self.reset();
    }

    pub fn reset(&mut self) {
        self.lat_integral = 0.0;
        self.lat_prev = None;
        self.speed_integral = 0.0;
        self.speed_prev = None;
    }

    /// Continuous command the controller would apply, before quantization
    /// to the action set. `dt` is the time since the previous call.
    pub fn desired_command(
        &mut self,
        vehicle: &VehicleState,
        params: &VehicleParams,
        target_speed: f64,
        dt: f64,
    ) -> Result<ControlCommand> {
        let path = self.path.as_ref().ok_or(Error::NoPath)?;
        let cfg = &self.config;
        let proj = path.project(vehicle.position);
        let (target, _) = path.point_at(proj.arc + cfg.lookahead);
        let to_target = target - vehicle.position;
        // At the end of the route fall back to the route tangent.
        let desired_heading = if to_target.norm() > 0.5 {
            to_target.heading()
        } else {
            proj.tangent
        };
        let lat_err = wrap_angle(desired_heading - vehicle.heading);
        self.lat_integral =
            (self.lat_integral + lat_err * dt).clamp(-cfg.integral_limit, cfg.integral_limit);
        let lat_d = self.lat_prev.map_or(0.0, |p| (lat_err - p) / dt);
        self.lat_prev = Some(lat_err);
        let steer =
            cfg.lateral.kp * lat_err + cfg.lateral.ki * self.lat_integral + cfg.lateral.kd * lat_d;

        let v_err = target_speed - vehicle.speed;
        self.speed_integral =
            (self.speed_integral + v_err * dt).clamp(-cfg.integral_limit, cfg.integral_limit);
        let v_d = self.speed_prev.map_or(0.0, |p| (v_err - p) / dt);
        self.speed_prev = Some(v_err);
        let feed_forward = params.drag * target_speed / params.max_accel;
        let u = feed_forward
            + cfg.speed.kp * v_err
            + cfg.speed.ki * self.speed_integral
            + cfg.speed.kd * v_d;
        let (throttle, brake) = if u >= 0.0 { (u, 0.0) } else { (0.0, -u) };
        Ok(ControlCommand { steer, throttle, brake }.clamped())
    }

    /// Quantized suggestion: the action whose incremental update best
    /// matches the PID output.
    pub fn suggest(
        &mut self,
        vehicle: &VehicleState,
        params: &VehicleParams,
        dt: f64,
    ) -> Result<Action> {
        let target_speed = self.config.target_speed;
        self.suggest_at_speed(vehicle, params, target_speed, dt)
    }

    pub fn suggest_at_speed(
        &mut self,
        vehicle: &VehicleState,
        params: &VehicleParams,
        target_speed: f64,
        dt: f64,
    ) -> Result<Action> {
        let desired = self.desired_command(vehicle, params, target_speed, dt)?;
        Ok(nearest_action(vehicle.command, desired))
    }
}
