use serde::{Deserialize, Serialize};

use super::control::ControlCommand;
use super::geometry::{OrientedRect, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Front-wheel angle at full steer, radians.
    pub max_steer_angle: f64,
    pub wheelbase: f64,
    /// Acceleration at full throttle, m/s^2.
    pub max_accel: f64,
    /// Deceleration at full brake, m/s^2.
    pub max_brake: f64,
    /// Linear drag coefficient, 1/s.
    pub drag: f64,
    pub length: f64,
    pub width: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            max_steer_angle: 35f64.to_radians(),
            wheelbase: 2.5,
            max_accel: 4.0,
            max_brake: 8.0,
            drag: 0.05,
            length: 4.5,
            width: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub yaw_rate: f64,
    pub accel_lon: f64,
    pub accel_lat: f64,
    pub command: ControlCommand,
}

impl VehicleState {
    pub fn at_rest(position: Vec2, heading: f64) -> Self {
        VehicleState {
            position,
            heading,
            speed: 0.0,
            yaw_rate: 0.0,
            accel_lon: 0.0,
            accel_lat: 0.0,
            command: ControlCommand::IDLE,
        }
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_heading(self.heading) * self.speed
    }

    /// Lateral velocity of the footprint center, which sits half a
    /// wheelbase ahead of the rear axle.
    pub fn lateral_velocity(&self, params: &VehicleParams) -> f64 {
        self.yaw_rate * 0.5 * params.wheelbase
    }

    pub fn accel_magnitude(&self) -> f64 {
        self.accel_lon.hypot(self.accel_lat)
    }

    pub fn footprint(&self, params: &VehicleParams) -> OrientedRect {
        OrientedRect::new(self.position, self.heading, params.length, params.width)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.heading.is_finite()
            && self.speed.is_finite()
            && self.yaw_rate.is_finite()
            && self.accel_lon.is_finite()
            && self.accel_lat.is_finite()
    }
}

/// Kinematic bicycle step with semi-implicit Euler integration: speed is
/// updated first, then heading, then position along the new heading.
pub fn step_dynamics(
    state: &VehicleState,
    cmd: ControlCommand,
    params: &VehicleParams,
    dt: f64,
) -> VehicleState {
    debug_assert!(dt > 0.0);
    let wheel_angle = cmd.steer * params.max_steer_angle;
    let accel = params.max_accel * cmd.throttle - params.max_brake * cmd.brake - params.drag * state.speed;
    let speed = (state.speed + accel * dt).max(0.0);
    let yaw_rate = state.speed / params.wheelbase * wheel_angle.tan();
    let heading = state.heading + yaw_rate * dt;
    let position = state.position + Vec2::from_heading(heading) * (speed * dt);
    VehicleState {
        position,
        heading,
        speed,
        yaw_rate,
        accel_lon: (speed - state.speed) / dt,
        accel_lat: speed * yaw_rate,
        command: cmd,
    }
}
