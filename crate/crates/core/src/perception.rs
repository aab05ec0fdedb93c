//! Forward ray-cast semantic scan, four-frame stacking, and the flattened
//! observation vector fed to the Q-network.
//!
//! Layout of a flattened observation (length `4 * 2K + 8`):
//!
//! ```text
//! for frame in oldest..=newest:      // 4 frames
//!     for beam in 0..K:              // left-most beam first
//!         edge_proximity, vehicle_proximity
//! v_lon, v_lat, yaw_rate, a_lon, a_lat   // scaled, clamped to [-1, 1]
//! throttle_prev, steer_prev, brake_prev
//! ```
//!
//! A beam's proximity is `1 - distance / max_range` in the channel of the
//! class it hit and zero in the other; a free beam is zero in both.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::sim::geometry::{ray_segment, Vec2};
use crate::sim::{VehicleId, VehicleParams, VehicleState, World};

pub const FRAME_STACK: usize = 4;
pub const MOTION_LEN: usize = 5;
pub const CONTROL_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitClass {
    Free,
    RoadEdge,
    Vehicle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub beams: usize,
    pub max_range: f64,
    pub fov_deg: f64,
    pub speed_scale: f64,
    pub yaw_rate_scale: f64,
    pub accel_scale: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            beams: 36,
            max_range: 50.0,
            fov_deg: 110.0,
            speed_scale: 20.0,
            yaw_rate_scale: 2.0,
            accel_scale: 10.0,
        }
    }
}

impl SensorConfig {
    pub fn layout(&self) -> ObservationLayout {
        ObservationLayout { beams: self.beams, frames: FRAME_STACK }
    }

    /// Beam angle relative to the heading, radians (positive is right).
    pub fn beam_angle(&self, i: usize) -> f64 {
        let fov = self.fov_deg.to_radians();
        -0.5 * fov + i as f64 * fov / (self.beams - 1) as f64
    }
}

/// Shape of the flattened observation; stored in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLayout {
    pub beams: usize,
    pub frames: usize,
}

impl ObservationLayout {
    pub fn len(&self) -> usize {
        self.frames * 2 * self.beams + MOTION_LEN + CONTROL_LEN
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayScan {
    /// Hit range over max range, in [0, 1]; exactly 1 for a free beam.
    pub distances: Vec<f64>,
    pub classes: Vec<HitClass>,
}

impl RayScan {
    pub fn beams(&self) -> usize {
        self.distances.len()
    }

    fn push_channels(&self, out: &mut Vec<f64>) {
        for (d, c) in self.distances.iter().zip(&self.classes) {
            let p = 1.0 - d;
            match c {
                HitClass::Free => out.extend([0.0, 0.0]),
                HitClass::RoadEdge => out.extend([p, 0.0]),
                HitClass::Vehicle => out.extend([0.0, p]),
            }
        }
    }
}

/// Casts `cfg.beams` rays from the center of vehicle `id` over the forward
/// field of view and reports the nearest road edge or other vehicle.
pub fn raycast(world: &World, id: VehicleId, cfg: &SensorConfig) -> RayScan {
    assert!(cfg.beams >= 3 && cfg.max_range > 0.0);
    let me = &world.vehicle(id).state;
    let origin = me.position;
    let reach = cfg.max_range;
    let edges: Vec<_> = world
        .track
        .edges()
        .iter()
        .filter(|e| ((e.a + e.b) * 0.5).dist(origin) <= reach + 0.5 * e.length())
        .collect();
    let bodies: Vec<_> = world
        .footprints()
        .filter(|(other, fp)| *other != id && fp.center.dist(origin) <= reach + fp.bounding_radius())
        .map(|(_, fp)| fp)
        .collect();

    let mut distances = Vec::with_capacity(cfg.beams);
    let mut classes = Vec::with_capacity(cfg.beams);
    for i in 0..cfg.beams {
        let dir = Vec2::from_heading(me.heading + cfg.beam_angle(i));
        let mut best = (reach, HitClass::Free);
        for e in &edges {
            if let Some(t) = ray_segment(origin, dir, e) {
                if t < best.0 {
                    best = (t, HitClass::RoadEdge);
                }
            }
        }
        for fp in &bodies {
            if let Some(t) = fp.ray_hit(origin, dir) {
                if t < best.0 {
                    best = (t, HitClass::Vehicle);
                }
            }
        }
        distances.push(if best.1 == HitClass::Free { 1.0 } else { best.0 / reach });
        classes.push(best.1);
    }
    RayScan { distances, classes }
}

/// FIFO of the last four scans.
#[derive(Debug, Clone, Default)]
pub struct ScanHistory {
    frames: VecDeque<RayScan>,
}

impl ScanHistory {
    pub fn new() -> Self {
        ScanHistory { frames: VecDeque::with_capacity(FRAME_STACK) }
    }

    pub fn push(&mut self, scan: RayScan) {
        if self.frames.len() == FRAME_STACK {
            self.frames.pop_front();
        }
        self.frames.push_back(scan);
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    /// Oldest to newest, padded at the front by repeating the oldest scan.
    /// Returns `None` while empty.
    pub fn view(&self) -> Option<[&RayScan; FRAME_STACK]> {
        let first = self.frames.front()?;
        let pad = FRAME_STACK - self.frames.len();
        Some(std::array::from_fn(|i| if i < pad { first } else { &self.frames[i - pad] }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackedObservation {
    pub scans: [RayScan; FRAME_STACK],
    /// (v_lon, v_lat, yaw_rate, a_lon, a_lat), scaled.
    pub motion: [f64; MOTION_LEN],
    /// (throttle, steer, brake) applied on the previous step.
    pub prev_control: [f64; CONTROL_LEN],
}

impl StackedObservation {
    pub fn flatten(&self) -> Vec<f64> {
        let beams = self.scans[0].beams();
        let mut out = Vec::with_capacity(FRAME_STACK * 2 * beams + MOTION_LEN + CONTROL_LEN);
        for s in &self.scans {
            s.push_channels(&mut out);
        }
        out.extend(self.motion);
        out.extend(self.prev_control);
        out
    }
}

/// Assembles the learner input. Panics if `history` is empty.
pub fn build_observation(
    history: &ScanHistory,
    vehicle: &VehicleState,
    params: &VehicleParams,
    cfg: &SensorConfig,
) -> StackedObservation {
    let view = history.view().expect("observation needs at least one scan");
    let scale = |x: f64, s: f64| (x / s).clamp(-1.0, 1.0);
    StackedObservation {
        scans: view.map(Clone::clone),
        motion: [
            scale(vehicle.speed, cfg.speed_scale),
            scale(vehicle.lateral_velocity(params), cfg.speed_scale),
            scale(vehicle.yaw_rate, cfg.yaw_rate_scale),
            scale(vehicle.accel_lon, cfg.accel_scale),
            scale(vehicle.accel_lat, cfg.accel_scale),
        ],
        prev_control: [vehicle.command.throttle, vehicle.command.steer, vehicle.command.brake],
    }
}
