//! Deterministic 2D driving world.

pub mod control;
pub mod geometry;
pub mod track;
pub mod vehicle;
pub mod world;

pub use control::{
    apply_action, nearest_action, Action, ControlCommand, PidConfig, PidController, PidGains,
    SteerOp, ThrottleOp, NUM_ACTIONS,
};
pub use geometry::{OrientedRect, Segment, Vec2};
pub use track::{RouteMetrics, TrackSpec};
pub use vehicle::{step_dynamics, VehicleParams, VehicleState};
pub use world::{
    autopilot_step, spawn_scenario, AutopilotDriver, CollisionEvent, CollisionTarget, Role,
    ScenarioKind, ScenarioSpec, SpawnParams, Vehicle, VehicleId, World, PROTAGONIST,
};

/// Cross-track error, remaining distance, lane-relative heading and
/// progress of `state` along `track`.
pub fn route_metrics(state: &VehicleState, track: &TrackSpec) -> RouteMetrics {
    track.route_metrics(state.position, state.heading)
}
