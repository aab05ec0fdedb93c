//! Per-step rewards for the collision-avoiding protagonist and the
//! collision-seeking adversary.
//!
//! Collision and other penalty terms are kept as positive magnitudes and
//! subtracted in the totals, matching the sign pattern of each sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtagonistRewardConfig {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
    pub r7: f64,
    pub r8: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_max: f64,
    /// Goal threshold, m.
    pub goal_threshold: f64,
    pub route_length: f64,
    pub road_width: f64,
}

impl Default for ProtagonistRewardConfig {
    fn default() -> Self {
        ProtagonistRewardConfig {
            r1: 1.0,
            r2: 2.0,
            r3: 1.0,
            r4: 0.5,
            r5: 2.0,
            r6: 100.0,
            r7: 100.0,
            r8: 1.0,
            v_min: 1.0,
            v_max: 20.0,
            a_max: 6.0,
            goal_threshold: 3.0,
            route_length: 300.0,
            road_width: 8.0,
        }
    }
}

impl ProtagonistRewardConfig {
    pub fn validate(&self) -> Result<()> {
        let coeffs = [self.r1, self.r2, self.r3, self.r4, self.r5, self.r6, self.r7, self.r8];
        if coeffs.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::Config("protagonist reward coefficients must be finite and >= 0".into()));
        }
        let positive = [self.v_min, self.v_max, self.a_max, self.goal_threshold, self.route_length, self.road_width];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Config("protagonist reward limits must be positive".into()));
        }
        if self.v_min >= self.v_max {
            return Err(Error::Config("v_min must be below v_max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryRewardConfig {
    pub r2: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
    pub r7: f64,
    pub r8: f64,
    pub r9: f64,
    pub r10: f64,
    pub v_max: f64,
    /// Cross-track dead band, m.
    pub delta: f64,
    /// Distance scale of the proximity term, m.
    pub d: f64,
    pub road_width: f64,
    pub goal_threshold: f64,
    /// Length of the planned route to the protagonist's start; set per episode.
    pub route_length: f64,
}

impl Default for AdversaryRewardConfig {
    fn default() -> Self {
        AdversaryRewardConfig {
            r2: 2.0,
            r4: 0.5,
            r5: 2.0,
            r6: 100.0,
            r7: 100.0,
            r8: 1.0,
            r9: 1.0,
            r10: 100.0,
            v_max: 20.0,
            delta: 1.0,
            d: 60.0,
            road_width: 8.0,
            goal_threshold: 3.0,
            route_length: 40.0,
        }
    }
}

impl AdversaryRewardConfig {
    pub fn validate(&self) -> Result<()> {
        let coeffs = [self.r2, self.r4, self.r5, self.r6, self.r7, self.r8, self.r9, self.r10];
        if coeffs.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::Config("adversary reward coefficients must be finite and >= 0".into()));
        }
        let positive = [self.v_max, self.delta, self.d, self.road_width, self.goal_threshold, self.route_length];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Config("adversary reward limits must be positive".into()));
        }
        if self.delta >= 0.5 * self.road_width {
            return Err(Error::Config("adversary cross-track dead band must be below half the road width".into()));
        }
        Ok(())
    }

    pub fn with_route_length(&self, route_length: f64) -> Self {
        AdversaryRewardConfig { route_length, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CollisionKind {
    #[default]
    None,
    WithProtagonist,
    Other,
}

/// What happened to one vehicle during a step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Absolute speed, m/s.
    pub v: f64,
    /// Absolute acceleration, m/s^2.
    pub a: f64,
    pub st: f64,
    /// Velocity direction relative to the lane tangent, radians.
    pub theta: f64,
    pub e_cross: f64,
    pub dis_goal: f64,
    /// Distance to the protagonist (adversary only).
    pub dis_pro: Option<f64>,
    pub collision: CollisionKind,
    pub reached_goal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtagonistTerms {
    pub velocity: f64,
    pub accel: f64,
    pub steer: f64,
    pub goal: f64,
    pub collision: f64,
    pub cross: f64,
}

impl ProtagonistTerms {
    pub fn total(&self) -> f64 {
        self.velocity - self.accel - self.steer + self.goal - self.collision - self.cross
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryTerms {
    pub velocity: f64,
    pub collision: f64,
    pub distance: f64,
    pub cross: f64,
    pub goal: f64,
    pub steer: f64,
}

impl AdversaryTerms {
    pub fn total(&self) -> f64 {
        self.velocity + self.collision + self.distance - self.cross + self.goal - self.steer
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `theta` is taken as the unsigned angle between velocity and lane, so the
/// sine part penalizes sideways motion in either direction.
fn lane_alignment(theta: f64) -> f64 {
    let t = theta.abs();
    t.cos() - t.sin()
}

pub fn p_reward_terms(o: &StepOutcome, cfg: &ProtagonistRewardConfig) -> ProtagonistTerms {
    let velocity = if o.v <= cfg.v_min {
        -cfg.r1
    } else if o.v <= cfg.v_max {
        cfg.r2 * o.v / cfg.v_max * lane_alignment(o.theta)
    } else {
        0.0
    };
    ProtagonistTerms {
        velocity,
        accel: cfg.r3 * indicator(o.a >= cfg.a_max),
        steer: cfg.r4 * o.st * o.st,
        goal: cfg.r5 * (1.0 - o.dis_goal / cfg.route_length)
            + cfg.r6 * indicator(o.dis_goal < cfg.goal_threshold),
        collision: cfg.r7 * indicator(o.collision != CollisionKind::None),
        cross: cfg.r8 * (2.0 * o.e_cross / cfg.road_width).powi(2),
    }
}

pub fn protagonist_reward(o: &StepOutcome, cfg: &ProtagonistRewardConfig) -> f64 {
    p_reward_terms(o, cfg).total()
}

/// Adversary terms; `dis_goal` and `theta` are measured against the
/// adversary's planned route to the protagonist's start.
pub fn a_reward_terms(o: &StepOutcome, cfg: &AdversaryRewardConfig) -> AdversaryTerms {
    let velocity = if o.v <= cfg.v_max {
        cfg.r2 * o.v / cfg.v_max * lane_alignment(o.theta)
    } else {
        0.0
    };
    let collision = match o.collision {
        CollisionKind::None => 0.0,
        CollisionKind::WithProtagonist => cfg.r10,
        CollisionKind::Other => -cfg.r7,
    };
    let dis_pro = o.dis_pro.unwrap_or(cfg.d);
    AdversaryTerms {
        velocity,
        collision,
        distance: cfg.r9 * (1.0 - dis_pro / cfg.d),
        cross: cfg.r8 * (2.0 * o.e_cross / cfg.road_width).powi(2) * indicator(o.e_cross > cfg.delta),
        goal: cfg.r5 * (1.0 - o.dis_goal / cfg.route_length)
            + cfg.r6 * indicator(o.dis_goal < cfg.goal_threshold),
        steer: cfg.r4 * o.st * o.st,
    }
}

pub fn adversary_reward(o: &StepOutcome, cfg: &AdversaryRewardConfig) -> f64 {
    a_reward_terms(o, cfg).total()
}
