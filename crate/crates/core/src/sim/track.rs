//! Route polylines, road-edge geometry and the track file loader.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::{wrap_angle, Segment, Vec2};
use crate::error::{Error, Result};

/// Length of the closed road stub behind the first and past the last waypoint.
const END_CAP_RUNOUT: f64 = 6.0;

/// On-disk shape of a track file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrackFile {
    pub waypoints: Vec<[f64; 2]>,
    pub road_width: f64,
    pub goal_threshold: f64,
}

/// A validated route with its road corridor.
#[derive(Debug, Clone)]
pub struct TrackSpec {
    waypoints: Vec<Vec2>,
    cumulative: Vec<f64>,
    road_width: f64,
    goal_threshold: f64,
    edges: Vec<Segment>,
}

/// Closest-point query result against the route polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub segment: usize,
    pub point: Vec2,
    /// Arc length from the route start to `point`.
    pub arc: f64,
    /// Unsigned distance to the polyline.
    pub distance: f64,
    /// Signed lateral offset, positive to the right of the route direction.
    pub lateral: f64,
    /// Heading of the route tangent at the projection.
    pub tangent: f64,
}

/// Vehicle pose relative to its route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteMetrics {
    pub e_cross: f64,
    pub dis_goal: f64,
    /// Velocity direction minus lane tangent, wrapped into (-pi, pi].
    pub theta: f64,
    pub progress: f64,
    pub lateral: f64,
}

impl TrackSpec {
    pub fn new(waypoints: Vec<Vec2>, road_width: f64, goal_threshold: f64) -> Result<Self> {
        let invalid = |message: String| Error::InvalidTrack { line: 0, message };
        if waypoints.len() < 2 {
            return Err(invalid(format!("need at least 2 waypoints, got {}", waypoints.len())));
        }
        if let Some(i) = waypoints.iter().position(|p| !p.is_finite()) {
            return Err(invalid(format!("waypoint {i} is not finite")));
        }
        if !(road_width > 0.0 && road_width.is_finite()) {
            return Err(invalid(format!("road_width must be positive, got {road_width}")));
        }
        if !(goal_threshold > 0.0 && goal_threshold.is_finite()) {
            return Err(invalid(format!("goal_threshold must be positive, got {goal_threshold}")));
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        cumulative.push(0.0);
        for (i, w) in waypoints.windows(2).enumerate() {
            let len = w[0].dist(w[1]);
            if len <= 1e-9 {
                return Err(invalid(format!("waypoints {i} and {} coincide", i + 1)));
            }
            cumulative.push(cumulative[i] + len);
        }
        let edges = road_edges(&waypoints, 0.5 * road_width);
        Ok(TrackSpec { waypoints, cumulative, road_width, goal_threshold, edges })
    }

    pub fn from_file_data(data: &TrackFile) -> Result<Self> {
        let pts = data.waypoints.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        TrackSpec::new(pts, data.road_width, data.goal_threshold)
    }

    /// Parses and validates a JSON track document. Errors carry the line of
    /// the offending token or field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let data: TrackFile = serde_json::from_str(text).map_err(|e| Error::InvalidTrack {
            line: e.line(),
            message: e.to_string(),
        })?;
        TrackSpec::from_file_data(&data).map_err(|e| match e {
            Error::InvalidTrack { message, .. } => {
                let key = if message.contains("road_width") {
                    "road_width"
                } else if message.contains("goal_threshold") {
                    "goal_threshold"
                } else {
                    "waypoints"
                };
                Error::InvalidTrack { line: line_of_key(text, key), message }
            }
            other => other,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrackSpec::from_json_str(&text)
    }

    pub fn to_file_data(&self) -> TrackFile {
        TrackFile {
            waypoints: self.waypoints.iter().map(|p| [p.x, p.y]).collect(),
            road_width: self.road_width,
            goal_threshold: self.goal_threshold,
        }
    }

    pub fn waypoints(&self) -> &[Vec2] {
        &self.waypoints
    }

    pub fn road_width(&self) -> f64 {
        self.road_width
    }

    pub fn goal_threshold(&self) -> f64 {
        self.goal_threshold
    }

    pub fn route_length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn start(&self) -> Vec2 {
        self.waypoints[0]
    }

    pub fn goal(&self) -> Vec2 {
        *self.waypoints.last().unwrap()
    }

    /// Hard road boundary segments, including the closing caps at both ends.
    pub fn edges(&self) -> &[Segment] {
        &self.edges
    }

    /// Arc length of waypoint `i`.
    pub fn arc_at_waypoint(&self, i: usize) -> f64 {
        self.cumulative[i]
    }

    pub fn project(&self, p: Vec2) -> Projection {
        let mut best = (f64::INFINITY, 0usize, 0.0f64);
        for (i, w) in self.waypoints.windows(2).enumerate() {
            let (t, d2) = Segment::new(w[0], w[1]).project(p);
            if d2 < best.0 {
                best = (d2, i, t);
            }
        }
        let (d2, i, t) = best;
        let a = self.waypoints[i];
        let b = self.waypoints[i + 1];
        let dir = (b - a).normalized();
        let point = a + (b - a) * t;
        let lateral = (p - point).dot(dir.right_normal());
        Projection {
            segment: i,
            point,
            arc: self.cumulative[i] + t * (self.cumulative[i + 1] - self.cumulative[i]),
            distance: d2.sqrt(),
            lateral,
            tangent: dir.heading(),
        }
    }

    /// Position and tangent heading at arc length `s` (clamped to the route).
    pub fn point_at(&self, s: f64) -> (Vec2, f64) {
        let s = s.clamp(0.0, self.route_length());
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(self.waypoints.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.waypoints.len() - 2),
        };
        let a = self.waypoints[i];
        let b = self.waypoints[i + 1];
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let t = ((s - self.cumulative[i]) / seg).clamp(0.0, 1.0);
        (a + (b - a) * t, (b - a).heading())
    }

    /// Route-relative metrics for a vehicle at `position` moving along `heading`.
    pub fn route_metrics(&self, position: Vec2, heading: f64) -> RouteMetrics {
        let proj = self.project(position);
        let dis_goal = (self.route_length() - proj.arc).max(0.0);
        RouteMetrics {
            e_cross: proj.distance,
            dis_goal,
            theta: wrap_angle(heading - proj.tangent),
            progress: (1.0 - dis_goal / self.route_length()).clamp(0.0, 1.0),
            lateral: proj.lateral,
        }
    }

    /// The route driven backwards from arc length `from` to the start, used
    /// as the planned path of a vehicle heading toward the route origin.
    pub fn reversed_from(&self, from: f64) -> Result<TrackSpec> {
        let from = from.clamp(0.0, self.route_length());
        let (head, _) = self.point_at(from);
        let mut pts = vec![head];
        for i in (0..self.waypoints.len()).rev() {
            if self.cumulative[i] < from - 1e-6 {
                pts.push(self.waypoints[i]);
            }
        }
        TrackSpec::new(pts, self.road_width, self.goal_threshold)
    }

    /// The course used when no track file is given: about 300 m with two
    /// right and two left bends of 25–30 m radius, an 8 m road and a 3 m
    /// goal threshold.
    pub fn default_course() -> TrackSpec {
        let pieces = [
            Piece::Straight(40.0),
            Piece::Arc { radius: 30.0, angle: FRAC_PI_2 },
            Piece::Straight(20.0),
            Piece::Arc { radius: 30.0, angle: -FRAC_PI_2 },
            Piece::Straight(25.0),
            Piece::Arc { radius: 25.0, angle: -FRAC_PI_2 },
            Piece::Straight(15.0),
            Piece::Arc { radius: 25.0, angle: FRAC_PI_2 },
            Piece::Straight(30.0),
        ];
        let pts = build_polyline(Vec2::ZERO, 0.0, &pieces, 2.0);
        TrackSpec::new(pts, 8.0, 3.0).expect("default course is valid")
    }

    /// A straight east-bound road, handy for fixtures.
    pub fn straight(length: f64, road_width: f64) -> TrackSpec {
        let pts = build_polyline(Vec2::ZERO, 0.0, &[Piece::Straight(length)], 2.0);
        TrackSpec::new(pts, road_width, 3.0).expect("straight course is valid")
    }
}

/// A primitive used to lay out a course.
#[derive(Debug, Clone, Copy)]
pub enum Piece {
    Straight(f64),
    /// Positive angle turns right (clockwise on the map).
    Arc { radius: f64, angle: f64 },
}

/// Samples a sequence of pieces into waypoints spaced at most `spacing` apart.
pub fn build_polyline(start: Vec2, heading: f64, pieces: &[Piece], spacing: f64) -> Vec<Vec2> {
    let mut pts = vec![start];
    let mut pos = start;
    let mut h = heading;
    for piece in pieces {
        match *piece {
            Piece::Straight(len) => {
                let n = (len / spacing).ceil().max(1.0) as usize;
                let step = len / n as f64;
                for _ in 0..n {
                    pos = pos + Vec2::from_heading(h) * step;
                    pts.push(pos);
                }
            }
            Piece::Arc { radius, angle } => {
                let len = radius * angle.abs();
                let n = (len / spacing).ceil().max(1.0) as usize;
                let side = angle.signum();
                let center = pos + Vec2::from_heading(h).right_normal() * (radius * side);
                let start_ang = (pos - center).heading();
                for k in 1..=n {
                    let a = start_ang + angle * k as f64 / n as f64;
                    pts.push(center + Vec2::from_heading(a) * radius);
                }
                h += angle;
                pos = *pts.last().unwrap();
            }
        }
    }
    pts
}

fn road_edges(pts: &[Vec2], half_width: f64) -> Vec<Segment> {
    let n = pts.len();
    let seg_dir = |i: usize| (pts[i + 1] - pts[i]).normalized();
    let mut left = Vec::with_capacity(n + 2);
    let mut right = Vec::with_capacity(n + 2);
    for i in 0..n {
        let normal = if i == 0 {
            seg_dir(0).right_normal()
        } else if i == n - 1 {
            seg_dir(n - 2).right_normal()
        } else {
            let a = seg_dir(i - 1).right_normal();
            let b = seg_dir(i).right_normal();
            let m = (a + b).normalized();
            // miter: scale so each adjacent offset segment stays half_width away
            let c = m.dot(a).max(0.25);
            m * (1.0 / c)
        };
        left.push(pts[i] - normal * half_width);
        right.push(pts[i] + normal * half_width);
    }
    let back = seg_dir(0) * END_CAP_RUNOUT;
    let fwd = seg_dir(n - 2) * END_CAP_RUNOUT;
    left.insert(0, left[0] - back);
    right.insert(0, right[0] - back);
    left.push(*left.last().unwrap() + fwd);
    right.push(*right.last().unwrap() + fwd);

    let mut edges = Vec::with_capacity(2 * left.len());
    for w in left.windows(2) {
        edges.push(Segment::new(w[0], w[1]));
    }
    for w in right.windows(2) {
        edges.push(Segment::new(w[0], w[1]));
    }
    edges.push(Segment::new(left[0], right[0]));
    edges.push(Segment::new(*left.last().unwrap(), *right.last().unwrap()));
    edges
}

fn line_of_key(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1).unwrap_or(1)
}
