//! Planar primitives shared by the simulator and the ray-cast sensor.
//!
//! The world frame follows the map convention used by the vehicle model:
//! x grows to the east, y grows to the south, and headings are measured
//! clockwise from +x. A positive steering command therefore increases the
//! heading, which is a turn to the right as seen from above.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector pointing along `heading`.
    pub fn from_heading(heading: f64) -> Self {
        Vec2::new(heading.cos(), heading.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Direction 90 degrees to the right of `self` in the map frame.
    pub fn right_normal(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    pub fn heading(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Segment { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    /// Closest point parameter in [0, 1] and the squared distance to it.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let d = self.b - self.a;
        let len_sq = d.norm_sq();
        let t = if len_sq > 0.0 {
            ((p - self.a).dot(d) / len_sq).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = self.a + d * t;
        (t, (p - q).norm_sq())
    }

    /// Proper or touching intersection of two closed segments.
    pub fn intersects(&self, o: &Segment) -> bool {
        let d1 = orient(o.a, o.b, self.a);
        let d2 = orient(o.a, o.b, self.b);
        let d3 = orient(self.a, self.b, o.a);
        let d4 = orient(self.a, self.b, o.b);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        (d1 == 0.0 && on_segment(o.a, o.b, self.a))
            || (d2 == 0.0 && on_segment(o.a, o.b, self.b))
            || (d3 == 0.0 && on_segment(self.a, self.b, o.a))
            || (d4 == 0.0 && on_segment(self.a, self.b, o.b))
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Distance along a ray (origin `o`, unit direction `dir`) to a segment, if hit.
pub fn ray_segment(o: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let e = seg.b - seg.a;
    let denom = dir.cross(e);
    if denom.abs() < 1e-12 {
        return None;
    }
    let w = seg.a - o;
    let t = w.cross(e) / denom;
    let u = w.cross(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Oriented rectangle: a vehicle footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedRect {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        OrientedRect { center, heading, half_length: 0.5 * length, half_width: 0.5 * width }
    }

    fn axes(&self) -> (Vec2, Vec2) {
        let fwd = Vec2::from_heading(self.heading);
        (fwd, fwd.right_normal())
    }

    /// Corners in order front-left, front-right, rear-right, rear-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let (f, r) = self.axes();
        let fl = f * self.half_length;
        let wr = r * self.half_width;
        [
            self.center + fl - wr,
            self.center + fl + wr,
            self.center - fl + wr,
            self.center - fl - wr,
        ]
    }

    pub fn edges(&self) -> [Segment; 4] {
        let c = self.corners();
        [
            Segment::new(c[0], c[1]),
            Segment::new(c[1], c[2]),
            Segment::new(c[2], c[3]),
            Segment::new(c[3], c[0]),
        ]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (f, r) = self.axes();
        let d = p - self.center;
        d.dot(f).abs() <= self.half_length && d.dot(r).abs() <= self.half_width
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    /// Largest gap between projections over the four candidate separating
    /// axes. Positive means separated, zero touching, negative overlapping
    /// (its magnitude is the smallest penetration depth).
    pub fn separation(&self, o: &OrientedRect) -> f64 {
        let (f1, r1) = self.axes();
        let (f2, r2) = o.axes();
        let d = o.center - self.center;
        let mut best = f64::NEG_INFINITY;
        for axis in [f1, r1, f2, r2] {
            let ra = self.half_length * f1.dot(axis).abs() + self.half_width * r1.dot(axis).abs();
            let rb = o.half_length * f2.dot(axis).abs() + o.half_width * r2.dot(axis).abs();
            let gap = d.dot(axis).abs() - ra - rb;
            best = best.max(gap);
        }
        best
    }

    /// Separating-axis overlap test (touching counts as overlap).
    pub fn overlaps(&self, o: &OrientedRect) -> bool {
        self.separation(o) <= 0.0
    }

    pub fn ray_hit(&self, o: Vec2, dir: Vec2) -> Option<f64> {
        if self.contains(o) {
            return Some(0.0);
        }
        self.edges()
            .iter()
            .filter_map(|e| ray_segment(o, dir, e))
            .min_by(|a, b| a.total_cmp(b))
    }

    pub fn intersects_segment(&self, s: &Segment) -> bool {
        self.contains(s.a) || self.contains(s.b) || self.edges().iter().any(|e| e.intersects(s))
    }
}
