//! Planar geometry used by the simulator: points, footprints and the
//! separating-axis distance between convex quadrilaterals.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product; positive when `o` is to the left of `self`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
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

/// A convex quadrilateral with counter-clockwise corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub corners: [Vec2; 4],
}

impl Quad {
    /// Oriented rectangle of the given length (along `heading`) and width.
    pub fn oriented(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        let ax = Vec2::from_angle(heading) * (length / 2.0);
        let ay = Vec2::from_angle(heading).perp() * (width / 2.0);
        Quad {
            corners: [center - ax - ay, center + ax - ay, center + ax + ay, center - ax + ay],
        }
    }

    /// Axis-aligned box.
    pub fn aabb(center: Vec2, half_extents: Vec2) -> Self {
        let (hx, hy) = (half_extents.x, half_extents.y);
        Quad {
            corners: [
                Vec2::new(center.x - hx, center.y - hy),
                Vec2::new(center.x + hx, center.y - hy),
                Vec2::new(center.x + hx, center.y + hy),
                Vec2::new(center.x - hx, center.y + hy),
            ],
        }
    }

    pub fn center(&self) -> Vec2 {
        let s = self.corners.iter().fold(Vec2::default(), |acc, &c| acc + c);
        s * 0.25
    }

    /// Radius of the circumscribed circle around [`Quad::center`].
    pub fn radius(&self) -> f64 {
        let c = self.center();
        self.corners.iter().map(|&p| p.distance(c)).fold(0.0, f64::max)
    }

    fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        (0..4).map(move |i| (self.corners[i], self.corners[(i + 1) % 4]))
    }

    fn projection(&self, axis: Vec2) -> (f64, f64) {
        self.corners
            .iter()
            .map(|c| c.dot(axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)))
    }

    /// Separating-axis overlap test (touching counts as overlap).
    pub fn overlaps(&self, other: &Quad) -> bool {
        for q in [self, other] {
            for (a, b) in q.edges() {
                let axis = (b - a).perp();
                let (lo1, hi1) = self.projection(axis);
                let (lo2, hi2) = other.projection(axis);
                if hi1 < lo2 || hi2 < lo1 {
                    return false;
                }
            }
        }
        true
    }

    /// Euclidean distance between the two footprints; zero when they overlap.
    pub fn distance(&self, other: &Quad) -> f64 {
        if self.overlaps(other) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for (a, b) in self.edges() {
            for &p in &other.corners {
                best = best.min(point_segment_distance(p, a, b));
            }
        }
        for (a, b) in other.edges() {
            for &p in &self.corners {
                best = best.min(point_segment_distance(p, a, b));
            }
        }
        best
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}
