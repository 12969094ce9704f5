//! Planar geometry shared by every module.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, theta: f64) -> Point2 {
        let (s, c) = theta.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Point2, t: f64) -> Point2 {
        Point2::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

/// Planar pose: position plus heading (rad, CCW from +x).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Maps a point expressed in this pose's frame into the parent frame.
    pub fn transform_point(&self, p: Point2) -> Point2 {
        p.rotate(self.theta).add(self.position())
    }

    /// Maps a parent-frame point into this pose's frame.
    pub fn inverse_transform_point(&self, p: Point2) -> Point2 {
        p.sub(self.position()).rotate(-self.theta)
    }

    /// `self ∘ other`: `other` is expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let p = self.transform_point(other.position());
        Pose::new(p.x, p.y, normalize_angle(self.theta + other.theta))
    }

    pub fn inverse(&self) -> Pose {
        let p = Point2::new(-self.x, -self.y).rotate(-self.theta);
        Pose::new(p.x, p.y, normalize_angle(-self.theta))
    }

    /// Pose of `other` relative to `self` (i.e. `self⁻¹ ∘ other`).
    pub fn relative(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Wraps to (-π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

/// Wraps to [0, 2π).
pub fn wrap_positive(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.lerp(b, t))
}

pub fn polyline_length(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_inverse_is_identity() {
        let a = Pose::new(1.0, -2.0, 0.7);
        let id = a.compose(&a.inverse());
        assert!(id.x.abs() < 1e-12 && id.y.abs() < 1e-12 && id.theta.abs() < 1e-12);
    }

    #[test]
    fn relative_recovers_other() {
        let a = Pose::new(1.0, 2.0, 0.3);
        let b = Pose::new(-0.5, 4.0, -2.0);
        let r = a.relative(&b);
        let back = a.compose(&r);
        assert!((back.x - b.x).abs() < 1e-12);
        assert!((back.y - b.y).abs() < 1e-12);
        assert!(normalize_angle(back.theta - b.theta).abs() < 1e-12);
    }

    #[test]
    fn angle_wrapping() {
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_positive(-0.5) - (TAU - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn segment_distance() {
        let d = point_segment_distance(
            Point2::new(0.5, 2.0),
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
        );
        assert_eq!(d, 2.0);
        let d = point_segment_distance(
            Point2::new(3.0, 4.0),
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 0.0),
        );
        assert_eq!(d, 5.0);
    }
}
