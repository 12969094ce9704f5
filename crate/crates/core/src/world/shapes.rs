//! Analytic shape queries: signed distance, ray intersection, cell overlap.

use serde::{Deserialize, Serialize};

use crate::geom::{Point2, Pose};

/// Side length of every maze wall block (m).
pub const WALL_BLOCK_SIDE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Cylinder { radius: f64 },
    Box { width: f64, height: f64 },
}

impl Shape {
    /// Radius of the smallest circle around the shape's centre enclosing it.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Cylinder { radius } => radius,
            Shape::Box { width, height } => 0.5 * width.hypot(height),
        }
    }

    /// Smallest half-extent; the thinnest feature a ray or robot can meet.
    pub fn min_feature(&self) -> f64 {
        match *self {
            Shape::Cylinder { radius } => radius,
            Shape::Box { width, height } => 0.5 * width.min(height),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: Shape,
    pub pose: Pose,
}

impl Obstacle {
    pub fn cylinder(x: f64, y: f64, radius: f64) -> Self {
        Self {
            shape: Shape::Cylinder { radius },
            pose: Pose::new(x, y, 0.0),
        }
    }

    pub fn boxed(x: f64, y: f64, theta: f64, width: f64, height: f64) -> Self {
        Self {
            shape: Shape::Box { width, height },
            pose: Pose::new(x, y, theta),
        }
    }

    pub fn center(&self) -> Point2 {
        self.pose.position()
    }

    /// Signed distance from `p` to the shape boundary (negative inside).
    pub fn signed_distance(&self, p: Point2) -> f64 {
        match self.shape {
            Shape::Cylinder { radius } => p.dist(self.center()) - radius,
            Shape::Box { width, height } => {
                let q = self.pose.inverse_transform_point(p);
                box_signed_distance(q, 0.5 * width, 0.5 * height)
            }
        }
    }

    /// Distance along the ray `origin + t·dir` (|dir| = 1) to the first boundary
    /// crossing, `Some(0.0)` when the origin is inside.
    pub fn ray_hit(&self, origin: Point2, dir: Point2) -> Option<f64> {
        match self.shape {
            Shape::Cylinder { radius } => ray_circle(origin, dir, self.center(), radius),
            Shape::Box { width, height } => {
                let o = self.pose.inverse_transform_point(origin);
                let d = dir.rotate(-self.pose.theta);
                ray_aabb(o, d, -0.5 * width, -0.5 * height, 0.5 * width, 0.5 * height)
            }
        }
    }

    /// True when the closed shape intersects the closed axis-aligned square cell.
    pub fn overlaps_cell(&self, min: Point2, max: Point2) -> bool {
        match self.shape {
            Shape::Cylinder { radius } => {
                let c = self.center();
                let dx = (min.x - c.x).max(0.0).max(c.x - max.x);
                let dy = (min.y - c.y).max(0.0).max(c.y - max.y);
                dx * dx + dy * dy <= radius * radius
            }
            Shape::Box { width, height } => {
                let corners = self.corners(width, height);
                // world axes
                let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) =
                    (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
                for c in &corners {
                    lo_x = lo_x.min(c.x);
                    hi_x = hi_x.max(c.x);
                    lo_y = lo_y.min(c.y);
                    hi_y = hi_y.max(c.y);
                }
                if hi_x < min.x || lo_x > max.x || hi_y < min.y || lo_y > max.y {
                    return false;
                }
                // box axes
                let cell = [
                    Point2::new(min.x, min.y),
                    Point2::new(max.x, min.y),
                    Point2::new(max.x, max.y),
                    Point2::new(min.x, max.y),
                ];
                let half = [0.5 * width, 0.5 * height];
                for (k, axis) in [Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]
                    .iter()
                    .enumerate()
                {
                    let a = axis.rotate(self.pose.theta);
                    let c0 = self.center().dot(a);
                    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
                    for p in &cell {
                        let v = p.dot(a) - c0;
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    if hi < -half[k] || lo > half[k] {
                        return false;
                    }
                }
                true
            }
        }
    }

    fn corners(&self, width: f64, height: f64) -> [Point2; 4] {
        let (hw, hh) = (0.5 * width, 0.5 * height);
        [
            self.pose.transform_point(Point2::new(-hw, -hh)),
            self.pose.transform_point(Point2::new(hw, -hh)),
            self.pose.transform_point(Point2::new(hw, hh)),
            self.pose.transform_point(Point2::new(-hw, hh)),
        ]
    }
}

/// Axis-aligned square wall block of side [`WALL_BLOCK_SIDE`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallBlock {
    pub x: f64,
    pub y: f64,
}

impl WallBlock {
    pub fn center(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn signed_distance(&self, p: Point2) -> f64 {
        let h = 0.5 * WALL_BLOCK_SIDE;
        box_signed_distance(p.sub(self.center()), h, h)
    }

    pub fn ray_hit(&self, origin: Point2, dir: Point2) -> Option<f64> {
        let h = 0.5 * WALL_BLOCK_SIDE;
        ray_aabb(origin, dir, self.x - h, self.y - h, self.x + h, self.y + h)
    }

    pub fn overlaps_cell(&self, min: Point2, max: Point2) -> bool {
        let h = 0.5 * WALL_BLOCK_SIDE;
        !(self.x + h < min.x || self.x - h > max.x || self.y + h < min.y || self.y - h > max.y)
    }

    pub fn bounding_radius(&self) -> f64 {
        std::f64::consts::SQRT_2 * 0.5 * WALL_BLOCK_SIDE
    }
}

/// Signed distance from `q` to the centred box with half extents (hx, hy).
pub fn box_signed_distance(q: Point2, hx: f64, hy: f64) -> f64 {
    let dx = q.x.abs() - hx;
    let dy = q.y.abs() - hy;
    if dx > 0.0 || dy > 0.0 {
        dx.max(0.0).hypot(dy.max(0.0))
    } else {
        dx.max(dy)
    }
}

pub fn ray_circle(origin: Point2, dir: Point2, center: Point2, radius: f64) -> Option<f64> {
    let oc = origin.sub(center);
    let b = oc.dot(dir);
    let c = oc.dot(oc) - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

pub fn ray_aabb(origin: Point2, dir: Point2, x0: f64, y0: f64, x1: f64, y1: f64) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for (o, d, lo, hi) in [(origin.x, dir.x, x0, x1), (origin.y, dir.y, y0, y1)] {
        if d.abs() < 1e-15 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let ta = (lo - o) / d;
            let tb = (hi - o) / d;
            let (ta, tb) = if ta < tb { (ta, tb) } else { (tb, ta) };
            t_near = t_near.max(ta);
            t_far = t_far.min(tb);
        }
    }
    if t_near > t_far || t_far < 0.0 {
        return None;
    }
    Some(t_near.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_hits_cylinder_ahead() {
        let t = ray_circle(
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
            0.15,
        );
        assert!((t.unwrap() - 1.85).abs() < 1e-12);
    }

    #[test]
    fn ray_misses_behind() {
        assert!(ray_circle(
            Point2::new(0.0, 0.0),
            Point2::new(-1.0, 0.0),
            Point2::new(2.0, 0.0),
            0.15
        )
        .is_none());
        assert!(ray_aabb(
            Point2::new(0.0, 0.0),
            Point2::new(-1.0, 0.0),
            1.0,
            -1.0,
            2.0,
            1.0
        )
        .is_none());
    }

    #[test]
    fn rotated_box_distance() {
        let b = Obstacle::boxed(0.0, 0.0, std::f64::consts::FRAC_PI_4, 0.3, 0.3);
        // corner of the rotated box lies on the +x axis
        let corner = 0.15 * std::f64::consts::SQRT_2;
        assert!(b.signed_distance(Point2::new(corner + 1.0, 0.0)).abs() - 1.0 < 1e-12);
        let t = b
            .ray_hit(Point2::new(-2.0, 0.0), Point2::new(1.0, 0.0))
            .unwrap();
        assert!((t - (2.0 - corner)).abs() < 1e-12);
    }

    #[test]
    fn cell_overlap_rotated_box() {
        let b = Obstacle::boxed(0.0, 0.0, std::f64::consts::FRAC_PI_4, 0.3, 0.3);
        // the axis-aligned bounding boxes overlap but the diamond does not reach the cell
        assert!(!b.overlaps_cell(Point2::new(0.12, 0.12), Point2::new(0.2, 0.2)));
        assert!(b.overlaps_cell(Point2::new(0.0, 0.0), Point2::new(0.05, 0.05)));
    }
}
