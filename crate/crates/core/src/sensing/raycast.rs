use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, Point2, Pose};
use crate::world::WorldSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// Horizontal field of view (rad), strictly less than 2π.
    pub fov: f64,
    pub n_rays: usize,
    pub max_range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov: 58f64.to_radians(),
            n_rays: 128,
            max_range: 5.5,
        }
    }
}

/// One sweep of the range sensor. Angles are in the sensor (robot) frame;
/// a missing return is reported as `max_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    pub fov: f64,
    pub max_range: f64,
}

impl Scan {
    /// Returns that hit something, as robot-frame points.
    pub fn hits(&self) -> impl Iterator<Item = Point2> + '_ {
        self.angles
            .iter()
            .zip(&self.ranges)
            .filter(|(_, &r)| r < self.max_range)
            .map(|(&a, &r)| Point2::new(r * a.cos(), r * a.sin()))
    }
}

enum Target<'a> {
    Wall(&'a crate::world::WallBlock),
    Obstacle(&'a crate::world::Obstacle),
}

/// Exact analytic ray casting against walls, obstacles and the room sides.
pub fn raycast(world: &WorldSpec, pose: &Pose, fov: f64, n_rays: usize, max_range: f64) -> Scan {
    assert!(n_rays >= 2, "a scan needs at least two rays");
    let origin = pose.position();
    let half = 0.5 * fov;
    let visible = |c: Point2, r: f64| {
        let d = c.dist(origin);
        if d - r > max_range {
            return false;
        }
        if d <= r {
            return true;
        }
        let bearing = normalize_angle(c.sub(origin).angle() - pose.theta);
        bearing.abs() <= half + (r / d).asin() + 1e-9
    };
    let mut targets = Vec::new();
    for w in &world.walls {
        if visible(w.center(), w.bounding_radius()) {
            targets.push(Target::Wall(w));
        }
    }
    for o in &world.obstacles {
        if visible(o.center(), o.shape.bounding_radius()) {
            targets.push(Target::Obstacle(o));
        }
    }

    let room = world.room;
    let mut angles = Vec::with_capacity(n_rays);
    let mut ranges = Vec::with_capacity(n_rays);
    for i in 0..n_rays {
        let a = -half + fov * i as f64 / (n_rays - 1) as f64;
        let heading = pose.theta + a;
        let dir = Point2::new(heading.cos(), heading.sin());
        let mut best = max_range;
        // room sides, seen from inside
        for (o, d, lo, hi) in [
            (origin.x, dir.x, 0.0, room.width),
            (origin.y, dir.y, 0.0, room.height),
        ] {
            if d > 1e-15 {
                best = best.min((hi - o) / d);
            } else if d < -1e-15 {
                best = best.min((lo - o) / d);
            }
        }
        for t in &targets {
            let hit = match t {
                Target::Wall(w) => w.ray_hit(origin, dir),
                Target::Obstacle(o) => o.ray_hit(origin, dir),
            };
            if let Some(h) = hit {
                best = best.min(h);
            }
        }
        angles.push(a);
        ranges.push(best.clamp(1e-9, max_range));
    }
    Scan {
        angles,
        ranges,
        fov,
        max_range,
    }
}
