//! Procedural worlds: maze rooms, obstacle placement, and rasterisation.

mod file;
mod generate;
mod grid;
mod shapes;

pub use file::{load_world, save_world, world_from_str, world_to_string, WORLD_FORMAT};
pub use generate::{
    campus_analogue, generate_maze, office_analogue, place_obstacles_by_count,
    place_obstacles_nonuniform, place_obstacles_uniform, random_density_field, sample_start_goal,
    sector_analogue, CountPlacement, EVAL_SHAPES, MAZE_CELL, TRAINING_CYLINDER_RADIUS,
};
pub use grid::{OccupancyGrid, MOVES};
pub use shapes::{Obstacle, Shape, WallBlock, WALL_BLOCK_SIDE};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point2;

/// Minimum inter-obstacle spacings used for density specification (m).
pub const SPACINGS: [f64; 4] = [0.75, 1.0, 1.25, 1.5];

/// Side of the square maze room (m).
pub const MAZE_ROOM: f64 = 20.0;

/// Default rasterisation resolution (m/cell).
pub const DEFAULT_RESOLUTION: f64 = 0.05;

/// Regions per axis of a density field.
pub const FIELD_DIM: usize = 5;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("could only place {placed} of {requested} obstacles")]
    PlacementInfeasible { placed: usize, requested: usize },
    #[error("no valid start/goal pair found after {attempts} attempts")]
    NoValidPair { attempts: usize },
    #[error("spacing {0} is not one of 0.75, 1.0, 1.25, 1.5")]
    InvalidSpacing(f64),
    #[error("wall density {0} outside [0, 0.5]")]
    InvalidWallDensity(f64),
    #[error("world file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub width: f64,
    pub height: f64,
}

impl Room {
    pub fn square(side: f64) -> Self {
        Self {
            width: side,
            height: side,
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    /// Distance from an interior point to the nearest room side
    /// (negative outside).
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        p.x.min(self.width - p.x).min(p.y).min(self.height - p.y)
    }
}

/// 5×5 grid of minimum-spacing values; `grid[i][j]` is the region whose x
/// index is `i` and y index is `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub grid: [[f64; FIELD_DIM]; FIELD_DIM],
}

impl DensityField {
    pub fn uniform(spacing: f64) -> Self {
        Self {
            grid: [[spacing; FIELD_DIM]; FIELD_DIM],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.grid.iter().flatten().all(|v| SPACINGS.contains(v))
    }

    /// Region containing `p`. Points on a shared edge belong to the
    /// lower-index region.
    pub fn region_of(room: &Room, p: Point2) -> (usize, usize) {
        let idx = |v: f64, extent: f64| {
            let cell = extent / FIELD_DIM as f64;
            let i = (v / cell).ceil() as i64 - 1;
            i.clamp(0, FIELD_DIM as i64 - 1) as usize
        };
        (idx(p.x, room.width), idx(p.y, room.height))
    }

    pub fn spacing_at(&self, room: &Room, p: Point2) -> f64 {
        let (i, j) = Self::region_of(room, p);
        self.grid[i][j]
    }
}

/// Ground-truth world geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub room: Room,
    pub walls: Vec<WallBlock>,
    pub obstacles: Vec<Obstacle>,
    pub density_field: Option<DensityField>,
    pub seed: u64,
}

impl WorldSpec {
    pub fn empty(room: Room, seed: u64) -> Self {
        Self {
            room,
            walls: Vec::new(),
            obstacles: Vec::new(),
            density_field: None,
            seed,
        }
    }

    /// Same room and walls without any obstacles: the map known a priori.
    pub fn walls_only(&self) -> WorldSpec {
        WorldSpec {
            obstacles: Vec::new(),
            ..self.clone()
        }
    }

    /// Signed distance from `p` to the nearest wall, obstacle, or room side.
    pub fn clearance(&self, p: Point2) -> f64 {
        let mut d = self.room.boundary_distance(p);
        for w in &self.walls {
            if (w.x - p.x).abs() - 0.5 * WALL_BLOCK_SIDE < d
                && (w.y - p.y).abs() - 0.5 * WALL_BLOCK_SIDE < d
            {
                d = d.min(w.signed_distance(p));
            }
        }
        for o in &self.obstacles {
            let c = o.center();
            let r = o.shape.bounding_radius();
            if (c.x - p.x).abs() - r < d && (c.y - p.y).abs() - r < d {
                d = d.min(o.signed_distance(p));
            }
        }
        d
    }

    /// Smallest half-extent of any obstacle or wall in the world.
    pub fn min_feature_size(&self) -> f64 {
        let mut m = if self.walls.is_empty() {
            f64::INFINITY
        } else {
            0.5 * WALL_BLOCK_SIDE
        };
        for o in &self.obstacles {
            m = m.min(o.shape.min_feature());
        }
        m
    }

    /// Density spacing of the region containing `position`, if the world
    /// carries a density field.
    pub fn local_density(&self, position: Point2) -> Option<f64> {
        self.density_field
            .as_ref()
            .map(|f| f.spacing_at(&self.room, position))
    }

    /// Conservative rasterisation: every cell intersecting a shape is occupied.
    pub fn rasterize(&self, resolution: f64) -> OccupancyGrid {
        let mut g = OccupancyGrid::for_room(self.room.width, self.room.height, resolution);
        let h = 0.5 * WALL_BLOCK_SIDE;
        for w in &self.walls {
            mark_cells(
                &mut g,
                w.center(),
                h * std::f64::consts::SQRT_2,
                |lo, hi| w.overlaps_cell(lo, hi),
            );
        }
        for o in &self.obstacles {
            mark_cells(&mut g, o.center(), o.shape.bounding_radius(), |lo, hi| {
                o.overlaps_cell(lo, hi)
            });
        }
        g
    }

    /// Configuration-space grid for a disc robot: a cell is occupied when its
    /// centre lies within `inflate` of a shape or of the room boundary.
    pub fn inflated_grid(&self, resolution: f64, inflate: f64) -> OccupancyGrid {
        let mut g = OccupancyGrid::for_room(self.room.width, self.room.height, resolution);
        for idx in 0..g.len() {
            if self.room.boundary_distance(g.center(idx)) <= inflate {
                g.set(idx, true);
            }
        }
        for w in &self.walls {
            let reach = w.bounding_radius() + inflate;
            mark_cells(&mut g, w.center(), reach, |lo, hi| {
                w.signed_distance(lo.lerp(hi, 0.5)) <= inflate
            });
        }
        for o in &self.obstacles {
            let reach = o.shape.bounding_radius() + inflate;
            mark_cells(&mut g, o.center(), reach, |lo, hi| {
                o.signed_distance(lo.lerp(hi, 0.5)) <= inflate
            });
        }
        g
    }
}

fn mark_cells(g: &mut OccupancyGrid, c: Point2, reach: f64, hit: impl Fn(Point2, Point2) -> bool) {
    let lo = Point2::new(c.x - reach, c.y - reach);
    let hi = Point2::new(c.x + reach, c.y + reach);
    if let Some((x0, y0, x1, y1)) = g.cell_range(lo, hi) {
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let idx = g.index(ix, iy);
                if !g.is_occupied(idx) {
                    let (a, b) = g.cell_bounds(idx);
                    if hit(a, b) {
                        g.set(idx, true);
                    }
                }
            }
        }
    }
}

/// Free cells whose centre lies within `inflate` of `p`.
pub fn free_cells_within(g: &OccupancyGrid, p: Point2, inflate: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let lo = Point2::new(p.x - inflate, p.y - inflate);
    let hi = Point2::new(p.x + inflate, p.y + inflate);
    if let Some((x0, y0, x1, y1)) = g.cell_range(lo, hi) {
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let idx = g.index(ix, iy);
                if !g.is_occupied(idx) && g.center(idx).dist(p) <= inflate {
                    out.push(idx);
                }
            }
        }
    }
    out
}

/// Marks every cell whose centre lies within `inflate` of `p`; returns the
/// indices that changed from free to occupied.
pub fn mark_inflated_point(g: &mut OccupancyGrid, p: Point2, inflate: f64) -> Vec<usize> {
    let changed = free_cells_within(g, p, inflate);
    for &c in &changed {
        g.set(c, true);
    }
    changed
}
