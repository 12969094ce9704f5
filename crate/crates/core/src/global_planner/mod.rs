//! Grid path planning: incremental D*-Lite for the robot's known map, an A*
//! oracle on the fully known world, and the replanning clock.

mod cost;
mod dstar;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::Cost;
pub use dstar::PlannerState;

use crate::geom::{point_segment_distance, polyline_length, Point2, Pose};
use crate::world::{OccupancyGrid, WorldSpec, MOVES};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum PlanError {
    #[error("start and goal are not connected")]
    NoPath,
    #[error("start cell is occupied")]
    StartOccupied,
    #[error("goal cell is occupied")]
    GoalOccupied,
    #[error("position outside the map")]
    OutOfBounds,
}

/// Polyline from the robot towards the goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalPath {
    pub waypoints: Vec<Point2>,
    pub length: f64,
}

impl GlobalPath {
    pub fn new(waypoints: Vec<Point2>) -> Self {
        let length = polyline_length(&waypoints);
        GlobalPath { waypoints, length }
    }

    pub(crate) fn from_cells(grid: &OccupancyGrid, cells: &[usize], cost: Cost) -> Self {
        let waypoints = cells.iter().map(|&c| grid.center(c)).collect();
        // the grid cost is exact; the polyline sum agrees up to rounding
        GlobalPath {
            waypoints,
            length: cost.meters(grid.resolution),
        }
    }

    pub fn start(&self) -> Point2 {
        self.waypoints[0]
    }

    pub fn end(&self) -> Point2 {
        *self.waypoints.last().expect("empty path")
    }

    /// Greedy line-of-sight shortcutting against `grid`, with the end points
    /// replaced by the exact `start` and `goal` positions.
    pub fn smoothed(&self, grid: &OccupancyGrid, start: Point2, goal: Point2) -> GlobalPath {
        let mut pts = self.waypoints.clone();
        if pts.is_empty() {
            return GlobalPath::new(vec![start, goal]);
        }
        pts[0] = start;
        let last = pts.len() - 1;
        if last == 0 {
            return GlobalPath::new(if start == goal {
                vec![start]
            } else {
                vec![start, goal]
            });
        }
        pts[last] = goal;
        let mut out = vec![pts[0]];
        let mut i = 0;
        while i < last {
            let mut j = i + 1;
            while j < last && line_of_sight(grid, pts[i], pts[j + 1]) {
                j += 1;
            }
            out.push(pts[j]);
            i = j;
        }
        GlobalPath::new(out)
    }

    /// True when some segment of the path crosses an occupied cell.
    pub fn is_blocked(&self, grid: &OccupancyGrid) -> bool {
        if self.waypoints.len() == 1 {
            return grid
                .cell_of(self.waypoints[0])
                .map_or(true, |c| grid.is_occupied(c));
        }
        self.waypoints
            .windows(2)
            .any(|w| !line_of_sight(grid, w[0], w[1]))
    }
}

/// Whether the segment `a`–`b` stays in free cells, sampled at a quarter of
/// the resolution.
pub fn line_of_sight(grid: &OccupancyGrid, a: Point2, b: Point2) -> bool {
    let n = ((a.dist(b) / (0.25 * grid.resolution)).ceil() as usize).max(1);
    (0..=n).all(|k| {
        let p = a.lerp(b, k as f64 / n as f64);
        grid.cell_of(p).is_some_and(|c| !grid.is_occupied(c))
    })
}

/// Whether a global replan is due at `sim_time`.
pub fn replan_clock(f_gp: f64, sim_time: f64, last_plan_time: f64, special_event: bool) -> bool {
    special_event || sim_time - last_plan_time >= 1.0 / f_gp - 1e-9
}

/// Euclidean distance from `position` to the nearest point on the path.
pub fn distance_to_path(path: &GlobalPath, position: Point2) -> f64 {
    match path.waypoints.as_slice() {
        [] => f64::INFINITY,
        [p] => p.dist(position),
        pts => pts
            .windows(2)
            .map(|w| point_segment_distance(position, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Optimal grid path by A* with the octile heuristic; ties are broken by
/// cell index. Independent of the incremental planner.
pub fn astar(grid: &OccupancyGrid, start: Point2, goal: Point2) -> Result<GlobalPath, PlanError> {
    let s = grid.cell_of(start).ok_or(PlanError::OutOfBounds)?;
    let t = grid.cell_of(goal).ok_or(PlanError::OutOfBounds)?;
    if grid.is_occupied(s) {
        return Err(PlanError::StartOccupied);
    }
    if grid.is_occupied(t) {
        return Err(PlanError::GoalOccupied);
    }
    let (tx, ty) = grid.coords(t);
    let h = |c: usize| {
        let (x, y) = grid.coords(c);
        Cost::octile(x as i64 - tx as i64, y as i64 - ty as i64)
    };
    let mut g = vec![Cost::INFINITY; grid.len()];
    let mut parent = vec![usize::MAX; grid.len()];
    let mut closed = vec![false; grid.len()];
    let mut heap = BinaryHeap::new();
    g[s] = Cost::ZERO;
    heap.push(Reverse((h(s), s)));
    while let Some(Reverse((_, u))) = heap.pop() {
        if closed[u] {
            continue;
        }
        closed[u] = true;
        if u == t {
            break;
        }
        for mv in MOVES {
            if let Some(v) = grid.step(u, mv) {
                if grid.is_occupied(v) || closed[v] {
                    continue;
                }
                let c = g[u] + Cost::of_move(mv);
                if c < g[v] || (c == g[v] && u < parent[v]) {
                    g[v] = c;
                    parent[v] = u;
                    heap.push(Reverse((c + h(v), v)));
                }
            }
        }
    }
    if !closed[t] {
        return Err(PlanError::NoPath);
    }
    let mut cells = vec![t];
    let mut u = t;
    while u != s {
        u = parent[u];
        cells.push(u);
    }
    cells.reverse();
    Ok(GlobalPath::from_cells(grid, &cells, g[t]))
}

/// Reference shortest path on the fully known world for a disc robot of
/// `robot_radius`, smoothed like online plans. Used for rewards and path
/// efficiency only.
pub fn shortest_path_oracle(
    world: &WorldSpec,
    start: &Pose,
    goal: &Pose,
    resolution: f64,
    robot_radius: f64,
) -> Result<GlobalPath, PlanError> {
    let grid = world.inflated_grid(resolution, robot_radius);
    let raw = astar(&grid, start.position(), goal.position())?;
    Ok(raw.smoothed(&grid, start.position(), goal.position()))
}
