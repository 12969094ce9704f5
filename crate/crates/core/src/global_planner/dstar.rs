use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Cost, GlobalPath, PlanError};
use crate::geom::Point2;
use crate::world::{OccupancyGrid, MOVES};

type Key = (Cost, Cost);

/// Incremental D*-Lite search rooted at the goal cell.
///
/// `g`/`rhs` hold cost-to-goal estimates; a cell is locally inconsistent when
/// they differ, and exactly the inconsistent cells are kept in the queue.
/// Queue ties are broken by cell index.
#[derive(Clone, Debug)]
pub struct PlannerState {
    grid: OccupancyGrid,
    goal: usize,
    last_start: usize,
    km: Cost,
    g: Vec<Cost>,
    rhs: Vec<Cost>,
    queued: Vec<Option<Key>>,
    heap: BinaryHeap<Reverse<(Key, usize)>>,
    expansions: u64,
}

impl PlannerState {
    /// Fresh planner for `goal` on the known map `grid`.
    pub fn new(grid: OccupancyGrid, goal: Point2) -> Result<Self, PlanError> {
        let goal = grid.cell_of(goal).ok_or(PlanError::OutOfBounds)?;
        if grid.is_occupied(goal) {
            return Err(PlanError::GoalOccupied);
        }
        let n = grid.len();
        let mut s = PlannerState {
            grid,
            goal,
            last_start: goal,
            km: Cost::ZERO,
            g: vec![Cost::INFINITY; n],
            rhs: vec![Cost::INFINITY; n],
            queued: vec![None; n],
            heap: BinaryHeap::new(),
            expansions: 0,
        };
        s.rhs[goal] = Cost::ZERO;
        let k = s.key(goal, goal);
        s.push(goal, k);
        Ok(s)
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn goal_cell(&self) -> usize {
        self.goal
    }

    /// Total number of cell expansions since construction.
    pub fn expansions(&self) -> u64 {
        self.expansions
    }

    fn heuristic(&self, a: usize, b: usize) -> Cost {
        let (ax, ay) = self.grid.coords(a);
        let (bx, by) = self.grid.coords(b);
        Cost::octile(ax as i64 - bx as i64, ay as i64 - by as i64)
    }

    fn key(&self, s: usize, start: usize) -> Key {
        let m = self.g[s].min(self.rhs[s]);
        (m + self.heuristic(start, s) + self.km, m)
    }

    fn push(&mut self, s: usize, k: Key) {
        self.queued[s] = Some(k);
        self.heap.push(Reverse((k, s)));
    }

    fn top(&mut self) -> Option<(Key, usize)> {
        while let Some(Reverse((k, s))) = self.heap.peek().copied() {
            if self.queued[s] == Some(k) {
                return Some((k, s));
            }
            self.heap.pop();
        }
        None
    }

    /// Traversal cost of the move `mv` out of `u`, or infinity when either
    /// end is occupied or the diagonal clips an occupied corner.
    fn edge(&self, u: usize, mv: (i32, i32)) -> Option<(usize, Cost)> {
        let v = self.grid.neighbor(u, mv)?;
        if self.grid.is_occupied(u) || self.grid.is_occupied(v) || self.grid.step(u, mv).is_none() {
            return Some((v, Cost::INFINITY));
        }
        Some((v, Cost::of_move(mv)))
    }

    fn update_vertex(&mut self, u: usize, start: usize) {
        if u != self.goal {
            let mut best = Cost::INFINITY;
            for mv in MOVES {
                if let Some((v, c)) = self.edge(u, mv) {
                    let t = c + self.g[v];
                    if t < best {
                        best = t;
                    }
                }
            }
            self.rhs[u] = best;
        }
        self.queued[u] = None;
        if self.g[u] != self.rhs[u] {
            let k = self.key(u, start);
            self.push(u, k);
        }
    }

    fn compute(&mut self, start: usize) {
        loop {
            let Some((k_old, u)) = self.top() else { break };
            let k_start = self.key(start, start);
            if k_old >= k_start && self.rhs[start] == self.g[start] {
                break;
            }
            self.expansions += 1;
            let k_new = self.key(u, start);
            if k_old < k_new {
                self.push(u, k_new);
            } else if self.g[u] > self.rhs[u] {
                self.g[u] = self.rhs[u];
                self.queued[u] = None;
                for mv in MOVES {
                    if let Some(v) = self.grid.neighbor(u, mv) {
                        self.update_vertex(v, start);
                    }
                }
            } else {
                self.g[u] = Cost::INFINITY;
                self.update_vertex(u, start);
                for mv in MOVES {
                    if let Some(v) = self.grid.neighbor(u, mv) {
                        self.update_vertex(v, start);
                    }
                }
            }
        }
    }

    /// Cost-to-goal of the cell containing `start` after bringing the search
    /// up to date.
    pub fn cost_from(&mut self, start: Point2) -> Result<Cost, PlanError> {
        let s = self.start_cell(start)?;
        self.km = self.km + self.heuristic(self.last_start, s);
        self.last_start = s;
        self.compute(s);
        Ok(self.g[s])
    }

    fn start_cell(&self, start: Point2) -> Result<usize, PlanError> {
        let s = self.grid.cell_of(start).ok_or(PlanError::OutOfBounds)?;
        if self.grid.is_occupied(s) {
            return Err(PlanError::StartOccupied);
        }
        Ok(s)
    }

    /// Optimal 8-connected path from the cell containing `start` to the goal
    /// cell on the current known map, as a sequence of cell centres.
    pub fn plan(&mut self, start: Point2) -> Result<GlobalPath, PlanError> {
        let cost = self.cost_from(start)?;
        if cost.is_infinite() {
            return Err(PlanError::NoPath);
        }
        let mut cells = vec![self.last_start];
        let mut u = self.last_start;
        while u != self.goal {
            let mut best: Option<(Cost, usize)> = None;
            for mv in MOVES {
                if let Some((v, c)) = self.edge(u, mv) {
                    let t = c + self.g[v];
                    if !t.is_infinite() && best.map_or(true, |(b, bv)| (t, v) < (b, bv)) {
                        best = Some((t, v));
                    }
                }
            }
            let (t, v) = best.ok_or(PlanError::NoPath)?;
            debug_assert_eq!(t, self.g[u]);
            cells.push(v);
            u = v;
            if cells.len() > self.grid.len() {
                return Err(PlanError::NoPath);
            }
        }
        Ok(GlobalPath::from_cells(&self.grid, &cells, cost))
    }

    /// Applies occupancy changes to the known map and repairs the search.
    pub fn update_cells(&mut self, changed: &[(usize, bool)]) {
        let mut touched = Vec::new();
        for &(c, occ) in changed {
            if self.grid.is_occupied(c) != occ {
                self.grid.set(c, occ);
                touched.push(c);
            }
        }
        if touched.is_empty() {
            return;
        }
        let start = self.last_start;
        // a cell change alters its own edges and every diagonal that clips it,
        // all of which leave from the cell or one of its neighbours
        let mut dirty = Vec::with_capacity(touched.len() * 9);
        for &c in &touched {
            dirty.push(c);
            for mv in MOVES {
                if let Some(v) = self.grid.neighbor(c, mv) {
                    dirty.push(v);
                }
            }
        }
        dirty.sort_unstable();
        dirty.dedup();
        for u in dirty {
            self.update_vertex(u, start);
        }
    }

    /// Marks `cells` occupied; convenience wrapper over [`update_cells`].
    ///
    /// [`update_cells`]: PlannerState::update_cells
    pub fn block(&mut self, cells: &[usize]) {
        let changes: Vec<(usize, bool)> = cells.iter().map(|&c| (c, true)).collect();
        self.update_cells(&changes);
    }
}
