use crate::geom::Point2;

/// Free/occupied raster of a rectangular room anchored at the origin.
///
/// Cell `(ix, iy)` covers `[ix·res, (ix+1)·res) × [iy·res, (iy+1)·res)`; cells
/// are stored row-major with index `iy·width + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    cells: Vec<bool>,
}

/// The eight grid moves as (dx, dy); diagonals are the last four.
pub const MOVES: [(i32, i32); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        Self {
            resolution,
            width,
            height,
            cells: vec![false; width * height],
        }
    }

    /// Grid covering a `room_w × room_h` room.
    pub fn for_room(room_w: f64, room_h: f64, resolution: f64) -> Self {
        let w = (room_w / resolution - 1e-9).ceil().max(1.0) as usize;
        let h = (room_h / resolution - 1e-9).ceil().max(1.0) as usize;
        Self::new(w, h, resolution)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn cell_of(&self, p: Point2) -> Option<usize> {
        if p.x < 0.0 || p.y < 0.0 {
            return None;
        }
        let ix = (p.x / self.resolution).floor() as usize;
        let iy = (p.y / self.resolution).floor() as usize;
        (ix < self.width && iy < self.height).then(|| self.index(ix, iy))
    }

    /// Like [`cell_of`](Self::cell_of) but clamps points outside the grid.
    pub fn clamped_cell_of(&self, p: Point2) -> usize {
        let ix = ((p.x / self.resolution).floor().max(0.0) as usize).min(self.width - 1);
        let iy = ((p.y / self.resolution).floor().max(0.0) as usize).min(self.height - 1);
        self.index(ix, iy)
    }

    pub fn center(&self, idx: usize) -> Point2 {
        let (ix, iy) = self.coords(idx);
        Point2::new(
            (ix as f64 + 0.5) * self.resolution,
            (iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell_bounds(&self, idx: usize) -> (Point2, Point2) {
        let (ix, iy) = self.coords(idx);
        let r = self.resolution;
        (
            Point2::new(ix as f64 * r, iy as f64 * r),
            Point2::new((ix + 1) as f64 * r, (iy + 1) as f64 * r),
        )
    }

    #[inline]
    pub fn is_occupied(&self, idx: usize) -> bool {
        self.cells[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, occupied: bool) {
        self.cells[idx] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    /// Index range of cells whose squares intersect the box `[lo, hi]`.
    pub fn cell_range(&self, lo: Point2, hi: Point2) -> Option<(usize, usize, usize, usize)> {
        let r = self.resolution;
        let x0 = (lo.x / r).floor().max(0.0);
        let y0 = (lo.y / r).floor().max(0.0);
        let x1 = (hi.x / r).floor().min(self.width as f64 - 1.0);
        let y1 = (hi.y / r).floor().min(self.height as f64 - 1.0);
        if x1 < x0 || y1 < y0 {
            return None;
        }
        Some((x0 as usize, y0 as usize, x1 as usize, y1 as usize))
    }

    /// Neighbour of `idx` along `mv`, if it exists and is traversable from
    /// `idx`. Diagonal moves require both orthogonal neighbours to be free.
    #[inline]
    pub fn step(&self, idx: usize, mv: (i32, i32)) -> Option<usize> {
        let (ix, iy) = self.coords(idx);
        let nx = ix as i64 + mv.0 as i64;
        let ny = iy as i64 + mv.1 as i64;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            return None;
        }
        let n = self.index(nx as usize, ny as usize);
        if mv.0 != 0 && mv.1 != 0 {
            let a = self.index(nx as usize, iy);
            let b = self.index(ix, ny as usize);
            if self.cells[a] || self.cells[b] {
                return None;
            }
        }
        Some(n)
    }

    /// In-bounds neighbour along `mv`, ignoring occupancy.
    #[inline]
    pub fn neighbor(&self, idx: usize, mv: (i32, i32)) -> Option<usize> {
        let (ix, iy) = self.coords(idx);
        let nx = ix as i64 + mv.0 as i64;
        let ny = iy as i64 + mv.1 as i64;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            return None;
        }
        Some(self.index(nx as usize, ny as usize))
    }

    /// Connected components of free space under the planner's move set.
    /// Occupied cells are labelled `u32::MAX`.
    pub fn free_components(&self) -> (Vec<u32>, usize) {
        let mut labels = vec![u32::MAX; self.cells.len()];
        let mut count = 0u32;
        let mut stack = Vec::new();
        for seed in 0..self.cells.len() {
            if self.cells[seed] || labels[seed] != u32::MAX {
                continue;
            }
            labels[seed] = count;
            stack.push(seed);
            while let Some(c) = stack.pop() {
                for mv in MOVES {
                    if let Some(n) = self.step(c, mv) {
                        if !self.cells[n] && labels[n] == u32::MAX {
                            labels[n] = count;
                            stack.push(n);
                        }
                    }
                }
            }
            count += 1;
        }
        (labels, count as usize)
    }

    /// Nearest free cell to `idx` by breadth-first search (4-connected rings),
    /// bounded by `max_cells` visited cells.
    pub fn nearest_free(&self, idx: usize, max_cells: usize) -> Option<usize> {
        if !self.cells[idx] {
            return Some(idx);
        }
        let mut seen = std::collections::HashSet::new();
        let mut queue = std::collections::VecDeque::new();
        seen.insert(idx);
        queue.push_back(idx);
        while let Some(c) = queue.pop_front() {
            if !self.cells[c] {
                return Some(c);
            }
            if seen.len() > max_cells {
                break;
            }
            for mv in MOVES {
                if let Some(n) = self.neighbor(c, mv) {
                    if seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
        }
        None
    }
}
