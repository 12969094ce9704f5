use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap};
use std::f64::consts::{FRAC_PI_2, TAU};

use super::{
    DensityField, Obstacle, Room, Shape, WallBlock, WorldError, WorldSpec, FIELD_DIM, MAZE_ROOM,
    SPACINGS,
};
use crate::geom::{Point2, Pose};

/// Side of one maze cell; walls run along cell boundaries (m).
pub const MAZE_CELL: f64 = 2.0;

/// Radius of the cylinders scattered in training worlds (m).
pub const TRAINING_CYLINDER_RADIUS: f64 = 0.15;

/// Evaluation obstacle shapes: 0.3 m box, 0.15 m box, ⌀0.3 m and ⌀0.1 m cylinders.
pub const EVAL_SHAPES: [Shape; 4] = [
    Shape::Box {
        width: 0.3,
        height: 0.3,
    },
    Shape::Box {
        width: 0.15,
        height: 0.15,
    },
    Shape::Cylinder { radius: 0.15 },
    Shape::Cylinder { radius: 0.05 },
];

/// Candidate draws per square metre for spacing-constrained placement.
const CANDIDATES_PER_M2: f64 = 0.6;

/// Inflation used when checking that generated walls leave free space connected.
const CONNECTIVITY_INFLATION: f64 = 0.18;
const CONNECTIVITY_RESOLUTION: f64 = 0.1;

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
}

fn half_grid(v: f64) -> i64 {
    (v * 2.0).round() as i64
}

fn blocks_from_set(set: &BTreeSet<(i64, i64)>) -> Vec<WallBlock> {
    set.iter()
        .map(|&(i, j)| WallBlock {
            x: i as f64 * 0.5,
            y: j as f64 * 0.5,
        })
        .collect()
}

/// Adds blocks along the axis-aligned segment `a`–`b` (both on the 0.5 m
/// grid), skipping centres on the room boundary.
fn add_segment(set: &mut BTreeSet<(i64, i64)>, room: &Room, a: Point2, b: Point2) {
    let (ia, ja, ib, jb) = (
        half_grid(a.x),
        half_grid(a.y),
        half_grid(b.x),
        half_grid(b.y),
    );
    let (wi, hj) = (half_grid(room.width), half_grid(room.height));
    let steps = (ib - ia).abs().max((jb - ja).abs());
    for s in 0..=steps {
        let i = ia + (ib - ia).signum() * s;
        let j = ja + (jb - ja).signum() * s;
        if i <= 0 || j <= 0 || i >= wi || j >= hj {
            continue;
        }
        set.insert((i, j));
    }
}

fn free_space_connected(world: &WorldSpec) -> bool {
    let g = world.inflated_grid(CONNECTIVITY_RESOLUTION, CONNECTIVITY_INFLATION);
    g.free_components().1 == 1
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let n = self.0[c];
            self.0[c] = r;
            c = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// 20 m × 20 m maze room. Walls follow the boundaries of a 10×10 cell maze:
/// a random spanning tree of cells is kept open and `wall_density` of all
/// internal cell boundaries (at most the non-tree ones) become walls.
pub fn generate_maze(seed: u64, wall_density: f64) -> Result<WorldSpec, WorldError> {
    if !(0.0..=0.5).contains(&wall_density) {
        return Err(WorldError::InvalidWallDensity(wall_density));
    }
    let room = Room::square(MAZE_ROOM);
    let n = (MAZE_ROOM / MAZE_CELL).round() as usize;
    for attempt in 0..16u64 {
        let mut rng = rng_for(seed, 0x6d617a65 ^ attempt);
        // (cell a, cell b, is_vertical_boundary)
        let mut edges = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if i + 1 < n {
                    edges.push((j * n + i, j * n + i + 1));
                }
                if j + 1 < n {
                    edges.push((j * n + i, (j + 1) * n + i));
                }
            }
        }
        let total = edges.len();
        let mut order: Vec<usize> = (0..total).collect();
        order.shuffle(&mut rng);
        let mut uf = UnionFind((0..n * n).collect());
        let mut non_tree = Vec::new();
        for &e in &order {
            let (a, b) = edges[e];
            if !uf.union(a, b) {
                non_tree.push(e);
            }
        }
        let keep = ((wall_density * total as f64).round() as usize).min(non_tree.len());
        let mut set = BTreeSet::new();
        for &e in &non_tree[..keep] {
            let (a, b) = edges[e];
            let (ai, aj) = ((a % n) as f64, (a / n) as f64);
            let (seg_a, seg_b) = if b == a + 1 {
                let x = (ai + 1.0) * MAZE_CELL;
                (
                    Point2::new(x, aj * MAZE_CELL),
                    Point2::new(x, (aj + 1.0) * MAZE_CELL),
                )
            } else {
                let y = (aj + 1.0) * MAZE_CELL;
                (
                    Point2::new(ai * MAZE_CELL, y),
                    Point2::new((ai + 1.0) * MAZE_CELL, y),
                )
            };
            add_segment(&mut set, &room, seg_a, seg_b);
        }
        let world = WorldSpec {
            room,
            walls: blocks_from_set(&set),
            obstacles: Vec::new(),
            density_field: None,
            seed,
        };
        if free_space_connected(&world) {
            return Ok(world);
        }
    }
    // an empty room is always connected
    Ok(WorldSpec::empty(room, seed))
}

/// Open 20 m arena with radial walls leaving a free hub and a free rim.
pub fn sector_analogue(seed: u64) -> WorldSpec {
    let room = Room::square(20.0);
    let center = Point2::new(10.0, 10.0);
    for attempt in 0..16u64 {
        let mut rng = rng_for(seed, 0x736563 ^ attempt);
        let spokes = 6;
        let offset = rng.gen_range(0.0..TAU);
        let mut set = BTreeSet::new();
        for k in 0..spokes {
            let a = offset + TAU * k as f64 / spokes as f64;
            let dir = Point2::new(a.cos(), a.sin());
            let mut r = 2.5;
            while r <= 8.0 {
                let p = center.add(dir.scale(r));
                set.insert((half_grid(p.x), half_grid(p.y)));
                r += 0.25;
            }
        }
        let world = WorldSpec {
            room,
            walls: blocks_from_set(&set),
            obstacles: Vec::new(),
            density_field: None,
            seed,
        };
        if free_space_connected(&world) {
            return world;
        }
    }
    WorldSpec::empty(room, seed)
}

/// Large 30 m room with scattered solid rectangular "buildings".
pub fn campus_analogue(seed: u64) -> WorldSpec {
    let room = Room::square(30.0);
    for attempt in 0..16u64 {
        let mut rng = rng_for(seed, 0x63616d ^ attempt);
        let mut rects: Vec<(f64, f64, f64, f64)> = Vec::new();
        let mut tries = 0;
        while rects.len() < 10 && tries < 500 {
            tries += 1;
            let w = 0.5 * rng.gen_range(3..=8) as f64;
            let h = 0.5 * rng.gen_range(3..=8) as f64;
            let x = 0.5 * rng.gen_range(6..=(60 - 6 - (2.0 * w) as i64)) as f64;
            let y = 0.5 * rng.gen_range(6..=(60 - 6 - (2.0 * h) as i64)) as f64;
            let clear = 2.0;
            if rects.iter().any(|&(rx, ry, rw, rh)| {
                x < rx + rw + clear
                    && rx < x + w + clear
                    && y < ry + rh + clear
                    && ry < y + h + clear
            }) {
                continue;
            }
            rects.push((x, y, w, h));
        }
        let mut set = BTreeSet::new();
        for &(x, y, w, h) in &rects {
            let (i0, j0) = (half_grid(x) + 1, half_grid(y) + 1);
            let (i1, j1) = (half_grid(x + w) - 1, half_grid(y + h) - 1);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    set.insert((i, j));
                }
            }
        }
        let world = WorldSpec {
            room,
            walls: blocks_from_set(&set),
            obstacles: Vec::new(),
            density_field: None,
            seed,
        };
        if free_space_connected(&world) {
            return world;
        }
    }
    WorldSpec::empty(room, seed)
}

/// 30 m floor split into a 5×3 grid of 6 m × 10 m rooms, one 1.5 m door in
/// every internal wall.
pub fn office_analogue(seed: u64) -> WorldSpec {
    let room = Room::square(30.0);
    let (cols, rows, cw, rh) = (5usize, 3usize, 6.0, 10.0);
    for attempt in 0..16u64 {
        let mut rng = rng_for(seed, 0x6f6666 ^ attempt);
        let mut set = BTreeSet::new();
        let wall_with_door =
            |set: &mut BTreeSet<(i64, i64)>, a: Point2, b: Point2, rng: &mut ChaCha8Rng| {
                let len = a.dist(b);
                let door = 2.0;
                let start = 0.5 * rng.gen_range(2..=((2.0 * (len - door)) as i64 - 2)) as f64;
                let dir = b.sub(a).scale(1.0 / len);
                let d0 = a.add(dir.scale(start));
                let d1 = a.add(dir.scale(start + door));
                add_segment(set, &room, a, d0.sub(dir.scale(0.5)));
                add_segment(set, &room, d1.add(dir.scale(0.5)), b);
            };
        for c in 1..cols {
            let x = c as f64 * cw;
            for r in 0..rows {
                wall_with_door(
                    &mut set,
                    Point2::new(x, r as f64 * rh),
                    Point2::new(x, (r + 1) as f64 * rh),
                    &mut rng,
                );
            }
        }
        for r in 1..rows {
            let y = r as f64 * rh;
            for c in 0..cols {
                wall_with_door(
                    &mut set,
                    Point2::new(c as f64 * cw, y),
                    Point2::new((c + 1) as f64 * cw, y),
                    &mut rng,
                );
            }
        }
        let world = WorldSpec {
            room,
            walls: blocks_from_set(&set),
            obstacles: Vec::new(),
            density_field: None,
            seed,
        };
        if free_space_connected(&world) {
            return world;
        }
    }
    WorldSpec::empty(room, seed)
}

pub fn random_density_field<R: Rng>(rng: &mut R) -> DensityField {
    let mut f = DensityField::uniform(SPACINGS[0]);
    for i in 0..FIELD_DIM {
        for j in 0..FIELD_DIM {
            f.grid[i][j] = SPACINGS[rng.gen_range(0..SPACINGS.len())];
        }
    }
    f
}

fn clear_of_walls(world: &WorldSpec, c: Point2, r: f64) -> bool {
    world.walls.iter().all(|w| {
        (w.x - c.x).abs() > r + 0.25 || (w.y - c.y).abs() > r + 0.25 || w.signed_distance(c) > r
    })
}

/// Rejection sampling of ⌀0.3 m cylinders keeping centres at least `spacing`
/// apart. The candidate budget scales with room area, so the accepted count
/// falls as the spacing grows.
pub fn place_obstacles_uniform(
    world: &WorldSpec,
    spacing: f64,
    seed: u64,
) -> Result<WorldSpec, WorldError> {
    if !SPACINGS.contains(&spacing) {
        return Err(WorldError::InvalidSpacing(spacing));
    }
    let field = DensityField::uniform(spacing);
    Ok(place_with_field(world, &field, seed, false))
}

/// Per-region spacing: a candidate in region (i, j) must be `field[i][j]`
/// from obstacles in the same region, and the smaller of the two region
/// spacings from obstacles elsewhere.
pub fn place_obstacles_nonuniform(
    world: &WorldSpec,
    field: &DensityField,
    seed: u64,
) -> Result<WorldSpec, WorldError> {
    if !field.is_valid() {
        return Err(WorldError::InvalidSpacing(
            field
                .grid
                .iter()
                .flatten()
                .copied()
                .find(|v| !SPACINGS.contains(v))
                .unwrap_or(f64::NAN),
        ));
    }
    Ok(place_with_field(world, field, seed, true))
}

fn place_with_field(
    world: &WorldSpec,
    field: &DensityField,
    seed: u64,
    per_region: bool,
) -> WorldSpec {
    let mut rng = rng_for(seed, 0x756e69);
    let r = TRAINING_CYLINDER_RADIUS;
    let room = world.room;
    let budget = (room.width * room.height * CANDIDATES_PER_M2).round() as usize;
    let regions = FIELD_DIM * FIELD_DIM;
    let (rw, rh) = (
        room.width / FIELD_DIM as f64,
        room.height / FIELD_DIM as f64,
    );
    let mut out = world.clone();
    let mut placed: Vec<(Point2, f64)> = world
        .obstacles
        .iter()
        .map(|o| (o.center(), field.spacing_at(&room, o.center())))
        .collect();
    for k in 0..budget {
        let c = if per_region {
            let reg = k % regions;
            let (i, j) = (reg / FIELD_DIM, reg % FIELD_DIM);
            let x0 = (i as f64 * rw).max(r);
            let x1 = ((i + 1) as f64 * rw).min(room.width - r);
            let y0 = (j as f64 * rh).max(r);
            let y1 = ((j + 1) as f64 * rh).min(room.height - r);
            Point2::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1))
        } else {
            Point2::new(
                rng.gen_range(r..room.width - r),
                rng.gen_range(r..room.height - r),
            )
        };
        let s = field.spacing_at(&room, c);
        if placed.iter().any(|&(p, sp)| p.dist(c) < s.min(sp)) {
            continue;
        }
        if !clear_of_walls(world, c, r) {
            continue;
        }
        placed.push((c, s));
        out.obstacles.push(Obstacle::cylinder(c.x, c.y, r));
    }
    out.density_field = Some(*field);
    out
}

/// Request for an exact number of obstacles.
#[derive(Debug, Clone)]
pub struct CountPlacement {
    pub count: usize,
    pub shapes: Vec<Shape>,
    /// Positions (typically start and goal) that must stay clear, and that
    /// must remain mutually reachable for a disc of `robot_radius`.
    pub keep_clear: Vec<Point2>,
    pub clear_radius: f64,
    pub robot_radius: f64,
}

impl CountPlacement {
    pub fn new(count: usize, shapes: &[Shape]) -> Self {
        Self {
            count,
            shapes: shapes.to_vec(),
            keep_clear: Vec::new(),
            clear_radius: 0.5,
            robot_radius: CONNECTIVITY_INFLATION,
        }
    }

    pub fn keeping_clear(mut self, points: &[Point2]) -> Self {
        self.keep_clear = points.to_vec();
        self
    }
}

/// Places exactly `count` non-overlapping obstacles with shapes drawn
/// uniformly from `shapes`. When the world carries a density field, regions
/// are chosen with weight proportional to 1/spacing².
pub fn place_obstacles_by_count(
    world: &WorldSpec,
    req: &CountPlacement,
    seed: u64,
) -> Result<WorldSpec, WorldError> {
    if req.count == 0 {
        return Ok(world.clone());
    }
    let mut best = 0;
    for retry in 0..5u64 {
        let mut rng = rng_for(seed, 0x636e74 ^ (retry << 32));
        let out = match place_count_once(world, req, &mut rng) {
            Ok(w) => w,
            Err(placed) => {
                best = best.max(placed);
                continue;
            }
        };
        if req.keep_clear.len() >= 2 {
            let g = out.inflated_grid(super::DEFAULT_RESOLUTION, req.robot_radius);
            let (labels, _) = g.free_components();
            let ids: Vec<u32> = req
                .keep_clear
                .iter()
                .map(|p| g.cell_of(*p).map(|c| labels[c]).unwrap_or(u32::MAX))
                .collect();
            if ids[0] == u32::MAX || ids.iter().any(|&l| l != ids[0]) {
                best = best.max(req.count - 1);
                continue;
            }
        }
        return Ok(out);
    }
    Err(WorldError::PlacementInfeasible {
        placed: best,
        requested: req.count,
    })
}

fn place_count_once(
    world: &WorldSpec,
    req: &CountPlacement,
    rng: &mut ChaCha8Rng,
) -> Result<WorldSpec, usize> {
    let room = world.room;
    let weights: Option<Vec<f64>> = world.density_field.map(|f| {
        (0..FIELD_DIM * FIELD_DIM)
            .map(|k| {
                let s = f.grid[k / FIELD_DIM][k % FIELD_DIM];
                1.0 / (s * s)
            })
            .collect()
    });
    let total_w: f64 = weights.as_ref().map(|w| w.iter().sum()).unwrap_or(1.0);
    let (rw, rh) = (
        room.width / FIELD_DIM as f64,
        room.height / FIELD_DIM as f64,
    );
    let mut out = world.clone();
    let existing: Vec<(Point2, f64)> = world
        .obstacles
        .iter()
        .map(|o| (o.center(), o.shape.bounding_radius()))
        .collect();
    let max_r = existing
        .iter()
        .map(|e| e.1)
        .chain(req.shapes.iter().map(|s| s.bounding_radius()))
        .fold(0.0, f64::max);
    let mut placed = SpatialHash::new(2.0 * max_r);
    for (p, r) in existing {
        placed.insert(p, r);
    }
    let mut added = 0;
    let mut attempts = 0;
    while added < req.count && attempts < 10 * req.count {
        attempts += 1;
        let shape = req.shapes[rng.gen_range(0..req.shapes.len())];
        let r = shape.bounding_radius();
        let (x0, y0, x1, y1) = match &weights {
            Some(w) => {
                let mut pick = rng.gen_range(0.0..total_w);
                let mut k = 0;
                while k + 1 < w.len() && pick >= w[k] {
                    pick -= w[k];
                    k += 1;
                }
                let (i, j) = (k / FIELD_DIM, k % FIELD_DIM);
                (
                    i as f64 * rw,
                    j as f64 * rh,
                    (i + 1) as f64 * rw,
                    (j + 1) as f64 * rh,
                )
            }
            None => (0.0, 0.0, room.width, room.height),
        };
        let (x0, y0) = (x0.max(r), y0.max(r));
        let (x1, y1) = (x1.min(room.width - r), y1.min(room.height - r));
        if x1 <= x0 || y1 <= y0 {
            continue;
        }
        let c = Point2::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1));
        let theta = match shape {
            Shape::Box { .. } => rng.gen_range(0.0..FRAC_PI_2),
            Shape::Cylinder { .. } => 0.0,
        };
        if placed.overlaps(c, r) {
            continue;
        }
        if req
            .keep_clear
            .iter()
            .any(|p| p.dist(c) <= req.clear_radius + r)
        {
            continue;
        }
        if !clear_of_walls(world, c, r) {
            continue;
        }
        placed.insert(c, r);
        out.obstacles.push(Obstacle {
            shape,
            pose: Pose::new(c.x, c.y, theta),
        });
        added += 1;
    }
    if added < req.count {
        Err(added)
    } else {
        Ok(out)
    }
}

/// Discs bucketed on a square grid; a cell side of at least twice the
/// largest radius means overlaps only involve neighbouring cells.
struct SpatialHash {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<(Point2, f64)>>,
}

impl SpatialHash {
    fn new(cell: f64) -> Self {
        SpatialHash {
            cell: cell.max(1e-3),
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: Point2) -> (i64, i64) {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
        )
    }

    fn insert(&mut self, p: Point2, r: f64) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push((p, r));
    }

    fn overlaps(&self, c: Point2, r: f64) -> bool {
        let (i, j) = self.key(c);
        (i - 1..=i + 1).any(|a| {
            (j - 1..=j + 1).any(|b| {
                self.buckets
                    .get(&(a, b))
                    .is_some_and(|v| v.iter().any(|&(p, pr)| p.dist(c) <= pr + r))
            })
        })
    }
}

/// Collision-free start and goal in the same free-space component, at least
/// `min_separation` apart, with uniformly random headings.
pub fn sample_start_goal(
    world: &WorldSpec,
    seed: u64,
    min_separation: f64,
    robot_radius: f64,
) -> Result<(Pose, Pose), WorldError> {
    const ATTEMPTS: usize = 2000;
    let mut rng = rng_for(seed, 0x7374676c);
    let g = world.inflated_grid(super::DEFAULT_RESOLUTION, robot_radius);
    let (labels, _) = g.free_components();
    let margin = robot_radius + 0.1;
    let room = world.room;
    let draw = |rng: &mut ChaCha8Rng| -> Option<(Point2, u32)> {
        let p = Point2::new(
            rng.gen_range(margin..room.width - margin),
            rng.gen_range(margin..room.height - margin),
        );
        let cell = g.cell_of(p)?;
        if g.is_occupied(cell) || world.clearance(p) <= margin {
            return None;
        }
        Some((p, labels[cell]))
    };
    for _ in 0..ATTEMPTS {
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let (ha, hb) = (
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        if let (Some((pa, la)), Some((pb, lb))) = (a, b) {
            if la == lb && pa.dist(pb) >= min_separation {
                return Ok((Pose::new(pa.x, pa.y, ha), Pose::new(pb.x, pb.y, hb)));
            }
        }
    }
    Err(WorldError::NoValidPair { attempts: ATTEMPTS })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_pairwise(obs: &[Obstacle]) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..obs.len() {
            for j in i + 1..obs.len() {
                m = m.min(obs[i].center().dist(obs[j].center()));
            }
        }
        m
    }

    #[test]
    fn empty_maze_at_zero_density() {
        let w = generate_maze(7, 0.0).unwrap();
        assert!(w.walls.is_empty());
        assert_eq!(w.room, Room::square(20.0));
    }

    #[test]
    fn maze_is_deterministic_and_on_grid() {
        let a = generate_maze(7, 0.2).unwrap();
        let b = generate_maze(7, 0.2).unwrap();
        assert_eq!(a, b);
        assert!(!a.walls.is_empty());
        for w in &a.walls {
            assert_eq!((w.x * 2.0).fract(), 0.0);
            assert_eq!((w.y * 2.0).fract(), 0.0);
            assert!(w.x > 0.0 && w.x < 20.0 && w.y > 0.0 && w.y < 20.0);
        }
        assert_ne!(a, generate_maze(8, 0.2).unwrap());
    }

    #[test]
    fn maze_rejects_bad_density() {
        assert!(generate_maze(1, 0.7).is_err());
    }

    #[test]
    fn analogues_are_connected() {
        for w in [sector_analogue(3), campus_analogue(3), office_analogue(3)] {
            assert!(!w.walls.is_empty());
            assert!(free_space_connected(&w));
        }
    }

    #[test]
    fn uniform_spacing_respected_and_monotone() {
        let base = generate_maze(1, 0.2).unwrap();
        let dense = place_obstacles_uniform(&base, 0.75, 11).unwrap();
        let sparse = place_obstacles_uniform(&base, 1.5, 11).unwrap();
        assert!(sparse.obstacles.len() <= dense.obstacles.len());
        assert!(min_pairwise(&dense.obstacles) >= 0.75);
        assert!(min_pairwise(&sparse.obstacles) >= 1.5);
        for o in dense.obstacles.iter() {
            for w in &base.walls {
                assert!(w.signed_distance(o.center()) > TRAINING_CYLINDER_RADIUS);
            }
        }
    }

    #[test]
    fn uniform_in_empty_room_stays_inside() {
        let base = WorldSpec::empty(Room::square(20.0), 0);
        let w = place_obstacles_uniform(&base, 0.75, 5).unwrap();
        assert!(!w.obstacles.is_empty());
        for o in &w.obstacles {
            let c = o.center();
            assert!(
                c.x - 0.15 >= 0.0 && c.x + 0.15 <= 20.0 && c.y - 0.15 >= 0.0 && c.y + 0.15 <= 20.0
            );
        }
    }

    #[test]
    fn invalid_spacing_rejected() {
        let base = WorldSpec::empty(Room::square(20.0), 0);
        assert!(place_obstacles_uniform(&base, 0.9, 1).is_err());
    }

    #[test]
    fn nonuniform_respects_region_spacing() {
        let base = generate_maze(2, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let field = random_density_field(&mut rng);
        let w = place_obstacles_nonuniform(&base, &field, 9).unwrap();
        for a in 0..w.obstacles.len() {
            for b in a + 1..w.obstacles.len() {
                let (ca, cb) = (w.obstacles[a].center(), w.obstacles[b].center());
                let ra = DensityField::region_of(&w.room, ca);
                let rb = DensityField::region_of(&w.room, cb);
                if ra == rb {
                    assert!(ca.dist(cb) >= field.grid[ra.0][ra.1]);
                }
            }
        }
        let other = DensityField::uniform(1.5);
        let w2 = place_obstacles_nonuniform(&base, &other, 9).unwrap();
        assert_ne!(w.obstacles, w2.obstacles);
    }

    #[test]
    fn nonuniform_all_equal_matches_uniform_counts() {
        // mean counts over 20 seeds agree within a few standard errors
        let base = generate_maze(2, 0.2).unwrap();
        let field = DensityField::uniform(1.5);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for s in 0..20 {
            a.push(
                place_obstacles_nonuniform(&base, &field, s)
                    .unwrap()
                    .obstacles
                    .len() as f64,
            );
            b.push(
                place_obstacles_uniform(&base, 1.5, s)
                    .unwrap()
                    .obstacles
                    .len() as f64,
            );
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let se = ((var(&a) + var(&b)) / 20.0).sqrt().max(1.0);
        assert!(
            (mean(&a) - mean(&b)).abs() <= 4.0 * se,
            "{} vs {}",
            mean(&a),
            mean(&b)
        );
    }

    #[test]
    fn count_placement_exact_and_connected() {
        let base = generate_maze(3, 0.25).unwrap();
        let (s, g) = sample_start_goal(&base, 1, 8.0, 0.18).unwrap();
        let req =
            CountPlacement::new(200, &EVAL_SHAPES).keeping_clear(&[s.position(), g.position()]);
        let w = place_obstacles_by_count(&base, &req, 5).unwrap();
        assert_eq!(w.obstacles.len(), 200);
        for a in 0..w.obstacles.len() {
            for b in a + 1..w.obstacles.len() {
                let (oa, ob) = (&w.obstacles[a], &w.obstacles[b]);
                assert!(
                    oa.center().dist(ob.center())
                        > oa.shape.bounding_radius() + ob.shape.bounding_radius()
                );
            }
        }
        let grid = w.inflated_grid(0.05, 0.18);
        let (labels, _) = grid.free_components();
        assert_eq!(
            labels[grid.cell_of(s.position()).unwrap()],
            labels[grid.cell_of(g.position()).unwrap()]
        );
        assert_eq!(
            place_obstacles_by_count(&base, &CountPlacement::new(0, &EVAL_SHAPES), 5).unwrap(),
            base
        );
    }

    #[test]
    fn count_placement_infeasible() {
        let base = WorldSpec::empty(Room::square(2.0), 0);
        let err = place_obstacles_by_count(&base, &CountPlacement::new(500, &EVAL_SHAPES), 1);
        assert!(matches!(err, Err(WorldError::PlacementInfeasible { .. })));
    }

    #[test]
    fn start_goal_sampling() {
        let base = WorldSpec::empty(Room::square(20.0), 0);
        let (a, b) = sample_start_goal(&base, 3, 5.0, 0.18).unwrap();
        assert!(a.position().dist(b.position()) >= 5.0);
        assert!(base.room.contains(a.position()) && base.room.contains(b.position()));
        assert_eq!(sample_start_goal(&base, 3, 5.0, 0.18).unwrap(), (a, b));
    }

    #[test]
    fn walled_quadrants_yield_same_component_or_error() {
        // two full walls split the room into four sealed quadrants
        let mut set = BTreeSet::new();
        let room = Room::square(20.0);
        add_segment(
            &mut set,
            &room,
            Point2::new(10.0, 0.0),
            Point2::new(10.0, 20.0),
        );
        add_segment(
            &mut set,
            &room,
            Point2::new(0.0, 10.0),
            Point2::new(20.0, 10.0),
        );
        let mut w = WorldSpec::empty(room, 0);
        w.walls = blocks_from_set(&set);
        let g = w.inflated_grid(0.05, 0.18);
        let (labels, n) = g.free_components();
        assert_eq!(n, 4);
        for seed in 0..10 {
            match sample_start_goal(&w, seed, 3.0, 0.18) {
                Ok((a, b)) => assert_eq!(
                    labels[g.cell_of(a.position()).unwrap()],
                    labels[g.cell_of(b.position()).unwrap()]
                ),
                Err(WorldError::NoValidPair { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(matches!(
            sample_start_goal(&w, 0, 15.0, 0.18),
            Err(WorldError::NoValidPair { .. })
        ));
    }
}
