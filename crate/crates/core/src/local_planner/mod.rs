//! Gap-based local planning on the egocircle.
//!
//! Everything here works in the robot frame at planning time; trajectories
//! remember the world pose they were planned from.

mod params;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

pub use params::*;

use crate::geom::{normalize_angle, point_segment_distance, Point2, Pose};
use crate::global_planner::{line_of_sight, GlobalPath};
use crate::robot_sim::{integrate, Limits, RobotState};
use crate::sensing::Egocircle;
use crate::world::OccupancyGrid;

/// Obstacle penetration weight in candidate scores.
pub const W_OBS: f64 = 1.0;
/// Terminal distance-to-local-goal weight in candidate scores.
pub const W_GOAL: f64 = 2.0;
/// Time between consecutive trajectory poses (s).
pub const TRAJ_DT: f64 = 0.25;
const MAX_TRAJ_STEPS: usize = 80;
const GOAL_REACHED: f64 = 0.05;
const HEADING_GAIN: f64 = 2.5;
/// Extra clearance aimed for past a gap edge, so a rollout that curves in
/// slightly still passes the feasibility check.
const AIM_PAD: f64 = 0.1;
/// Rollouts turn on the spot while the target is further off than this.
const TURN_IN_PLACE: f64 = 0.3;
/// Two candidates with aim directions closer than this share a homotopy.
const SAME_HOMOTOPY: f64 = 0.35;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    /// Angular interval in the robot frame; `theta_hi` may exceed 2π.
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub range_lo: f64,
    pub range_hi: f64,
    pub midpoint: Point2,
}

impl Gap {
    pub fn width(&self) -> f64 {
        self.theta_hi - self.theta_lo
    }

    pub fn is_full_circle(&self) -> bool {
        self.width() >= TAU
    }

    pub fn edge_lo(&self) -> Point2 {
        polar(self.theta_lo, self.range_lo)
    }

    pub fn edge_hi(&self) -> Point2 {
        polar(self.theta_hi, self.range_hi)
    }
}

fn polar(theta: f64, r: f64) -> Point2 {
    Point2::new(r * theta.cos(), r * theta.sin())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Robot-frame poses; `poses[0]` is the robot.
    pub poses: Vec<Pose>,
    pub times: Vec<f64>,
    pub score: f64,
    /// Robot-frame point the trajectory steers to.
    pub aim: Point2,
    /// Index of the seeding gap; `None` for the direct candidate.
    pub gap: Option<usize>,
    /// Look-ahead radius the trajectory was planned with.
    pub d_la: f64,
    pub robot_radius: f64,
    /// World pose of the robot when planned.
    pub frame: Pose,
}

impl Trajectory {
    pub fn terminal(&self) -> Pose {
        *self.poses.last().expect("trajectory has at least one pose")
    }

    pub fn path_length(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| w[0].position().dist(w[1].position()))
            .sum()
    }

    /// World-frame direction of the aim point.
    pub fn aim_heading(&self) -> f64 {
        normalize_angle(self.frame.theta + self.aim.angle())
    }
}

/// Egocircle measurements strictly inside `d_la`, robot frame.
pub fn local_points(ego: &Egocircle, d_la: f64) -> Vec<Point2> {
    ego.points()
        .filter(|p| p.range < d_la)
        .map(|p| p.p)
        .collect()
}

fn clearance(p: Point2, pts: &[Point2]) -> f64 {
    pts.iter().map(|q| q.dist(p)).fold(f64::INFINITY, f64::min)
}

/// Passable openings around the robot, using only the nearest measurement
/// of each bin and ignoring everything at or beyond `d_la`.
pub fn detect_gaps(ego: &Egocircle, d_la: f64, robot_radius: f64, inflation: f64) -> Vec<Gap> {
    let n = ego.config().bins;
    let obs: Vec<Option<Point2>> = (0..n)
        .map(|i| ego.bin_min(i).filter(|p| p.range < d_la).map(|p| p.p))
        .collect();
    let Some(first) = obs.iter().position(|o| o.is_some()) else {
        return vec![Gap {
            theta_lo: 0.0,
            theta_hi: TAU,
            range_lo: d_la,
            range_hi: d_la,
            midpoint: Point2::new(d_la, 0.0),
        }];
    };
    let need = 2.0 * (robot_radius + inflation);
    let mut gaps = Vec::new();
    let mut i = first;
    loop {
        let mut j = (i + 1) % n;
        while obs[j].is_none() {
            j = (j + 1) % n;
        }
        let (a, b) = (obs[i].unwrap(), obs[j].unwrap());
        let lo = a.angle();
        let mut hi = b.angle();
        while hi <= lo {
            hi += TAU;
        }
        let free_run = j != (i + 1) % n;
        let open = a.dist(b);
        if (free_run && hi - lo >= PI) || open >= need {
            let midpoint = if hi - lo >= PI {
                polar(0.5 * (lo + hi), 0.5 * (a.norm() + b.norm()))
            } else {
                a.lerp(b, 0.5)
            };
            gaps.push(Gap {
                theta_lo: lo,
                theta_hi: hi,
                range_lo: a.norm(),
                range_hi: b.norm(),
                midpoint,
            });
        }
        i = j;
        if i == first {
            break;
        }
    }
    gaps
}

/// Sub-goal on the global path: walking forward from the point nearest the
/// robot, the first place the path leaves the `d_la` disc (or its end).
pub fn local_goal(path: &GlobalPath, pose: &Pose, d_la: f64) -> Pose {
    let c = pose.position();
    let pts = &path.waypoints;
    if pts.len() == 1 {
        return Pose::new(pts[0].x, pts[0].y, pose.theta);
    }
    let (k0, mut a) = nearest_on_path(pts, c);
    let (a0, b0) = (pts[k0], pts[k0 + 1]);
    let heading = |a: Point2, b: Point2| b.sub(a).angle();
    if a.dist(c) > d_la {
        return Pose::new(a.x, a.y, heading(a0, b0));
    }
    for k in k0..pts.len() - 1 {
        let b = pts[k + 1];
        if b.dist(c) > d_la {
            // exit point: larger root of |a + s(b - a) - c| = d_la
            let d = b.sub(a);
            let f = a.sub(c);
            let qa = d.dot(d);
            let qb = 2.0 * f.dot(d);
            let qc = f.dot(f) - d_la * d_la;
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
            let s = ((-qb + disc.sqrt()) / (2.0 * qa)).clamp(0.0, 1.0);
            let p = a.add(d.scale(s));
            return Pose::new(p.x, p.y, heading(a, b));
        }
        a = b;
    }
    let n = pts.len();
    Pose::new(pts[n - 1].x, pts[n - 1].y, heading(pts[n - 2], pts[n - 1]))
}

/// Segment index and point of the polyline `pts` (at least two points)
/// nearest to `c`; ties go to the earlier segment.
fn nearest_on_path(pts: &[Point2], c: Point2) -> (usize, Point2) {
    let mut best = (f64::INFINITY, 0usize);
    for (k, w) in pts.windows(2).enumerate() {
        let d = point_segment_distance(c, w[0], w[1]);
        if d < best.0 {
            best = (d, k);
        }
    }
    let k0 = best.1;
    let (a0, b0) = (pts[k0], pts[k0 + 1]);
    let ab = b0.sub(a0);
    let t = if ab.dot(ab) > 0.0 {
        (c.sub(a0).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (k0, a0.lerp(b0, t))
}

/// [`local_goal`] pulled back along the path to the last point the robot
/// can see past the known walls in `walls`. A path that bends around a
/// thin wall otherwise yields a sub-goal on its far side.
pub fn visible_local_goal(
    path: &GlobalPath,
    pose: &Pose,
    d_la: f64,
    walls: &OccupancyGrid,
) -> Pose {
    let lg = local_goal(path, pose, d_la);
    let c = pose.position();
    let pts = &path.waypoints;
    if pts.len() == 1 || line_of_sight(walls, c, lg.position()) {
        return lg;
    }
    let step = walls.resolution;
    let (k0, mut a) = nearest_on_path(pts, c);
    let mut last: Option<Pose> = None;
    'walk: for k in k0..pts.len() - 1 {
        let b = pts[k + 1];
        let len = a.dist(b);
        let n = (len / step).ceil().max(1.0) as usize;
        for i in 0..=n {
            let p = a.lerp(b, i as f64 / n as f64);
            if p.dist(c) > d_la || !line_of_sight(walls, c, p) {
                break 'walk;
            }
            last = Some(Pose::new(p.x, p.y, b.sub(a).angle()));
        }
        a = b;
    }
    last.unwrap_or(lg)
}

/// Robot-frame rollout steering at `target`, stopping there, at the `d_la`
/// boundary, or after a fixed step budget.
fn rollout(target: Point2, d_la: f64, limits: &Limits) -> (Vec<Pose>, Vec<f64>) {
    let mut pose = Pose::new(0.0, 0.0, 0.0);
    let mut poses = vec![pose];
    let mut times = vec![0.0];
    for k in 1..=MAX_TRAJ_STEPS {
        let pos = pose.position();
        let dist = pos.dist(target);
        if dist < GOAL_REACHED {
            break;
        }
        let e = normalize_angle(target.sub(pos).angle() - pose.theta);
        let (v, w) = if e.abs() > TURN_IN_PLACE {
            (0.0, (e / TRAJ_DT).clamp(-limits.w_max, limits.w_max))
        } else {
            let w = (HEADING_GAIN * e).clamp(-limits.w_max, limits.w_max);
            let v = (limits.v_max * e.cos()).min(dist / TRAJ_DT);
            (v, w)
        };
        pose = integrate(&pose, v, w, TRAJ_DT);
        poses.push(pose);
        times.push(k as f64 * TRAJ_DT);
        if pose.position().norm() >= d_la {
            break;
        }
    }
    (poses, times)
}

/// Candidate score: travelled length, inflated-clearance penetration summed
/// over poses, and terminal distance to the local goal.
pub fn score_trajectory(poses: &[Pose], goal: Point2, pts: &[Point2], clear: f64) -> f64 {
    let length: f64 = poses
        .windows(2)
        .map(|w| w[0].position().dist(w[1].position()))
        .sum();
    let pen: f64 = poses[1..]
        .iter()
        .map(|p| (clear - clearance(p.position(), pts)).max(0.0))
        .sum();
    let term = poses.last().map_or(0.0, |p| p.position().dist(goal));
    length + W_OBS * pen + W_GOAL * term
}

/// Where a candidate through `gap` steers: towards the local goal when its
/// direction lies inside the gap after clearance margins, else past the
/// nearer edge. Gaps narrower than the margins are entered past their
/// closer edge if the far one leaves room, else through the midpoint.
pub fn aim_point(gap: &Gap, goal: Point2, clear: f64, d_la: f64) -> Point2 {
    if gap.is_full_circle() {
        return goal;
    }
    let pad = clear + AIM_PAD;
    let margin = |r: f64| {
        if r <= pad {
            FRAC_PI_2
        } else {
            (pad / r).asin()
        }
    };
    let lo = gap.theta_lo + margin(gap.range_lo);
    let hi = gap.theta_hi - margin(gap.range_hi);
    if lo > hi {
        // Clear the nearer edge at its own range when the far edge is
        // distant enough not to matter there.
        let near = if gap.range_lo <= gap.range_hi {
            polar(lo, gap.range_lo.min(d_la))
        } else {
            polar(hi, gap.range_hi.min(d_la))
        };
        let far = if gap.range_lo <= gap.range_hi {
            gap.edge_hi()
        } else {
            gap.edge_lo()
        };
        return if near.dist(far) >= pad {
            near
        } else {
            gap.midpoint
        };
    }
    let mut phi = goal.angle();
    while phi < gap.theta_lo {
        phi += TAU;
    }
    while phi >= gap.theta_lo + TAU {
        phi -= TAU;
    }
    if phi >= lo && phi <= hi {
        return polar(phi, goal.norm().min(d_la));
    }
    // angular distance to each bound going the short way round
    let to_lo = normalize_angle(lo - phi).abs();
    let to_hi = normalize_angle(phi - hi).abs();
    if to_lo <= to_hi {
        polar(lo, gap.range_lo.min(d_la))
    } else {
        polar(hi, gap.range_hi.min(d_la))
    }
}

/// One candidate per gap plus a direct candidate when the straight line to
/// the local goal keeps the inflated clearance. `local_goal` is in the
/// robot frame.
pub fn plan_candidates(
    gaps: &[Gap],
    local_goal: Point2,
    ego: &Egocircle,
    pose: &Pose,
    params: &NavParams,
    robot_radius: f64,
    limits: &Limits,
) -> Vec<Trajectory> {
    let d_la = params.d_la;
    let pts = local_points(ego, d_la);
    let clear = robot_radius + params.inflation_distance;
    let make = |aim: Point2, gap: Option<usize>| {
        let (poses, times) = rollout(aim, d_la, limits);
        let score = score_trajectory(&poses, local_goal, &pts, clear);
        Trajectory {
            poses,
            times,
            score,
            aim,
            gap,
            d_la,
            robot_radius,
            frame: *pose,
        }
    };
    let mut out = Vec::with_capacity(gaps.len() + 1);
    let origin = Point2::new(0.0, 0.0);
    let direct_clear = pts
        .iter()
        .all(|q| point_segment_distance(*q, origin, local_goal) >= clear);
    if direct_clear {
        out.push(make(local_goal, None));
    }
    for (k, g) in gaps.iter().enumerate() {
        out.push(make(aim_point(g, local_goal, clear, d_la), Some(k)));
    }
    out
}

/// Whether the first `n_poses` poses after the start keep at least
/// `robot_radius + inflation` from every egocircle measurement within the
/// trajectory's look-ahead. Turns on the spot do not advance the count, so
/// the check always covers `n_poses` steps of actual travel.
pub fn feasibility_check(
    traj: &Trajectory,
    ego: &Egocircle,
    inflation: f64,
    n_poses: usize,
) -> bool {
    let pts = local_points(ego, traj.d_la);
    let clear = traj.robot_radius + inflation;
    traj.poses
        .windows(2)
        .filter(|w| w[0].position().dist(w[1].position()) > 1e-9)
        .take(n_poses)
        .all(|w| clearance(w[1].position(), &pts) >= clear)
}

/// Selection memory carried between control cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionMemory {
    /// World-frame aim heading of the previous selection.
    pub previous: Option<f64>,
    pub last_switch: f64,
    /// World-frame heading of a global plan not yet seen by `select`.
    pub fresh_plan: Option<f64>,
}

impl Default for SelectionMemory {
    fn default() -> Self {
        SelectionMemory {
            previous: None,
            last_switch: f64::NEG_INFINITY,
            fresh_plan: None,
        }
    }
}

fn closest_heading(candidates: &[Trajectory], heading: f64) -> Option<(usize, f64)> {
    candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (i, normalize_angle(c.aim_heading() - heading).abs()))
        .fold(None, |acc: Option<(usize, f64)>, (i, d)| match acc {
            Some((_, bd)) if bd <= d => acc,
            _ => Some((i, d)),
        })
}

/// Picks a candidate index with hysteresis, a switching block, and a bias
/// towards the fresh global plan's heading. Updates `memory`.
pub fn select(
    candidates: &[Trajectory],
    memory: &mut SelectionMemory,
    params: &NavParams,
    sim_time: f64,
) -> usize {
    assert!(
        !candidates.is_empty(),
        "select needs at least one candidate"
    );
    let mut eff: Vec<f64> = candidates.iter().map(|c| c.score).collect();
    if let Some(h) = memory.fresh_plan.take() {
        if let Some((i, _)) = closest_heading(candidates, h) {
            eff[i] *= params.selection_prefers_initial_plan;
        }
    }
    let best = argmin(&eff);
    let keep = memory
        .previous
        .and_then(|h| closest_heading(candidates, h))
        .filter(|&(_, d)| d <= SAME_HOMOTOPY)
        .map(|(i, _)| i);
    let chosen = match keep {
        None => best,
        Some(k) if sim_time - memory.last_switch < params.switching_blocking_period => k,
        Some(k) if eff[best] < params.selection_cost_hysteresis * eff[k] => best,
        Some(k) => k,
    };
    if keep != Some(chosen) {
        memory.last_switch = sim_time;
    }
    memory.previous = Some(candidates[chosen].aim_heading());
    chosen
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Pure-pursuit command along the trajectory's first segment, clamped to
/// `limits`; rotates in place when the target lies more than 90° off the
/// heading.
///
/// The pursuit arc through the segment end is the arc the rollout itself
/// drove, so a robot at the trajectory start reproduces the planned motion.
pub fn velocity_command(traj: &Trajectory, state: &RobotState, limits: &Limits) -> (f64, f64) {
    let pos = traj.frame.inverse_transform_point(state.pose.position());
    let heading = normalize_angle(state.pose.theta - traj.frame.theta);
    let Some(&first) = traj.poses.get(1) else {
        return (0.0, 0.0);
    };
    if first.position().dist(traj.poses[0].position()) < 1e-9 && pos.dist(first.position()) < 1e-6 {
        // the rollout opens with a turn on the spot
        let e = normalize_angle(first.theta - heading);
        return limits.clamp(0.0, e / TRAJ_DT);
    }
    let Some(target) = traj.poses[1..]
        .iter()
        .find(|p| p.position().dist(pos) > 1e-6)
    else {
        let e = normalize_angle(traj.terminal().theta - heading);
        return limits.clamp(0.0, e / TRAJ_DT);
    };
    let d = target.position().dist(pos);
    let e = normalize_angle(target.position().sub(pos).angle() - heading);
    if e.abs() > FRAC_PI_2 {
        return (0.0, limits.w_max * e.signum());
    }
    let kappa = 2.0 * e.sin() / d;
    let arc = if e.abs() < 1e-9 { d } else { d * e / e.sin() };
    let mut v = (arc / TRAJ_DT).min(limits.v_max);
    let mut w = v * kappa;
    if w.abs() > limits.w_max {
        w = limits.w_max * w.signum();
        v = limits.w_max / kappa.abs();
    }
    limits.clamp(v, w)
}

/// Robot-frame bearing whose neighbourhood of bins has the longest shortest
/// return; empty bins count as open to the sensor range.
fn most_open_bearing(ego: &Egocircle) -> f64 {
    let cfg = ego.config();
    let n = cfg.bins;
    let half = (n / 16).max(1);
    let range = |b: usize| ego.bin_min(b).map_or(cfg.max_range, |p| p.range);
    let ranges: Vec<f64> = (0..n).map(range).collect();
    let best = (0..n)
        .map(|b| {
            let worst = (0..=2 * half)
                .map(|k| ranges[(b + n + k - half) % n])
                .fold(f64::INFINITY, f64::min);
            (b, worst)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(0, |(b, _)| b);
    normalize_angle(ego.bin_center(best))
}

/// Outcome of one control cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlOutput {
    pub cmd: (f64, f64),
    /// No feasible candidate: the global path should be recomputed.
    pub special_event: bool,
    pub selected: Option<Trajectory>,
    pub n_candidates: usize,
}

/// Per-episode local planner: gap detection, candidates, feasibility,
/// selection and tracking.
#[derive(Clone, Debug, Default)]
pub struct LocalPlanner {
    pub memory: SelectionMemory,
    /// Turn direction held while no candidate is collision-free.
    escape_turn: Option<f64>,
}

impl LocalPlanner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records that a new global plan arrived; the next selection is biased
    /// towards its initial heading.
    pub fn notify_new_plan(&mut self, path: &GlobalPath, pose: &Pose, d_la: f64) {
        let lg = local_goal(path, pose, d_la.min(1.0));
        let d = lg.position().sub(pose.position());
        self.memory.fresh_plan = Some(if d.norm() > 1e-9 { d.angle() } else { lg.theta });
    }

    /// One control cycle towards the world-frame sub-goal `goal`.
    pub fn control(
        &mut self,
        ego: &Egocircle,
        goal: &Pose,
        state: &RobotState,
        params: &NavParams,
        limits: &Limits,
        sim_time: f64,
    ) -> ControlOutput {
        let pose = state.pose;
        let lg = pose.inverse_transform_point(goal.position());
        let gaps = detect_gaps(ego, params.d_la, state.radius, params.inflation_distance);
        let candidates = plan_candidates(&gaps, lg, ego, &pose, params, state.radius, limits);
        let n_candidates = candidates.len();
        let n = params.feasibility_check_poses;
        let feasible: Vec<Trajectory> = candidates
            .iter()
            .filter(|c| feasibility_check(c, ego, params.inflation_distance, n))
            .cloned()
            .collect();
        if !feasible.is_empty() {
            self.escape_turn = None;
            let k = select(&feasible, &mut self.memory, params, sim_time);
            let cmd = velocity_command(&feasible[k], state, limits);
            return ControlOutput {
                cmd,
                special_event: false,
                selected: Some(feasible[k].clone()),
                n_candidates,
            };
        }
        // nothing keeps the inflated clearance: follow the collision-free
        // candidate with the most room, else turn on the spot towards open
        // space and keep turning the same way until something opens up
        let pts = local_points(ego, params.d_la);
        let min_clear = |c: &Trajectory| {
            c.poses
                .windows(2)
                .filter(|w| w[0].position().dist(w[1].position()) > 1e-9)
                .take(n)
                .map(|w| clearance(w[1].position(), &pts))
                .fold(f64::INFINITY, f64::min)
        };
        let fallback = candidates
            .iter()
            .filter(|c| c.poses.len() > 1 && feasibility_check(c, ego, 0.0, n))
            .max_by(|a, b| min_clear(a).total_cmp(&min_clear(b)));
        let cmd = match fallback {
            Some(t) => {
                self.escape_turn = None;
                velocity_command(t, state, limits)
            }
            None => {
                let dir = *self.escape_turn.get_or_insert_with(|| {
                    if most_open_bearing(ego) >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                });
                (0.0, dir * limits.w_max)
            }
        };
        self.memory.previous = None;
        ControlOutput {
            cmd,
            special_event: true,
            selected: None,
            n_candidates,
        }
    }
}
