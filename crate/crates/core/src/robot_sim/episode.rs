use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{check_collision, step, Limits, RobotState, ROBOT_RADIUS};
use crate::geom::{Point2, Pose};
use crate::global_planner::{
    distance_to_path, replan_clock, shortest_path_oracle, GlobalPath, PlanError, PlannerState,
};
use crate::local_planner::{visible_local_goal, LocalPlanner, NavParams};
use crate::sensing::{raycast, Egocircle, EgocircleConfig, Observation, SensorConfig};
use crate::world::{free_cells_within, WorldSpec, DEFAULT_RESOLUTION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error("start and goal are not connected")]
    NoPath,
    #[error("invalid episode configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub world: WorldSpec,
    pub start: Pose,
    pub goal: Pose,
    /// Physics step (s).
    pub dt: f64,
    pub control_period: f64,
    pub tune_period: f64,
    pub timeout: f64,
    pub goal_tolerance: f64,
    pub initial_params: NavParams,
    pub robot_radius: f64,
    pub limits: Limits,
    pub sensor: SensorConfig,
    pub egocircle: EgocircleConfig,
    /// Cell size of the known map and the oracle grid (m).
    pub resolution: f64,
    /// Seeds the tuner's random stream.
    pub seed: u64,
    /// Keep every physics-step pose in the result.
    pub record_poses: bool,
}

impl EpisodeConfig {
    pub fn new(world: WorldSpec, start: Pose, goal: Pose) -> Self {
        EpisodeConfig {
            world,
            start,
            goal,
            dt: 0.05,
            control_period: 0.1,
            tune_period: 2.0,
            timeout: 300.0,
            goal_tolerance: 0.3,
            initial_params: NavParams::default(),
            robot_radius: ROBOT_RADIUS,
            limits: Limits::default(),
            sensor: SensorConfig::default(),
            egocircle: EgocircleConfig::default(),
            resolution: DEFAULT_RESOLUTION,
            seed: 0,
            record_poses: false,
        }
    }

    fn ratio(&self, period: f64) -> Result<usize, EpisodeError> {
        let r = period / self.dt;
        if r < 1.0 - 1e-9 || (r - r.round()).abs() > 1e-6 {
            return Err(EpisodeError::InvalidConfig(format!(
                "period {period} is not a multiple of dt {}",
                self.dt
            )));
        }
        Ok(r.round() as usize)
    }

    /// Checks step ratios and the no-tunnelling condition.
    pub fn validate(&self) -> Result<(usize, usize), EpisodeError> {
        if !(self.dt > 0.0)
            || self.dt > self.control_period
            || self.control_period > self.tune_period
        {
            return Err(EpisodeError::InvalidConfig(
                "need 0 < dt <= control_period <= tune_period".into(),
            ));
        }
        let per_step = self.dt * self.limits.v_max;
        let feature = self.world.min_feature_size();
        if per_step >= feature {
            return Err(EpisodeError::InvalidConfig(format!(
                "per-step displacement {per_step} is not below the smallest feature {feature}"
            )));
        }
        if !self.initial_params.is_valid() {
            return Err(EpisodeError::InvalidConfig(
                "initial parameters invalid".into(),
            ));
        }
        let control = self.ratio(self.control_period)?;
        let tune = self.ratio(self.tune_period)?;
        if tune % control != 0 {
            return Err(EpisodeError::InvalidConfig(
                "tune period must be a multiple of the control period".into(),
            ));
        }
        Ok((control, tune))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Collision,
    Timeout,
    NoPath,
}

/// One tuner decision: observation indices point into
/// [`EpisodeResult::observations`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: usize,
    pub action: NavParams,
    pub reward: f64,
    pub next_obs: usize,
    pub done: bool,
    /// Sim time the action was applied.
    pub time: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    /// Distance travelled (m).
    pub path_length: f64,
    /// Simulated time until termination (s).
    pub sim_runtime: f64,
    /// Wall-clock time; diagnostic only, excluded from equality.
    pub wall_runtime: f64,
    pub failure_reason: Option<FailureReason>,
    pub l_min: f64,
    /// Observation at every tuner query plus the final one.
    pub observations: Vec<Observation>,
    /// Robot position and density-relevant location for each observation.
    pub positions: Vec<Point2>,
    pub transitions: Vec<Transition>,
    pub global_replans: usize,
    /// Physics-step poses when `record_poses` is set.
    pub poses: Vec<Pose>,
}

impl PartialEq for EpisodeResult {
    fn eq(&self, o: &Self) -> bool {
        self.success == o.success
            && self.path_length.to_bits() == o.path_length.to_bits()
            && self.sim_runtime.to_bits() == o.sim_runtime.to_bits()
            && self.failure_reason == o.failure_reason
            && self.l_min.to_bits() == o.l_min.to_bits()
            && self.observations == o.observations
            && self.positions == o.positions
            && self.transitions == o.transitions
            && self.global_replans == o.global_replans
            && self.poses == o.poses
    }
}

impl EpisodeResult {
    /// `l / l_min` for successful runs.
    pub fn path_ratio(&self) -> Option<f64> {
        self.success.then(|| self.path_length / self.l_min)
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    /// Transition as `(observation, action, reward, next observation, done)`.
    pub fn transition(&self, k: usize) -> (&Observation, &NavParams, f64, &Observation, bool) {
        let t = &self.transitions[k];
        (
            &self.observations[t.obs],
            &t.action,
            t.reward,
            &self.observations[t.next_obs],
            t.done,
        )
    }
}

/// What a tuner sees when it is queried.
pub struct TuneContext<'a> {
    pub obs: &'a Observation,
    pub pose: Pose,
    pub sim_time: f64,
    /// Zero-based index of this query within the episode.
    pub query: usize,
    /// Ground truth, for oracle policies only.
    pub world: &'a WorldSpec,
    pub current: NavParams,
}

/// A parameter-selection policy queried every tune period. Implementations
/// are read-only during an episode so one policy can serve many workers.
pub trait TunerPolicy: Send + Sync {
    fn tune(&self, ctx: &TuneContext<'_>, rng: &mut ChaCha8Rng) -> NavParams;

    fn name(&self) -> String;
}

/// Terminal reward: `1000·l/l_min` on success, `-1000` otherwise.
pub fn terminal_reward(success: bool, l: f64, l_min: f64) -> f64 {
    if success {
        1000.0 * (l / l_min)
    } else {
        -1000.0
    }
}

/// Per-step reward: negative distance from the oracle path.
pub fn step_reward(position: Point2, oracle: &GlobalPath) -> f64 {
    -distance_to_path(oracle, position)
}

struct Recorder {
    observations: Vec<Observation>,
    positions: Vec<Point2>,
    transitions: Vec<Transition>,
    pending: Option<(usize, NavParams, f64)>,
}

impl Recorder {
    fn observe(&mut self, obs: Observation, pos: Point2) -> usize {
        self.observations.push(obs);
        self.positions.push(pos);
        self.observations.len() - 1
    }

    fn close(&mut self, next_obs: usize, reward: f64, done: bool) {
        if let Some((obs, action, time)) = self.pending.take() {
            self.transitions.push(Transition {
                obs,
                action,
                reward,
                next_obs,
                done,
                time,
            });
        }
    }
}

/// Runs one navigation episode to success, collision, lost path or timeout.
pub fn run_episode(
    config: &EpisodeConfig,
    tuner: &dyn TunerPolicy,
) -> Result<EpisodeResult, EpisodeError> {
    let wall = Instant::now();
    let (control_every, tune_every) = config.validate()?;
    let radius = config.robot_radius;
    let world = &config.world;
    let oracle = match shortest_path_oracle(
        world,
        &config.start,
        &config.goal,
        config.resolution,
        radius,
    ) {
        Ok(p) => p,
        Err(PlanError::OutOfBounds) => {
            return Err(EpisodeError::InvalidConfig(
                "start or goal outside the room".into(),
            ))
        }
        Err(_) => return Err(EpisodeError::NoPath),
    };
    let l_min = oracle.length;
    let walls = world.walls_only().inflated_grid(config.resolution, 0.0);
    let known = world.walls_only().inflated_grid(config.resolution, radius);
    let goal = config.goal.position();
    let mut planner =
        PlannerState::new(known, config.goal.position()).map_err(|_| EpisodeError::NoPath)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = RobotState {
        radius,
        ..RobotState::at(config.start)
    };
    let mut ego = Egocircle::new(config.egocircle);
    let mut local = LocalPlanner::new();
    let mut params = config.initial_params;
    let mut path: Option<GlobalPath> = None;
    let mut last_plan = f64::NEG_INFINITY;
    let mut special = false;
    let mut ego_pose = config.start;
    let mut cmd = (0.0, 0.0);
    let mut rec = Recorder {
        observations: Vec::new(),
        positions: Vec::new(),
        transitions: Vec::new(),
        pending: None,
    };
    let mut queries = 0usize;
    let mut path_length = 0.0;
    let mut replans = 0usize;
    let mut poses = Vec::new();
    if config.record_poses {
        poses.push(state.pose);
    }
    let max_steps = (config.timeout / config.dt).round() as usize;

    let mut k = 0usize;
    let outcome = loop {
        let t = k as f64 * config.dt;
        if k % control_every == 0 {
            let scan = raycast(
                world,
                &state.pose,
                config.sensor.fov,
                config.sensor.n_rays,
                config.sensor.max_range,
            );
            ego.update(&scan, &ego_pose.relative(&state.pose), t);
            ego_pose = state.pose;
            let mut changed = Vec::new();
            for h in scan.hits() {
                let p = state.pose.transform_point(h);
                let cells = free_cells_within(planner.grid(), p, radius);
                changed.extend(
                    cells
                        .into_iter()
                        .filter(|&c| planner.grid().center(c).dist(goal) > config.goal_tolerance)
                        .map(|c| (c, true)),
                );
            }
            planner.update_cells(&changed);
            if let Some(p) = &path {
                if !changed.is_empty() && p.is_blocked(planner.grid()) {
                    special = true;
                }
            }
            if k % tune_every == 0 {
                let obs = ego.to_observation();
                let ctx_obs = obs.clone();
                let idx = rec.observe(obs, state.pose.position());
                if k > 0 {
                    rec.close(idx, step_reward(state.pose.position(), &oracle), false);
                }
                let ctx = TuneContext {
                    obs: &ctx_obs,
                    pose: state.pose,
                    sim_time: t,
                    query: queries,
                    world,
                    current: params,
                };
                params = tuner.tune(&ctx, &mut rng);
                queries += 1;
                rec.pending = Some((idx, params, t));
            }
            if path.is_none() || replan_clock(params.f_gp, t, last_plan, special) {
                match replan(&mut planner, &state.pose, &config.goal) {
                    Some(p) => {
                        local.notify_new_plan(&p, &state.pose, params.d_la);
                        path = Some(p);
                        replans += 1;
                    }
                    None => break Some(FailureReason::NoPath),
                }
                last_plan = t;
                special = false;
            }
            let lg = visible_local_goal(path.as_ref().unwrap(), &state.pose, params.d_la, &walls);
            let out = local.control(&ego, &lg, &state, &params, &config.limits, t);
            cmd = out.cmd;
            special |= out.special_event;
        }
        let next = step(&state, cmd, config.dt, &config.limits);
        path_length += state.pose.position().dist(next.pose.position());
        state = next;
        if config.record_poses {
            poses.push(state.pose);
        }
        k += 1;
        if check_collision(world, &state.pose, radius) {
            break Some(FailureReason::Collision);
        }
        if state.pose.position().dist(config.goal.position()) <= config.goal_tolerance {
            break None;
        }
        if k >= max_steps {
            break Some(FailureReason::Timeout);
        }
    };
    let sim_runtime = k as f64 * config.dt;
    let success = outcome.is_none();
    let last = rec.observe(ego.to_observation(), state.pose.position());
    rec.close(last, terminal_reward(success, path_length, l_min), true);
    Ok(EpisodeResult {
        success,
        path_length,
        sim_runtime,
        wall_runtime: wall.elapsed().as_secs_f64(),
        failure_reason: outcome,
        l_min,
        observations: rec.observations,
        positions: rec.positions,
        transitions: rec.transitions,
        global_replans: replans,
        poses,
    })
}

/// Plans from the robot's cell, or the nearest free cell when sensing has
/// inflated obstacles over the robot. Returns the smoothed path.
fn replan(planner: &mut PlannerState, pose: &Pose, goal: &Pose) -> Option<GlobalPath> {
    let g = planner.grid();
    let cell = g.clamped_cell_of(pose.position());
    let start = g.nearest_free(cell, 400)?;
    let from = if start == cell {
        pose.position()
    } else {
        g.center(start)
    };
    let raw = planner.plan(from).ok()?;
    let mut smooth = raw.smoothed(planner.grid(), from, goal.position());
    if start != cell {
        smooth.waypoints.insert(0, pose.position());
        smooth = GlobalPath::new(smooth.waypoints);
    }
    Some(smooth)
}
