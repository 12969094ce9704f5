use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::{InfeasibleCell, Report, RunRecord};
use super::{mix_seed, run_keyed, BenchError, Partial, RunOptions};
use crate::geom::Pose;
use crate::local_planner::NavParams;
use crate::robot_sim::{
    run_episode, EpisodeConfig, EpisodeError, FailureReason, TunerPolicy, ROBOT_RADIUS,
};
use crate::tuners::EpisodeSampler;
use crate::world::{
    campus_analogue, generate_maze, office_analogue, place_obstacles_by_count,
    place_obstacles_nonuniform, random_density_field, sample_start_goal, sector_analogue,
    CountPlacement, Shape, WorldError, WorldSpec, EVAL_SHAPES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    MazeSame,
    MazeDifferent,
    Campus,
    Sector,
    Office,
}

impl EnvKind {
    pub const ALL: [EnvKind; 5] = [
        EnvKind::MazeSame,
        EnvKind::MazeDifferent,
        EnvKind::Campus,
        EnvKind::Sector,
        EnvKind::Office,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::MazeSame => "maze_same",
            EnvKind::MazeDifferent => "maze_different",
            EnvKind::Campus => "campus",
            EnvKind::Sector => "sector",
            EnvKind::Office => "office",
        }
    }

    pub fn parse(s: &str) -> Option<EnvKind> {
        EnvKind::ALL.into_iter().find(|e| e.as_str() == s)
    }

    /// Obstacle count at 100% load.
    pub fn max_obstacles(self) -> usize {
        match self {
            EnvKind::MazeSame | EnvKind::MazeDifferent | EnvKind::Sector => 200,
            EnvKind::Campus | EnvKind::Office => 500,
        }
    }

    /// Walls of the environment, without obstacles.
    pub fn base_world(self, layout: &LayoutConfig) -> Result<WorldSpec, WorldError> {
        Ok(match self {
            EnvKind::MazeSame => generate_maze(layout.maze_seed, layout.wall_density)?,
            EnvKind::MazeDifferent => {
                generate_maze(layout.different_maze_seed, layout.wall_density)?
            }
            EnvKind::Campus => campus_analogue(layout.layout_seed),
            EnvKind::Sector => sector_analogue(layout.layout_seed),
            EnvKind::Office => office_analogue(layout.layout_seed),
        })
    }
}

/// Wall layouts and episode settings shared by sweeps, training and
/// evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    /// Walls of the training maze (also `maze_same`).
    pub maze_seed: u64,
    pub different_maze_seed: u64,
    pub wall_density: f64,
    /// Seed of the campus, sector and office analogues.
    pub layout_seed: u64,
    /// Minimum straight-line start/goal distance (m).
    pub min_separation: f64,
    /// Episode timeout (simulated s).
    pub timeout: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            maze_seed: 1,
            different_maze_seed: 2,
            wall_density: 0.2,
            layout_seed: 0,
            min_separation: 10.0,
            timeout: 300.0,
        }
    }
}

/// Non-uniform training mazes with cylinders, one per episode index.
pub struct TrainingWorlds {
    pub maze: WorldSpec,
    pub layout: LayoutConfig,
    pub seed: u64,
}

impl TrainingWorlds {
    pub fn new(layout: LayoutConfig, seed: u64) -> Result<Self, WorldError> {
        Ok(TrainingWorlds {
            maze: generate_maze(layout.maze_seed, layout.wall_density)?,
            layout,
            seed,
        })
    }

    pub fn config(&self, index: usize) -> EpisodeConfig {
        for attempt in 0u64.. {
            let seed = mix_seed(&[self.seed, index as u64, attempt]);
            let field = random_density_field(&mut ChaCha8Rng::seed_from_u64(seed));
            let world = place_obstacles_nonuniform(&self.maze, &field, seed)
                .expect("generated fields are valid");
            if let Ok((start, goal)) =
                sample_start_goal(&world, seed, self.layout.min_separation, ROBOT_RADIUS)
            {
                let mut cfg = EpisodeConfig::new(world, start, goal);
                cfg.timeout = self.layout.timeout;
                cfg.seed = seed;
                return cfg;
            }
        }
        unreachable!()
    }
}

impl EpisodeSampler for TrainingWorlds {
    fn episode(&self, index: usize) -> EpisodeConfig {
        self.config(index)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub envs: Vec<EnvKind>,
    /// Fractions of the environment's maximum obstacle count.
    pub loads: Vec<f64>,
    pub shapes: Vec<Shape>,
    pub runs_per_cell: usize,
    pub layout: LayoutConfig,
    /// Parameters in force before the first tuner query.
    pub initial_params: NavParams,
    pub seed: u64,
}

impl EvalConfig {
    /// Every environment at five loads, 20 runs per cell.
    pub fn new(seed: u64) -> Self {
        EvalConfig {
            envs: EnvKind::ALL.to_vec(),
            loads: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            shapes: EVAL_SHAPES.to_vec(),
            runs_per_cell: 20,
            layout: LayoutConfig::default(),
            initial_params: NavParams::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.runs_per_cell == 0
            || self.envs.is_empty()
            || self.loads.is_empty()
            || self.shapes.is_empty()
        {
            return Err(BenchError::InvalidConfig(
                "need at least one run, environment, load and shape".into(),
            ));
        }
        if let Some(l) = self.loads.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(BenchError::InvalidConfig(format!(
                "load {l} is outside [0, 1]"
            )));
        }
        Ok(())
    }

    pub fn obstacle_count(env: EnvKind, load: f64) -> usize {
        (load * env.max_obstacles() as f64).round() as usize
    }
}

/// One evaluation world with its start and goal.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalWorld {
    pub world: WorldSpec,
    pub start: Pose,
    pub goal: Pose,
    pub seed: u64,
}

/// Random density field over `base`, start/goal drawn on the bare walls,
/// then exactly `count` obstacles keeping both clear and connected.
pub fn build_eval_world(
    base: &WorldSpec,
    count: usize,
    shapes: &[Shape],
    layout: &LayoutConfig,
    seed: u64,
) -> Result<EvalWorld, WorldError> {
    let mut walls = base.clone();
    walls.density_field = Some(random_density_field(&mut ChaCha8Rng::seed_from_u64(seed)));
    let (start, goal) = sample_start_goal(&walls, seed, layout.min_separation, ROBOT_RADIUS)?;
    let req =
        CountPlacement::new(count, shapes).keeping_clear(&[start.position(), goal.position()]);
    let world = place_obstacles_by_count(&walls, &req, seed)?;
    Ok(EvalWorld {
        world,
        start,
        goal,
        seed,
    })
}

/// Paired evaluation: in each (environment, load, run) cell every tuner
/// drives the same world, start, goal and seed.
pub fn evaluate(
    cfg: &EvalConfig,
    tuners: &[&dyn TunerPolicy],
    opts: &RunOptions,
) -> Result<Partial<Report>, BenchError> {
    cfg.validate()?;
    let names: Vec<String> = tuners.iter().map(|t| t.name()).collect();
    for (i, n) in names.iter().enumerate() {
        if n.is_empty() || n.contains([',', '\n', '"']) {
            return Err(BenchError::InvalidConfig(format!(
                "tuner name {n:?} is not CSV-safe"
            )));
        }
        if names[..i].contains(n) {
            return Err(BenchError::InvalidConfig(format!("duplicate tuner {n}")));
        }
    }
    let started = Instant::now();
    let bases: Vec<WorldSpec> = cfg
        .envs
        .iter()
        .map(|e| e.base_world(&cfg.layout))
        .collect::<Result<_, _>>()?;

    let mut cells = Vec::new();
    for ei in 0..cfg.envs.len() {
        for li in 0..cfg.loads.len() {
            for run in 0..cfg.runs_per_cell {
                cells.push((ei, li, run));
            }
        }
    }
    let worlds = run_keyed(&cells, opts, |(ei, li, run)| {
        let env = cfg.envs[ei];
        let seed = mix_seed(&[cfg.seed, ei as u64, li as u64, run as u64]);
        let count = EvalConfig::obstacle_count(env, cfg.loads[li]);
        build_eval_world(&bases[ei], count, &cfg.shapes, &cfg.layout, seed)
    })?;

    let mut infeasible = Vec::new();
    let mut ready = BTreeMap::new();
    for (key, w) in worlds.value {
        let (ei, li, run) = key;
        match w {
            Ok(w) => {
                ready.insert(key, w);
            }
            Err(WorldError::PlacementInfeasible { placed, requested }) => {
                infeasible.push(InfeasibleCell {
                    env: cfg.envs[ei].as_str().into(),
                    load: cfg.loads[li],
                    run,
                    placed,
                    requested,
                })
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mut jobs = Vec::new();
    for &(ei, li, run) in ready.keys() {
        for ti in 0..tuners.len() {
            jobs.push((ei, li, run, ti));
        }
    }
    let remaining = RunOptions {
        workers: opts.workers,
        budget: opts.budget.map(|b| b.saturating_sub(started.elapsed())),
    };
    let done = run_keyed(
        &jobs,
        &remaining,
        |(ei, li, run, ti)| -> Result<RunRecord, BenchError> {
            let w = &ready[&(ei, li, run)];
            let mut ep = EpisodeConfig::new(w.world.clone(), w.start, w.goal);
            ep.initial_params = cfg.initial_params;
            ep.timeout = cfg.layout.timeout;
            ep.seed = w.seed;
            let mut rec = RunRecord {
                tuner: names[ti].clone(),
                env: cfg.envs[ei].as_str().into(),
                load: cfg.loads[li],
                run,
                seed: w.seed,
                obstacles: w.world.obstacles.len(),
                success: false,
                path_length: 0.0,
                l_min: 0.0,
                sim_runtime: 0.0,
                failure_reason: None,
            };
            match run_episode(&ep, tuners[ti]) {
                Ok(r) => {
                    rec.success = r.success;
                    rec.path_length = r.path_length;
                    rec.l_min = r.l_min;
                    rec.sim_runtime = r.sim_runtime;
                    rec.failure_reason = r.failure_reason;
                }
                Err(EpisodeError::NoPath) => rec.failure_reason = Some(FailureReason::NoPath),
                Err(e) => return Err(e.into()),
            }
            Ok(rec)
        },
    )?;
    let runs = done.value.into_values().collect::<Result<Vec<_>, _>>()?;
    let envs: Vec<String> = cfg.envs.iter().map(|e| e.as_str().to_string()).collect();
    let report = Report::from_runs(&names, &envs, &cfg.loads, runs, infeasible);
    Ok(Partial {
        value: report,
        skipped: worlds.skipped * tuners.len() + done.skipped,
    })
}
