use serde::{Deserialize, Serialize};

use super::{mix_seed, run_keyed, BenchError, LayoutConfig, Partial, RunOptions};
use crate::local_planner::NavParams;
use crate::robot_sim::{run_episode, EpisodeConfig, EpisodeError, FailureReason, ROBOT_RADIUS};
use crate::tuners::{FixedPolicy, ParamName, SweepDataset, SweepRecord};
use crate::world::{generate_maze, place_obstacles_uniform, sample_start_goal, SPACINGS};

/// Fixed-parameter sweep of one parameter over uniform-density mazes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub param: ParamName,
    pub values: Vec<f64>,
    pub spacings: Vec<f64>,
    pub runs_per_cell: usize,
    pub layout: LayoutConfig,
    /// Parameters held fixed while `param` varies.
    pub defaults: NavParams,
    pub seed: u64,
}

impl SweepConfig {
    /// Full grid of `param` at every spacing, 50 runs per cell.
    pub fn new(param: ParamName, seed: u64) -> Self {
        SweepConfig {
            param,
            values: param.values(),
            spacings: SPACINGS.to_vec(),
            runs_per_cell: 50,
            layout: LayoutConfig::default(),
            defaults: NavParams::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.runs_per_cell == 0 {
            return Err(BenchError::InvalidConfig(
                "runs_per_cell must be at least 1".into(),
            ));
        }
        if self.values.is_empty() || self.spacings.is_empty() {
            return Err(BenchError::InvalidConfig(
                "empty value or spacing list".into(),
            ));
        }
        if let Some(s) = self.spacings.iter().find(|s| !SPACINGS.contains(s)) {
            return Err(BenchError::InvalidConfig(format!(
                "spacing {s} is not one of {SPACINGS:?}"
            )));
        }
        for &v in &self.values {
            let mut p = self.defaults;
            self.param.set(&mut p, v);
            if !p.is_valid() {
                return Err(BenchError::InvalidConfig(format!(
                    "{} = {v} is out of range",
                    self.param.as_str()
                )));
            }
        }
        Ok(())
    }

    pub fn total_runs(&self) -> usize {
        self.values.len() * self.spacings.len() * self.runs_per_cell
    }
}

/// Runs every (value, spacing, run) episode. Within one (spacing, run) pair
/// all values see the same world and start/goal.
pub fn run_sweep(
    cfg: &SweepConfig,
    opts: &RunOptions,
) -> Result<Partial<SweepDataset>, BenchError> {
    cfg.validate()?;
    let maze = generate_maze(cfg.layout.maze_seed, cfg.layout.wall_density)?;
    let mut keys = Vec::with_capacity(cfg.total_runs());
    for si in 0..cfg.spacings.len() {
        for run in 0..cfg.runs_per_cell {
            for vi in 0..cfg.values.len() {
                keys.push((si, run, vi));
            }
        }
    }
    let done = run_keyed(
        &keys,
        opts,
        |(si, run, vi)| -> Result<SweepRecord, BenchError> {
            let spacing = cfg.spacings[si];
            let value = cfg.values[vi];
            let seed = mix_seed(&[cfg.seed, spacing.to_bits(), run as u64]);
            let world = place_obstacles_uniform(&maze, spacing, seed)?;
            let (start, goal) =
                sample_start_goal(&world, seed, cfg.layout.min_separation, ROBOT_RADIUS)?;
            let mut params = cfg.defaults;
            cfg.param.set(&mut params, value);
            let mut ep = EpisodeConfig::new(world, start, goal);
            ep.initial_params = params;
            ep.timeout = cfg.layout.timeout;
            ep.seed = seed;
            let record =
                |success, path_length, sim_runtime, l_min, failure_reason, observations| {
                    SweepRecord {
                        param: cfg.param,
                        value,
                        spacing,
                        run,
                        seed,
                        success,
                        path_length,
                        sim_runtime,
                        l_min,
                        failure_reason,
                        observations,
                    }
                };
            match run_episode(&ep, &FixedPolicy::new(params)) {
                Ok(r) => Ok(record(
                    r.success,
                    r.path_length,
                    r.sim_runtime,
                    r.l_min,
                    r.failure_reason,
                    r.observations,
                )),
                Err(EpisodeError::NoPath) => Ok(record(
                    false,
                    0.0,
                    0.0,
                    0.0,
                    Some(FailureReason::NoPath),
                    Vec::new(),
                )),
                Err(e) => Err(e.into()),
            }
        },
    )?;
    let records = done.value.into_values().collect::<Result<Vec<_>, _>>()?;
    Ok(Partial {
        value: SweepDataset {
            param: cfg.param,
            values: cfg.values.clone(),
            spacings: cfg.spacings.clone(),
            records,
        },
        skipped: done.skipped,
    })
}
