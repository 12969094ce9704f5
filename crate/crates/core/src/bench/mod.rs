//! Experiment orchestration: parameter sweeps, paired tuner evaluation over
//! environments and obstacle loads, and sensitivity reports.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::robot_sim::EpisodeError;
use crate::tuners::TunerError;
use crate::world::WorldError;

mod eval;
mod report;
mod sweep;

pub use eval::{
    build_eval_world, evaluate, EnvKind, EvalConfig, EvalWorld, LayoutConfig, TrainingWorlds,
};
pub use report::{
    export, load_report, parse_csv, parse_runs_csv, runs_csv, sensitivity, to_csv, InfeasibleCell,
    Report, ReportRow, RunRecord, Sensitivity, Summary, CSV_HEADER, PLOTS_DIR, RESULTS_FILE,
    RUNS_FILE, RUNS_HEADER, SUMMARY_FILE,
};
pub use sweep::{run_sweep, SweepConfig};

#[cfg(test)]
mod tests;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Worker count and optional wall-clock budget shared by sweeps and
/// evaluations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// 0 picks the number of available cores.
    pub workers: usize,
    /// Jobs that have not started when the budget runs out are skipped.
    pub budget: Option<Duration>,
}

/// A result that may be missing the jobs skipped by the budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Partial<T> {
    pub value: T,
    pub skipped: usize,
}

impl<T> Partial<T> {
    pub fn complete(&self) -> bool {
        self.skipped == 0
    }
}

/// Runs `f` for every key on a dedicated pool; results are merged by key,
/// so the worker count never changes the output.
pub(crate) fn run_keyed<K, T, F>(
    keys: &[K],
    opts: &RunOptions,
    f: F,
) -> Result<Partial<BTreeMap<K, T>>, BenchError>
where
    K: Ord + Copy + Send + Sync,
    T: Send,
    F: Fn(K) -> T + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let deadline = opts.budget.map(|b| Instant::now() + b);
    let done: Vec<(K, T)> = pool.install(|| {
        keys.par_iter()
            .filter_map(|&k| {
                if deadline.is_some_and(|d| Instant::now() >= d) {
                    return None;
                }
                Some((k, f(k)))
            })
            .collect()
    });
    let skipped = keys.len() - done.len();
    Ok(Partial {
        value: done.into_iter().collect(),
        skipped,
    })
}

/// SplitMix64 over a sequence of words; derives per-run seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}
