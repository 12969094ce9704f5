use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use navtune::bench::{EnvKind, LayoutConfig};
use navtune::local_planner::NavParams;
use navtune::tuners::{BatchTrainConfig, DqnConfig};
use serde::{Deserialize, Serialize};

pub const CONFIG_FILE: &str = "config.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub runs_per_cell: usize,
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock { runs_per_cell: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalBlock {
    pub envs: Vec<EnvKind>,
    pub loads: Vec<f64>,
    pub runs_per_cell: usize,
}

impl Default for EvalBlock {
    fn default() -> Self {
        EvalBlock {
            envs: EnvKind::ALL.to_vec(),
            loads: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            runs_per_cell: 20,
        }
    }
}

/// Every setting of a run. Config files may give any subset; command-line
/// flags override the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Wall-clock budget in seconds for sweeps, training rollouts and
    /// evaluations.
    pub budget_secs: Option<u64>,
    pub out_dir: PathBuf,
    pub world: LayoutConfig,
    /// Fixed-baseline parameters, also the defaults of untuned parameters.
    pub params: NavParams,
    pub sweep: SweepBlock,
    pub batch: BatchTrainConfig,
    pub dqn: DqnConfig,
    pub eval: EvalBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: 0,
            budget_secs: None,
            out_dir: PathBuf::from("navtune-out"),
            world: LayoutConfig::default(),
            params: NavParams::default(),
            sweep: SweepBlock::default(),
            batch: BatchTrainConfig::default(),
            dqn: DqnConfig::default(),
            eval: EvalBlock::default(),
        }
    }
}

impl RunConfig {
    /// Parses a config file; the flag reports whether it sets `out_dir`.
    pub fn load(path: &Path) -> Result<(Self, bool)> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let has_out = value.get("out_dir").is_some();
        let cfg = serde_json::from_value(value)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok((cfg, has_out))
    }

    /// Creates `dir` and records the resolved configuration in it.
    pub fn write_into(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", path.display()))
    }
}
