use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use config::RunConfig;

/// Environment variable holding the default output root.
pub const OUT_ENV: &str = "NAVTUNE_OUT";

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_BUDGET: u8 = 4;

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  1  runtime error, including a missing input artifact
  2  usage error (unknown flag, bad value, conflicting flags)
  3  an obstacle count could not be placed
  4  the wall-clock budget ran out; partial results were written

Output goes under --out, else the config file's out_dir, else $NAVTUNE_OUT,
else ./navtune-out. Every command writes its resolved config.json next to
its outputs.";

#[derive(Parser, Debug)]
#[command(name = "navtune", version, about = "Planner-parameter tuning laboratory", after_help = EXIT_HELP)]
struct Cli {
    /// JSON config file; any subset of the keys in a written config.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Wall-clock budget in seconds for sweeps and evaluations.
    #[arg(long, global = true)]
    budget_secs: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one world file.
    Generate(GenerateArgs),
    /// Fixed-parameter sweeps over uniform-density mazes and the best-value curves.
    Sweep(SweepArgs),
    /// Train batch models on sweep observations labelled by the best-value curves.
    TrainBatch(TrainBatchArgs),
    /// Train a branching DQN tuner.
    TrainDqn(TrainDqnArgs),
    /// Paired evaluation of tuners over environments and obstacle loads.
    Eval(EvalArgs),
    /// Render CSV and plot data from an evaluation directory.
    Report(ReportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorldKind {
    Maze,
    Campus,
    Sector,
    Office,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Wall layout.
    #[arg(long, value_enum)]
    pub env: WorldKind,
    /// Uniform inter-obstacle spacing (0.75, 1.0, 1.25 or 1.5 m).
    #[arg(long, conflicts_with = "count")]
    pub spacing: Option<f64>,
    /// Exact obstacle count with evaluation shapes.
    #[arg(long)]
    pub count: Option<usize>,
    /// Attach a random 5x5 density field; with no --count, places cylinders by it.
    #[arg(long, conflicts_with = "spacing")]
    pub field: bool,
    /// Maze wall density (overrides the config).
    #[arg(long)]
    pub wall_density: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    #[value(name = "f_gp")]
    FGp,
    #[value(name = "d_la")]
    DLa,
    All,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Parameter to sweep.
    #[arg(long, value_enum, default_value = "all")]
    pub param: SweepParam,
    /// Runs per (value, spacing) cell.
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelArg {
    Linear,
    Nn,
    Cnn,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadArg {
    Classifier,
    Regressor,
}

#[derive(Args, Debug)]
pub struct TrainBatchArgs {
    /// Model family.
    #[arg(long, value_enum, default_value = "nn")]
    pub model: ModelArg,
    /// Classifier over value indices or regressor snapped to the grid.
    #[arg(long, value_enum, default_value = "classifier")]
    pub head: HeadArg,
    /// Training epochs (overrides the config).
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    Scratch,
    #[value(name = "warm_start")]
    WarmStart,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceArg {
    #[value(name = "2d")]
    TwoD,
    #[value(name = "7d")]
    SevenD,
}

#[derive(Args, Debug)]
pub struct TrainDqnArgs {
    /// Start from random weights, or clone the oracle first.
    #[arg(long, value_enum, default_value = "warm_start")]
    pub mode: ModeArg,
    /// Total episode budget, cloning included.
    #[arg(long, default_value_t = 1000)]
    pub episodes: usize,
    /// Tuned parameters: f_gp and d_la, or all seven.
    #[arg(long, value_enum, default_value = "2d")]
    pub space: SpaceArg,
    /// Best-value curve for warm starts (default: <out>/sweep/best_value_curve.json).
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Comma-separated: fixed, oracle, dqn, batch.
    #[arg(long, value_delimiter = ',', default_value = "fixed,oracle,dqn")]
    pub tuners: Vec<String>,
    /// Runs per (environment, load) cell.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Comma-separated environments (maze_same, maze_different, campus, sector, office).
    #[arg(long, value_delimiter = ',')]
    pub envs: Option<Vec<String>>,
    /// Comma-separated fractions of the maximum obstacle count.
    #[arg(long, value_delimiter = ',')]
    pub loads: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Evaluation directory (default: <out>/eval).
    #[arg(long)]
    pub input: Option<PathBuf>,
}

/// Defaults, then the environment's output root, then the config file,
/// then flags.
fn resolve(cli: &Cli) -> Result<RunConfig> {
    let (mut cfg, has_out) = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => (RunConfig::default(), false),
    };
    if !has_out {
        if let Some(root) = std::env::var_os(OUT_ENV) {
            cfg.out_dir = PathBuf::from(root);
        }
    }
    if let Some(v) = &cli.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    cfg.batch.seed = cfg.seed;
    cfg.dqn.seed = cfg.seed;
    if let Some(v) = cli.workers {
        cfg.workers = v;
    }
    if let Some(v) = cli.budget_secs {
        cfg.budget_secs = Some(v);
    }
    Ok(cfg)
}

/// Fails with the absent path in the message.
pub fn require(path: &Path, producer: &str) -> Result<()> {
    if !path.exists() {
        bail!(
            "missing artifact {} (produced by `navtune {producer}`)",
            path.display()
        );
    }
    Ok(())
}

pub fn budget(cfg: &RunConfig) -> Option<Duration> {
    cfg.budget_secs.map(Duration::from_secs)
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Generate(a) => commands::generate(cfg, &a),
        Command::Sweep(a) => commands::sweep(cfg, &a),
        Command::TrainBatch(a) => commands::train_batch(cfg, &a),
        Command::TrainDqn(a) => commands::train_dqn(cfg, &a),
        Command::Eval(a) => commands::eval(cfg, &a),
        Command::Report(a) => commands::report(cfg, &a),
    }
    .context("command failed")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
