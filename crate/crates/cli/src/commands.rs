use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use navtune::bench::{
    evaluate, export, load_report, run_sweep, EnvKind, EvalConfig, Report, RunOptions, SweepConfig,
    TrainingWorlds, SUMMARY_FILE,
};
use navtune::robot_sim::TunerPolicy;
use navtune::sensing::EgocircleConfig;
use navtune::tuners::{
    fit_best_value_curves, label_observations, save_qnet, train_batch_model, write_metrics_csv,
    BatchPolicy, BestValueCurve, FixedPolicy, HeadKind, ModelKind, OraclePolicy, ParamName,
    ParamSpace, Phase, PolicyKind, PolicyManifest, SweepDataset, TrainMode,
};
use navtune::world::{
    campus_analogue, generate_maze, office_analogue, place_obstacles_by_count,
    place_obstacles_nonuniform, place_obstacles_uniform, random_density_field, save_world,
    sector_analogue, CountPlacement, WorldError, EVAL_SHAPES,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::RunConfig;
use crate::{
    budget, require, EvalArgs, GenerateArgs, HeadArg, ModeArg, ModelArg, ReportArgs, SpaceArg,
    SweepArgs, SweepParam, TrainBatchArgs, TrainDqnArgs, WorldKind, EXIT_BUDGET, EXIT_INFEASIBLE,
    EXIT_OK,
};

pub const CURVE_FILE: &str = "best_value_curve.json";
pub const MANIFEST_FILE: &str = "manifest.json";

fn sweep_file(param: ParamName) -> String {
    format!("sweep_{}.json", param.as_str())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer(BufWriter::new(f), value)
        .with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f))
        .with_context(|| format!("parsing {}", path.display()))
}

fn options(cfg: &RunConfig) -> RunOptions {
    RunOptions {
        workers: cfg.workers,
        budget: budget(cfg),
    }
}

pub fn generate(mut cfg: RunConfig, args: &GenerateArgs) -> Result<u8> {
    if let Some(d) = args.wall_density {
        cfg.world.wall_density = d;
    }
    let base = match args.env {
        WorldKind::Maze => generate_maze(cfg.world.maze_seed, cfg.world.wall_density)?,
        WorldKind::Campus => campus_analogue(cfg.world.layout_seed),
        WorldKind::Sector => sector_analogue(cfg.world.layout_seed),
        WorldKind::Office => office_analogue(cfg.world.layout_seed),
    };
    let seed = cfg.seed;
    let field = args
        .field
        .then(|| random_density_field(&mut ChaCha8Rng::seed_from_u64(seed)));
    let placed = match (args.spacing, args.count, field) {
        (Some(s), _, _) => place_obstacles_uniform(&base, s, seed),
        (None, Some(n), field) => {
            let mut walls = base.clone();
            walls.density_field = field;
            place_obstacles_by_count(&walls, &CountPlacement::new(n, &EVAL_SHAPES), seed)
        }
        (None, None, Some(f)) => place_obstacles_nonuniform(&base, &f, seed),
        (None, None, None) => Ok(base),
    };
    let world = match placed {
        Ok(w) => w,
        Err(e @ WorldError::PlacementInfeasible { .. }) => {
            eprintln!("error: {e}");
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(e.into()),
    };
    let dir = cfg.out_dir.join("worlds");
    cfg.write_into(&dir)?;
    let name = format!(
        "{}_seed{seed}.json",
        format!("{:?}", args.env).to_lowercase()
    );
    let path = dir.join(name);
    save_world(&world, &path)?;
    println!(
        "{}: {} walls, {} obstacles, room {} x {} m",
        path.display(),
        world.walls.len(),
        world.obstacles.len(),
        world.room.width,
        world.room.height
    );
    Ok(EXIT_OK)
}

pub fn sweep(cfg: RunConfig, args: &SweepArgs) -> Result<u8> {
    let params = match args.param {
        SweepParam::FGp => vec![ParamName::FGp],
        SweepParam::DLa => vec![ParamName::DLa],
        SweepParam::All => vec![ParamName::FGp, ParamName::DLa],
    };
    let mut cfg = cfg;
    if let Some(r) = args.runs {
        cfg.sweep.runs_per_cell = r;
    }
    let dir = cfg.out_dir.join("sweep");
    cfg.write_into(&dir)?;
    let deadline = budget(&cfg).map(|b| Instant::now() + b);
    let mut exhausted = false;
    for param in params {
        let mut sc = SweepConfig::new(param, cfg.seed);
        sc.runs_per_cell = cfg.sweep.runs_per_cell;
        sc.layout = cfg.world;
        sc.defaults = cfg.params;
        let mut opts = options(&cfg);
        opts.budget = deadline.map(|d| d.saturating_duration_since(Instant::now()));
        let started = Instant::now();
        let out = run_sweep(&sc, &opts)?;
        let path = dir.join(sweep_file(param));
        write_json(&out.value, &path)?;
        println!(
            "{param}: {} episodes in {:.0} s, {} skipped -> {}",
            out.value.records.len(),
            started.elapsed().as_secs_f64(),
            out.skipped,
            path.display()
        );
        exhausted |= !out.complete();
    }
    if exhausted {
        eprintln!("budget exhausted; partial sweeps written, curve not fitted");
        return Ok(EXIT_BUDGET);
    }
    let mut datasets = Vec::new();
    for param in [ParamName::FGp, ParamName::DLa] {
        let path = dir.join(sweep_file(param));
        if path.exists() {
            datasets.push(read_json::<SweepDataset>(&path)?);
        }
    }
    let curve = fit_best_value_curves(&datasets)?;
    let path = dir.join(CURVE_FILE);
    fs::write(&path, serde_json::to_string_pretty(&curve)?)
        .with_context(|| format!("writing {}", path.display()))?;
    for (p, v) in &curve.best {
        println!("best {p} at spacings 0.75/1.0/1.25/1.5: {v:?}");
    }
    Ok(EXIT_OK)
}

fn load_curve(path: &Path) -> Result<BestValueCurve> {
    require(path, "sweep")?;
    read_json(path)
}

pub fn train_batch(cfg: RunConfig, args: &TrainBatchArgs) -> Result<u8> {
    let mut cfg = cfg;
    if let Some(e) = args.epochs {
        cfg.batch.epochs = e;
    }
    let sweep_dir = cfg.out_dir.join("sweep");
    let curve = load_curve(&sweep_dir.join(CURVE_FILE))?;
    let kind = match args.model {
        ModelArg::Linear => ModelKind::Linear,
        ModelArg::Nn => ModelKind::Nn,
        ModelArg::Cnn => ModelKind::Cnn,
    };
    let head = match args.head {
        HeadArg::Classifier => HeadKind::Classifier,
        HeadArg::Regressor => HeadKind::Regressor,
    };
    let mut models = Vec::new();
    let mut input_len = 0;
    for &param in curve.best.keys() {
        let path = sweep_dir.join(sweep_file(param));
        require(&path, "sweep")?;
        let ds: SweepDataset = read_json(&path)?;
        let samples = label_observations(&ds, &curve);
        let (model, report) = train_batch_model(kind, head, param, &samples, &cfg.batch)?;
        if let Some(best) = report.epochs.iter().find(|e| e.epoch == report.best_epoch) {
            println!(
                "{param}: {} train / {} validation samples, best epoch {} (validation loss {:.4}, accuracy {:.3})",
                report.train_size, report.val_size, best.epoch, best.val_loss, best.val_accuracy
            );
        }
        input_len = model.net.input_len;
        models.push(model);
    }
    let policy = BatchPolicy {
        models,
        defaults: cfg.params,
    };
    let name = policy.name();
    let dir = cfg.out_dir.join("batch");
    cfg.write_into(&dir)?;
    let file = format!("{name}.json");
    write_json(&policy, &dir.join(&file))?;
    let mut manifest = PolicyManifest::new(
        &name,
        PolicyKind::Batch,
        ParamSpace::two_d(),
        cfg.params,
        input_len,
    );
    manifest.batch_file = Some(file);
    manifest.save(&dir.join(MANIFEST_FILE))?;
    println!("{name} -> {}", dir.display());
    Ok(EXIT_OK)
}

pub fn train_dqn(cfg: RunConfig, args: &TrainDqnArgs) -> Result<u8> {
    let mode = match args.mode {
        ModeArg::Scratch => TrainMode::Scratch,
        ModeArg::WarmStart => TrainMode::WarmStart,
    };
    let space = match args.space {
        SpaceArg::TwoD => ParamSpace::two_d(),
        SpaceArg::SevenD => ParamSpace::seven_d(),
    };
    let curve = match (mode, &args.curve) {
        (TrainMode::Scratch, None) => None,
        (_, Some(p)) => Some(read_json::<BestValueCurve>(p)?),
        (TrainMode::WarmStart, None) => {
            Some(load_curve(&cfg.out_dir.join("sweep").join(CURVE_FILE))?)
        }
    };
    let dir = cfg.out_dir.join("dqn");
    cfg.write_into(&dir)?;
    let sampler = TrainingWorlds::new(cfg.world, cfg.seed)?;
    let input_len = EgocircleConfig::default().bins;
    let started = Instant::now();
    let out = navtune::tuners::train_dqn(
        &sampler,
        &space,
        mode,
        args.episodes,
        &cfg.dqn,
        curve.as_ref(),
        &cfg.params,
        input_len,
    )?;
    let n_clone = out
        .metrics
        .iter()
        .filter(|m| m.phase == Phase::Clone)
        .count();
    let n_rl = out.metrics.len() - n_clone;
    println!(
        "{n_clone} cloning + {n_rl} RL episodes, {} updates in {:.0} s",
        out.updates,
        started.elapsed().as_secs_f64()
    );
    if let Some(c) = &out.cloning {
        println!(
            "cloning agreement per branch: train {:?}, held out {:?}",
            c.train_agreement, c.heldout_agreement
        );
        fs::write(dir.join("cloning.json"), serde_json::to_string_pretty(c)?)?;
    }
    let mut manifest = PolicyManifest::new("dqn", PolicyKind::Dqn, space, cfg.params, input_len);
    manifest.reward_scale = cfg.dqn.reward_scale;
    manifest.curve = curve;
    manifest.checkpoints = save_qnet(&out.net, &dir, "dqn")?;
    manifest.save(&dir.join(MANIFEST_FILE))?;
    write_metrics_csv(&out.metrics, &dir.join("metrics.csv"))?;
    println!("-> {}", dir.display());
    Ok(EXIT_OK)
}

fn load_policy(dir: &Path, producer: &str) -> Result<Box<dyn TunerPolicy>> {
    let path = dir.join(MANIFEST_FILE);
    require(&path, producer)?;
    Ok(PolicyManifest::load(&path)?.policy(dir)?)
}

pub fn eval(cfg: RunConfig, args: &EvalArgs) -> Result<u8> {
    let mut cfg = cfg;
    if let Some(r) = args.runs {
        cfg.eval.runs_per_cell = r;
    }
    if let Some(envs) = &args.envs {
        cfg.eval.envs = envs
            .iter()
            .map(|e| EnvKind::parse(e).with_context(|| format!("unknown environment {e:?}")))
            .collect::<Result<_>>()?;
    }
    if let Some(loads) = &args.loads {
        cfg.eval.loads = loads.clone();
    }
    let mut policies: Vec<Box<dyn TunerPolicy>> = Vec::new();
    for t in &args.tuners {
        policies.push(match t.as_str() {
            "fixed" => Box::new(FixedPolicy::new(cfg.params)),
            "oracle" => Box::new(OraclePolicy {
                curve: load_curve(&cfg.out_dir.join("sweep").join(CURVE_FILE))?,
                defaults: cfg.params,
            }),
            "dqn" => load_policy(&cfg.out_dir.join("dqn"), "train-dqn")?,
            "batch" => load_policy(&cfg.out_dir.join("batch"), "train-batch")?,
            other => bail!("unknown tuner {other:?}; expected fixed, oracle, dqn or batch"),
        });
    }
    let refs: Vec<&dyn TunerPolicy> = policies.iter().map(|p| p.as_ref()).collect();
    let mut ec = EvalConfig::new(cfg.seed);
    ec.envs = cfg.eval.envs.clone();
    ec.loads = cfg.eval.loads.clone();
    ec.runs_per_cell = cfg.eval.runs_per_cell;
    ec.layout = cfg.world;
    ec.initial_params = cfg.params;

    let dir = cfg.out_dir.join("eval");
    cfg.write_into(&dir)?;
    let started = Instant::now();
    let out = evaluate(&ec, &refs, &options(&cfg))?;
    export(&out.value, &dir)?;
    print_report(&out.value);
    println!(
        "{} episodes in {:.0} s -> {}",
        out.value.runs.len(),
        started.elapsed().as_secs_f64(),
        dir.display()
    );
    if !out.complete() {
        eprintln!(
            "budget exhausted: {} episodes skipped; partial results written",
            out.skipped
        );
        return Ok(EXIT_BUDGET);
    }
    if !out.value.infeasible.is_empty() {
        eprintln!(
            "{} world(s) could not hold the requested obstacle count",
            out.value.infeasible.len()
        );
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(EXIT_OK)
}

fn print_report(report: &Report) {
    for r in &report.rows {
        let pl = r.pl_mean.map_or("-".to_string(), |v| format!("{v:.2}"));
        println!(
            "{:>12} {:>15} load {:.2}: SR {:5.1}% over {:3}, PL {pl}",
            r.tuner, r.env, r.load, r.sr, r.n
        );
    }
    for s in report.sensitivity() {
        println!("{:>12} {:>15}: delta SR {:.1}", s.tuner, s.env, s.delta_sr);
    }
}

pub fn report(cfg: RunConfig, args: &ReportArgs) -> Result<u8> {
    let input: PathBuf = args
        .input
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("eval"));
    require(&input.join(SUMMARY_FILE), "eval")?;
    let report = load_report(&input)?;
    let dir = cfg.out_dir.join("report");
    cfg.write_into(&dir)?;
    let written = export(&report, &dir)?;
    print_report(&report);
    println!("{} files -> {}", written.len(), dir.display());
    Ok(EXIT_OK)
}
