use std::time::Duration;

use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::local_planner::NavParams;
use crate::robot_sim::{FailureReason, TuneContext, TunerPolicy};
use crate::tuners::{FixedPolicy, ParamName};

struct Named(&'static str, NavParams);

impl TunerPolicy for Named {
    fn tune(&self, _: &TuneContext<'_>, _: &mut ChaCha8Rng) -> NavParams {
        self.1
    }

    fn name(&self) -> String {
        self.0.into()
    }
}

fn row(tuner: &str, env: &str, load: f64, sr: f64) -> ReportRow {
    ReportRow {
        tuner: tuner.into(),
        env: env.into(),
        load,
        n: 20,
        sr,
        pl_mean: Some(12.5),
        pl_std: Some(0.1),
        runtime_mean: None,
    }
}

fn run(tuner: &str, env: &str, load: f64, run: usize, success: bool, pl: f64) -> RunRecord {
    RunRecord {
        tuner: tuner.into(),
        env: env.into(),
        load,
        run,
        seed: 17 + run as u64,
        obstacles: 3,
        success,
        path_length: pl,
        l_min: 10.0,
        sim_runtime: pl / 0.4,
        failure_reason: (!success).then_some(FailureReason::Timeout),
    }
}

fn quick_eval(envs: Vec<EnvKind>, loads: Vec<f64>, runs: usize) -> EvalConfig {
    let mut cfg = EvalConfig::new(5);
    cfg.envs = envs;
    cfg.loads = loads;
    cfg.runs_per_cell = runs;
    cfg.layout.timeout = 15.0;
    cfg
}

#[test]
fn sensitivity_is_max_minus_min() {
    let rows: Vec<ReportRow> = [80.0, 75.0, 70.0, 65.0, 60.0]
        .iter()
        .enumerate()
        .map(|(i, &sr)| row("a", "maze_same", i as f64 / 4.0, sr))
        .collect();
    let s = sensitivity(&rows);
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].delta_sr, 20.0);
    let flat: Vec<ReportRow> = (0..5)
        .map(|i| row("a", "campus", i as f64 / 4.0, 55.0))
        .collect();
    assert_eq!(sensitivity(&flat)[0].delta_sr, 0.0);
}

#[test]
fn sensitivity_groups_by_tuner_and_env() {
    let rows = vec![
        row("a", "x", 0.0, 90.0),
        row("b", "x", 0.0, 50.0),
        row("a", "x", 1.0, 40.0),
        row("b", "x", 1.0, 45.0),
        row("a", "y", 0.0, 10.0),
    ];
    let s = sensitivity(&rows);
    let got: Vec<(&str, &str, f64)> = s
        .iter()
        .map(|s| (s.tuner.as_str(), s.env.as_str(), s.delta_sr))
        .collect();
    assert_eq!(
        got,
        vec![("a", "x", 50.0), ("b", "x", 5.0), ("a", "y", 0.0)]
    );
}

#[test]
fn empty_report_exports_header_only() {
    assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
    assert!(parse_csv(&to_csv(&[])).unwrap().is_empty());
}

#[test]
fn report_rows_cover_every_cell() {
    let tuners = vec!["fixed".to_string(), "oracle".to_string(), "dqn".to_string()];
    let envs = vec!["maze_same".to_string(), "office".to_string()];
    let loads = vec![0.0, 0.5, 1.0];
    let runs = vec![
        run("fixed", "office", 0.5, 0, true, 11.0),
        run("fixed", "office", 0.5, 1, false, 3.0),
    ];
    let r = Report::from_runs(&tuners, &envs, &loads, runs, Vec::new());
    assert_eq!(r.rows.len(), 3 * 2 * 3);
    assert_eq!(to_csv(&r.rows).lines().count(), 1 + 18);
    let cell = r.row("fixed", "office", 0.5).unwrap();
    assert_eq!(
        (cell.n, cell.sr, cell.pl_mean, cell.pl_std),
        (2, 50.0, Some(11.0), Some(0.0))
    );
    let empty = r.row("dqn", "maze_same", 0.0).unwrap();
    assert_eq!((empty.n, empty.sr, empty.pl_mean), (0, 0.0, None));
}

#[test]
fn report_statistics_match_direct_computation() {
    let pls = [10.0, 12.0, 17.0];
    let mut runs: Vec<RunRecord> = pls
        .iter()
        .enumerate()
        .map(|(i, &p)| run("t", "e", 1.0, i, true, p))
        .collect();
    runs.push(run("t", "e", 1.0, 3, false, 2.0));
    let r = Report::from_runs(&["t".into()], &["e".into()], &[1.0], runs, Vec::new());
    let c = &r.rows[0];
    let mean = 13.0;
    let var =
        ((10.0f64 - mean).powi(2) + (12.0f64 - mean).powi(2) + (17.0f64 - mean).powi(2)) / 3.0;
    assert_eq!(c.sr, 75.0);
    assert!((c.pl_mean.unwrap() - mean).abs() < 1e-12);
    assert!((c.pl_std.unwrap() - var.sqrt()).abs() < 1e-12);
    assert!((c.runtime_mean.unwrap() - mean / 0.4).abs() < 1e-9);
}

#[test]
fn runs_csv_round_trips() {
    let runs = vec![
        run("fixed", "campus", 0.25, 0, true, 14.123456789),
        run("dqn", "sector", 1.0, 9, false, 0.1 + 0.2),
    ];
    assert_eq!(parse_runs_csv(&runs_csv(&runs)).unwrap(), runs);
}

#[test]
fn malformed_csv_is_rejected() {
    assert!(matches!(
        parse_csv("tuner,env\n"),
        Err(BenchError::Csv { line: 1, .. })
    ));
    let bad = format!("{CSV_HEADER}\nfixed,maze_same,0.5,3,x,,,\n");
    assert!(matches!(
        parse_csv(&bad),
        Err(BenchError::Csv { line: 2, .. })
    ));
    let short = format!("{CSV_HEADER}\nfixed,maze_same,0.5\n");
    assert!(matches!(
        parse_csv(&short),
        Err(BenchError::Csv { line: 2, .. })
    ));
}

fn arb_opt() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![Just(None), (-1e6f64..1e6).prop_map(Some)]
}

proptest! {
    #[test]
    fn csv_round_trips(rows in prop::collection::vec(
        ("[a-z_]{1,8}", "[a-z_]{1,8}", 0.0f64..=1.0, 0usize..100, 0.0f64..=100.0, arb_opt(), arb_opt(), arb_opt()),
        0..12,
    )) {
        let rows: Vec<ReportRow> = rows
            .into_iter()
            .map(|(tuner, env, load, n, sr, pl_mean, pl_std, runtime_mean)| ReportRow {
                tuner, env, load, n, sr, pl_mean, pl_std, runtime_mean,
            })
            .collect();
        prop_assert_eq!(parse_csv(&to_csv(&rows)).unwrap(), rows);
    }

    #[test]
    fn sensitivity_bounds(srs in prop::collection::vec(0.0f64..=100.0, 2..6)) {
        let rows: Vec<ReportRow> = srs.iter().enumerate().map(|(i, &s)| row("t", "e", i as f64, s)).collect();
        let d = sensitivity(&rows)[0].delta_sr;
        prop_assert!((0.0..=100.0).contains(&d));
        let hi = srs.iter().cloned().fold(f64::MIN, f64::max);
        let lo = srs.iter().cloned().fold(f64::MAX, f64::min);
        prop_assert_eq!(d, hi - lo);
    }
}

#[test]
fn seed_mixing_is_deterministic_and_order_sensitive() {
    assert_eq!(mix_seed(&[1, 2, 3]), mix_seed(&[1, 2, 3]));
    assert_ne!(mix_seed(&[1, 2, 3]), mix_seed(&[3, 2, 1]));
    assert_ne!(mix_seed(&[0]), mix_seed(&[0, 0]));
}

#[test]
fn keyed_pool_is_independent_of_worker_count() {
    let keys: Vec<u32> = (0..200).rev().collect();
    let f = |k: u32| mix_seed(&[k as u64]);
    let one = run_keyed(
        &keys,
        &RunOptions {
            workers: 1,
            budget: None,
        },
        f,
    )
    .unwrap();
    let four = run_keyed(
        &keys,
        &RunOptions {
            workers: 4,
            budget: None,
        },
        f,
    )
    .unwrap();
    assert_eq!(one, four);
    assert!(one.complete());
    assert_eq!(one.value.len(), 200);
}

#[test]
fn exhausted_budget_skips_everything() {
    let keys: Vec<u32> = (0..10).collect();
    let p = run_keyed(
        &keys,
        &RunOptions {
            workers: 1,
            budget: Some(Duration::ZERO),
        },
        |k| k,
    )
    .unwrap();
    assert_eq!(p.skipped, 10);
    assert!(p.value.is_empty());
}

#[test]
fn sweep_sizes() {
    let f = SweepConfig::new(ParamName::FGp, 0);
    let d = SweepConfig::new(ParamName::DLa, 0);
    assert_eq!((f.total_runs(), d.total_runs()), (1000, 2000));
    let (mut f2, mut d2) = (f.clone(), d.clone());
    f2.runs_per_cell = 2;
    d2.runs_per_cell = 2;
    assert_eq!((f2.total_runs(), d2.total_runs()), (40, 80));
}

#[test]
fn sweep_config_validation() {
    let mut c = SweepConfig::new(ParamName::DLa, 0);
    c.runs_per_cell = 0;
    assert!(c.validate().is_err());
    let mut c = SweepConfig::new(ParamName::DLa, 0);
    c.spacings = vec![0.8];
    assert!(c.validate().is_err());
    let mut c = SweepConfig::new(ParamName::DLa, 0);
    c.values.push(-1.0);
    assert!(c.validate().is_err());
}

#[test]
fn small_sweep_records_every_cell() {
    let mut c = SweepConfig::new(ParamName::DLa, 3);
    c.values = vec![2.0, 4.0];
    c.spacings = vec![1.0, 1.5];
    c.runs_per_cell = 1;
    c.layout.timeout = 6.0;
    let out = run_sweep(&c, &RunOptions::default()).unwrap();
    assert!(out.complete());
    let ds = out.value;
    assert_eq!(ds.records.len(), 4);
    for v in &c.values {
        for s in &c.spacings {
            let cell: Vec<_> = ds
                .records
                .iter()
                .filter(|r| r.value == *v && r.spacing == *s)
                .collect();
            assert_eq!(cell.len(), 1);
            assert!(!cell[0].observations.is_empty());
        }
    }
    // values within one (spacing, run) share the world seed
    let seeds: Vec<u64> = ds
        .records
        .iter()
        .filter(|r| r.spacing == 1.0)
        .map(|r| r.seed)
        .collect();
    assert_eq!(seeds[0], seeds[1]);
}

#[test]
fn eval_world_is_deterministic_and_exact() {
    let layout = LayoutConfig::default();
    let base = EnvKind::MazeSame.base_world(&layout).unwrap();
    let a = build_eval_world(&base, 100, &crate::world::EVAL_SHAPES, &layout, 9).unwrap();
    let b = build_eval_world(&base, 100, &crate::world::EVAL_SHAPES, &layout, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.world.obstacles.len(), 100);
    assert!(a.world.density_field.is_some());
    assert!(a.start.position().dist(a.goal.position()) >= layout.min_separation);
}

#[test]
fn environment_limits() {
    assert_eq!(EnvKind::MazeSame.max_obstacles(), 200);
    assert_eq!(EnvKind::Sector.max_obstacles(), 200);
    assert_eq!(EnvKind::Campus.max_obstacles(), 500);
    assert_eq!(EnvKind::Office.max_obstacles(), 500);
    assert_eq!(EvalConfig::obstacle_count(EnvKind::Office, 0.25), 125);
    for e in EnvKind::ALL {
        assert_eq!(EnvKind::parse(e.as_str()), Some(e));
    }
    let layout = LayoutConfig::default();
    let same = EnvKind::MazeSame.base_world(&layout).unwrap();
    let diff = EnvKind::MazeDifferent.base_world(&layout).unwrap();
    assert_ne!(same.walls, diff.walls);
}

#[test]
fn eval_config_validation() {
    let mut c = EvalConfig::new(0);
    assert!(c.validate().is_ok());
    c.loads.push(1.5);
    assert!(c.validate().is_err());
    let mut c = EvalConfig::new(0);
    c.runs_per_cell = 0;
    assert!(c.validate().is_err());
}

#[test]
fn duplicate_tuner_names_are_rejected() {
    let f = FixedPolicy::new(NavParams::default());
    let cfg = quick_eval(vec![EnvKind::Campus], vec![0.0], 1);
    assert!(matches!(
        evaluate(&cfg, &[&f, &f], &RunOptions::default()),
        Err(BenchError::InvalidConfig(_))
    ));
    let bad = Named("a,b", NavParams::default());
    assert!(matches!(
        evaluate(&cfg, &[&bad], &RunOptions::default()),
        Err(BenchError::InvalidConfig(_))
    ));
}

#[test]
fn paired_tuners_see_identical_episodes() {
    let a = Named("a", NavParams::default());
    let b = Named("b", NavParams::default());
    let cfg = quick_eval(vec![EnvKind::MazeSame], vec![0.0, 1.0], 2);
    let r = evaluate(&cfg, &[&a, &b], &RunOptions::default())
        .unwrap()
        .value;
    assert_eq!(r.runs.len(), 8);
    for ra in r.runs.iter().filter(|x| x.tuner == "a") {
        let rb = r
            .runs
            .iter()
            .find(|x| x.tuner == "b" && x.load == ra.load && x.run == ra.run)
            .unwrap();
        assert_eq!(
            (ra.seed, ra.obstacles, ra.success),
            (rb.seed, rb.obstacles, rb.success)
        );
        assert_eq!(ra.path_length.to_bits(), rb.path_length.to_bits());
        assert_eq!(ra.sim_runtime.to_bits(), rb.sim_runtime.to_bits());
    }
    for x in &r.runs {
        assert_eq!(
            x.obstacles,
            EvalConfig::obstacle_count(EnvKind::MazeSame, x.load)
        );
    }
    for row in &r.rows {
        assert_eq!(row.n, 2);
        assert!((0.0..=100.0).contains(&row.sr));
    }
}

#[test]
fn evaluation_is_reproducible_across_worker_counts() {
    let f = FixedPolicy::new(NavParams::default());
    let cfg = quick_eval(vec![EnvKind::Sector], vec![0.5], 3);
    let one = evaluate(
        &cfg,
        &[&f],
        &RunOptions {
            workers: 1,
            budget: None,
        },
    )
    .unwrap()
    .value;
    let three = evaluate(
        &cfg,
        &[&f],
        &RunOptions {
            workers: 3,
            budget: None,
        },
    )
    .unwrap()
    .value;
    assert_eq!(to_csv(&one.rows), to_csv(&three.rows));
    assert_eq!(runs_csv(&one.runs), runs_csv(&three.runs));
}

#[test]
fn obstacle_free_campus_is_solved() {
    let f = FixedPolicy::new(NavParams::default());
    let mut cfg = quick_eval(vec![EnvKind::Campus], vec![0.0], 4);
    cfg.layout.timeout = 300.0;
    let r = evaluate(&cfg, &[&f], &RunOptions::default()).unwrap().value;
    assert_eq!(r.rows[0].sr, 100.0);
}

#[test]
fn export_writes_all_artifacts_and_reloads() {
    let tuners = vec!["fixed".to_string(), "oracle".to_string()];
    let envs = vec!["maze_same".to_string(), "campus".to_string()];
    let loads = vec![0.0, 1.0];
    let mut runs = Vec::new();
    for t in &tuners {
        for e in &envs {
            for &l in &loads {
                for k in 0..3 {
                    runs.push(run(
                        t,
                        e,
                        l,
                        k,
                        (k + l as usize) % 2 == 0,
                        10.0 + k as f64 / 3.0,
                    ));
                }
            }
        }
    }
    let infeasible = vec![InfeasibleCell {
        env: "campus".into(),
        load: 1.0,
        run: 3,
        placed: 480,
        requested: 500,
    }];
    let r = Report::from_runs(&tuners, &envs, &loads, runs, infeasible);
    let dir = tempfile::tempdir().unwrap();
    let files = export(&r, dir.path()).unwrap();
    assert_eq!(files.len(), 3 + envs.len() + 1);
    let csv = std::fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(parse_csv(&csv).unwrap(), r.rows);
    assert_eq!(load_report(dir.path()).unwrap(), r);
    let plot = std::fs::read_to_string(
        dir.path()
            .join(PLOTS_DIR)
            .join("sr_vs_obstacles_campus.csv"),
    )
    .unwrap();
    let lines: Vec<&str> = plot.lines().collect();
    assert_eq!(lines[0], "load,obstacles,fixed,oracle");
    assert!(lines[2].starts_with("1,500,"));
    let summary: Summary =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap())
            .unwrap();
    assert_eq!(summary.sensitivity, r.sensitivity());
    assert_eq!(summary.infeasible.len(), 1);
}

#[test]
fn training_worlds_are_deterministic_nonuniform_mazes() {
    let t = TrainingWorlds::new(LayoutConfig::default(), 4).unwrap();
    let a = t.config(3);
    assert_eq!(a, t.config(3));
    assert_ne!(a.world.obstacles, t.config(4).world.obstacles);
    assert_eq!(a.world.walls, t.maze.walls);
    assert!(a.world.density_field.is_some());
    assert!(a.start.position().dist(a.goal.position()) >= 10.0);
}
