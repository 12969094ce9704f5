use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn navtune(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navtune"))
        .current_dir(dir)
        .env_remove("NAVTUNE_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Short episodes keep the end-to-end runs fast.
fn quick_config(dir: &Path, timeout: f64) -> String {
    let path = dir.join("quick.json");
    fs::write(
        &path,
        format!(r#"{{"world": {{"timeout": {timeout}}}, "dqn": {{"clone_epochs": 2}}}}"#),
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn generate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let args = |out: &str| {
        vec![
            "--out".to_string(),
            out.to_string(),
            "--seed".into(),
            "11".into(),
            "generate".into(),
            "--env".into(),
            "maze".into(),
            "--spacing".into(),
            "1.25".into(),
        ]
    };
    for out in ["a", "b"] {
        let a: Vec<String> = args(out);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        let o = navtune(tmp.path(), &refs);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).contains("maze_seed11.json"));
    }
    let a = fs::read(tmp.path().join("a/worlds/maze_seed11.json")).unwrap();
    let b = fs::read(tmp.path().join("b/worlds/maze_seed11.json")).unwrap();
    assert_eq!(a, b);
    assert!(tmp.path().join("a/worlds/config.json").exists());
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(
        code(&navtune(
            tmp.path(),
            &["generate", "--env", "maze", "--frobnicate"]
        )),
        2
    );
    assert_eq!(
        code(&navtune(
            tmp.path(),
            &[
                "generate",
                "--env",
                "maze",
                "--spacing",
                "1",
                "--count",
                "3"
            ]
        )),
        2
    );
    assert_eq!(
        code(&navtune(tmp.path(), &["train-dqn", "--mode", "sideways"])),
        2
    );
    let help = navtune(tmp.path(), &["--help"]);
    assert_eq!(code(&help), 0);
    assert!(stdout(&help).contains("Exit codes"));
}

#[test]
fn infeasible_count_exits_3() {
    let tmp = TempDir::new().unwrap();
    let o = navtune(
        tmp.path(),
        &["generate", "--env", "maze", "--count", "20000"],
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("of 20000"), "{}", stderr(&o));
}

#[test]
fn missing_artifacts_are_named() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        (vec!["eval", "--tuners", "fixed,dqn"], "dqn/manifest.json"),
        (vec!["eval", "--tuners", "batch"], "batch/manifest.json"),
        (
            vec!["eval", "--tuners", "oracle"],
            "sweep/best_value_curve.json",
        ),
        (vec!["train-batch"], "sweep/best_value_curve.json"),
        (
            vec!["train-dqn", "--mode", "warm_start", "--episodes", "10"],
            "sweep/best_value_curve.json",
        ),
        (vec!["report"], "eval/summary.json"),
    ];
    for (args, file) in cases {
        let o = navtune(tmp.path(), &args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(stderr(&o).contains(file), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn config_file_then_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"seed": 5, "out_dir": "from_file", "world": {"wall_density": 0.1}}"#,
    )
    .unwrap();
    let cfg = cfg.display().to_string();

    let o = navtune(
        tmp.path(),
        &["--config", &cfg, "generate", "--env", "campus"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let written = json(&tmp.path().join("from_file/worlds/config.json"));
    assert_eq!(written["seed"], 5);
    assert_eq!(written["world"]["wall_density"], 0.1);
    assert_eq!(written["dqn"]["seed"], 5);

    let o = navtune(
        tmp.path(),
        &[
            "--config", &cfg, "--seed", "7", "--out", "flag", "generate", "--env", "campus",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let written = json(&tmp.path().join("flag/worlds/config.json"));
    assert_eq!(written["seed"], 7);
    assert_eq!(written["world"]["wall_density"], 0.1);

    let o = Command::new(env!("CARGO_BIN_EXE_navtune"))
        .current_dir(tmp.path())
        .env("NAVTUNE_OUT", "from_env")
        .args(["generate", "--env", "office"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(tmp
        .path()
        .join("from_env/worlds/office_seed0.json")
        .exists());

    // A config without out_dir still honours the environment.
    fs::write(tmp.path().join("seed_only.json"), r#"{"seed": 9}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_navtune"))
        .current_dir(tmp.path())
        .env("NAVTUNE_OUT", "from_env")
        .args(["--config", "seed_only.json", "generate", "--env", "office"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(tmp
        .path()
        .join("from_env/worlds/office_seed9.json")
        .exists());

    fs::write(tmp.path().join("bad.json"), r#"{"sede": 1}"#).unwrap();
    let o = navtune(
        tmp.path(),
        &["--config", "bad.json", "generate", "--env", "maze"],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("sede"), "{}", stderr(&o));
}

#[test]
fn warm_start_splits_the_budget() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path(), 5.0);
    let curve = tmp.path().join("curve.json");
    fs::write(
        &curve,
        r#"{"best": {"f_gp": [0.125, 0.25, 0.25, 0.5], "d_la": [2.0, 2.5, 3.0, 3.0]}}"#,
    )
    .unwrap();
    let curve = curve.display().to_string();
    let o = navtune(
        tmp.path(),
        &[
            "--config",
            &cfg,
            "train-dqn",
            "--mode",
            "warm_start",
            "--episodes",
            "100",
            "--curve",
            &curve,
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("20 cloning + 80 RL"), "{}", stdout(&o));

    let dqn = tmp.path().join("navtune-out/dqn");
    let metrics = fs::read_to_string(dqn.join("metrics.csv")).unwrap();
    let phases: Vec<&str> = metrics
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(phases.len(), 100);
    assert!(phases[..20].iter().all(|&p| p == "clone"));
    assert!(phases[20..].iter().all(|&p| p == "rl"));
    let manifest = json(&dqn.join("manifest.json"));
    assert_eq!(manifest["kind"], "dqn");
    for f in manifest["checkpoints"].as_array().unwrap() {
        assert!(dqn.join(f.as_str().unwrap()).exists());
    }
    assert!(dqn.join("config.json").exists());

    // The trained policy loads and runs.
    let o = navtune(
        tmp.path(),
        &[
            "--config",
            &cfg,
            "eval",
            "--tuners",
            "fixed,dqn",
            "--envs",
            "campus",
            "--loads",
            "0",
            "--runs",
            "1",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn eval_then_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path(), 20.0);
    let o = navtune(
        tmp.path(),
        &[
            "--config",
            &cfg,
            "eval",
            "--tuners",
            "fixed",
            "--envs",
            "campus,maze_same",
            "--loads",
            "0,0.25",
            "--runs",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let eval = tmp.path().join("navtune-out/eval");
    let results = fs::read_to_string(eval.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 4);
    assert!(eval.join("plots/sr_vs_obstacles_campus.csv").exists());
    assert!(eval.join("plots/delta_sr.csv").exists());

    // Same config and seed, same bytes.
    let o = navtune(
        tmp.path(),
        &[
            "--config",
            &cfg,
            "--out",
            "again",
            "eval",
            "--tuners",
            "fixed",
            "--envs",
            "campus,maze_same",
            "--loads",
            "0,0.25",
            "--runs",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["results.csv", "runs.csv", "summary.json"] {
        assert_eq!(
            fs::read(eval.join(f)).unwrap(),
            fs::read(tmp.path().join("again/eval").join(f)).unwrap(),
            "{f}"
        );
    }

    let o = navtune(tmp.path(), &["report"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = tmp.path().join("navtune-out/report");
    assert_eq!(
        fs::read_to_string(report.join("results.csv")).unwrap(),
        results
    );
    assert_eq!(
        fs::read(report.join("runs.csv")).unwrap(),
        fs::read(eval.join("runs.csv")).unwrap()
    );
}

#[test]
fn exhausted_budget_exits_4_with_partial_output() {
    let tmp = TempDir::new().unwrap();
    let o = navtune(
        tmp.path(),
        &[
            "--budget-secs",
            "0",
            "eval",
            "--tuners",
            "fixed",
            "--envs",
            "campus",
            "--loads",
            "0",
            "--runs",
            "3",
        ],
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let results = fs::read_to_string(tmp.path().join("navtune-out/eval/results.csv")).unwrap();
    assert!(results.starts_with("tuner,env,load"));
}

#[test]
fn sweep_feeds_batch_training() {
    let tmp = TempDir::new().unwrap();
    let cfg = quick_config(tmp.path(), 3.0);
    let o = navtune(
        tmp.path(),
        &["--config", &cfg, "sweep", "--param", "all", "--runs", "1"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sweep = tmp.path().join("navtune-out/sweep");
    for f in [
        "sweep_f_gp.json",
        "sweep_d_la.json",
        "best_value_curve.json",
        "config.json",
    ] {
        assert!(sweep.join(f).exists(), "{f}");
    }
    let o = navtune(
        tmp.path(),
        &[
            "--config",
            &cfg,
            "train-batch",
            "--model",
            "linear",
            "--epochs",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = json(&tmp.path().join("navtune-out/batch/manifest.json"));
    assert_eq!(manifest["name"], "batch_linear_classifier");
    let o = navtune(
        tmp.path(),
        &[
            "--config",
            &cfg,
            "eval",
            "--tuners",
            "oracle,batch",
            "--envs",
            "maze_same",
            "--loads",
            "0.25",
            "--runs",
            "1",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}
