use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BenchError, EnvKind};
use crate::robot_sim::FailureReason;

/// One evaluation episode. Wall-clock time is left out so reports are
/// reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tuner: String,
    pub env: String,
    pub load: f64,
    pub run: usize,
    pub seed: u64,
    pub obstacles: usize,
    pub success: bool,
    pub path_length: f64,
    pub l_min: f64,
    pub sim_runtime: f64,
    pub failure_reason: Option<FailureReason>,
}

/// A run whose world could not hold the requested obstacle count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleCell {
    pub env: String,
    pub load: f64,
    pub run: usize,
    pub placed: usize,
    pub requested: usize,
}

/// Aggregate for one (tuner, environment, load) cell. Path length and
/// runtime are over successful runs and absent when there are none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub tuner: String,
    pub env: String,
    pub load: f64,
    pub n: usize,
    /// Success rate in percent; 0 when `n` is 0.
    pub sr: f64,
    pub pl_mean: Option<f64>,
    /// Population standard deviation.
    pub pl_std: Option<f64>,
    pub runtime_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub tuner: String,
    pub env: String,
    /// Best minus worst success rate over the load axis (points).
    pub delta_sr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tuners: Vec<String>,
    pub envs: Vec<String>,
    pub loads: Vec<f64>,
    /// Tuner-major, then environment, then load, in the orders above.
    pub rows: Vec<ReportRow>,
    pub runs: Vec<RunRecord>,
    pub infeasible: Vec<InfeasibleCell>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

impl Report {
    pub fn from_runs(
        tuners: &[String],
        envs: &[String],
        loads: &[f64],
        runs: Vec<RunRecord>,
        infeasible: Vec<InfeasibleCell>,
    ) -> Report {
        let mut rows = Vec::with_capacity(tuners.len() * envs.len() * loads.len());
        for t in tuners {
            for e in envs {
                for &l in loads {
                    let cell: Vec<&RunRecord> = runs
                        .iter()
                        .filter(|r| &r.tuner == t && &r.env == e && r.load == l)
                        .collect();
                    let ok: Vec<f64> = cell
                        .iter()
                        .filter(|r| r.success)
                        .map(|r| r.path_length)
                        .collect();
                    let rt: Vec<f64> = cell
                        .iter()
                        .filter(|r| r.success)
                        .map(|r| r.sim_runtime)
                        .collect();
                    let pl_mean = mean(&ok);
                    let pl_std = pl_mean.map(|m| {
                        (ok.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / ok.len() as f64).sqrt()
                    });
                    let n = cell.len();
                    rows.push(ReportRow {
                        tuner: t.clone(),
                        env: e.clone(),
                        load: l,
                        n,
                        sr: if n == 0 {
                            0.0
                        } else {
                            100.0 * ok.len() as f64 / n as f64
                        },
                        pl_mean,
                        pl_std,
                        runtime_mean: mean(&rt),
                    });
                }
            }
        }
        Report {
            tuners: tuners.to_vec(),
            envs: envs.to_vec(),
            loads: loads.to_vec(),
            rows,
            runs,
            infeasible,
        }
    }

    pub fn row(&self, tuner: &str, env: &str, load: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.tuner == tuner && r.env == env && r.load == load)
    }

    pub fn sensitivity(&self) -> Vec<Sensitivity> {
        sensitivity(&self.rows)
    }
}

/// ΔSR per (tuner, environment) in order of first appearance; cells with
/// no runs are ignored.
pub fn sensitivity(rows: &[ReportRow]) -> Vec<Sensitivity> {
    let mut out: Vec<(Sensitivity, f64, f64)> = Vec::new();
    for r in rows.iter().filter(|r| r.n > 0) {
        match out
            .iter_mut()
            .find(|(s, _, _)| s.tuner == r.tuner && s.env == r.env)
        {
            Some((_, lo, hi)) => {
                *lo = lo.min(r.sr);
                *hi = hi.max(r.sr);
            }
            None => out.push((
                Sensitivity {
                    tuner: r.tuner.clone(),
                    env: r.env.clone(),
                    delta_sr: 0.0,
                },
                r.sr,
                r.sr,
            )),
        }
    }
    out.into_iter()
        .map(|(mut s, lo, hi)| {
            s.delta_sr = hi - lo;
            s
        })
        .collect()
}

pub const CSV_HEADER: &str = "tuner,env,load,n,sr,pl_mean,pl_std,runtime_mean";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Floats use the shortest representation that parses back to the same
/// value; missing statistics are empty fields.
pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.tuner,
            r.env,
            r.load,
            r.n,
            r.sr,
            opt(r.pl_mean),
            opt(r.pl_std),
            opt(r.runtime_mean)
        ));
    }
    s
}

fn fields<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>, BenchError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => {
            return Err(BenchError::Csv {
                line: 1,
                msg: format!("expected header {header}"),
            })
        }
    }
    let width = header.split(',').count();
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != width {
            return Err(BenchError::Csv {
                line: i + 1,
                msg: format!("expected {width} fields, found {}", f.len()),
            });
        }
        out.push((i + 1, f));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, BenchError> {
    s.parse().map_err(|_| BenchError::Csv {
        line,
        msg: format!("bad number {s:?}"),
    })
}

fn opt_num(line: usize, s: &str) -> Result<Option<f64>, BenchError> {
    if s.is_empty() {
        Ok(None)
    } else {
        num(line, s).map(Some)
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>, BenchError> {
    fields(text, CSV_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(ReportRow {
                tuner: f[0].into(),
                env: f[1].into(),
                load: num(line, f[2])?,
                n: num(line, f[3])?,
                sr: num(line, f[4])?,
                pl_mean: opt_num(line, f[5])?,
                pl_std: opt_num(line, f[6])?,
                runtime_mean: opt_num(line, f[7])?,
            })
        })
        .collect()
}

pub const RUNS_HEADER: &str =
    "tuner,env,load,run,seed,obstacles,success,path_length,l_min,sim_runtime,failure";

fn failure_str(f: Option<FailureReason>) -> &'static str {
    match f {
        None => "",
        Some(FailureReason::Collision) => "collision",
        Some(FailureReason::Timeout) => "timeout",
        Some(FailureReason::NoPath) => "no_path",
    }
}

/// Per-episode log, one line per run.
pub fn runs_csv(runs: &[RunRecord]) -> String {
    let mut s = String::from(RUNS_HEADER);
    s.push('\n');
    for r in runs {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.tuner,
            r.env,
            r.load,
            r.run,
            r.seed,
            r.obstacles,
            r.success as u8,
            r.path_length,
            r.l_min,
            r.sim_runtime,
            failure_str(r.failure_reason)
        ));
    }
    s
}

pub fn parse_runs_csv(text: &str) -> Result<Vec<RunRecord>, BenchError> {
    fields(text, RUNS_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let failure_reason = match f[10] {
                "" => None,
                "collision" => Some(FailureReason::Collision),
                "timeout" => Some(FailureReason::Timeout),
                "no_path" => Some(FailureReason::NoPath),
                other => {
                    return Err(BenchError::Csv {
                        line,
                        msg: format!("unknown failure {other:?}"),
                    })
                }
            };
            let success = match f[6] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(BenchError::Csv {
                        line,
                        msg: format!("bad success flag {other:?}"),
                    })
                }
            };
            Ok(RunRecord {
                tuner: f[0].into(),
                env: f[1].into(),
                load: num(line, f[2])?,
                run: num(line, f[3])?,
                seed: num(line, f[4])?,
                obstacles: num(line, f[5])?,
                success,
                path_length: num(line, f[7])?,
                l_min: num(line, f[8])?,
                sim_runtime: num(line, f[9])?,
                failure_reason,
            })
        })
        .collect()
}

/// Everything in the report except the per-run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tuners: Vec<String>,
    pub envs: Vec<String>,
    pub loads: Vec<f64>,
    pub rows: Vec<ReportRow>,
    pub sensitivity: Vec<Sensitivity>,
    pub infeasible: Vec<InfeasibleCell>,
}

pub const RESULTS_FILE: &str = "results.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOTS_DIR: &str = "plots";

fn write(path: PathBuf, text: &str, out: &mut Vec<PathBuf>) -> Result<(), BenchError> {
    fs::write(&path, text).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    out.push(path);
    Ok(())
}

/// Writes the results table, the run log, a JSON summary and plot data:
/// success rate against obstacle count per environment, and ΔSR per
/// environment. Returns the written paths.
pub fn export(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let io = |p: &Path, e: std::io::Error| BenchError::Io {
        path: p.display().to_string(),
        msg: e.to_string(),
    };
    let plots = dir.join(PLOTS_DIR);
    fs::create_dir_all(&plots).map_err(|e| io(&plots, e))?;
    let mut out = Vec::new();
    write(dir.join(RESULTS_FILE), &to_csv(&report.rows), &mut out)?;
    write(dir.join(RUNS_FILE), &runs_csv(&report.runs), &mut out)?;
    let summary = Summary {
        tuners: report.tuners.clone(),
        envs: report.envs.clone(),
        loads: report.loads.clone(),
        rows: report.rows.clone(),
        sensitivity: report.sensitivity(),
        infeasible: report.infeasible.clone(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| BenchError::Io {
        path: SUMMARY_FILE.into(),
        msg: e.to_string(),
    })?;
    write(dir.join(SUMMARY_FILE), &json, &mut out)?;

    for env in &report.envs {
        let max = EnvKind::parse(env).map(|e| e.max_obstacles());
        let mut s = format!("load,obstacles,{}\n", report.tuners.join(","));
        for &l in &report.loads {
            let count = max
                .map(|m| ((l * m as f64).round() as usize).to_string())
                .unwrap_or_default();
            let srs: Vec<String> = report
                .tuners
                .iter()
                .map(|t| {
                    report
                        .row(t, env, l)
                        .filter(|r| r.n > 0)
                        .map(|r| r.sr.to_string())
                        .unwrap_or_default()
                })
                .collect();
            s.push_str(&format!("{l},{count},{}\n", srs.join(",")));
        }
        write(
            plots.join(format!("sr_vs_obstacles_{env}.csv")),
            &s,
            &mut out,
        )?;
    }
    let sens = report.sensitivity();
    let mut s = format!("env,{}\n", report.tuners.join(","));
    for env in &report.envs {
        let cells: Vec<String> = report
            .tuners
            .iter()
            .map(|t| {
                sens.iter()
                    .find(|x| &x.tuner == t && &x.env == env)
                    .map(|x| x.delta_sr.to_string())
                    .unwrap_or_default()
            })
            .collect();
        s.push_str(&format!("{env},{}\n", cells.join(",")));
    }
    write(plots.join("delta_sr.csv"), &s, &mut out)?;
    Ok(out)
}

/// Rebuilds a report from an exported directory: run log plus summary.
pub fn load_report(dir: &Path) -> Result<Report, BenchError> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| BenchError::Io {
            path: p.display().to_string(),
            msg: e.to_string(),
        })
    };
    let summary: Summary =
        serde_json::from_str(&read(SUMMARY_FILE)?).map_err(|e| BenchError::Io {
            path: dir.join(SUMMARY_FILE).display().to_string(),
            msg: e.to_string(),
        })?;
    let runs = parse_runs_csv(&read(RUNS_FILE)?)?;
    Ok(Report::from_runs(
        &summary.tuners,
        &summary.envs,
        &summary.loads,
        runs,
        summary.infeasible,
    ))
}
