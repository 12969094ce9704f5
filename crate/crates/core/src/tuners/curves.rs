use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{snap, ParamName, TunerError};
use crate::geom::Point2;
use crate::local_planner::NavParams;
use crate::robot_sim::{FailureReason, TuneContext, TunerPolicy};
use crate::sensing::Observation;
use crate::world::{WorldSpec, SPACINGS};

/// One fixed-parameter run of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub param: ParamName,
    pub value: f64,
    pub spacing: f64,
    pub run: usize,
    pub seed: u64,
    pub success: bool,
    pub path_length: f64,
    pub sim_runtime: f64,
    pub l_min: f64,
    pub failure_reason: Option<FailureReason>,
    /// Observations at every tuner query.
    pub observations: Vec<Observation>,
}

/// All runs of a sweep over one parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepDataset {
    pub param: ParamName,
    pub values: Vec<f64>,
    pub spacings: Vec<f64>,
    pub records: Vec<SweepRecord>,
}

/// Aggregate of the runs sharing a (value, spacing) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub value: f64,
    pub spacing: f64,
    pub runs: usize,
    pub successes: usize,
    /// Mean over successful runs; infinite when there are none.
    pub mean_path_length: f64,
    pub mean_runtime: f64,
}

impl CellStats {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.runs as f64
    }
}

impl SweepDataset {
    pub fn cell(&self, value: f64, spacing: f64) -> Result<CellStats, TunerError> {
        let runs: Vec<&SweepRecord> = self
            .records
            .iter()
            .filter(|r| r.value == value && r.spacing == spacing)
            .collect();
        if runs.is_empty() {
            return Err(TunerError::MissingCell {
                param: self.param,
                value,
                spacing,
            });
        }
        let ok: Vec<&&SweepRecord> = runs.iter().filter(|r| r.success).collect();
        let mean = |f: &dyn Fn(&SweepRecord) -> f64| {
            if ok.is_empty() {
                f64::INFINITY
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        Ok(CellStats {
            value,
            spacing,
            runs: runs.len(),
            successes: ok.len(),
            mean_path_length: mean(&|r| r.path_length),
            mean_runtime: mean(&|r| r.sim_runtime),
        })
    }

    /// Best value at `spacing`: highest success rate, then shortest mean
    /// path, then shortest mean runtime, then the lower value.
    pub fn best_value(&self, spacing: f64) -> Result<f64, TunerError> {
        let mut values = self.values.clone();
        values.sort_by(f64::total_cmp);
        let mut best: Option<CellStats> = None;
        for v in values {
            let c = self.cell(v, spacing)?;
            let better = match &best {
                None => true,
                Some(b) => {
                    // compare success rates exactly as fractions
                    let lhs = c.successes * b.runs;
                    let rhs = b.successes * c.runs;
                    lhs > rhs
                        || (lhs == rhs
                            && (c.mean_path_length < b.mean_path_length
                                || (c.mean_path_length == b.mean_path_length
                                    && c.mean_runtime < b.mean_runtime)))
                }
            };
            if better {
                best = Some(c);
            }
        }
        best.map(|c| c.value).ok_or(TunerError::EmptyDataset)
    }
}

/// Per-parameter best value at each of the four spacings, in
/// [`SPACINGS`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestValueCurve {
    pub best: BTreeMap<ParamName, [f64; 4]>,
}

impl BestValueCurve {
    pub fn value(&self, param: ParamName, spacing: f64) -> Option<f64> {
        self.best.get(&param).map(|v| v[snap(&SPACINGS, spacing)])
    }

    /// `base` with every curve parameter set to its best value at `spacing`.
    pub fn params_for(&self, spacing: f64, base: &NavParams) -> NavParams {
        let k = snap(&SPACINGS, spacing);
        let mut p = *base;
        for (name, v) in &self.best {
            name.set(&mut p, v[k]);
        }
        p
    }
}

/// Fits one curve entry per dataset.
pub fn fit_best_value_curves(datasets: &[SweepDataset]) -> Result<BestValueCurve, TunerError> {
    if datasets.is_empty() {
        return Err(TunerError::EmptyDataset);
    }
    let mut best = BTreeMap::new();
    for ds in datasets {
        let mut row = [0.0; 4];
        for (k, &s) in SPACINGS.iter().enumerate() {
            row[k] = ds.best_value(s)?;
        }
        best.insert(ds.param, row);
    }
    Ok(BestValueCurve { best })
}

/// Curve lookup at the ground-truth density around `position`; worlds
/// without a density field get `defaults`.
pub fn oracle_params(
    curve: &BestValueCurve,
    world: &WorldSpec,
    position: Point2,
    defaults: &NavParams,
) -> NavParams {
    match world.local_density(position) {
        Some(rho) => curve.params_for(rho, defaults),
        None => *defaults,
    }
}

/// Best-value-curve policy with access to the true density field.
#[derive(Clone, Debug)]
pub struct OraclePolicy {
    pub curve: BestValueCurve,
    pub defaults: NavParams,
}

impl TunerPolicy for OraclePolicy {
    fn tune(&self, ctx: &TuneContext<'_>, _: &mut ChaCha8Rng) -> NavParams {
        oracle_params(&self.curve, ctx.world, ctx.pose.position(), &self.defaults)
    }

    fn name(&self) -> String {
        "oracle".into()
    }
}
