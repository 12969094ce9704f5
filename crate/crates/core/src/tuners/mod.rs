//! Parameter-selection policies and their training procedures.

mod batch;
mod curves;
mod dqn;
mod manifest;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use batch::*;
pub use curves::*;
pub use dqn::*;
pub use manifest::*;

use crate::local_planner::{
    NavParams, BLOCKING_VALUES, D_LA_VALUES, FEASIBILITY_POSES_VALUES, F_GP_VALUES,
    HYSTERESIS_VALUES, INFLATION_VALUES, PREFERS_VALUES,
};
use crate::robot_sim::{TuneContext, TunerPolicy};

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("no runs for {param} = {value} at spacing {spacing}")]
    MissingCell {
        param: ParamName,
        value: f64,
        spacing: f64,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Episode(#[from] crate::robot_sim::EpisodeError),
    #[error("{0}")]
    Io(String),
}

/// A tunable navigation parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    FGp,
    DLa,
    SelectionCostHysteresis,
    SwitchingBlockingPeriod,
    SelectionPrefersInitialPlan,
    InflationDistance,
    FeasibilityCheckPoses,
}

impl std::fmt::Display for ParamName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl ParamName {
    pub const ALL: [ParamName; 7] = [
        ParamName::FGp,
        ParamName::DLa,
        ParamName::SelectionCostHysteresis,
        ParamName::SwitchingBlockingPeriod,
        ParamName::SelectionPrefersInitialPlan,
        ParamName::InflationDistance,
        ParamName::FeasibilityCheckPoses,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ParamName::FGp => "f_gp",
            ParamName::DLa => "d_la",
            ParamName::SelectionCostHysteresis => "selection_cost_hysteresis",
            ParamName::SwitchingBlockingPeriod => "switching_blocking_period",
            ParamName::SelectionPrefersInitialPlan => "selection_prefers_initial_plan",
            ParamName::InflationDistance => "inflation_distance",
            ParamName::FeasibilityCheckPoses => "feasibility_check_poses",
        }
    }

    pub fn parse(s: &str) -> Option<ParamName> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }

    /// The discrete value set of this parameter.
    pub fn values(&self) -> Vec<f64> {
        match self {
            ParamName::FGp => F_GP_VALUES.to_vec(),
            ParamName::DLa => D_LA_VALUES.to_vec(),
            ParamName::SelectionCostHysteresis => HYSTERESIS_VALUES.to_vec(),
            ParamName::SwitchingBlockingPeriod => BLOCKING_VALUES.to_vec(),
            ParamName::SelectionPrefersInitialPlan => PREFERS_VALUES.to_vec(),
            ParamName::InflationDistance => INFLATION_VALUES.to_vec(),
            ParamName::FeasibilityCheckPoses => {
                FEASIBILITY_POSES_VALUES.iter().map(|&n| n as f64).collect()
            }
        }
    }

    pub fn get(&self, p: &NavParams) -> f64 {
        match self {
            ParamName::FGp => p.f_gp,
            ParamName::DLa => p.d_la,
            ParamName::SelectionCostHysteresis => p.selection_cost_hysteresis,
            ParamName::SwitchingBlockingPeriod => p.switching_blocking_period,
            ParamName::SelectionPrefersInitialPlan => p.selection_prefers_initial_plan,
            ParamName::InflationDistance => p.inflation_distance,
            ParamName::FeasibilityCheckPoses => p.feasibility_check_poses as f64,
        }
    }

    pub fn set(&self, p: &mut NavParams, v: f64) {
        match self {
            ParamName::FGp => p.f_gp = v,
            ParamName::DLa => p.d_la = v,
            ParamName::SelectionCostHysteresis => p.selection_cost_hysteresis = v,
            ParamName::SwitchingBlockingPeriod => p.switching_blocking_period = v,
            ParamName::SelectionPrefersInitialPlan => p.selection_prefers_initial_plan = v,
            ParamName::InflationDistance => p.inflation_distance = v,
            ParamName::FeasibilityCheckPoses => {
                p.feasibility_check_poses = v.round().max(1.0) as usize
            }
        }
    }
}

/// Index of the grid value nearest to `v`; ties go to the lower value.
/// `values` must be sorted ascending.
pub fn snap(values: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (i, x) in values.iter().enumerate() {
        if (x - v).abs() < (values[best] - v).abs() {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "7d")]
    SevenD,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDim {
    pub name: ParamName,
    pub values: Vec<f64>,
}

/// The tuned parameters and their value grids, one action branch each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub mode: Mode,
    pub dims: Vec<ParamDim>,
}

impl ParamSpace {
    pub fn new(mode: Mode) -> Self {
        let names: &[ParamName] = match mode {
            Mode::TwoD => &ParamName::ALL[..2],
            Mode::SevenD => &ParamName::ALL,
        };
        ParamSpace {
            mode,
            dims: names
                .iter()
                .map(|&name| ParamDim {
                    name,
                    values: name.values(),
                })
                .collect(),
        }
    }

    pub fn two_d() -> Self {
        Self::new(Mode::TwoD)
    }

    pub fn seven_d() -> Self {
        Self::new(Mode::SevenD)
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d.values.len()).collect()
    }

    pub fn dim(&self, name: ParamName) -> Option<&ParamDim> {
        self.dims.iter().find(|d| d.name == name)
    }

    /// `base` with every tuned parameter replaced by its indexed grid value.
    pub fn decode(&self, indices: &[usize], base: &NavParams) -> NavParams {
        assert_eq!(indices.len(), self.dims.len(), "one index per branch");
        let mut p = *base;
        for (d, &i) in self.dims.iter().zip(indices) {
            d.name.set(&mut p, d.values[i]);
        }
        p
    }

    /// Nearest grid index of every tuned parameter.
    pub fn encode(&self, p: &NavParams) -> Vec<usize> {
        self.dims
            .iter()
            .map(|d| snap(&d.values, d.name.get(p)))
            .collect()
    }

    /// Whether every tuned parameter of `p` is exactly a grid value.
    pub fn contains(&self, p: &NavParams) -> bool {
        self.dims.iter().all(|d| d.values.contains(&d.name.get(p)))
    }

    /// `p` with every tuned parameter moved to its nearest grid value.
    pub fn snap_params(&self, p: &NavParams) -> NavParams {
        self.decode(&self.encode(p), p)
    }
}

/// Constant parameters.
#[derive(Clone, Debug)]
pub struct FixedPolicy {
    pub params: NavParams,
}

impl FixedPolicy {
    pub fn new(params: NavParams) -> Self {
        FixedPolicy { params }
    }
}

impl Default for FixedPolicy {
    fn default() -> Self {
        FixedPolicy::new(NavParams::default())
    }
}

impl TunerPolicy for FixedPolicy {
    fn tune(&self, _: &TuneContext<'_>, _: &mut ChaCha8Rng) -> NavParams {
        self.params
    }

    fn name(&self) -> String {
        "fixed".into()
    }
}
