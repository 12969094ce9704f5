use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    BatchPolicy, BestValueCurve, BranchingQNet, DqnPolicy, FixedPolicy, MetricsRow, Mode,
    OraclePolicy, ParamSpace, Phase, TunerError,
};
use crate::local_planner::NavParams;
use crate::nn;
use crate::robot_sim::TunerPolicy;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Fixed,
    Oracle,
    Batch,
    Dqn,
}

/// Everything needed to rebuild a policy. Network files are relative to the
/// manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyManifest {
    pub version: u32,
    pub name: String,
    pub kind: PolicyKind,
    pub mode: Mode,
    pub space: ParamSpace,
    pub defaults: NavParams,
    /// Observation length the networks expect.
    pub input_len: usize,
    /// Reward multiplier used during training.
    pub reward_scale: f64,
    pub curve: Option<BestValueCurve>,
    /// Batch models in one JSON document.
    pub batch_file: Option<String>,
    /// DQN trunk followed by its heads, in branch order.
    pub checkpoints: Vec<String>,
}

impl PolicyManifest {
    pub fn new(
        name: &str,
        kind: PolicyKind,
        space: ParamSpace,
        defaults: NavParams,
        input_len: usize,
    ) -> Self {
        PolicyManifest {
            version: MANIFEST_VERSION,
            name: name.into(),
            kind,
            mode: space.mode,
            space,
            defaults,
            input_len,
            reward_scale: 1.0,
            curve: None,
            batch_file: None,
            checkpoints: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), TunerError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| TunerError::Io(e.to_string()))?;
        fs::write(path, text).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, TunerError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let m: PolicyManifest = serde_json::from_str(&text)
            .map_err(|e| TunerError::Io(format!("{}: {e}", path.display())))?;
        if m.version != MANIFEST_VERSION {
            return Err(TunerError::Io(format!(
                "{}: unsupported manifest version {}",
                path.display(),
                m.version
            )));
        }
        Ok(m)
    }

    /// Rebuilds the policy; DQN policies act greedily.
    pub fn policy(&self, dir: &Path) -> Result<Box<dyn TunerPolicy>, TunerError> {
        Ok(match self.kind {
            PolicyKind::Fixed => Box::new(FixedPolicy::new(self.defaults)),
            PolicyKind::Oracle => {
                let curve = self
                    .curve
                    .clone()
                    .ok_or_else(|| TunerError::Io("oracle manifest without a curve".into()))?;
                Box::new(OraclePolicy {
                    curve,
                    defaults: self.defaults,
                })
            }
            PolicyKind::Batch => {
                let file = self
                    .batch_file
                    .as_ref()
                    .ok_or_else(|| TunerError::Io("batch manifest without models".into()))?;
                let path = dir.join(file);
                let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
                let policy: BatchPolicy = serde_json::from_str(&text)
                    .map_err(|e| TunerError::Io(format!("{}: {e}", path.display())))?;
                Box::new(policy)
            }
            PolicyKind::Dqn => Box::new(DqnPolicy {
                net: load_qnet(dir, &self.checkpoints)?,
                space: self.space.clone(),
                defaults: self.defaults,
                epsilon: 0.0,
            }),
        })
    }
}

fn io_err(path: &Path, e: std::io::Error) -> TunerError {
    TunerError::Io(format!("{}: {e}", path.display()))
}

/// Writes the trunk and heads as network checkpoints named after `stem`;
/// returns the file names.
pub fn save_qnet(net: &BranchingQNet, dir: &Path, stem: &str) -> Result<Vec<String>, TunerError> {
    let mut names = vec![format!("{stem}_trunk.json")];
    names.extend((0..net.heads.len()).map(|b| format!("{stem}_head{b}.json")));
    nn::save(&net.trunk, &dir.join(&names[0]))?;
    for (head, name) in net.heads.iter().zip(&names[1..]) {
        nn::save(head, &dir.join(name))?;
    }
    Ok(names)
}

pub fn load_qnet(dir: &Path, files: &[String]) -> Result<BranchingQNet, TunerError> {
    let (first, rest) = files
        .split_first()
        .ok_or_else(|| TunerError::Io("no checkpoints listed".into()))?;
    let trunk = nn::load(&dir.join(first))?;
    let heads = rest
        .iter()
        .map(|f| nn::load(&dir.join(f)))
        .collect::<Result<Vec<_>, _>>()?;
    let width = trunk.output_len();
    if heads.iter().any(|h| h.input_len != width) {
        return Err(TunerError::Io(
            "head input does not match trunk output".into(),
        ));
    }
    Ok(BranchingQNet { trunk, heads })
}

pub const METRICS_HEADER: &str = "episode,phase,return,success,epsilon";

/// Training curve as CSV.
pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<PathBuf, TunerError> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut text = String::from(METRICS_HEADER);
    text.push('\n');
    for r in rows {
        let phase = match r.phase {
            Phase::Clone => "clone",
            Phase::Rl => "rl",
        };
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.episode, phase, r.episode_return, r.success as u8, r.epsilon
        ));
    }
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    Ok(path.to_path_buf())
}
