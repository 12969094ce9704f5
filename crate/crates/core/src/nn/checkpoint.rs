use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Net, NnError};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    net: Net,
}

/// Writes `net` as JSON. Floats round-trip exactly.
pub fn save(net: &Net, path: &Path) -> Result<(), NnError> {
    let doc = Checkpoint {
        version: CHECKPOINT_VERSION,
        net: net.clone(),
    };
    let text = serde_json::to_string(&doc).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    fs::write(path, text).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<Net, NnError> {
    let text = fs::read_to_string(path)
        .map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
    let doc: Checkpoint =
        serde_json::from_str(&text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    if doc.version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!(
            "unsupported version {}",
            doc.version
        )));
    }
    doc.net.validate()?;
    Ok(doc.net)
}
