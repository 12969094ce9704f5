//! Versioned JSON world files.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{WorldError, WorldSpec};

pub const WORLD_FORMAT: u32 = 1;

#[derive(Serialize, Deserialize)]
struct WorldFile {
    format: u32,
    #[serde(flatten)]
    world: WorldSpec,
}

#[derive(Serialize)]
struct WorldFileRef<'a> {
    format: u32,
    #[serde(flatten)]
    world: &'a WorldSpec,
}

pub fn world_to_string(world: &WorldSpec) -> String {
    serde_json::to_string_pretty(&WorldFileRef {
        format: WORLD_FORMAT,
        world,
    })
    .expect("world serialisation cannot fail")
}

pub fn world_from_str(s: &str) -> Result<WorldSpec, WorldError> {
    let f: WorldFile = serde_json::from_str(s).map_err(|e| WorldError::Format(e.to_string()))?;
    if f.format != WORLD_FORMAT {
        return Err(WorldError::Format(format!(
            "unsupported format {}",
            f.format
        )));
    }
    Ok(f.world)
}

pub fn save_world(world: &WorldSpec, path: &Path) -> Result<(), WorldError> {
    std::fs::write(path, world_to_string(world))?;
    Ok(())
}

pub fn load_world(path: &Path) -> Result<WorldSpec, WorldError> {
    world_from_str(&std::fs::read_to_string(path)?)
}
