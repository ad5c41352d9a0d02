//! Binary checkpoints.
//!
//! Layout: the 8-byte magic, a little-endian `u64` header length, a JSON
//! header, then for each array in header order its values, first moments
//! and second moments as little-endian `f64`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainState};
use crate::autodiff::{ParamArray, ParamStore};
use crate::dataset::write_atomic;
use crate::render::Camera;
use crate::rig::{Pose, RigDocument};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MFIELDCK";
pub const CHECKPOINT_VERSION: &str = "ckpt_v1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: String,
    iteration: u64,
    step: u64,
    config: TrainConfig,
    rig: RigDocument,
    cameras: Vec<Camera>,
    initial_poses: Vec<Pose>,
    arrays: Vec<ArrayEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayEntry {
    name: String,
    len: usize,
}

/// Serializes `state` into checkpoint bytes.
pub fn encode_checkpoint(state: &TrainState) -> Result<Vec<u8>> {
    let header = Header {
        version: CHECKPOINT_VERSION.into(),
        iteration: state.iteration,
        step: state.store.step(),
        config: state.config.clone(),
        rig: RigDocument::new(&state.mesh, &state.skeleton),
        cameras: state.cameras.clone(),
        initial_poses: state.initial_poses.clone(),
        arrays: state
            .store
            .arrays()
            .iter()
            .map(|a| ArrayEntry { name: a.name.clone(), len: a.values.len() })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Corrupt(format!("checkpoint header: {e}")))?;
    let mut out = Vec::with_capacity(16 + json.len() + 24 * state.store.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for a in state.store.arrays() {
        for list in [&a.values, &a.first_moment, &a.second_moment] {
            for v in list {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parses checkpoint bytes; nothing is returned unless the whole file is
/// consistent.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<TrainState> {
    if bytes.len() < 16 {
        return Err(Error::Corrupt("checkpoint shorter than its fixed preamble".into()));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Version {
            expected: CHECKPOINT_VERSION.into(),
            found: "unrecognized file signature".into(),
        });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body_start = 16usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Corrupt("checkpoint header runs past the end of the file".into()))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes[16..body_start])
        .map_err(|e| Error::Corrupt(format!("checkpoint header: {e}")))?;
    let found = value.get("version").and_then(|v| v.as_str()).unwrap_or("missing");
    if found != CHECKPOINT_VERSION {
        return Err(Error::Version { expected: CHECKPOINT_VERSION.into(), found: found.into() });
    }
    let header: Header =
        serde_json::from_value(value).map_err(|e| Error::Corrupt(format!("checkpoint header: {e}")))?;
    let scalars: usize = header.arrays.iter().map(|a| 3 * a.len).sum();
    let body = &bytes[body_start..];
    if body.len() != 8 * scalars {
        return Err(Error::Corrupt(format!(
            "checkpoint body holds {} bytes, header describes {}",
            body.len(),
            8 * scalars
        )));
    }
    let mut floats = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut store = ParamStore::new();
    for entry in &header.arrays {
        let mut take = || (&mut floats).take(entry.len).collect::<Vec<f64>>();
        let values = take();
        let first_moment = take();
        let second_moment = take();
        store.insert_full(ParamArray { name: entry.name.clone(), values, first_moment, second_moment })?;
    }
    store.set_step(header.step);
    let (mesh, skeleton) = header.rig.into_rig()?;
    TrainState::from_parts(
        header.config,
        Arc::new(mesh),
        skeleton,
        header.cameras,
        header.initial_poses,
        store,
        header.iteration,
    )
}

pub fn save_checkpoint(path: &Path, state: &TrainState) -> Result<()> {
    write_atomic(path, &encode_checkpoint(state)?)
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
