//! Atomic file output and the on-disk sequence layout shared by the
//! `synth` and `train` commands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::image::{load_mask, load_rgb, save_mask, save_rgb};
use crate::render::Camera;
use crate::rig::{load_rig, save_rig, Pose};
use crate::synth::Sequence;
use crate::trainer::Frame;
use crate::{Error, Result};

/// Writes `bytes` to a sibling temporary file and renames it into place, so
/// readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Version tag of `poses.json`.
pub const POSES_VERSION: &str = "poses_v1";

/// Contents of `poses.json`: per-frame ground-truth and initial poses plus
/// the projected keypoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosesDocument {
    pub version: String,
    pub ground_truth: Vec<Pose>,
    pub initial: Vec<Pose>,
    pub keypoints: Vec<Vec<[f64; 2]>>,
}

pub fn frame_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("frame_{i:04}.png"))
}

pub fn mask_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("mask_{i:04}.png"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

/// Builds a directory next to `dir`, fills it with `fill` and renames it into
/// place, replacing any previous `dir`. A failure leaves `dir` untouched.
pub fn write_dir_atomic(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let name = dir
        .file_name()
        .ok_or_else(|| Error::Argument(format!("{} is not a directory path", dir.display())))?;
    let tmp = parent.join(format!(".{}.tmp", name.to_string_lossy()));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
    if let Err(e) = fill(&tmp) {
        let _ = std::fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))
}

/// Writes a sequence directory: frames, masks, `poses.json`, `camera.json`
/// and `rig.json`.
pub fn save_sequence(dir: &Path, seq: &Sequence) -> Result<()> {
    let camera = &seq
        .frames
        .first()
        .ok_or_else(|| Error::Argument("cannot save an empty sequence".into()))?
        .camera;
    if seq.frames.iter().any(|f| &f.camera != camera) {
        return Err(Error::Argument("a sequence directory holds a single fixed camera".into()));
    }
    write_dir_atomic(dir, |tmp| {
        for (i, f) in seq.frames.iter().enumerate() {
            save_rgb(&frame_path(tmp, i), &f.image)?;
            if let Some(m) = &f.mask {
                save_mask(&mask_path(tmp, i), m)?;
            }
        }
        write_json(
            &tmp.join("poses.json"),
            &PosesDocument {
                version: POSES_VERSION.into(),
                ground_truth: seq.ground_truth.clone(),
                initial: seq.frames.iter().map(|f| f.initial_pose.clone()).collect(),
                keypoints: seq.frames.iter().map(|f| f.keypoints.clone()).collect(),
            },
        )?;
        write_json(&tmp.join("camera.json"), camera)?;
        save_rig(&tmp.join("rig.json"), &seq.mesh, &seq.skeleton)
    })
}

pub fn load_poses(path: &Path) -> Result<PosesDocument> {
    let doc: PosesDocument = read_json(path)?;
    if doc.version != POSES_VERSION {
        return Err(Error::Version { expected: POSES_VERSION.into(), found: doc.version });
    }
    let n = doc.ground_truth.len();
    if doc.initial.len() != n || doc.keypoints.len() != n {
        return Err(Error::Corrupt(format!("{}: per-frame lists differ in length", path.display())));
    }
    Ok(doc)
}

/// Reads a sequence directory written by [`save_sequence`]. Masks are
/// optional; everything else must be present and consistent.
pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    let doc = load_poses(&dir.join("poses.json"))?;
    let camera: Camera = read_json(&dir.join("camera.json"))?;
    camera.validate()?;
    let (mesh, skeleton) = load_rig(&dir.join("rig.json"))?;
    let mut frames = Vec::with_capacity(doc.ground_truth.len());
    for i in 0..doc.ground_truth.len() {
        let image = load_rgb(&frame_path(dir, i))?;
        if image.width != camera.width || image.height != camera.height {
            return Err(Error::Corrupt(format!(
                "frame {i} is {}x{} but the camera is {}x{}",
                image.width, image.height, camera.width, camera.height
            )));
        }
        let mp = mask_path(dir, i);
        let mask = if mp.exists() { Some(load_mask(&mp)?) } else { None };
        for pose in [&doc.ground_truth[i], &doc.initial[i]] {
            if pose.rotations.len() != skeleton.len() {
                return Err(Error::Shape {
                    name: format!("pose of frame {i}"),
                    expected: skeleton.len(),
                    actual: pose.rotations.len(),
                });
            }
        }
        frames.push(Frame {
            image,
            mask,
            camera: camera.clone(),
            initial_pose: doc.initial[i].clone(),
            keypoints: doc.keypoints[i].clone(),
        });
    }
    let n = frames.len();
    Ok(Sequence {
        mesh: Arc::new(mesh),
        skeleton,
        frames,
        ground_truth: doc.ground_truth,
        times: (0..n).map(|i| i as f64 / n.max(1) as f64).collect(),
    })
}
