//! Joint optimization of the field, the embedding network, the latent codes
//! and the per-frame poses against a monocular frame sequence.
//!
//! Every step visits one frame (round-robin), draws a batch of pixels biased
//! towards the padded keypoint bounding box, renders them on the frame's
//! current posed mesh and takes one Adam step on the photometric loss plus a
//! quadratic pull of each pose towards its initialization. All randomness in
//! a step comes from a stream seeded by `(seed, iteration)`, so a run resumed
//! from a checkpoint replays exactly.

mod checkpoint;
mod log;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use log::{TrainLog, LOG_HEADER};

use crate::autodiff::{adam_step, Gradients, LrMap, ParamStore};
use crate::embedding::EmbeddingConfig;
use crate::field::{FieldConfig, RadianceField};
use crate::image::{Image, Mask};
use crate::metrics::{psnr, MetricReport, Split};
use crate::pipeline::{
    init_model_store, photometric_batch, plan_rays, pose_gradient, stream_seed, Model, Ray, RenderSettings,
    TrainRay,
};
use crate::render::{render_image, Camera, RenderedImage};
use crate::rig::{Pose, RiggedMesh, Skeleton};
use crate::spatial::PosedMesh;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the pose regularizer.
    pub pose_weight: f64,
    /// Learning rate of the field, the embedding network and the latents.
    pub lr_field: f64,
    pub lr_pose: f64,
    pub rays_per_batch: usize,
    pub iterations: u64,
    /// Scale applied to the keypoint bounding box around its center.
    pub bbox_pad: f64,
    /// Probability of drawing a pixel from the padded bounding box.
    pub bbox_prob: f64,
    pub seed: u64,
    /// Keep every pose at its initialization.
    pub freeze_poses: bool,
    /// Iterations between PSNR probes of frame 0; 0 disables probing.
    pub probe_every: u64,
    pub embedding: EmbeddingConfig,
    pub field: FieldConfig,
    pub render: RenderSettings,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            pose_weight: 2.0,
            lr_field: 1e-4,
            lr_pose: 5e-4,
            rays_per_batch: 1024,
            iterations: 20_000,
            bbox_pad: 1.2,
            bbox_prob: 0.7,
            seed: 0,
            freeze_poses: false,
            probe_every: 0,
            embedding: EmbeddingConfig::default(),
            field: FieldConfig::default(),
            render: RenderSettings::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.bbox_prob) {
            return Err(Error::Config("bbox_prob must lie in [0, 1]".into()));
        }
        if !(self.bbox_pad.is_finite() && self.bbox_pad > 0.0) {
            return Err(Error::Config("bbox_pad must be positive".into()));
        }
        for (name, lr) in [("lr_field", self.lr_field), ("lr_pose", self.lr_pose)] {
            if !(lr.is_finite() && lr >= 0.0) {
                return Err(Error::Config(format!("{name} must be a non-negative number")));
            }
        }
        if !(self.pose_weight.is_finite() && self.pose_weight >= 0.0) {
            return Err(Error::Config("pose_weight must be non-negative".into()));
        }
        if self.rays_per_batch == 0 {
            return Err(Error::Config("rays_per_batch must be positive".into()));
        }
        self.embedding.validate()?;
        self.field.validate()?;
        self.render.validate()
    }

    pub fn lr_map(&self) -> LrMap {
        let pose = if self.freeze_poses { 0.0 } else { self.lr_pose };
        LrMap::new(&[
            ("field", self.lr_field),
            ("psi", self.lr_field),
            ("latents", self.lr_field),
            ("pose", pose),
        ])
    }
}

/// One training image with its camera and pose initialization. The current
/// pose lives in the parameter store as `pose/<index>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub image: Image,
    pub mask: Option<Mask>,
    pub camera: Camera,
    pub initial_pose: Pose,
    /// Projected joints in pixel coordinates.
    pub keypoints: Vec<[f64; 2]>,
}

/// The rig and the frames a run trains against.
#[derive(Clone, Debug)]
pub struct Scene {
    pub mesh: Arc<RiggedMesh>,
    pub skeleton: Skeleton,
    pub frames: Vec<Frame>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Argument("a scene needs at least one frame".into()));
        }
        if self.mesh.parts() != self.skeleton.len() {
            return Err(Error::Shape {
                name: "skinning parts".into(),
                expected: self.skeleton.len(),
                actual: self.mesh.parts(),
            });
        }
        for (i, f) in self.frames.iter().enumerate() {
            f.camera.validate()?;
            if f.initial_pose.rotations.len() != self.skeleton.len() {
                return Err(Error::Shape {
                    name: format!("initial pose of frame {i}"),
                    expected: self.skeleton.len(),
                    actual: f.initial_pose.rotations.len(),
                });
            }
            if f.image.width != f.camera.width || f.image.height != f.camera.height {
                return Err(Error::Argument(format!("frame {i} image does not match its camera")));
            }
        }
        Ok(())
    }
}

pub fn pose_name(frame: usize) -> String {
    format!("pose/{frame}")
}

/// Everything a run needs to continue: configuration, rig, per-frame
/// cameras and initial poses, and the parameters with their moments.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub config: TrainConfig,
    pub field: RadianceField,
    pub mesh: Arc<RiggedMesh>,
    pub skeleton: Skeleton,
    pub cameras: Vec<Camera>,
    pub initial_poses: Vec<Pose>,
    pub store: ParamStore,
    /// Number of completed steps.
    pub iteration: u64,
    posed_cache: Vec<Option<(Vec<f64>, Arc<PosedMesh>)>>,
}

impl TrainState {
    /// Fresh parameters for `scene`; every pose starts at its initialization.
    pub fn new(config: TrainConfig, scene: &Scene) -> Result<Self> {
        config.validate()?;
        scene.validate()?;
        if scene.mesh.latent_dim() != config.embedding.latent_dim {
            return Err(Error::Config(format!(
                "embedding latent_dim {} differs from the rig's {}",
                config.embedding.latent_dim,
                scene.mesh.latent_dim()
            )));
        }
        let field = RadianceField::new(config.embedding.clone(), config.field.clone())?;
        let mut store = init_model_store(config.seed, &field, scene.mesh.vertex_count())?;
        for (i, f) in scene.frames.iter().enumerate() {
            store.insert(pose_name(i), f.initial_pose.to_flat())?;
        }
        Ok(TrainState {
            field,
            mesh: scene.mesh.clone(),
            skeleton: scene.skeleton.clone(),
            cameras: scene.frames.iter().map(|f| f.camera.clone()).collect(),
            initial_poses: scene.frames.iter().map(|f| f.initial_pose.clone()).collect(),
            posed_cache: vec![None; scene.frames.len()],
            store,
            iteration: 0,
            config,
        })
    }

    pub(crate) fn from_parts(
        config: TrainConfig,
        mesh: Arc<RiggedMesh>,
        skeleton: Skeleton,
        cameras: Vec<Camera>,
        initial_poses: Vec<Pose>,
        store: ParamStore,
        iteration: u64,
    ) -> Result<Self> {
        config.validate()?;
        let field = RadianceField::new(config.embedding.clone(), config.field.clone())?;
        let n = cameras.len();
        if initial_poses.len() != n {
            return Err(Error::Shape { name: "initial poses".into(), expected: n, actual: initial_poses.len() });
        }
        let model = Model::<f64>::from_store(&field, &store)?;
        let want = mesh.vertex_count() * field.embedding.latent_dim;
        if model.latents.len() != want {
            return Err(Error::Shape { name: "latents".into(), expected: want, actual: model.latents.len() });
        }
        for i in 0..n {
            let p = store.require(&pose_name(i))?;
            Pose::from_flat(skeleton.len(), p)?;
        }
        Ok(TrainState {
            config,
            field,
            mesh,
            skeleton,
            cameras,
            initial_poses,
            store,
            iteration,
            posed_cache: vec![None; n],
        })
    }

    pub fn frame_count(&self) -> usize {
        self.cameras.len()
    }

    /// Current pose of frame `i`.
    pub fn pose(&self, i: usize) -> Result<Pose> {
        Pose::from_flat(self.skeleton.len(), self.store.require(&pose_name(i))?)
    }

    pub fn poses(&self) -> Result<Vec<Pose>> {
        (0..self.frame_count()).map(|i| self.pose(i)).collect()
    }

    /// The working-precision model built from the current parameters.
    pub fn model(&self) -> Result<Model<f32>> {
        Model::from_store(&self.field, &self.store)
    }

    pub fn model_f64(&self) -> Result<Model<f64>> {
        Model::from_store(&self.field, &self.store)
    }

    /// Posed mesh of frame `i`, rebuilt only when its pose changed since the
    /// last visit.
    pub fn posed(&mut self, i: usize) -> Result<Arc<PosedMesh>> {
        let flat = self.store.require(&pose_name(i))?.to_vec();
        if let Some((cached, posed)) = &self.posed_cache[i] {
            if *cached == flat {
                return Ok(posed.clone());
            }
        }
        let pose = Pose::from_flat(self.skeleton.len(), &flat)?;
        let posed = Arc::new(PosedMesh::from_pose(self.mesh.clone(), &self.skeleton, &pose)?);
        self.posed_cache[i] = Some((flat, posed.clone()));
        Ok(posed)
    }

    /// `||theta_i - theta0_i||` for every frame.
    pub fn pose_drift(&self) -> Result<Vec<f64>> {
        (0..self.frame_count())
            .map(|i| {
                let cur = self.store.require(&pose_name(i))?;
                let init = self.initial_poses[i].to_flat();
                Ok(cur.iter().zip(&init).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            })
            .collect()
    }

    /// Renders frame `i`'s camera at pose `pose` with the image seed of the
    /// run, as used by the PSNR probe and the `render` command.
    pub fn render_view(&self, camera: &Camera, pose: &Pose) -> Result<RenderedImage> {
        let posed = PosedMesh::from_pose(self.mesh.clone(), &self.skeleton, pose)?;
        let model = self.model()?;
        render_image(camera, &posed, &model, &self.config.render, self.config.seed)
    }
}

/// Pixels for one batch: each is drawn from the padded keypoint bounding box
/// with probability `bbox_prob`, otherwise uniformly over the image. A
/// bounding box with zero area falls back to uniform sampling.
pub fn sample_training_rays<R: Rng>(
    frame: &Frame,
    n: usize,
    bbox_pad: f64,
    bbox_prob: f64,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let (w, h) = (frame.image.width, frame.image.height);
    let bbox = keypoint_box(&frame.keypoints, bbox_pad, w, h);
    (0..n)
        .map(|_| {
            let in_box = rng.random::<f64>() < bbox_prob;
            match (in_box, bbox) {
                (true, Some((u0, u1, v0, v1))) => (rng.random_range(u0..u1), rng.random_range(v0..v1)),
                _ => (rng.random_range(0..w), rng.random_range(0..h)),
            }
        })
        .collect()
}

/// Half-open pixel ranges `(u0, u1, v0, v1)` covered by the padded box,
/// clipped to the image; `None` when the box has no area.
pub fn keypoint_box(keypoints: &[[f64; 2]], pad: f64, w: usize, h: usize) -> Option<(usize, usize, usize, usize)> {
    if keypoints.is_empty() {
        return None;
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for k in keypoints {
        for a in 0..2 {
            lo[a] = lo[a].min(k[a]);
            hi[a] = hi[a].max(k[a]);
        }
    }
    if !(hi[0] > lo[0] && hi[1] > lo[1]) {
        return None;
    }
    let range = |a: usize, size: usize| {
        let c = 0.5 * (lo[a] + hi[a]);
        let half = 0.5 * (hi[a] - lo[a]) * pad;
        let start = (c - half).floor().clamp(0.0, size as f64) as usize;
        let end = (c + half).ceil().clamp(0.0, size as f64) as usize;
        (start, end)
    };
    let (u0, u1) = range(0, w);
    let (v0, v1) = range(1, h);
    (u1 > u0 && v1 > v0).then_some((u0, u1, v0, v1))
}

/// `sum ||c - t||^2` over matched color lists.
pub fn photometric_loss(colors: &[[f64; 3]], targets: &[[f64; 3]]) -> Result<f64> {
    if colors.len() != targets.len() {
        return Err(Error::Shape { name: "target colors".into(), expected: colors.len(), actual: targets.len() });
    }
    Ok(colors
        .iter()
        .zip(targets)
        .map(|(c, t)| (0..3).map(|k| (c[k] - t[k]) * (c[k] - t[k])).sum::<f64>())
        .sum())
}

/// `weight * sum_i ||theta_i - theta0_i||^2` over flat pose vectors, with
/// its gradient `2 weight (theta - theta0)` per pose.
pub fn pose_regularizer(poses: &[Vec<f64>], initial: &[Vec<f64>], weight: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    if poses.len() != initial.len() {
        return Err(Error::Shape { name: "initial poses".into(), expected: poses.len(), actual: initial.len() });
    }
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(poses.len());
    for (p, p0) in poses.iter().zip(initial) {
        if p.len() != p0.len() {
            return Err(Error::Shape { name: "pose".into(), expected: p0.len(), actual: p.len() });
        }
        let mut g = Vec::with_capacity(p.len());
        for (a, b) in p.iter().zip(p0) {
            value += weight * (a - b) * (a - b);
            g.push(2.0 * weight * (a - b));
        }
        grads.push(g);
    }
    Ok((value, grads))
}

/// Scalars reported by one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepLog {
    /// 1-based index of the completed step.
    pub iteration: u64,
    pub frame: usize,
    pub loss: f64,
    pub photo: f64,
    pub reg: f64,
    /// Per-frame `||theta - theta0||` after the update.
    pub pose_drift: Vec<f64>,
    pub psnr_probe: Option<f64>,
}

impl StepLog {
    pub fn mean_drift(&self) -> f64 {
        self.pose_drift.iter().sum::<f64>() / self.pose_drift.len().max(1) as f64
    }
}

/// Stream tags that keep the per-step random streams apart.
const TAG_PIXELS: u64 = 1;
const TAG_RAYS: u64 = 2;

/// One optimization step on frame `iteration % frames`.
///
/// On a non-finite loss or gradient the state is left untouched and a
/// [`Error::Numerical`] names the iteration, the frame and the offending
/// rays.
pub fn train_step(state: &mut TrainState, scene: &Scene) -> Result<StepLog> {
    let n_frames = state.frame_count();
    if scene.frames.len() != n_frames {
        return Err(Error::Shape { name: "frames".into(), expected: n_frames, actual: scene.frames.len() });
    }
    let it = state.iteration;
    let fi = (it % n_frames as u64) as usize;
    let frame = &scene.frames[fi];
    let cfg = state.config.clone();
    let seed = cfg.seed;

    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(&[seed, it, TAG_PIXELS]));
    let pixels = sample_training_rays(frame, cfg.rays_per_batch, cfg.bbox_pad, cfg.bbox_prob, &mut rng);
    let rays: Vec<Ray> = pixels
        .iter()
        .enumerate()
        .map(|(k, &(u, v))| {
            let (origin, dir) = frame.camera.ray(u, v);
            Ray { origin, dir, seed: stream_seed(&[seed, it, TAG_RAYS, k as u64]) }
        })
        .collect();
    let targets: Vec<[f64; 3]> = pixels.iter().map(|&(u, v)| frame.image.get(u, v)).collect();

    let posed = state.posed(fi)?;
    let model = state.model()?;
    let plans = plan_rays(&model, &posed, &rays, &cfg.render)?;
    let mut train_rays = Vec::with_capacity(rays.len());
    let mut hit_index = Vec::with_capacity(rays.len());
    // Rays that miss the mesh render black and contribute a constant.
    let mut miss_loss = 0.0;
    for (k, plan) in plans.into_iter().enumerate() {
        match plan {
            Some(plan) => {
                train_rays.push(TrainRay { plan, target: targets[k] });
                hit_index.push(k);
            }
            None => miss_loss += targets[k].iter().map(|c| c * c).sum::<f64>(),
        }
    }
    let batch = photometric_batch(&model, &posed, &train_rays, &cfg.render)?;
    let photo = batch.loss + miss_loss;

    let pose = state.pose(fi)?;
    let mut grads: Gradients = state.store.zero_gradients();
    grads.get_mut("field").expect("field array").copy_from_slice(&batch.grad_phi);
    grads.get_mut("psi").expect("psi array").copy_from_slice(&batch.grad_psi);
    grads.get_mut("latents").expect("latents array").copy_from_slice(&batch.grad_latents);
    let poses: Vec<Vec<f64>> = (0..n_frames)
        .map(|i| state.store.require(&pose_name(i)).map(<[f64]>::to_vec))
        .collect::<Result<_>>()?;
    let initial: Vec<Vec<f64>> = state.initial_poses.iter().map(Pose::to_flat).collect();
    let (reg, reg_grads) = pose_regularizer(&poses, &initial, cfg.pose_weight)?;
    if !cfg.freeze_poses {
        let photo_pose = pose_gradient(&state.skeleton, &posed, &pose, &batch.adjoints);
        let g = grads.get_mut(&pose_name(fi)).expect("pose array");
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = photo_pose[j] + reg_grads[fi][j];
        }
        // Frames not visited this step still feel their regularizer.
        for (i, rg) in reg_grads.iter().enumerate().filter(|(i, _)| *i != fi) {
            grads.get_mut(&pose_name(i)).expect("pose array").copy_from_slice(rg);
        }
    }
    let loss = photo + reg;
    if !loss.is_finite() || !batch.nonfinite_rays.is_empty() || !grads.is_finite() {
        let bad: Vec<usize> = batch.nonfinite_rays.iter().map(|&r| hit_index[r]).collect();
        return Err(Error::Numerical(format!(
            "non-finite loss or gradient at iteration {it}, frame {fi} (loss {loss}, photo {photo}, reg {reg}); offending rays {bad:?}"
        )));
    }
    adam_step(&mut state.store, &grads, &cfg.lr_map())?;
    state.iteration = it + 1;

    let psnr_probe = if cfg.probe_every > 0 && state.iteration % cfg.probe_every == 0 {
        Some(probe_psnr(state, scene)?)
    } else {
        None
    };
    Ok(StepLog {
        iteration: state.iteration,
        frame: fi,
        loss,
        photo,
        reg,
        pose_drift: state.pose_drift()?,
        psnr_probe,
    })
}

/// PSNR of a full render of frame 0 at its current pose.
pub fn probe_psnr(state: &TrainState, scene: &Scene) -> Result<f64> {
    let frame = &scene.frames[0];
    let rendered = state.render_view(&frame.camera, &state.pose(0)?)?;
    psnr(&rendered.image, &frame.image)
}

/// Runs steps until `state.iteration` reaches `until`, reporting each one to
/// `on_step`.
pub fn train(
    state: &mut TrainState,
    scene: &Scene,
    until: u64,
    mut on_step: impl FnMut(&TrainState, &StepLog) -> Result<()>,
) -> Result<()> {
    while state.iteration < until {
        let log = train_step(state, scene)?;
        on_step(state, &log)?;
    }
    Ok(())
}

/// Renders each frame through its camera at the matching pose and scores it
/// against the frame image, inside the frame masks when `masked` is set.
pub fn evaluate_frames(
    state: &TrainState,
    frames: &[Frame],
    poses: &[Pose],
    split: Split,
    masked: bool,
) -> Result<MetricReport> {
    if frames.len() != poses.len() {
        return Err(Error::Shape { name: "poses".into(), expected: frames.len(), actual: poses.len() });
    }
    let rendered =
        frames.iter().zip(poses).map(|(f, p)| render_frame(state, &f.camera, p)).collect::<Result<Vec<_>>>()?;
    let truth: Vec<Image> = frames.iter().map(|f| f.image.clone()).collect();
    let masks = if masked {
        Some(
            frames
                .iter()
                .map(|f| f.mask.clone().ok_or_else(|| Error::Argument("masked evaluation needs frame masks".into())))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    MetricReport::compute(split, &rendered, &truth, masks.as_deref())
}

/// Renders every pixel of `frame`'s camera at `pose`; shared by evaluation
/// code that needs a single frame.
pub fn render_frame(state: &TrainState, camera: &Camera, pose: &Pose) -> Result<Image> {
    Ok(state.render_view(camera, pose)?.image)
}
