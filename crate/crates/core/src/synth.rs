//! Synthetic ground truth: a ray-traced, shaded rendering of the posed
//! procedural body, and monocular sequences built from it.
//!
//! Shading is Lambertian with one directional light fixed in the body's
//! canonical frame, so a surface point keeps its color in every pose. Frames
//! are quantized to 8 bits so that the in-memory sequence matches what is
//! written to disk.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::image::{Image, Mask};
use crate::par::{self, Parallelism};
use crate::pipeline::stream_seed;
use crate::render::Camera;
use crate::rig::body::joints;
use crate::rig::{make_procedural_body, BodyConfig, Pose, RiggedMesh, Skeleton};
use crate::spatial::PosedMesh;
use crate::trainer::Frame;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Shading {
    /// Direction towards the light in canonical body coordinates.
    pub light: [f64; 3],
    /// Fraction of the albedo seen by surfaces facing away from the light.
    pub ambient: f64,
}

impl Default for Shading {
    fn default() -> Self {
        Shading { light: [0.3, 0.5, 0.8], ambient: 0.35 }
    }
}

impl Shading {
    /// Brightness factor for a unit surface normal.
    pub fn factor(&self, normal: &Vector3<f64>) -> f64 {
        let l = Vector3::from(self.light).normalize();
        self.ambient + (1.0 - self.ambient) * normal.dot(&l).max(0.0)
    }
}

/// Albedo times the shading factor of each vertex's canonical normal.
pub fn shaded_vertex_colors(mesh: &RiggedMesh, shading: &Shading) -> Vec<[f64; 3]> {
    mesh.vertex_normals()
        .iter()
        .zip(mesh.colors())
        .map(|(n, c)| {
            let f = shading.factor(n);
            c.map(|x| x * f)
        })
        .collect()
}

/// Nearest-hit rendering of the posed mesh with barycentric color
/// interpolation; the mask marks pixels whose ray hits the mesh.
pub fn rasterize_ground_truth(posed: &PosedMesh, camera: &Camera, shading: &Shading) -> (Image, Mask) {
    let colors = shaded_vertex_colors(posed.mesh(), shading);
    let mut image = Image::new(camera.width, camera.height);
    let mut mask = Mask::new(camera.width, camera.height);
    let tris = posed.triangles();
    for v in 0..camera.height {
        for u in 0..camera.width {
            let (o, d) = camera.ray(u, v);
            if let Some(hit) = posed.bvh().first_hit(posed.positions(), tris, &o, &d) {
                let tri = tris[hit.triangle];
                let mut c = [0.0; 3];
                for (k, &w) in hit.barycentric.iter().enumerate() {
                    let vc = colors[tri[k] as usize];
                    for ch in 0..3 {
                        c[ch] += w * vc[ch];
                    }
                }
                image.set(u, v, c);
                mask.data[v * camera.width + u] = true;
            }
        }
    }
    (image, mask)
}

/// A pose at time `t` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub time: f64,
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    /// The body turns about the vertical axis `turns` times while the arms
    /// and legs swing by `swing` radians. Limb motion assumes the default
    /// body layout and is skipped for other skeletons.
    Turning { turns: f64, swing: f64 },
    /// Piecewise-linear interpolation of flat pose vectors, held constant
    /// outside the first and last key.
    Keyframes { keys: Vec<Keyframe> },
}

impl Default for Trajectory {
    fn default() -> Self {
        Trajectory::Turning { turns: 1.0, swing: 0.25 }
    }
}

impl Trajectory {
    pub fn pose_at(&self, t: f64, joint_count: usize) -> Result<Pose> {
        match self {
            Trajectory::Turning { turns, swing } => {
                let mut pose = Pose::rest(joint_count);
                pose.rotations[0] = [0.0, TAU * turns * t, 0.0];
                if joint_count == joints::COUNT {
                    let s = (2.0 * TAU * t).sin() * swing;
                    pose.rotations[joints::L_SHOULDER] = [0.0, 0.0, -0.55 + s];
                    pose.rotations[joints::L_ELBOW] = [0.0, -0.6, 0.0];
                    pose.rotations[joints::R_SHOULDER] = [0.0, 0.0, 1.15 - 0.5 * s];
                    pose.rotations[joints::R_ELBOW] = [0.0, 0.0, 0.35];
                    pose.rotations[joints::L_HIP] = [0.6 * s, 0.0, -0.05];
                    pose.rotations[joints::R_HIP] = [-0.6 * s, 0.0, 0.05];
                    pose.rotations[joints::L_KNEE] = [0.3 + 0.5 * s.max(0.0), 0.0, 0.0];
                    pose.rotations[joints::R_KNEE] = [0.3 + 0.5 * (-s).max(0.0), 0.0, 0.0];
                }
                Ok(pose)
            }
            Trajectory::Keyframes { keys } => {
                let first = keys.first().ok_or_else(|| Error::Config("keyframe trajectory is empty".into()))?;
                for k in keys {
                    if k.pose.rotations.len() != joint_count {
                        return Err(Error::Shape {
                            name: "keyframe pose".into(),
                            expected: joint_count,
                            actual: k.pose.rotations.len(),
                        });
                    }
                }
                if keys.windows(2).any(|w| !(w[1].time > w[0].time)) {
                    return Err(Error::Config("keyframe times must increase".into()));
                }
                let last = keys.last().expect("non-empty");
                if t <= first.time {
                    return Ok(first.pose.clone());
                }
                if t >= last.time {
                    return Ok(last.pose.clone());
                }
                let i = keys.windows(2).position(|w| t < w[1].time).expect("t inside the key range");
                let (a, b) = (&keys[i], &keys[i + 1]);
                let s = (t - a.time) / (b.time - a.time);
                let flat: Vec<f64> =
                    a.pose.to_flat().iter().zip(b.pose.to_flat()).map(|(x, y)| x + s * (y - x)).collect();
                Pose::from_flat(joint_count, &flat)
            }
        }
    }
}

/// A fixed camera on the `+z` side of the body, looking at it horizontally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub distance: f64,
    /// Height of both the eye and the look-at target.
    pub height: f64,
    /// Vertical field of view in degrees.
    pub fov_deg: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        CameraSpec { distance: 4.2, height: 0.9, fov_deg: 30.0 }
    }
}

impl CameraSpec {
    pub fn camera(&self, size: usize) -> Result<Camera> {
        Camera::look_at(
            Vector3::new(0.0, self.height, self.distance),
            Vector3::new(0.0, self.height, 0.0),
            Vector3::y(),
            self.fov_deg.to_radians(),
            size,
            size,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceSpec {
    pub frames: usize,
    pub image_size: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian noise added to every joint
    /// rotation component of the initial poses.
    pub pose_noise: f64,
    pub trajectory: Trajectory,
    pub camera: CameraSpec,
    pub body: BodyConfig,
    pub shading: Shading,
}

impl Default for SequenceSpec {
    fn default() -> Self {
        SequenceSpec {
            frames: 8,
            image_size: 64,
            seed: 0,
            pose_noise: 0.0,
            trajectory: Trajectory::default(),
            camera: CameraSpec::default(),
            body: BodyConfig::default(),
            shading: Shading::default(),
        }
    }
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::Config("a sequence needs at least one frame".into()));
        }
        if self.image_size == 0 {
            return Err(Error::Config("image_size must be positive".into()));
        }
        if !(self.pose_noise.is_finite() && self.pose_noise >= 0.0) {
            return Err(Error::Config("pose_noise must be non-negative".into()));
        }
        self.body.validate()
    }

    /// Times of the training frames, `i / frames`.
    pub fn training_times(&self) -> Vec<f64> {
        (0..self.frames).map(|i| i as f64 / self.frames as f64).collect()
    }

    /// Times halfway between consecutive training frames.
    pub fn novel_times(&self) -> Vec<f64> {
        (0..self.frames).map(|i| (i as f64 + 0.5) / self.frames as f64).collect()
    }
}

/// Rendered frames with the rig and the ground-truth poses they came from.
#[derive(Clone, Debug)]
pub struct Sequence {
    pub mesh: Arc<RiggedMesh>,
    pub skeleton: Skeleton,
    pub frames: Vec<Frame>,
    pub ground_truth: Vec<Pose>,
    pub times: Vec<f64>,
}

impl Sequence {
    pub fn scene(&self) -> crate::trainer::Scene {
        crate::trainer::Scene { mesh: self.mesh.clone(), skeleton: self.skeleton.clone(), frames: self.frames.clone() }
    }
}

/// Independent Gaussian noise of standard deviation `sigma` on every joint
/// rotation component; the root translation is left alone.
pub fn perturb_pose<R: Rng>(pose: &Pose, sigma: f64, rng: &mut R) -> Result<Pose> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Argument(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(pose.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Argument(e.to_string()))?;
    let mut out = pose.clone();
    for r in &mut out.rotations {
        for c in r.iter_mut() {
            *c += normal.sample(rng);
        }
    }
    Ok(out)
}

/// World positions of the skeleton joints under `posed`'s transforms.
pub fn joint_positions(skeleton: &Skeleton, posed: &PosedMesh) -> Vec<Vector3<f64>> {
    skeleton
        .rest_positions()
        .iter()
        .enumerate()
        .map(|(k, p)| Vector3::from(posed.transforms().0[k].apply(p)))
        .collect()
}

/// Joints projected into the image; joints behind the camera are skipped.
pub fn project_keypoints(skeleton: &Skeleton, posed: &PosedMesh, camera: &Camera) -> Vec<[f64; 2]> {
    joint_positions(skeleton, posed)
        .iter()
        .filter_map(|p| camera.project(p))
        .map(|(x, y)| [x, y])
        .collect()
}

/// Geodesic angle between the rotations of each joint.
pub fn joint_angle_errors(a: &Pose, b: &Pose) -> Vec<f64> {
    a.rotations
        .iter()
        .zip(&b.rotations)
        .map(|(x, y)| {
            let rx = Rotation3::from_scaled_axis(Vector3::from(*x));
            let ry = Rotation3::from_scaled_axis(Vector3::from(*y));
            rx.rotation_to(&ry).angle()
        })
        .collect()
}

/// Mean per-joint angular error over all frames and joints.
pub fn mean_joint_angle_error(estimates: &[Pose], truth: &[Pose]) -> f64 {
    let errs: Vec<f64> = estimates.iter().zip(truth).flat_map(|(a, b)| joint_angle_errors(a, b)).collect();
    errs.iter().sum::<f64>() / errs.len().max(1) as f64
}

const TAG_NOISE: u64 = 0x6e6f;

/// Renders the frames at the given trajectory times. Initial poses carry
/// `pose_noise` when `noisy` is set and equal the ground truth otherwise.
pub fn generate_frames(spec: &SequenceSpec, times: &[f64], noisy: bool) -> Result<Sequence> {
    spec.validate()?;
    let (mesh, skeleton) = make_procedural_body(spec.seed, &spec.body)?;
    let mesh = Arc::new(mesh);
    let camera = spec.camera.camera(spec.image_size)?;
    let truth: Vec<Pose> =
        times.iter().map(|&t| spec.trajectory.pose_at(t, skeleton.len())).collect::<Result<_>>()?;
    let frames = par::map(&truth, Parallelism::Parallel, |i, pose| -> Result<Frame> {
        let posed = PosedMesh::from_pose(mesh.clone(), &skeleton, pose)?;
        let (image, mask) = rasterize_ground_truth(&posed, &camera, &spec.shading);
        let sigma = if noisy { spec.pose_noise } else { 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(&[spec.seed, i as u64, TAG_NOISE]));
        Ok(Frame {
            image: image.quantized(),
            mask: Some(mask),
            camera: camera.clone(),
            initial_pose: perturb_pose(pose, sigma, &mut rng)?,
            keypoints: project_keypoints(&skeleton, &posed, &camera),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Sequence { mesh, skeleton, frames, ground_truth: truth, times: times.to_vec() })
}

/// Training frames at `i / frames` with noisy initial poses.
pub fn generate_sequence(spec: &SequenceSpec) -> Result<Sequence> {
    generate_frames(spec, &spec.training_times(), true)
}

/// Held-out frames halfway between the training times, initialized at the
/// ground truth.
pub fn generate_novel_pose_sequence(spec: &SequenceSpec) -> Result<Sequence> {
    generate_frames(spec, &spec.novel_times(), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rig::PartTransforms;

    fn triangle_mesh(color: [f64; 3]) -> RiggedMesh {
        RiggedMesh::new(
            vec![Vector3::new(-100.0, -100.0, 0.0), Vector3::new(100.0, -100.0, 0.0), Vector3::new(0.0, 100.0, 0.0)],
            vec![[0, 1, 2]],
            1,
            vec![1.0; 3],
            vec![color; 3],
            1,
        )
        .unwrap()
    }

    fn posed_static(mesh: RiggedMesh) -> PosedMesh {
        PosedMesh::new(Arc::new(mesh), PartTransforms::identity(1)).unwrap()
    }

    fn front_camera(size: usize) -> Camera {
        Camera::look_at(Vector3::new(0.0, 0.0, 3.0), Vector3::zeros(), Vector3::y(), 0.8, size, size).unwrap()
    }

    #[test]
    fn mesh_without_triangles_renders_black() {
        let mesh = RiggedMesh::new(vec![Vector3::zeros()], vec![], 1, vec![1.0], vec![], 1).unwrap();
        let (img, mask) = rasterize_ground_truth(&posed_static(mesh), &front_camera(8), &Shading::default());
        assert!(img.pixels.iter().all(|p| *p == [0.0; 3]));
        assert_eq!(mask.count(), 0);
    }

    #[test]
    fn full_screen_triangle_gets_the_lambert_factor() {
        let posed = posed_static(triangle_mesh([1.0, 0.0, 0.0]));
        let cam = front_camera(8);
        let head_on = Shading { light: [0.0, 0.0, 1.0], ambient: 0.35 };
        let (img, mask) = rasterize_ground_truth(&posed, &cam, &head_on);
        assert_eq!(mask.count(), 64);
        for p in &img.pixels {
            assert!((p[0] - 1.0).abs() < 1e-12 && p[1] == 0.0 && p[2] == 0.0);
        }
        // Light at 60 degrees from the normal: 0.35 + 0.65 cos(60).
        let oblique = Shading { light: [3f64.sqrt() / 2.0, 0.0, 0.5], ambient: 0.35 };
        let (img, _) = rasterize_ground_truth(&posed, &cam, &oblique);
        for p in &img.pixels {
            assert!((p[0] - (0.35 + 0.65 * 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn coverage_grows_as_the_camera_approaches() {
        let (mesh, skel) = make_procedural_body(0, &BodyConfig::default()).unwrap();
        let posed = PosedMesh::from_pose(Arc::new(mesh), &skel, &Pose::rest(skel.len())).unwrap();
        let mut prev = 0;
        for d in [6.0, 4.5, 3.5, 2.8] {
            let cam = CameraSpec { distance: d, ..CameraSpec::default() }.camera(48).unwrap();
            let (_, mask) = rasterize_ground_truth(&posed, &cam, &Shading::default());
            assert!(mask.count() > prev, "distance {d}: {} <= {prev}", mask.count());
            prev = mask.count();
        }
    }

    #[test]
    fn zero_noise_keeps_the_ground_truth() {
        let spec = SequenceSpec { frames: 2, image_size: 24, ..SequenceSpec::default() };
        let seq = generate_sequence(&spec).unwrap();
        for (f, gt) in seq.frames.iter().zip(&seq.ground_truth) {
            assert_eq!(&f.initial_pose, gt);
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let spec = SequenceSpec { frames: 3, image_size: 24, pose_noise: 0.05, ..SequenceSpec::default() };
        let a = generate_sequence(&spec).unwrap();
        let b = generate_sequence(&spec).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_ne!(a.frames[0].initial_pose, a.ground_truth[0]);
        assert_eq!(a.frames[0].initial_pose.translation, a.ground_truth[0].translation);
    }

    #[test]
    fn turning_silhouette_centroid_oscillates_once() {
        let spec = SequenceSpec { frames: 16, image_size: 48, ..SequenceSpec::default() };
        let seq = generate_sequence(&spec).unwrap();
        let xs: Vec<f64> = seq
            .frames
            .iter()
            .map(|f| {
                let m = f.mask.as_ref().unwrap();
                let (mut s, mut n) = (0.0, 0.0);
                for (i, &b) in m.data.iter().enumerate() {
                    if b {
                        s += (i % m.width) as f64;
                        n += 1.0;
                    }
                }
                s / n
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let signs: Vec<bool> = xs.iter().map(|x| *x > mean).collect();
        let changes = (0..signs.len()).filter(|&i| signs[i] != signs[(i + 1) % signs.len()]).count();
        assert_eq!(changes, 2, "centroids {xs:?}");
    }

    #[test]
    fn keypoints_stay_inside_the_default_image() {
        let spec = SequenceSpec { frames: 16, image_size: 32, ..SequenceSpec::default() };
        for times in [spec.training_times(), spec.novel_times()] {
            let seq = generate_frames(&spec, &times, false).unwrap();
            for f in &seq.frames {
                assert_eq!(f.keypoints.len(), seq.skeleton.len());
                for k in &f.keypoints {
                    assert!(k[0] > 0.0 && k[0] < 32.0 && k[1] > 0.0 && k[1] < 32.0, "{k:?}");
                }
            }
        }
    }

    #[test]
    fn perturbation_variance_matches_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = Pose::rest(1);
        let sigma = 0.08;
        let n = 100_000 / 3 + 1;
        let mut samples = Vec::with_capacity(3 * n);
        for _ in 0..n {
            let p = perturb_pose(&base, sigma, &mut rng).unwrap();
            samples.extend_from_slice(&p.rotations[0]);
            assert_eq!(p.translation, base.translation);
        }
        let var = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.02, "variance ratio {}", var / (sigma * sigma));
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(perturb_pose(&base, sigma, &mut a).unwrap(), perturb_pose(&base, sigma, &mut b).unwrap());
        assert_eq!(perturb_pose(&base, 0.0, &mut a).unwrap(), base);
        assert!(perturb_pose(&base, -1.0, &mut a).is_err());
    }

    #[test]
    fn keyframes_interpolate_linearly() {
        let mut p1 = Pose::rest(2);
        p1.rotations[1] = [0.4, 0.0, 0.0];
        let traj = Trajectory::Keyframes {
            keys: vec![Keyframe { time: 0.0, pose: Pose::rest(2) }, Keyframe { time: 1.0, pose: p1.clone() }],
        };
        let mid = traj.pose_at(0.25, 2).unwrap();
        assert!((mid.rotations[1][0] - 0.1).abs() < 1e-15);
        assert_eq!(traj.pose_at(2.0, 2).unwrap(), p1);
        let json = serde_json::to_string(&traj).unwrap();
        assert!(json.contains("\"kind\":\"keyframes\""));
    }

    #[test]
    fn angle_error_of_a_known_offset() {
        let a = Pose::rest(2);
        let mut b = Pose::rest(2);
        b.rotations[1] = [0.0, 0.3, 0.0];
        let e = joint_angle_errors(&a, &b);
        assert!(e[0].abs() < 1e-12 && (e[1] - 0.3).abs() < 1e-12);
    }
}
