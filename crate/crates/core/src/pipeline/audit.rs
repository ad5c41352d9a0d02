//! End-to-end gradient audit on a three-ray toy scene.
//!
//! The loss of a fixed batch of planned rays is differentiated analytically
//! and compared, group by group, against central finite differences of the
//! same loss in double precision.

use std::sync::Arc;

use nalgebra::Vector3;

use super::{init_model_store, photometric_batch, plan_rays, pose_gradient, Model, Ray, RenderSettings, TrainRay};
use crate::autodiff::{finite_diff_check, FdConfig, FdReport, ParamStore};
use crate::embedding::EmbeddingConfig;
use crate::field::{FieldConfig, RadianceField};
use crate::par::Parallelism;
use crate::render::Camera;
use crate::rig::body::joints;
use crate::rig::{make_procedural_body, BodyConfig, Pose, RiggedMesh, Skeleton};
use crate::spatial::PosedMesh;
use crate::{Error, Result};

/// A bent body, a small network and three planned rays with targets.
pub struct AuditScene {
    pub mesh: Arc<RiggedMesh>,
    pub skeleton: Skeleton,
    pub pose: Pose,
    pub field: RadianceField,
    pub store: ParamStore,
    pub rays: Vec<TrainRay>,
    pub settings: RenderSettings,
}

/// Parameter groups checked by the audit, in report order.
pub const AUDIT_GROUPS: [&str; 4] = ["field", "psi", "latents", "pose"];

impl AuditScene {
    pub fn new(embedding: EmbeddingConfig) -> Result<Self> {
        let body = BodyConfig { latent_dim: embedding.latent_dim, ..BodyConfig::default() };
        let (mesh, skeleton) = make_procedural_body(1, &body)?;
        let mesh = Arc::new(mesh);
        let mut pose = Pose::rest(skeleton.len());
        pose.rotations[joints::L_ELBOW] = [0.1, 0.2, 0.6];
        pose.rotations[joints::PELVIS] = [0.05, 0.3, -0.02];
        pose.rotations[joints::SPINE] = [0.1, -0.1, 0.05];
        pose.translation = [0.02, -0.01, 0.03];
        let field = RadianceField::new(embedding, FieldConfig { depth: 3, width: 16, skip_layer: Some(2) })?;
        let mut store = init_model_store(5, &field, mesh.vertex_count())?;
        // Larger latents so that group has a visible effect on the loss.
        for v in store.get_mut("latents").expect("latents array").iter_mut() {
            *v *= 30.0;
        }
        let posed = PosedMesh::from_pose(mesh.clone(), &skeleton, &pose)?;
        let cam = Camera::look_at(Vector3::new(0.3, 1.2, 2.5), Vector3::new(0.3, 1.2, 0.0), Vector3::y(), 0.8, 16, 16)?;
        let settings =
            RenderSettings { n_coarse: 6, n_fine: 4, parallelism: Parallelism::Sequential, ..Default::default() };
        let model = Model::<f64>::from_store(&field, &store)?;
        let targets = [[0.9, 0.2, 0.1], [0.1, 0.8, 0.3], [0.5, 0.5, 0.9]];
        // Rays through the shoulder, the bent arm and the chest.
        let aims = [(0.0, 1.4), (0.45, 1.38), (0.05, 1.1)];
        let rays: Vec<Ray> = aims
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let origin = cam.center();
                Ray { origin, dir: (Vector3::new(x, y, 0.0) - origin).normalize(), seed: i as u64 }
            })
            .collect();
        let rays = plan_rays(&model, &posed, &rays, &settings)?
            .into_iter()
            .zip(targets)
            .map(|(p, target)| {
                p.map(|plan| TrainRay { plan, target })
                    .ok_or_else(|| Error::Structure("audit ray missed the body".into()))
            })
            .collect::<Result<_>>()?;
        Ok(AuditScene { mesh, skeleton, pose, field, store, rays, settings })
    }

    /// Loss with one group replaced by `values`.
    pub fn loss_with(&self, group: &str, values: &[f64]) -> Result<f64> {
        let mut store = self.store.clone();
        let mut pose = self.pose.clone();
        if group == "pose" {
            pose = Pose::from_flat(self.skeleton.len(), values)?;
        } else {
            store
                .get_mut(group)
                .ok_or_else(|| Error::Argument(format!("unknown group {group}")))?
                .copy_from_slice(values);
        }
        let posed = PosedMesh::from_pose(self.mesh.clone(), &self.skeleton, &pose)?;
        let model = Model::<f64>::from_store(&self.field, &store)?;
        Ok(photometric_batch(&model, &posed, &self.rays, &self.settings)?.loss)
    }

    /// Loss and the analytic gradient of every group, in [`AUDIT_GROUPS`] order.
    pub fn analytic(&self) -> Result<(f64, Vec<Vec<f64>>)> {
        let posed = PosedMesh::from_pose(self.mesh.clone(), &self.skeleton, &self.pose)?;
        let model = Model::<f64>::from_store(&self.field, &self.store)?;
        let out = photometric_batch(&model, &posed, &self.rays, &self.settings)?;
        let g_pose = pose_gradient(&self.skeleton, &posed, &self.pose, &out.adjoints);
        Ok((out.loss, vec![out.grad_phi, out.grad_psi, out.grad_latents, g_pose]))
    }

    pub fn values(&self, group: &str) -> Result<Vec<f64>> {
        if group == "pose" {
            Ok(self.pose.to_flat())
        } else {
            Ok(self.store.require(group)?.to_vec())
        }
    }
}

/// Result of checking one parameter group.
#[derive(Clone, Debug)]
pub struct GroupReport {
    pub group: &'static str,
    pub report: FdReport,
    /// Gradient entries with magnitude above `1e-6`.
    pub active: usize,
}

/// Checks every group of the toy scene built for `embedding`.
pub fn gradient_audit(embedding: EmbeddingConfig, fd: &FdConfig) -> Result<Vec<GroupReport>> {
    let scene = AuditScene::new(embedding)?;
    let (_, grads) = scene.analytic()?;
    let mut out = Vec::with_capacity(AUDIT_GROUPS.len());
    for (group, grad) in AUDIT_GROUPS.iter().zip(&grads) {
        let x = scene.values(group)?;
        let report = finite_diff_check(|v| scene.loss_with(group, v).unwrap_or(f64::NAN), &x, grad, fd);
        out.push(GroupReport { group, report, active: grad.iter().filter(|g| g.abs() > 1e-6).count() });
    }
    Ok(out)
}

/// Finite-difference settings used by the audit: a small step because
/// neighbor selection makes the loss only piecewise smooth in the pose, with
/// kinks that a wider stencil can straddle.
pub fn audit_fd_config() -> FdConfig {
    FdConfig { h: 1e-6, ..FdConfig::default() }
}
