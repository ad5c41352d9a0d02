use std::sync::Arc;

use nalgebra::Vector3;

use super::bvh::Bvh;
use crate::rig::linalg::{self, M3};
use crate::rig::{forward_kinematics, inverse_blend, InverseBlend, PartTransforms, Pose, RiggedMesh, Skeleton};
use crate::{Error, Result};

/// Depth padding added on both sides of the mesh hit interval.
pub const DEFAULT_BOUNDS_PADDING: f64 = 0.04;

/// A rigged mesh deformed to one pose, with everything the embedding needs
/// per vertex and a triangle tree for geometric queries.
#[derive(Clone, Debug)]
pub struct PosedMesh {
    mesh: Arc<RiggedMesh>,
    transforms: PartTransforms,
    positions: Vec<Vector3<f64>>,
    inverses: Vec<InverseBlend>,
    canonical: Vec<Vector3<f64>>,
    rot_inverse: Vec<M3<f64>>,
    bvh: Bvh,
}

/// Result of projecting a query point onto the posed surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceProjection {
    pub point: Vector3<f64>,
    pub triangle: usize,
    pub barycentric: [f64; 3],
    /// Vertex of `triangle` nearest to `point`.
    pub nearest_vertex: usize,
    pub distance: f64,
}

impl PosedMesh {
    pub fn new(mesh: Arc<RiggedMesh>, transforms: PartTransforms) -> Result<Self> {
        if transforms.len() != mesh.parts() {
            return Err(Error::Shape {
                name: "part transforms".into(),
                expected: mesh.parts(),
                actual: transforms.len(),
            });
        }
        let n = mesh.vertex_count();
        let mut positions = Vec::with_capacity(n);
        let mut inverses = Vec::with_capacity(n);
        let mut canonical = Vec::with_capacity(n);
        let mut rot_inverse = Vec::with_capacity(n);
        for (i, v) in mesh.vertices().iter().enumerate() {
            let infl = mesh.influences(i);
            let blended = linalg::blend(infl, &transforms.0);
            let p = blended.apply(&(*v).into());
            let inv = inverse_blend(infl, &transforms);
            canonical.push(Vector3::from(inv.inverse.apply(&p)));
            rot_inverse.push(linalg::orthonormalize_rows(&inv.inverse.r));
            positions.push(Vector3::from(p));
            inverses.push(inv);
        }
        let bvh = Bvh::build(&positions, mesh.triangles());
        Ok(PosedMesh {
            mesh,
            transforms,
            positions,
            inverses,
            canonical,
            rot_inverse,
            bvh,
        })
    }

    pub fn from_pose(mesh: Arc<RiggedMesh>, skeleton: &Skeleton, pose: &Pose) -> Result<Self> {
        let g = forward_kinematics(skeleton, pose)?;
        Self::new(mesh, g)
    }

    pub fn mesh(&self) -> &Arc<RiggedMesh> {
        &self.mesh
    }

    pub fn transforms(&self) -> &PartTransforms {
        &self.transforms
    }

    /// Observation-space vertex positions.
    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    /// Inverse blended transform of each vertex (with degenerate fallback).
    pub fn inverse(&self, vertex: usize) -> &InverseBlend {
        &self.inverses[vertex]
    }

    /// Each vertex inverse-skinned with its own weights.
    pub fn canonical(&self, vertex: usize) -> &Vector3<f64> {
        &self.canonical[vertex]
    }

    /// Re-orthonormalized rotation block of each vertex's inverse transform.
    pub fn rotation_inverse(&self, vertex: usize) -> &M3<f64> {
        &self.rot_inverse[vertex]
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        self.mesh.triangles()
    }

    /// Projects `x` onto the nearest surface point.
    pub fn project(&self, x: &Vector3<f64>) -> Result<SurfaceProjection> {
        let hit = self
            .bvh
            .closest(&self.positions, self.mesh.triangles(), x)
            .ok_or_else(|| Error::Structure("cannot project onto an empty mesh".into()))?;
        Ok(self.finish_projection(hit.triangle, hit.point, hit.barycentric, hit.distance_squared))
    }

    pub(crate) fn finish_projection(
        &self,
        triangle: usize,
        point: Vector3<f64>,
        barycentric: [f64; 3],
        distance_squared: f64,
    ) -> SurfaceProjection {
        let tri = self.mesh.triangles()[triangle];
        let mut best = (f64::INFINITY, u32::MAX);
        for &v in &tri {
            let d = (self.positions[v as usize] - point).norm_squared();
            if d < best.0 || (d == best.0 && v < best.1) {
                best = (d, v);
            }
        }
        SurfaceProjection {
            point,
            triangle,
            barycentric,
            nearest_vertex: best.1 as usize,
            distance: distance_squared.sqrt(),
        }
    }

    /// Padded depth interval of the ray through the mesh, `None` on a miss.
    pub fn ray_bounds(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        self.ray_bounds_padded(origin, dir, DEFAULT_BOUNDS_PADDING)
    }

    pub fn ray_bounds_padded(
        &self,
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
        padding: f64,
    ) -> Option<(f64, f64)> {
        debug_assert!((dir.norm() - 1.0).abs() <= 1e-9, "ray direction must be unit length");
        self.bvh
            .hit_range(&self.positions, self.mesh.triangles(), origin, dir)
            .map(|(lo, hi)| ((lo - padding).max(0.0), hi + padding))
    }
}

/// Free-function form of [`PosedMesh::project`].
pub fn project_to_mesh(mesh: &PosedMesh, x: &Vector3<f64>) -> Result<SurfaceProjection> {
    mesh.project(x)
}

/// Free-function form of [`PosedMesh::ray_bounds`].
pub fn ray_bounds(mesh: &PosedMesh, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64)> {
    mesh.ray_bounds(origin, dir)
}
