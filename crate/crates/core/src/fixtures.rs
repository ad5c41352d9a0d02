//! Small constructed scenes shared by tests, benches and the command line.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::Arc;

use nalgebra::Vector3;

use crate::embedding::{raw_embedding, DirectionMode, DistanceMode, EmbeddingConfig, RawEmbedding};
use crate::rig::{Joint, Pose, RiggedMesh, Skeleton};
use crate::spatial::{NeighborRule, PosedMesh};
use crate::Result;

/// Ring positions along the hinge tube; the joint sits at `x = 0`.
const HINGE_RINGS: [f64; 7] = [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0];
const HINGE_RADIAL: usize = 8;
const HINGE_RADIUS: f64 = 0.1;

/// An open tube along `x` over two parts joined at the origin. Vertices left
/// of the joint follow part 0, right of it part 1, and the joint ring is
/// split evenly.
pub fn hinge_rig() -> Result<(RiggedMesh, Skeleton)> {
    let mut vertices = Vec::new();
    let mut weights = Vec::new();
    for &x in &HINGE_RINGS {
        for j in 0..HINGE_RADIAL {
            let a = TAU * j as f64 / HINGE_RADIAL as f64;
            vertices.push(Vector3::new(x, HINGE_RADIUS * a.cos(), HINGE_RADIUS * a.sin()));
            let w1 = if x > 0.0 {
                1.0
            } else if x == 0.0 {
                0.5
            } else {
                0.0
            };
            weights.extend_from_slice(&[1.0 - w1, w1]);
        }
    }
    let mut triangles = Vec::new();
    for r in 0..HINGE_RINGS.len() - 1 {
        for j in 0..HINGE_RADIAL {
            let a = (r * HINGE_RADIAL + j) as u32;
            let b = (r * HINGE_RADIAL + (j + 1) % HINGE_RADIAL) as u32;
            let c = a + HINGE_RADIAL as u32;
            let d = b + HINGE_RADIAL as u32;
            triangles.push([a, c, b]);
            triangles.push([b, c, d]);
        }
    }
    let mesh = RiggedMesh::new(vertices, triangles, 2, weights, vec![], 4)?;
    let skeleton = Skeleton::new(vec![
        Joint { name: "upper".into(), parent: None, offset: [-1.0, 0.0, 0.0] },
        Joint { name: "lower".into(), parent: Some(0), offset: [1.0, 0.0, 0.0] },
    ])?;
    Ok((mesh, skeleton))
}

/// Two poses of the hinge and one query point in front of the upper part.
///
/// The upper part does not move between the poses, so the query keeps the
/// same closest vertex and the same canonical coordinates: an embedding
/// built from that vertex alone cannot tell the poses apart. The vertex's
/// ring reaches the joint ring, which the bend moves, so the observation
/// distances to the ring differ.
pub struct HingeSeparation {
    pub mesh: Arc<RiggedMesh>,
    pub skeleton: Skeleton,
    pub straight: Pose,
    pub bent: Pose,
    pub query: Vector3<f64>,
}

impl HingeSeparation {
    pub fn new() -> Result<Self> {
        let (mesh, skeleton) = hinge_rig()?;
        let straight = Pose::rest(2);
        let mut bent = Pose::rest(2);
        bent.rotations[1] = [0.0, 0.0, -FRAC_PI_2];
        // Just outside the top vertex of the ring at x = -0.25.
        let query = Vector3::new(-0.25, HINGE_RADIUS + 0.03, 0.0);
        Ok(HingeSeparation { mesh: Arc::new(mesh), skeleton, straight, bent, query })
    }

    pub fn posed(&self) -> Result<[PosedMesh; 2]> {
        Ok([
            PosedMesh::from_pose(self.mesh.clone(), &self.skeleton, &self.straight)?,
            PosedMesh::from_pose(self.mesh.clone(), &self.skeleton, &self.bent)?,
        ])
    }

    /// The closest-vertex embedding without distances or directions.
    pub fn nearest_only_config() -> EmbeddingConfig {
        EmbeddingConfig {
            neighbor_rule: NeighborRule::NearestOnly,
            distance_mode: DistanceMode::Off,
            direction_mode: DirectionMode::Off,
            latent_dim: 4,
            ..EmbeddingConfig::default()
        }
    }

    /// The one-ring embedding with observation-space distances.
    pub fn observation_config() -> EmbeddingConfig {
        EmbeddingConfig {
            neighbor_rule: NeighborRule::Geodesic1Hop,
            distance_mode: DistanceMode::Observation,
            latent_dim: 4,
            ..EmbeddingConfig::default()
        }
    }

    /// Embeddings of the query in the straight and the bent pose.
    pub fn embeddings(&self, config: &EmbeddingConfig) -> Result<[RawEmbedding; 2]> {
        let latents = vec![0.0; self.mesh.vertex_count() * config.latent_dim];
        let [a, b] = self.posed()?;
        Ok([
            raw_embedding(&a, &self.query, config, &latents)?,
            raw_embedding(&b, &self.query, config, &latents)?,
        ])
    }
}
