use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::skeleton::{Joint, Skeleton};
use crate::{Error, Result};

pub const RIG_VERSION: &str = "rig_v1";

const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// Canonical-pose triangle mesh with skinning weights.
///
/// Per-vertex latent codes are trainable and live in the parameter store;
/// the mesh records only their dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct RiggedMesh {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[u32; 3]>,
    parts: usize,
    weights: Vec<f64>,
    influences: Vec<Vec<(usize, f64)>>,
    adjacency: Vec<Vec<u32>>,
    colors: Vec<[f64; 3]>,
    latent_dim: usize,
}

impl RiggedMesh {
    /// Builds a mesh and checks its invariants. `weights` is row-major
    /// `vertices x parts`; `colors` may be empty (defaults to mid grey).
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[u32; 3]>,
        parts: usize,
        weights: Vec<f64>,
        colors: Vec<[f64; 3]>,
        latent_dim: usize,
    ) -> Result<Self> {
        let n = vertices.len();
        if parts == 0 {
            return Err(Error::Argument("mesh needs at least one part".into()));
        }
        if weights.len() != n * parts {
            return Err(Error::Shape {
                name: "blend weights".into(),
                expected: n * parts,
                actual: weights.len(),
            });
        }
        if vertices.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::Argument("non-finite vertex position".into()));
        }
        let mut influences = Vec::with_capacity(n);
        for (i, row) in weights.chunks_exact(parts).enumerate() {
            if row.iter().any(|&w| w < 0.0 || !w.is_finite()) {
                return Err(Error::Argument(format!("vertex {i} has a negative blend weight")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(Error::Argument(format!(
                    "blend weights of vertex {i} sum to {sum}"
                )));
            }
            influences.push(
                row.iter()
                    .copied()
                    .enumerate()
                    .filter(|&(_, w)| w > 0.0)
                    .collect(),
            );
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= n) {
                return Err(Error::Argument(format!("triangle {t} indexes a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Argument(format!("triangle {t} repeats a vertex")));
            }
        }
        check_edge_manifold(&triangles)?;
        let colors = if colors.is_empty() {
            vec![[0.5; 3]; n]
        } else if colors.len() == n {
            colors
        } else {
            return Err(Error::Shape {
                name: "vertex colors".into(),
                expected: n,
                actual: colors.len(),
            });
        };
        let adjacency = build_adjacency(n, &triangles);
        Ok(RiggedMesh {
            vertices,
            triangles,
            parts,
            weights,
            influences,
            adjacency,
            colors,
            latent_dim,
        })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn weights(&self, vertex: usize) -> &[f64] {
        &self.weights[vertex * self.parts..(vertex + 1) * self.parts]
    }

    /// Nonzero `(part, weight)` pairs of a vertex.
    pub fn influences(&self, vertex: usize) -> &[(usize, f64)] {
        &self.influences[vertex]
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn set_latent_dim(&mut self, latent_dim: usize) {
        self.latent_dim = latent_dim;
    }

    /// Edge-connected neighbors of `vertex` in ascending index order.
    pub fn one_ring(&self, vertex: usize) -> Result<&[u32]> {
        self.adjacency
            .get(vertex)
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "vertex {vertex} out of range ({} vertices)",
                    self.vertices.len()
                ))
            })
    }

    /// Per-vertex normals from area-weighted face normals.
    pub fn vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for tri in &self.triangles {
            let [a, b, c] = tri.map(|i| self.vertices[i as usize]);
            let n = (b - a).cross(&(c - a));
            for &i in tri {
                normals[i as usize] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }
}

fn build_adjacency(n: usize, triangles: &[[u32; 3]]) -> Vec<Vec<u32>> {
    let mut sets: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
    for tri in triangles {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            sets[a as usize].insert(b);
            sets[b as usize].insert(a);
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

fn check_edge_manifold(triangles: &[[u32; 3]]) -> Result<()> {
    let mut count: HashMap<(u32, u32), u32> = HashMap::new();
    for tri in triangles {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    if let Some((edge, c)) = count.iter().find(|(_, &c)| c > 2) {
        return Err(Error::Structure(format!(
            "edge {edge:?} is shared by {c} triangles"
        )));
    }
    Ok(())
}

/// On-disk rig document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RigDocument {
    pub version: String,
    pub vertices: Vec<f64>,
    pub triangles: Vec<u32>,
    pub weights: Vec<f64>,
    pub parts: usize,
    pub skeleton: Vec<Joint>,
    pub latent_dim: usize,
    #[serde(default)]
    pub colors: Vec<f64>,
}

impl RigDocument {
    pub fn new(mesh: &RiggedMesh, skeleton: &Skeleton) -> Self {
        RigDocument {
            version: RIG_VERSION.into(),
            vertices: mesh.vertices.iter().flat_map(|v| [v.x, v.y, v.z]).collect(),
            triangles: mesh.triangles.iter().flatten().copied().collect(),
            weights: mesh.weights.clone(),
            parts: mesh.parts,
            skeleton: skeleton.joints().to_vec(),
            latent_dim: mesh.latent_dim,
            colors: mesh.colors.iter().flatten().copied().collect(),
        }
    }

    pub fn into_rig(self) -> Result<(RiggedMesh, Skeleton)> {
        if self.version != RIG_VERSION {
            return Err(Error::Version {
                expected: RIG_VERSION.into(),
                found: self.version,
            });
        }
        if self.vertices.len() % 3 != 0 || self.triangles.len() % 3 != 0 || self.colors.len() % 3 != 0
        {
            return Err(Error::Corrupt("rig arrays are not multiples of 3".into()));
        }
        let skeleton = Skeleton::new(self.skeleton)?;
        if skeleton.len() != self.parts {
            return Err(Error::Argument(format!(
                "rig has {} parts but {} joints",
                self.parts,
                skeleton.len()
            )));
        }
        let mesh = RiggedMesh::new(
            self.vertices
                .chunks_exact(3)
                .map(|c| Vector3::new(c[0], c[1], c[2]))
                .collect(),
            self.triangles
                .chunks_exact(3)
                .map(|c| [c[0], c[1], c[2]])
                .collect(),
            self.parts,
            self.weights,
            self.colors.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            self.latent_dim,
        )?;
        Ok((mesh, skeleton))
    }
}

pub fn save_rig(path: &Path, mesh: &RiggedMesh, skeleton: &Skeleton) -> Result<()> {
    let json = serde_json::to_vec(&RigDocument::new(mesh, skeleton)).map_err(|e| Error::json(path, e))?;
    crate::dataset::write_atomic(path, &json)
}

pub fn load_rig(path: &Path) -> Result<(RiggedMesh, Skeleton)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let doc: RigDocument = serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))?;
    doc.into_rig()
}
