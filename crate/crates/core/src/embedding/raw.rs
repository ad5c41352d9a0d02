use nalgebra::Vector3;

use super::{DirectionMode, DistanceMode, EmbeddingConfig};
use crate::rig::linalg::{Affine, M3, V3};
use crate::spatial::{select_neighbors_with, PosedMesh};
use crate::Result;

/// Below this distance to the projected vertex the direction is zero.
pub const DIRECTION_EPS: f64 = 1e-8;

/// The un-encoded embedding of one query point.
#[derive(Clone, Debug, PartialEq)]
pub struct RawEmbedding {
    /// Neighbor vertices, projected vertex first.
    pub neighbors: Vec<usize>,
    /// Absent when the direction mode is off.
    pub x_dir: Option<[f64; 3]>,
    pub canonical_neighbors: Vec<[f64; 3]>,
    /// Empty when the distance mode is off.
    pub distances: Vec<f64>,
    /// Neighbor latent codes, concatenated in neighbor order.
    pub latents: Vec<f64>,
}

impl RawEmbedding {
    /// Scalars that go through the positional encoding, in row order.
    pub fn encoded_scalars(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 + 4 * self.canonical_neighbors.len());
        if let Some(d) = self.x_dir {
            out.extend_from_slice(&d);
        }
        for c in &self.canonical_neighbors {
            out.extend_from_slice(c);
        }
        out.extend_from_slice(&self.distances);
        out
    }

    /// Largest absolute component difference over the geometric groups.
    pub fn max_difference(&self, other: &RawEmbedding) -> f64 {
        let a = self.encoded_scalars();
        let b = other.encoded_scalars();
        if a.len() != b.len() {
            return f64::INFINITY;
        }
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// Per-vertex posed quantities the embedding reads.
pub(crate) trait VertexData {
    fn position(&self, v: usize) -> V3<f64>;
    fn canonical(&self, v: usize) -> V3<f64>;
    fn rotation(&self, v: usize) -> M3<f64>;
    fn inverse(&self, v: usize) -> Affine<f64>;
}

impl VertexData for PosedMesh {
    fn position(&self, v: usize) -> V3<f64> {
        self.positions()[v].into()
    }
    fn canonical(&self, v: usize) -> V3<f64> {
        (*PosedMesh::canonical(self, v)).into()
    }
    fn rotation(&self, v: usize) -> M3<f64> {
        *self.rotation_inverse(v)
    }
    fn inverse(&self, v: usize) -> Affine<f64> {
        PosedMesh::inverse(self, v).inverse
    }
}

fn sub(a: &V3<f64>, b: &V3<f64>) -> V3<f64> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: &V3<f64>) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn direction<D: VertexData>(data: &D, x: &V3<f64>, v0: usize, mode: DirectionMode) -> Option<[f64; 3]> {
    if mode == DirectionMode::Off {
        return None;
    }
    let r = sub(&data.position(v0), x);
    let n = norm(&r);
    if n < DIRECTION_EPS {
        return Some([0.0; 3]);
    }
    let u = r.map(|c| c / n);
    Some(match mode {
        DirectionMode::Inverse => crate::rig::linalg::mat_vec(&data.rotation(v0), &u),
        _ => u,
    })
}

fn distances<D: VertexData>(data: &D, x: &V3<f64>, neighbors: &[usize], mode: DistanceMode) -> Vec<f64> {
    match mode {
        DistanceMode::Off => Vec::new(),
        DistanceMode::Observation => neighbors.iter().map(|&v| norm(&sub(&data.position(v), x))).collect(),
        DistanceMode::Canonical => {
            let xc = data.inverse(neighbors[0]).apply(x);
            neighbors.iter().map(|&v| norm(&sub(&data.canonical(v), &xc))).collect()
        }
    }
}

pub(crate) fn raw_from_data<D: VertexData>(
    data: &D,
    x: &V3<f64>,
    neighbors: &[usize],
    config: &EmbeddingConfig,
    latents: &[f64],
) -> RawEmbedding {
    let dl = config.latent_dim;
    let mut lat = Vec::with_capacity(neighbors.len() * dl);
    for &v in neighbors {
        lat.extend_from_slice(&latents[v * dl..(v + 1) * dl]);
    }
    RawEmbedding {
        neighbors: neighbors.to_vec(),
        x_dir: direction(data, x, neighbors[0], config.direction_mode),
        canonical_neighbors: neighbors.iter().map(|&v| data.canonical(v)).collect(),
        distances: distances(data, x, neighbors, config.distance_mode),
        latents: lat,
    }
}

/// Relative direction and canonical neighbor positions.
pub fn guidance_embedding(
    x: &Vector3<f64>,
    mesh: &PosedMesh,
    neighbors: &[(usize, f64)],
    config: &EmbeddingConfig,
) -> (Option<[f64; 3]>, Vec<[f64; 3]>) {
    assert!(!neighbors.is_empty(), "guidance needs at least the projected vertex");
    let x: V3<f64> = (*x).into();
    let dir = direction(mesh, &x, neighbors[0].0, config.direction_mode);
    let canon = neighbors.iter().map(|&(v, _)| VertexData::canonical(mesh, v)).collect();
    (dir, canon)
}

/// Distances from the query to each neighbor under `mode`.
pub fn distance_embedding(
    x: &Vector3<f64>,
    mesh: &PosedMesh,
    neighbors: &[(usize, f64)],
    mode: DistanceMode,
) -> Vec<f64> {
    assert!(!neighbors.is_empty(), "distances need at least the projected vertex");
    let ids: Vec<usize> = neighbors.iter().map(|n| n.0).collect();
    distances(mesh, &(*x).into(), &ids, mode)
}

/// Projects `x`, selects its neighbors and builds the full raw embedding.
///
/// `latents` is the flat `vertex_count x latent_dim` latent table.
pub fn raw_embedding(
    mesh: &PosedMesh,
    x: &Vector3<f64>,
    config: &EmbeddingConfig,
    latents: &[f64],
) -> Result<RawEmbedding> {
    let proj = mesh.project(x)?;
    let nb = select_neighbors_with(config.neighbor_rule, mesh, &proj, x, config.k_neighbors);
    let ids: Vec<usize> = nb.iter().map(|n| n.0).collect();
    Ok(raw_embedding_from(mesh, x, &ids, config, latents))
}

/// Raw embedding for an already chosen neighbor list.
pub fn raw_embedding_from(
    mesh: &PosedMesh,
    x: &Vector3<f64>,
    neighbors: &[usize],
    config: &EmbeddingConfig,
    latents: &[f64],
) -> RawEmbedding {
    raw_from_data(mesh, &(*x).into(), neighbors, config, latents)
}

/// Gradient with respect to the per-vertex posed quantities.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VertexAdjoint {
    pub position: [f64; 3],
    pub canonical: [f64; 3],
    /// Orthonormalized inverse rotation.
    pub rotation: [[f64; 3]; 3],
    pub inverse_r: [[f64; 3]; 3],
    pub inverse_t: [f64; 3],
}

impl VertexAdjoint {
    pub fn is_zero(&self) -> bool {
        self.position.iter().chain(&self.canonical).chain(&self.inverse_t).all(|v| *v == 0.0)
            && self.rotation.iter().chain(&self.inverse_r).flatten().all(|v| *v == 0.0)
    }
}

/// Gradient of a loss with respect to the encoded scalars of one raw
/// embedding, in [`RawEmbedding::encoded_scalars`] order.
pub type RawGradient = [f64];

/// Pushes the gradient of one raw embedding back onto vertex quantities.
///
/// Neighbor selection and the query position are held fixed.
pub fn raw_backward(
    mesh: &PosedMesh,
    x: &Vector3<f64>,
    neighbors: &[usize],
    config: &EmbeddingConfig,
    grad: &RawGradient,
    adjoints: &mut [VertexAdjoint],
) {
    backward_from_data(mesh, &(*x).into(), neighbors, config, grad, adjoints)
}

pub(crate) fn backward_from_data<D: VertexData>(
    data: &D,
    x: &V3<f64>,
    neighbors: &[usize],
    config: &EmbeddingConfig,
    grad: &RawGradient,
    adjoints: &mut [VertexAdjoint],
) {
    let layout = config.layout();
    assert_eq!(grad.len(), layout.raw_scalars());
    assert_eq!(neighbors.len(), layout.neighbors);
    let v0 = neighbors[0];
    let (g_dir, rest) = grad.split_at(layout.direction);
    let (g_canon, g_dist) = rest.split_at(3 * layout.neighbors);

    if layout.direction == 3 {
        let r = sub(&data.position(v0), x);
        let n = norm(&r);
        if n >= DIRECTION_EPS {
            let u = r.map(|c| c / n);
            let g_u = if config.direction_mode == DirectionMode::Inverse {
                let rot = data.rotation(v0);
                let a = &mut adjoints[v0].rotation;
                for i in 0..3 {
                    for j in 0..3 {
                        a[i][j] += g_dir[i] * u[j];
                    }
                }
                [0, 1, 2].map(|j| (0..3).map(|i| rot[i][j] * g_dir[i]).sum::<f64>())
            } else {
                [g_dir[0], g_dir[1], g_dir[2]]
            };
            let proj = u[0] * g_u[0] + u[1] * g_u[1] + u[2] * g_u[2];
            for i in 0..3 {
                adjoints[v0].position[i] += (g_u[i] - u[i] * proj) / n;
            }
        }
    }

    for (k, &v) in neighbors.iter().enumerate() {
        for i in 0..3 {
            adjoints[v].canonical[i] += g_canon[3 * k + i];
        }
    }

    match config.distance_mode {
        DistanceMode::Off => {}
        DistanceMode::Observation => {
            for (k, &v) in neighbors.iter().enumerate() {
                let r = sub(&data.position(v), x);
                let d = norm(&r);
                if d > 0.0 {
                    for i in 0..3 {
                        adjoints[v].position[i] += g_dist[k] * r[i] / d;
                    }
                }
            }
        }
        DistanceMode::Canonical => {
            let xc = data.inverse(v0).apply(x);
            let mut g_xc = [0.0; 3];
            for (k, &v) in neighbors.iter().enumerate() {
                let r = sub(&data.canonical(v), &xc);
                let d = norm(&r);
                if d > 0.0 {
                    for i in 0..3 {
                        let e = g_dist[k] * r[i] / d;
                        adjoints[v].canonical[i] += e;
                        g_xc[i] -= e;
                    }
                }
            }
            let a = &mut adjoints[v0];
            for i in 0..3 {
                for j in 0..3 {
                    a.inverse_r[i][j] += g_xc[i] * x[j];
                }
                a.inverse_t[i] += g_xc[i];
            }
        }
    }
}
