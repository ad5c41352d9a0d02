//! Neighborhood selection around the projected vertex.

use std::cmp::Ordering;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::posed::{PosedMesh, SurfaceProjection};

/// Which mesh vertices describe a query point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRule {
    /// The `k` vertices nearest to the query anywhere on the mesh.
    EuclideanKnn,
    /// The projected vertex and its edge-connected ring.
    #[default]
    #[serde(rename = "geodesic_1hop")]
    Geodesic1Hop,
    /// The projected vertex alone.
    NearestOnly,
    /// The projected vertex with its one- and two-ring.
    #[serde(rename = "geodesic_2hop")]
    Geodesic2Hop,
}

impl NeighborRule {
    pub const ALL: [NeighborRule; 4] = [
        NeighborRule::NearestOnly,
        NeighborRule::Geodesic1Hop,
        NeighborRule::Geodesic2Hop,
        NeighborRule::EuclideanKnn,
    ];

    /// Number of entries produced for a configured `k`.
    ///
    /// The two-ring variant widens the neighborhood in proportion to a
    /// regular triangulation, where the second ring holds twice as many
    /// vertices as the first.
    pub fn count(self, k: usize) -> usize {
        match self {
            NeighborRule::NearestOnly => 1,
            NeighborRule::Geodesic1Hop | NeighborRule::EuclideanKnn => k,
            NeighborRule::Geodesic2Hop => 1 + 3 * (k.max(1) - 1),
        }
    }

    /// The serialized name of the rule.
    pub fn name(self) -> &'static str {
        match self {
            NeighborRule::EuclideanKnn => "euclidean_knn",
            NeighborRule::Geodesic1Hop => "geodesic_1hop",
            NeighborRule::NearestOnly => "nearest_only",
            NeighborRule::Geodesic2Hop => "geodesic_2hop",
        }
    }
}

fn by_distance(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

fn with_distances(mesh: &PosedMesh, x: &Vector3<f64>, ids: impl Iterator<Item = usize>) -> Vec<(usize, f64)> {
    ids.map(|v| (v, (mesh.positions()[v] - x).norm())).collect()
}

/// `{v0} ∪ ring(v0)` sorted by observation distance, with `v0` first.
///
/// Short rings are topped up with the nearest two-ring vertices; if still
/// short, the last entry is repeated until there are exactly `k`.
pub fn select_neighbors(
    mesh: &PosedMesh,
    proj: &SurfaceProjection,
    x: &Vector3<f64>,
    k: usize,
) -> Vec<(usize, f64)> {
    select_neighbors_with(NeighborRule::Geodesic1Hop, mesh, proj, x, k)
}

pub fn select_neighbors_with(
    rule: NeighborRule,
    mesh: &PosedMesh,
    proj: &SurfaceProjection,
    x: &Vector3<f64>,
    k: usize,
) -> Vec<(usize, f64)> {
    assert!(k >= 1, "neighbor count must be positive");
    let v0 = proj.nearest_vertex;
    let head = (v0, (mesh.positions()[v0] - x).norm());
    let want = rule.count(k);
    let mut tail = match rule {
        NeighborRule::NearestOnly => Vec::new(),
        NeighborRule::Geodesic1Hop => {
            let ring = ring_of(mesh, v0);
            let mut tail = with_distances(mesh, x, ring.iter().copied());
            tail.sort_by(by_distance);
            if tail.len() < want - 1 {
                let mut extra = with_distances(mesh, x, second_ring(mesh, v0, &ring).into_iter());
                extra.sort_by(by_distance);
                extra.truncate(want - 1 - tail.len());
                tail.extend(extra);
                tail.sort_by(by_distance);
            }
            tail
        }
        NeighborRule::Geodesic2Hop => {
            let ring = ring_of(mesh, v0);
            let mut ids = ring.clone();
            ids.extend(second_ring(mesh, v0, &ring));
            let mut tail = with_distances(mesh, x, ids.into_iter());
            tail.sort_by(by_distance);
            tail
        }
        NeighborRule::EuclideanKnn => {
            let mut tail = with_distances(
                mesh,
                x,
                (0..mesh.positions().len()).filter(|&v| v != v0),
            );
            let m = (want - 1).min(tail.len());
            if m > 0 && m < tail.len() {
                tail.select_nth_unstable_by(m - 1, by_distance);
            }
            tail.truncate(m);
            tail.sort_by(by_distance);
            tail
        }
    };
    tail.truncate(want - 1);
    let mut out = Vec::with_capacity(want);
    out.push(head);
    out.extend(tail);
    while out.len() < want {
        let last = *out.last().unwrap();
        out.push(last);
    }
    out
}

fn ring_of(mesh: &PosedMesh, v: usize) -> Vec<usize> {
    mesh.mesh()
        .one_ring(v)
        .map(|r| r.iter().map(|&i| i as usize).collect())
        .unwrap_or_default()
}

fn second_ring(mesh: &PosedMesh, v0: usize, ring: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = ring
        .iter()
        .flat_map(|&r| ring_of(mesh, r))
        .filter(|&w| w != v0 && !ring.contains(&w))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}
