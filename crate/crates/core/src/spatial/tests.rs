use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::rig::{make_procedural_body, BodyConfig, PartTransforms, Pose, RiggedMesh};

#[path = "../../tests/common/oracles.rs"]
mod oracles;

fn body_posed() -> PosedMesh {
    let (mesh, skel) = make_procedural_body(0, &BodyConfig::default()).unwrap();
    let mut pose = Pose::rest(skel.len());
    pose.rotations[4] = [0.0, 0.3, 0.9];
    pose.rotations[8] = [0.5, 0.0, 0.0];
    pose.rotations[0] = [0.0, 0.7, 0.0];
    PosedMesh::from_pose(Arc::new(mesh), &skel, &pose).unwrap()
}

fn unit_cube() -> PosedMesh {
    let mut v = Vec::new();
    for i in 0..8 {
        v.push(Vector3::new(
            if i & 1 == 0 { -0.5 } else { 0.5 },
            if i & 2 == 0 { -0.5 } else { 0.5 },
            if i & 4 == 0 { -0.5 } else { 0.5 },
        ));
    }
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let tris = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    let mesh = RiggedMesh::new(v, tris, 1, vec![1.0; 8], vec![], 0).unwrap();
    PosedMesh::new(Arc::new(mesh), PartTransforms::identity(1)).unwrap()
}

fn tetra_posed() -> PosedMesh {
    PosedMesh::new(Arc::new(crate::rig::tetrahedron()), PartTransforms::identity(1)).unwrap()
}

#[test]
fn bvh_covers_every_triangle_once() {
    let posed = body_posed();
    let mut leaves = posed.bvh().leaf_triangles();
    leaves.sort_unstable();
    let want: Vec<u32> = (0..posed.triangles().len() as u32).collect();
    assert_eq!(leaves, want);
}

#[test]
fn projection_of_a_vertex_is_exact() {
    let posed = body_posed();
    for v in [0usize, 17, 300, 911] {
        let x = posed.positions()[v];
        let p = posed.project(&x).unwrap();
        assert_eq!(p.distance, 0.0);
        assert_eq!(p.nearest_vertex, v);
    }
}

#[test]
fn projection_matches_brute_force() {
    let posed = body_posed();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let x = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.1..1.9),
            rng.random_range(-0.6..0.6),
        );
        let p = posed.project(&x).unwrap();
        let (d, tri, v0) = oracles::brute_closest(&posed, &x);
        assert_eq!(p.distance, d);
        assert_eq!(p.triangle, tri);
        assert_eq!(p.nearest_vertex, v0);
        let b = p.barycentric;
        assert!(b.iter().all(|&w| (-1e-7..=1.0 + 1e-7).contains(&w)));
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-7);
        assert!(posed.triangles()[p.triangle].contains(&(p.nearest_vertex as u32)));
    }
}

#[test]
fn projection_is_one_lipschitz() {
    let posed = body_posed();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let x = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(0.0..1.8), rng.random_range(-0.5..0.5));
        let y = x + Vector3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
        let dx = posed.project(&x).unwrap().distance;
        let dy = posed.project(&y).unwrap().distance;
        assert!((dx - dy).abs() <= (x - y).norm() + 1e-12);
    }
}

#[test]
fn empty_mesh_projection_is_a_structural_error() {
    let mesh = RiggedMesh::new(vec![Vector3::zeros()], vec![], 1, vec![1.0], vec![], 0).unwrap();
    let posed = PosedMesh::new(Arc::new(mesh), PartTransforms::identity(1)).unwrap();
    assert!(matches!(posed.project(&Vector3::zeros()), Err(crate::Error::Structure(_))));
}

#[test]
fn cube_ray_bounds() {
    let cube = unit_cube();
    let (near, far) = cube.ray_bounds(&Vector3::new(0.0, 0.0, -2.0), &Vector3::z()).unwrap();
    assert!((near - 1.46).abs() < 1e-12 && (far - 2.54).abs() < 1e-12);
    assert_eq!(cube.ray_bounds(&Vector3::new(0.0, 0.0, -2.0), &-Vector3::z()), None);
    // A hit closer than the padding clamps the near bound at zero.
    let (near, far) = cube.ray_bounds(&Vector3::new(0.0, 0.0, 0.48), &Vector3::z()).unwrap();
    assert_eq!(near, 0.0);
    assert!((far - 0.06).abs() < 1e-12);
}

#[test]
fn ray_bounds_match_brute_force_on_the_body() {
    let posed = body_posed();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut hits = 0;
    for _ in 0..300 {
        let origin = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(0.0..1.8), 3.0);
        let target = Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(0.0..1.8), rng.random_range(-0.3..0.3));
        let dir = (target - origin).normalize();
        let got = posed.ray_bounds(&origin, &dir);
        let want = oracles::brute_ray_bounds(&posed, &origin, &dir, DEFAULT_BOUNDS_PADDING);
        assert_eq!(got, want);
        if let Some((a, b)) = got {
            assert!(a <= b);
            hits += 1;
        }
    }
    assert!(hits > 50);
}

#[test]
fn first_hit_matches_a_scan_of_every_triangle() {
    let posed = body_posed();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut hits = 0;
    for _ in 0..300 {
        let origin = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(0.0..1.8), 3.0);
        let target = Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(0.0..1.8), 0.0);
        let dir = (target - origin).normalize();
        let got = posed.bvh().first_hit(posed.positions(), posed.triangles(), &origin, &dir);
        let mut want: Option<(f64, usize)> = None;
        for (i, tri) in posed.triangles().iter().enumerate() {
            let [a, b, c] = tri.map(|k| posed.positions()[k as usize]);
            if let Some(t) = geometry::ray_triangle(&origin, &dir, &a, &b, &c) {
                if want.is_none_or(|(wt, _)| t < wt) {
                    want = Some((t, i));
                }
            }
        }
        assert_eq!(got.map(|h| (h.t, h.triangle)), want);
        if let Some(h) = got {
            let [a, b, c] = posed.triangles()[h.triangle].map(|k| posed.positions()[k as usize]);
            let p = a * h.barycentric[0] + b * h.barycentric[1] + c * h.barycentric[2];
            assert!((p - (origin + dir * h.t)).norm() < 1e-9);
            hits += 1;
        }
    }
    assert!(hits > 50);
}

#[test]
fn one_ring_matches_triangle_scan() {
    let posed = body_posed();
    let mesh = posed.mesh();
    for v in 0..mesh.vertex_count() {
        let ring: Vec<usize> = mesh.one_ring(v).unwrap().iter().map(|&i| i as usize).collect();
        assert_eq!(ring, oracles::brute_ring(mesh.triangles(), v));
    }
}

#[test]
fn cylinder_interior_vertices_have_six_neighbors() {
    let (mesh, _) = make_procedural_body(0, &BodyConfig::default()).unwrap();
    // Interior cylinder vertices of a regular tessellation have valence 6.
    let six = (0..mesh.vertex_count())
        .filter(|&v| mesh.one_ring(v).unwrap().len() == 6)
        .count();
    assert!(six > mesh.vertex_count() / 2);
}

#[test]
fn single_neighbor_at_the_vertex() {
    let posed = body_posed();
    let x = posed.positions()[42];
    let p = posed.project(&x).unwrap();
    assert_eq!(select_neighbors(&posed, &p, &x, 1), vec![(42, 0.0)]);
}

#[test]
fn tetrahedron_neighbors_are_edge_lengths() {
    let posed = tetra_posed();
    let x = posed.positions()[0];
    let p = posed.project(&x).unwrap();
    let n = select_neighbors(&posed, &p, &x, 4);
    assert_eq!(n[0], (0, 0.0));
    let mut ids: Vec<usize> = n[1..].iter().map(|e| e.0).collect();
    ids.sort_unstable();
    assert_eq!(ids, vec![1, 2, 3]);
    for e in &n[1..] {
        assert!((e.1 - 1.0).abs() < 1e-15);
    }
    // Only three other vertices exist; the tail is padded.
    let padded = select_neighbors(&posed, &p, &x, 6);
    assert_eq!(padded.len(), 6);
    assert_eq!(padded[4], padded[3]);
    assert_eq!(padded[5], padded[3]);
}

#[test]
fn neighbors_match_brute_force_and_are_sorted() {
    let posed = body_posed();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..300 {
        let x = Vector3::new(rng.random_range(-0.9..0.9), rng.random_range(0.0..1.8), rng.random_range(-0.4..0.4));
        let p = posed.project(&x).unwrap();
        let got = select_neighbors(&posed, &p, &x, 7);
        assert_eq!(got, oracles::brute_neighbors(&posed, p.nearest_vertex, &x, 7));
        assert_eq!(got[0].0, p.nearest_vertex);
        assert!(got[1..].windows(2).all(|w| w[0].1 <= w[1].1));
        // Larger k forces the two-ring extension on most vertices.
        let wide = select_neighbors(&posed, &p, &x, 12);
        assert_eq!(wide, oracles::brute_neighbors(&posed, p.nearest_vertex, &x, 12));
    }
}

#[test]
fn rule_widths() {
    let posed = body_posed();
    let x = Vector3::new(0.3, 1.45, 0.2);
    let p = posed.project(&x).unwrap();
    for rule in NeighborRule::ALL {
        let n = select_neighbors_with(rule, &posed, &p, &x, 7);
        assert_eq!(n.len(), rule.count(7));
        assert_eq!(n[0].0, p.nearest_vertex);
        assert!(n[1..].windows(2).all(|w| w[0].1 <= w[1].1));
    }
    // Euclidean kNN is the k-1 globally nearest other vertices.
    let knn = select_neighbors_with(NeighborRule::EuclideanKnn, &posed, &p, &x, 7);
    let mut all: Vec<(usize, f64)> = (0..posed.positions().len())
        .filter(|&v| v != p.nearest_vertex)
        .map(|v| (v, (posed.positions()[v] - x).norm()))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    assert_eq!(&knn[1..], &all[..6]);
}

#[test]
fn neighbor_rule_serializes_under_its_name() {
    for rule in NeighborRule::ALL {
        let json = serde_json::to_string(&rule).unwrap();
        assert_eq!(json, format!("\"{}\"", rule.name()));
        assert_eq!(serde_json::from_str::<NeighborRule>(&json).unwrap(), rule);
    }
}
