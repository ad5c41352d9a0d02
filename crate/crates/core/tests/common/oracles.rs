//! Brute-force reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

use meshfield::spatial::geometry::{closest_point_on_triangle, ray_triangle};
use meshfield::spatial::PosedMesh;
use nalgebra::Vector3;

/// Adjacency from a linear scan of the triangle list.
pub fn brute_ring(triangles: &[[u32; 3]], v: usize) -> Vec<usize> {
    let mut out = BTreeSet::new();
    for t in triangles {
        if t.iter().any(|&i| i as usize == v) {
            for &i in t {
                if i as usize != v {
                    out.insert(i as usize);
                }
            }
        }
    }
    out.into_iter().collect()
}

/// `(distance, triangle, nearest vertex)` minimizing over every triangle.
pub fn brute_closest(mesh: &PosedMesh, x: &Vector3<f64>) -> (f64, usize, usize) {
    let pos = mesh.positions();
    let mut best = (f64::INFINITY, usize::MAX, Vector3::zeros());
    for (i, t) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = t.map(|v| pos[v as usize]);
        let (q, _) = closest_point_on_triangle(x, &a, &b, &c);
        let d = (x - q).norm_squared();
        if d < best.0 {
            best = (d, i, q);
        }
    }
    let tri = mesh.triangles()[best.1];
    let mut v0 = (f64::INFINITY, usize::MAX);
    for &v in &tri {
        let d = (pos[v as usize] - best.2).norm_squared();
        if d < v0.0 || (d == v0.0 && (v as usize) < v0.1) {
            v0 = (d, v as usize);
        }
    }
    (best.0.sqrt(), best.1, v0.1)
}

pub fn brute_ray_bounds(
    mesh: &PosedMesh,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    padding: f64,
) -> Option<(f64, f64)> {
    let pos = mesh.positions();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for t in mesh.triangles() {
        let [a, b, c] = t.map(|v| pos[v as usize]);
        if let Some(h) = ray_triangle(origin, dir, &a, &b, &c) {
            lo = lo.min(h);
            hi = hi.max(h);
        }
    }
    (lo <= hi).then(|| ((lo - padding).max(0.0), hi + padding))
}

/// Geodesic one-hop selection from a brute-force ring, sorted by distance.
pub fn brute_neighbors(mesh: &PosedMesh, v0: usize, x: &Vector3<f64>, k: usize) -> Vec<(usize, f64)> {
    let pos = mesh.positions();
    let dist = |v: usize| (pos[v] - x).norm();
    let ring = brute_ring(mesh.triangles(), v0);
    let mut tail: Vec<(usize, f64)> = ring.iter().map(|&v| (v, dist(v))).collect();
    if tail.len() < k - 1 {
        let mut second = BTreeSet::new();
        for &r in &ring {
            for w in brute_ring(mesh.triangles(), r) {
                if w != v0 && !ring.contains(&w) {
                    second.insert(w);
                }
            }
        }
        let mut extra: Vec<(usize, f64)> = second.into_iter().map(|v| (v, dist(v))).collect();
        extra.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        extra.truncate(k - 1 - tail.len());
        tail.extend(extra);
    }
    tail.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    tail.truncate(k - 1);
    let mut out = vec![(v0, dist(v0))];
    out.extend(tail);
    while out.len() < k {
        out.push(*out.last().unwrap());
    }
    out
}
