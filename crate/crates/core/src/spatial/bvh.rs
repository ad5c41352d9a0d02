//! Axis-aligned bounding box tree over triangles.

use nalgebra::Vector3;

use super::geometry::{closest_point_on_triangle, ray_triangle, ray_triangle_barycentric, Aabb};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: u32, end: u32 },
    Inner { left: u32, right: u32 },
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<(Aabb, Node)>,
    /// Triangle indices, permuted so each leaf covers a contiguous range.
    order: Vec<u32>,
}

/// First surface crossed by a ray, found by [`Bvh::first_hit`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: usize,
    pub barycentric: [f64; 3],
}

/// Nearest triangle found by [`Bvh::closest`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestHit {
    pub triangle: usize,
    pub point: Vector3<f64>,
    pub barycentric: [f64; 3],
    pub distance_squared: f64,
}

impl Bvh {
    pub fn build(positions: &[Vector3<f64>], triangles: &[[u32; 3]]) -> Self {
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1),
            order: (0..triangles.len() as u32).collect(),
        };
        if triangles.is_empty() {
            return bvh;
        }
        let bounds: Vec<Aabb> = triangles
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                for &i in t {
                    b.grow(&positions[i as usize]);
                }
                b
            })
            .collect();
        let centers: Vec<Vector3<f64>> = bounds.iter().map(Aabb::center).collect();
        bvh.split(&bounds, &centers, 0, triangles.len());
        bvh
    }

    fn split(&mut self, bounds: &[Aabb], centers: &[Vector3<f64>], start: usize, end: usize) -> u32 {
        let mut bb = Aabb::empty();
        let mut cb = Aabb::empty();
        for &t in &self.order[start..end] {
            bb.merge(&bounds[t as usize]);
            cb.grow(&centers[t as usize]);
        }
        let id = self.nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            self.nodes.push((
                bb,
                Node::Leaf {
                    start: start as u32,
                    end: end as u32,
                },
            ));
            return id;
        }
        let extent = cb.max - cb.min;
        let axis = extent.imax();
        // Median split; the index tie-break keeps the build deterministic.
        self.order[start..end].sort_by(|&a, &b| {
            centers[a as usize][axis]
                .total_cmp(&centers[b as usize][axis])
                .then(a.cmp(&b))
        });
        let mid = (start + end) / 2;
        self.nodes.push((bb, Node::Leaf { start: 0, end: 0 }));
        let left = self.split(bounds, centers, start, mid);
        let right = self.split(bounds, centers, mid, end);
        self.nodes[id as usize].1 = Node::Inner { left, right };
        id
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Triangle indices referenced by the leaves, in leaf order.
    pub fn leaf_triangles(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.order.len());
        for (_, node) in &self.nodes {
            if let Node::Leaf { start, end } = node {
                out.extend_from_slice(&self.order[*start as usize..*end as usize]);
            }
        }
        out
    }

    /// Globally closest triangle to `p`; ties go to the lowest triangle index.
    pub fn closest(
        &self,
        positions: &[Vector3<f64>],
        triangles: &[[u32; 3]],
        p: &Vector3<f64>,
    ) -> Option<ClosestHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<ClosestHit> = None;
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].0.distance_squared(p)));
        while let Some((id, d2)) = stack.pop() {
            if let Some(b) = &best {
                if d2 > b.distance_squared {
                    continue;
                }
            }
            match &self.nodes[id as usize].1 {
                Node::Leaf { start, end } => {
                    for &t in &self.order[*start as usize..*end as usize] {
                        let [a, b, c] = triangles[t as usize].map(|i| positions[i as usize]);
                        let (q, bary) = closest_point_on_triangle(p, &a, &b, &c);
                        let dist = (p - q).norm_squared();
                        let better = match &best {
                            None => true,
                            Some(h) => {
                                dist < h.distance_squared
                                    || (dist == h.distance_squared && (t as usize) < h.triangle)
                            }
                        };
                        if better {
                            best = Some(ClosestHit {
                                triangle: t as usize,
                                point: q,
                                barycentric: bary,
                                distance_squared: dist,
                            });
                        }
                    }
                }
                Node::Inner { left, right } => {
                    let dl = self.nodes[*left as usize].0.distance_squared(p);
                    let dr = self.nodes[*right as usize].0.distance_squared(p);
                    // Push the farther child first so the nearer one is visited first.
                    if dl <= dr {
                        stack.push((*right, dr));
                        stack.push((*left, dl));
                    } else {
                        stack.push((*left, dl));
                        stack.push((*right, dr));
                    }
                }
            }
        }
        best
    }

    /// Smallest and largest positive hit parameter over all triangles.
    pub fn hit_range(
        &self,
        positions: &[Vector3<f64>],
        triangles: &[[u32; 3]],
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
    ) -> Option<(f64, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut range: Option<(f64, f64)> = None;
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let (bb, node) = &self.nodes[id as usize];
            if !bb.hit_by(origin, &inv) {
                continue;
            }
            match node {
                Node::Leaf { start, end } => {
                    for &t in &self.order[*start as usize..*end as usize] {
                        let [a, b, c] = triangles[t as usize].map(|i| positions[i as usize]);
                        if let Some(h) = ray_triangle(origin, dir, &a, &b, &c) {
                            range = Some(match range {
                                None => (h, h),
                                Some((lo, hi)) => (lo.min(h), hi.max(h)),
                            });
                        }
                    }
                }
                Node::Inner { left, right } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
        range
    }

    /// Nearest positive hit along the ray; ties go to the lowest triangle
    /// index.
    pub fn first_hit(
        &self,
        positions: &[Vector3<f64>],
        triangles: &[[u32; 3]],
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
    ) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<RayHit> = None;
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let (bb, node) = &self.nodes[id as usize];
            if !bb.hit_by(origin, &inv) {
                continue;
            }
            match node {
                Node::Leaf { start, end } => {
                    for &t in &self.order[*start as usize..*end as usize] {
                        let [a, b, c] = triangles[t as usize].map(|i| positions[i as usize]);
                        if let Some((h, bary)) = ray_triangle_barycentric(origin, dir, &a, &b, &c) {
                            let better = match &best {
                                None => true,
                                Some(o) => h < o.t || (h == o.t && (t as usize) < o.triangle),
                            };
                            if better {
                                best = Some(RayHit { t: h, triangle: t as usize, barycentric: bary });
                            }
                        }
                    }
                }
                Node::Inner { left, right } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
        best
    }
}
