//! Procedural capsule-limbed humanoid used in place of a scanned body model.
//!
//! The body is built from six closed capsules (torso, head, two arms, two
//! legs) in a T-pose with `+y` up and the front facing `+z`. Blend weights
//! fall off smoothly across each joint along the capsule axis, so every
//! vertex is influenced by at most two or three neighboring parts.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mesh::RiggedMesh;
use super::skeleton::{Joint, Skeleton};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BodyConfig {
    /// Overall height in world units.
    pub height: f64,
    /// Multiplier on every capsule radius.
    pub girth: f64,
    /// Rings along each bone of a limb.
    pub segments_per_limb: usize,
    /// Vertices around each ring.
    pub radial_segments: usize,
    /// Rings on each hemispherical cap, excluding the equator.
    pub cap_rings: usize,
    /// Width of the smooth weight transition across a joint.
    pub blend_width: f64,
    pub latent_dim: usize,
}

impl Default for BodyConfig {
    fn default() -> Self {
        BodyConfig {
            height: 1.8,
            girth: 1.0,
            segments_per_limb: 6,
            radial_segments: 12,
            cap_rings: 3,
            blend_width: 0.08,
            latent_dim: 16,
        }
    }
}

impl BodyConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.height, self.girth, self.blend_width];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Argument("body dimensions must be positive".into()));
        }
        if self.segments_per_limb < 2 {
            return Err(Error::Argument("segments_per_limb must be at least 2".into()));
        }
        if self.radial_segments < 3 || self.cap_rings < 1 {
            return Err(Error::Argument(
                "radial_segments must be >= 3 and cap_rings >= 1".into(),
            ));
        }
        Ok(())
    }
}

pub mod joints {
    pub const PELVIS: usize = 0;
    pub const SPINE: usize = 1;
    pub const NECK: usize = 2;
    pub const L_SHOULDER: usize = 3;
    pub const L_ELBOW: usize = 4;
    pub const R_SHOULDER: usize = 5;
    pub const R_ELBOW: usize = 6;
    pub const L_HIP: usize = 7;
    pub const L_KNEE: usize = 8;
    pub const R_HIP: usize = 9;
    pub const R_KNEE: usize = 10;
    pub const COUNT: usize = 11;
}

const PALETTE: [[f64; 3]; joints::COUNT] = [
    [0.20, 0.25, 0.60], // pelvis
    [0.85, 0.30, 0.25], // spine / chest
    [0.95, 0.80, 0.65], // head
    [0.90, 0.60, 0.20], // left upper arm
    [0.95, 0.85, 0.30], // left forearm
    [0.25, 0.65, 0.35], // right upper arm
    [0.45, 0.85, 0.55], // right forearm
    [0.30, 0.40, 0.85], // left thigh
    [0.55, 0.70, 0.95], // left shin
    [0.60, 0.30, 0.70], // right thigh
    [0.80, 0.55, 0.90], // right shin
];

/// One capsule: axis from `a` along `dir` for `length`, elliptical
/// cross-section with radii `ru` along `u` and `rv` along `v`.
struct Capsule {
    a: Vector3<f64>,
    dir: Vector3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
    length: f64,
    ru: f64,
    rv: f64,
    /// Rings along the straight section.
    length_segments: usize,
    /// Parts along the axis and the axial coordinates of the transitions.
    parts: Vec<usize>,
    transitions: Vec<f64>,
}

fn smoothstep(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Builds the default-layout humanoid.
pub fn make_procedural_body(seed: u64, config: &BodyConfig) -> Result<(RiggedMesh, Skeleton)> {
    config.validate()?;
    let s = config.height / 1.8;
    let g = config.girth * s;
    let joint = |name: &str, parent: Option<usize>, o: [f64; 3]| Joint {
        name: name.into(),
        parent,
        offset: o.map(|x| x * s),
    };
    use joints::*;
    let skeleton = Skeleton::new(vec![
        joint("pelvis", None, [0.0, 0.95, 0.0]),
        joint("spine", Some(PELVIS), [0.0, 0.17, 0.0]),
        joint("neck", Some(SPINE), [0.0, 0.40, 0.0]),
        joint("l_shoulder", Some(SPINE), [0.20, 0.28, 0.0]),
        joint("l_elbow", Some(L_SHOULDER), [0.28, 0.0, 0.0]),
        joint("r_shoulder", Some(SPINE), [-0.20, 0.28, 0.0]),
        joint("r_elbow", Some(R_SHOULDER), [-0.28, 0.0, 0.0]),
        joint("l_hip", Some(PELVIS), [0.10, -0.03, 0.0]),
        joint("l_knee", Some(L_HIP), [0.0, -0.42, 0.0]),
        joint("r_hip", Some(PELVIS), [-0.10, -0.03, 0.0]),
        joint("r_knee", Some(R_HIP), [0.0, -0.42, 0.0]),
    ])?;
    let rest: Vec<Vector3<f64>> = skeleton
        .rest_positions()
        .iter()
        .map(|p| Vector3::from(*p))
        .collect();
    let x = Vector3::x();
    let y = Vector3::y();
    let z = Vector3::z();
    let seg = config.segments_per_limb;
    let axial = |a: &Vector3<f64>, dir: &Vector3<f64>, p: &Vector3<f64>| (p - a).dot(dir);

    let mut capsules = Vec::new();
    // Torso.
    {
        let a = Vector3::new(0.0, 0.88, 0.0) * s;
        capsules.push(Capsule {
            a,
            dir: y,
            u: x,
            v: -z,
            length: 0.52 * s,
            ru: 0.16 * g,
            rv: 0.10 * g,
            length_segments: 2 * seg,
            parts: vec![PELVIS, SPINE],
            transitions: vec![axial(&a, &y, &rest[SPINE])],
        });
    }
    // Head.
    {
        let a = Vector3::new(0.0, 1.62, 0.0) * s;
        capsules.push(Capsule {
            a,
            dir: y,
            u: x,
            v: -z,
            length: 0.06 * s,
            ru: 0.10 * g,
            rv: 0.10 * g,
            length_segments: 2,
            parts: vec![SPINE, NECK],
            transitions: vec![axial(&a, &y, &rest[NECK])],
        });
    }
    // Arms.
    for (sign, shoulder, elbow, v) in [(1.0, L_SHOULDER, L_ELBOW, z), (-1.0, R_SHOULDER, R_ELBOW, -z)] {
        let dir = x * sign;
        let a = Vector3::new(0.10 * sign, 1.40, 0.0) * s;
        capsules.push(Capsule {
            a,
            dir,
            u: y,
            v,
            length: 0.64 * s,
            ru: 0.05 * g,
            rv: 0.05 * g,
            length_segments: 2 * seg,
            parts: vec![SPINE, shoulder, elbow],
            transitions: vec![axial(&a, &dir, &rest[shoulder]), axial(&a, &dir, &rest[elbow])],
        });
    }
    // Legs.
    for (sign, hip, knee) in [(1.0, L_HIP, L_KNEE), (-1.0, R_HIP, R_KNEE)] {
        let dir = -y;
        let a = Vector3::new(0.10 * sign, 0.98, 0.0) * s;
        capsules.push(Capsule {
            a,
            dir,
            u: x,
            v: z,
            length: 0.90 * s,
            ru: 0.07 * g,
            rv: 0.07 * g,
            length_segments: 2 * seg,
            parts: vec![PELVIS, hip, knee],
            transitions: vec![axial(&a, &dir, &rest[hip]), axial(&a, &dir, &rest[knee])],
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palette: Vec<[f64; 3]> = PALETTE
        .iter()
        .map(|c| c.map(|ch| (ch + rng.random_range(-0.04..0.04)).clamp(0.0, 1.0)))
        .collect();

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut weights = Vec::new();
    let mut colors = Vec::new();
    let width = config.blend_width * s;
    for cap in &capsules {
        let first = vertices.len() as u32;
        let (pts, tris) = tessellate(cap, config.radial_segments, config.cap_rings);
        for p in &pts {
            let t = axial(&cap.a, &cap.dir, p);
            let mut row = vec![0.0; joints::COUNT];
            let steps: Vec<f64> = cap
                .transitions
                .iter()
                .map(|c| smoothstep((t - c) / width + 0.5))
                .collect();
            for (i, &part) in cap.parts.iter().enumerate() {
                let hi = if i == 0 { 1.0 } else { steps[i - 1] };
                let lo = steps.get(i).copied().unwrap_or(0.0);
                row[part] += hi - lo;
            }
            let dominant = row
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |b, (k, &w)| if w > b.1 { (k, w) } else { b })
                .0;
            colors.push(palette[dominant]);
            weights.extend(row);
        }
        vertices.extend(pts);
        triangles.extend(tris.into_iter().map(|t| t.map(|i| i + first)));
    }
    let mesh = RiggedMesh::new(
        vertices,
        triangles,
        joints::COUNT,
        weights,
        colors,
        config.latent_dim,
    )?;
    Ok((mesh, skeleton))
}

fn tessellate(cap: &Capsule, radial: usize, cap_rings: usize) -> (Vec<Vector3<f64>>, Vec<[u32; 3]>) {
    use std::f64::consts::{FRAC_PI_2, TAU};
    let rc = cap.ru.min(cap.rv);
    // (axial offset, radial scale) per ring, pole to pole.
    let mut rings: Vec<(f64, f64)> = Vec::new();
    for j in 1..cap_rings {
        let phi = FRAC_PI_2 * j as f64 / cap_rings as f64;
        rings.push((-rc * phi.cos(), phi.sin()));
    }
    for i in 0..=cap.length_segments {
        rings.push((cap.length * i as f64 / cap.length_segments as f64, 1.0));
    }
    for j in (1..cap_rings).rev() {
        let phi = FRAC_PI_2 * j as f64 / cap_rings as f64;
        rings.push((cap.length + rc * phi.cos(), phi.sin()));
    }
    let mut pts = vec![cap.a - cap.dir * rc];
    for &(h, scale) in &rings {
        for k in 0..radial {
            let psi = TAU * k as f64 / radial as f64;
            pts.push(
                cap.a
                    + cap.dir * h
                    + cap.u * (cap.ru * scale * psi.cos())
                    + cap.v * (cap.rv * scale * psi.sin()),
            );
        }
    }
    pts.push(cap.a + cap.dir * (cap.length + rc));
    let last = (pts.len() - 1) as u32;
    let ring = |r: usize, k: usize| (1 + r * radial + k % radial) as u32;
    let mut tris = Vec::new();
    for k in 0..radial {
        tris.push([0, ring(0, k + 1), ring(0, k)]);
    }
    for r in 0..rings.len() - 1 {
        for k in 0..radial {
            let (a, b) = (ring(r, k), ring(r, k + 1));
            let (c, d) = (ring(r + 1, k), ring(r + 1, k + 1));
            tris.push([a, b, d]);
            tris.push([a, d, c]);
        }
    }
    let top = rings.len() - 1;
    for k in 0..radial {
        tris.push([last, ring(top, k), ring(top, k + 1)]);
    }
    (pts, tris)
}
