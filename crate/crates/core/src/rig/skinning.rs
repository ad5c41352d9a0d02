//! Linear blend skinning and its inverse.

use nalgebra::{Matrix3, Matrix4, Vector3};

use super::linalg::{self, Affine};
use super::skeleton::PartTransforms;
use crate::{Error, Result};

/// Blended matrices with a condition number above this are treated as
/// singular.
pub const MAX_CONDITION: f64 = 1e8;

/// `sum_k w_k G_k` as a homogeneous 4x4 matrix.
pub fn blended_transform(weights: &[f64], transforms: &PartTransforms) -> Matrix4<f64> {
    let a = blend_dense(weights, transforms);
    let mut m = Matrix4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = a.r[i][j];
        }
        m[(i, 3)] = a.t[i];
        m[(3, i)] = 0.0;
    }
    // Weights sum to one, so the homogeneous row blends to (0, 0, 0, 1).
    m[(3, 3)] = weights.iter().sum();
    m
}

pub(crate) fn blend_dense(weights: &[f64], transforms: &PartTransforms) -> Affine<f64> {
    assert_eq!(
        weights.len(),
        transforms.len(),
        "one blend weight per part"
    );
    let pairs: Vec<(usize, f64)> = weights
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, w)| w != 0.0)
        .collect();
    if pairs.is_empty() {
        return Affine {
            r: [[0.0; 3]; 3],
            t: [0.0; 3],
        };
    }
    linalg::blend(&pairs, &transforms.0)
}

pub fn lbs_forward(v: &Vector3<f64>, weights: &[f64], transforms: &PartTransforms) -> Vector3<f64> {
    Vector3::from(blend_dense(weights, transforms).apply(&(*v).into()))
}

/// Inverts the blended transform at `v_obs`.
///
/// Fails with [`Error::DegenerateBlend`] when the blended rotation block is
/// too ill-conditioned to invert; see [`InverseBlend`] for the fallback used
/// by the embedding.
pub fn lbs_inverse(
    v_obs: &Vector3<f64>,
    weights: &[f64],
    transforms: &PartTransforms,
) -> Result<Vector3<f64>> {
    let a = blend_dense(weights, transforms);
    let condition = condition_number(&a.r);
    if condition > MAX_CONDITION {
        return Err(Error::DegenerateBlend { condition });
    }
    Ok(Vector3::from(a.inverse().apply(&(*v_obs).into())))
}

/// 2-norm condition number of a 3x3 matrix (infinite when singular).
pub fn condition_number(m: &[[f64; 3]; 3]) -> f64 {
    let mat = Matrix3::from_fn(|i, j| m[i][j]);
    let sv = mat.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a blended transform with the single-part fallback applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseBlend {
    /// The map from observation space back to canonical space.
    pub inverse: Affine<f64>,
    /// `Some(k)` when the blend was degenerate and part `k`'s transform was
    /// inverted instead.
    pub fallback: Option<usize>,
}

/// Inverts `sum_k w_k G_k` over sparse `(part, weight)` pairs, falling back
/// to the highest-weight part (lowest index on ties) when degenerate.
pub fn inverse_blend(weights: &[(usize, f64)], transforms: &PartTransforms) -> InverseBlend {
    let a = linalg::blend(weights, &transforms.0);
    if condition_number(&a.r) <= MAX_CONDITION {
        return InverseBlend {
            inverse: a.inverse(),
            fallback: None,
        };
    }
    let k = dominant_part(weights);
    InverseBlend {
        inverse: transforms.0[k].inverse(),
        fallback: Some(k),
    }
}

pub fn dominant_part(weights: &[(usize, f64)]) -> usize {
    let mut best = weights[0];
    for &(k, w) in &weights[1..] {
        if w > best.1 || (w == best.1 && k < best.0) {
            best = (k, w);
        }
    }
    best.0
}
