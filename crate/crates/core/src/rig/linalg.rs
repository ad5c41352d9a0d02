//! Small fixed-size linear algebra written once over [`Scalar`], so the same
//! kinematics run on plain `f64` and on the reverse-mode tape.

use crate::autodiff::Scalar;

pub type V3<S> = [S; 3];
pub type M3<S> = [[S; 3]; 3];

/// Rigid or affine map `x -> r x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine<S> {
    pub r: M3<S>,
    pub t: V3<S>,
}

pub fn identity<S: Scalar>(like: S) -> M3<S> {
    let o = like.lift(1.0);
    let z = like.lift(0.0);
    [[o, z, z], [z, o, z], [z, z, o]]
}

pub fn mat_mul<S: Scalar>(a: &M3<S>, b: &M3<S>) -> M3<S> {
    let mut out = *a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn mat_vec<S: Scalar>(a: &M3<S>, v: &V3<S>) -> V3<S> {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub fn transpose<S: Scalar>(a: &M3<S>) -> M3<S> {
    [
        [a[0][0], a[1][0], a[2][0]],
        [a[0][1], a[1][1], a[2][1]],
        [a[0][2], a[1][2], a[2][2]],
    ]
}

pub fn add3<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot3<S: Scalar>(a: &V3<S>, b: &V3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn scale3<S: Scalar>(a: &V3<S>, s: S) -> V3<S> {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn determinant<S: Scalar>(m: &M3<S>) -> S {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse through the adjugate. The caller is responsible for checking
/// conditioning first.
pub fn inverse<S: Scalar>(m: &M3<S>) -> M3<S> {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let c10 = m[0][2] * m[2][1] - m[0][1] * m[2][2];
    let c11 = m[0][0] * m[2][2] - m[0][2] * m[2][0];
    let c12 = m[0][1] * m[2][0] - m[0][0] * m[2][1];
    let c20 = m[0][1] * m[1][2] - m[0][2] * m[1][1];
    let c21 = m[0][2] * m[1][0] - m[0][0] * m[1][2];
    let c22 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let inv = m[0][0].lift(1.0) / det;
    [
        [c00 * inv, c10 * inv, c20 * inv],
        [c01 * inv, c11 * inv, c21 * inv],
        [c02 * inv, c12 * inv, c22 * inv],
    ]
}

/// Gram-Schmidt on the rows of `m`, yielding an orthonormal matrix.
///
/// Row orthonormalization commutes with right-multiplication by a rotation,
/// which is what keeps inverse-rotated directions invariant under a global
/// rigid motion of the body.
pub fn orthonormalize_rows<S: Scalar>(m: &M3<S>) -> M3<S> {
    let norm = |v: &V3<S>| dot3(v, v).sqrt();
    let r0 = scale3(&m[0], m[0][0].lift(1.0) / norm(&m[0]));
    let p1 = sub3(&m[1], &scale3(&r0, dot3(&r0, &m[1])));
    let r1 = scale3(&p1, m[0][0].lift(1.0) / norm(&p1));
    // Third row from the cross product keeps the result a proper rotation.
    let r2 = [
        r0[1] * r1[2] - r0[2] * r1[1],
        r0[2] * r1[0] - r0[0] * r1[2],
        r0[0] * r1[1] - r0[1] * r1[0],
    ];
    [r0, r1, r2]
}

/// Rotation matrix of an axis-angle vector.
///
/// Near zero the second-order series is used; its value and first
/// derivative are exact at the origin.
pub fn rodrigues<S: Scalar>(w: &V3<S>) -> M3<S> {
    let theta2 = dot3(w, w);
    let k: M3<S> = {
        let z = w[0].lift(0.0);
        [[z, -w[2], w[1]], [w[2], z, -w[0]], [-w[1], w[0], z]]
    };
    let k2 = mat_mul(&k, &k);
    let (a, b) = if theta2.value() < 1e-12 {
        (w[0].lift(1.0) + theta2 * (-1.0 / 6.0), w[0].lift(0.5) + theta2 * (-1.0 / 24.0))
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (w[0].lift(1.0) - theta.cos()) / theta2)
    };
    let mut r = identity(w[0]);
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = r[i][j] + k[i][j] * a + k2[i][j] * b;
        }
    }
    r
}

impl<S: Scalar> Affine<S> {
    pub fn apply(&self, v: &V3<S>) -> V3<S> {
        add3(&mat_vec(&self.r, v), &self.t)
    }

    pub fn compose(&self, rhs: &Affine<S>) -> Affine<S> {
        Affine {
            r: mat_mul(&self.r, &rhs.r),
            t: self.apply(&rhs.t),
        }
    }

    pub fn inverse(&self) -> Affine<S> {
        let r = inverse(&self.r);
        let t = mat_vec(&r, &self.t);
        Affine {
            r,
            t: [-t[0], -t[1], -t[2]],
        }
    }
}

/// `sum_k w_k G_k` over the nonzero `(part, weight)` pairs.
pub fn blend<S: Scalar>(weights: &[(usize, f64)], parts: &[Affine<S>]) -> Affine<S> {
    let like = parts[0].t[0];
    let z = like.lift(0.0);
    let mut out = Affine {
        r: [[z; 3]; 3],
        t: [z; 3],
    };
    for &(k, w) in weights {
        let g = &parts[k];
        for i in 0..3 {
            for j in 0..3 {
                out.r[i][j] = out.r[i][j] + g.r[i][j] * w;
            }
            out.t[i] = out.t[i] + g.t[i] * w;
        }
    }
    out
}

pub fn to_f64_affine<S: Scalar>(a: &Affine<S>) -> Affine<f64> {
    Affine {
        r: a.r.map(|row| row.map(|x| x.value())),
        t: a.t.map(|x| x.value()),
    }
}
