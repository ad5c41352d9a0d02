use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::linalg::{self, Affine, V3};
use crate::autodiff::Scalar;
use crate::{Error, Result};

/// One joint of the articulated skeleton. Every joint drives one body part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    /// `None` marks the root.
    pub parent: Option<usize>,
    /// Rest-pose offset from the parent joint; absolute position for the root.
    pub offset: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Joint>", into = "Vec<Joint>")]
pub struct Skeleton {
    joints: Vec<Joint>,
    rest: Vec<[f64; 3]>,
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::Argument("skeleton needs at least one joint".into()));
        }
        let mut roots = 0;
        for (j, joint) in joints.iter().enumerate() {
            match joint.parent {
                None => roots += 1,
                Some(p) if p >= j => {
                    return Err(Error::Argument(format!(
                        "joint {j} ({}) has parent {p}; parents must precede children",
                        joint.name
                    )))
                }
                Some(_) => {}
            }
            if joint.offset.iter().any(|v| !v.is_finite()) {
                return Err(Error::Argument(format!("joint {j} has a non-finite offset")));
            }
        }
        if roots != 1 || joints[0].parent.is_some() {
            return Err(Error::Argument(format!(
                "skeleton must have exactly one root at index 0, found {roots}"
            )));
        }
        let mut rest: Vec<[f64; 3]> = Vec::with_capacity(joints.len());
        for joint in &joints {
            let p = match joint.parent {
                None => joint.offset,
                Some(p) => linalg::add3(&rest[p], &joint.offset),
            };
            rest.push(p);
        }
        Ok(Skeleton { joints, rest })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    /// Number of joints, which is also the number of skinning parts.
    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// Rest-pose joint positions in canonical space.
    pub fn rest_positions(&self) -> &[[f64; 3]] {
        &self.rest
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }
}

impl TryFrom<Vec<Joint>> for Skeleton {
    type Error = Error;
    fn try_from(joints: Vec<Joint>) -> Result<Self> {
        Skeleton::new(joints)
    }
}

impl From<Skeleton> for Vec<Joint> {
    fn from(s: Skeleton) -> Self {
        s.joints
    }
}

/// Per-joint axis-angle rotations plus a global root translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotations: Vec<[f64; 3]>,
    pub translation: [f64; 3],
}

impl Pose {
    pub fn rest(joints: usize) -> Self {
        Pose {
            rotations: vec![[0.0; 3]; joints],
            translation: [0.0; 3],
        }
    }

    /// Length of the flat parameter vector for `joints` joints.
    pub fn flat_len(joints: usize) -> usize {
        3 * joints + 3
    }

    /// Rotations first (joint-major), then the root translation.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.rotations.iter().flatten().copied().collect();
        out.extend_from_slice(&self.translation);
        out
    }

    pub fn from_flat(joints: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != Self::flat_len(joints) {
            return Err(Error::Shape {
                name: "pose".into(),
                expected: Self::flat_len(joints),
                actual: flat.len(),
            });
        }
        let rotations = flat[..3 * joints]
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        let t = &flat[3 * joints..];
        Ok(Pose {
            rotations,
            translation: [t[0], t[1], t[2]],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    /// The pose obtained by applying the world-space rigid motion `x -> r x + t`
    /// after this pose.
    pub fn with_global_rigid(&self, skeleton: &Skeleton, r: &Matrix3<f64>, t: &Vector3<f64>) -> Pose {
        let r0 = Rotation3::from_scaled_axis(Vector3::from(self.rotations[0]));
        let composed = Rotation3::from_matrix_unchecked(r * r0.matrix());
        let mut out = self.clone();
        out.rotations[0] = composed.scaled_axis().into();
        let j0 = Vector3::from(skeleton.rest_positions()[0]);
        let moved = r * (j0 + Vector3::from(self.translation)) + t - j0;
        out.translation = moved.into();
        out
    }
}

/// Per-part rigid transforms `G_k` taking canonical points to observation space.
#[derive(Clone, Debug, PartialEq)]
pub struct PartTransforms(pub Vec<Affine<f64>>);

impl PartTransforms {
    pub fn identity(parts: usize) -> Self {
        PartTransforms(vec![
            Affine {
                r: linalg::identity(0.0),
                t: [0.0; 3],
            };
            parts
        ])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn rotation(&self, k: usize) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.0[k].r[i][j])
    }

    pub fn translation(&self, k: usize) -> Vector3<f64> {
        Vector3::from(self.0[k].t)
    }
}

/// Computes `G_k` for every part.
pub fn forward_kinematics(skeleton: &Skeleton, pose: &Pose) -> Result<PartTransforms> {
    if pose.rotations.len() != skeleton.len() {
        return Err(Error::Shape {
            name: "pose rotations".into(),
            expected: skeleton.len(),
            actual: pose.rotations.len(),
        });
    }
    if !pose.is_finite() {
        return Err(Error::Argument("pose has non-finite components".into()));
    }
    Ok(PartTransforms(forward_kinematics_with(
        skeleton,
        &pose.rotations,
        &pose.translation,
    )))
}

/// Forward kinematics over any [`Scalar`], so pose gradients can be taken
/// on the tape.
pub fn forward_kinematics_with<S: Scalar>(
    skeleton: &Skeleton,
    rotations: &[V3<S>],
    translation: &V3<S>,
) -> Vec<Affine<S>> {
    assert_eq!(rotations.len(), skeleton.len());
    let like = translation[0];
    let lift = |v: &[f64; 3]| v.map(|x| like.lift(x));
    // Joint frames: rotation about the joint, placed at the joint's location.
    let mut frames: Vec<Affine<S>> = Vec::with_capacity(skeleton.len());
    for (j, joint) in skeleton.joints.iter().enumerate() {
        let local = Affine {
            r: linalg::rodrigues(&rotations[j]),
            t: lift(&joint.offset),
        };
        let frame = match joint.parent {
            None => Affine {
                r: local.r,
                t: linalg::add3(&local.t, translation),
            },
            Some(p) => frames[p].compose(&local),
        };
        frames.push(frame);
    }
    frames
        .into_iter()
        .zip(&skeleton.rest)
        .map(|(a, rest)| {
            let shift = linalg::mat_vec(&a.r, &lift(rest));
            Affine {
                r: a.r,
                t: linalg::sub3(&a.t, &shift),
            }
        })
        .collect()
}
