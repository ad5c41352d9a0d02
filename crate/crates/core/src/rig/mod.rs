//! Articulated skinned body: skeleton, forward kinematics, linear blend
//! skinning and the procedural humanoid.

pub mod body;
pub mod linalg;
mod mesh;
mod skeleton;
mod skinning;

pub use body::{make_procedural_body, BodyConfig};
pub use mesh::{load_rig, save_rig, RigDocument, RiggedMesh, RIG_VERSION};
pub use skeleton::{forward_kinematics, forward_kinematics_with, Joint, PartTransforms, Pose, Skeleton};
pub use skinning::{
    blended_transform, condition_number, dominant_part, inverse_blend, lbs_forward, lbs_inverse,
    InverseBlend, MAX_CONDITION,
};

#[cfg(test)]
pub(crate) use mesh::tests::tetrahedron;
