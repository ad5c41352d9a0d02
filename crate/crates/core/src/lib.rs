//! Mesh-guided dynamic radiance fields.
//!
//! An articulated, skinned body mesh drives a query embedding for a small
//! radiance-field network. Each query point is projected onto the posed mesh,
//! a geodesic neighborhood of vertices is gathered, and the point is described
//! by the canonical positions of those vertices, its observation-space
//! distances to them, an inverse-rotated direction towards the surface and
//! per-vertex latent codes. The field is trained jointly with per-frame pose
//! refinement from monocular image sequences.
//!
//! Module map:
//!
//! - [`rig`]: skeleton, forward kinematics, linear blend skinning, procedural body.
//! - [`spatial`]: closest point, neighbor selection and ray bounds on the posed mesh.
//! - [`embedding`]: positional encoding and the raw query embedding.
//! - [`nn`], [`field`]: dense networks for the embedding MLP and the radiance field.
//! - [`render`]: cameras, ray sampling and volume compositing.
//! - [`autodiff`]: scalar reverse-mode tape, parameter store, Adam, finite differences.
//! - [`pipeline`]: batched differentiable rendering of rays through the whole model.
//! - [`trainer`]: joint optimization of field, latents and poses; checkpoints.
//! - [`synth`]: ground-truth rasterizer and synthetic sequence generator.
//! - [`metrics`]: PSNR and SSIM.

extern crate self as meshfield;
pub mod autodiff;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod image;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod pipeline;
pub mod real;
pub mod render;
pub mod rig;
pub mod spatial;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use real::Real;
