//! Reverse-mode differentiation and optimization.
//!
//! Two levels of reverse mode live side by side. Dense network layers and
//! volume compositing carry hand-written vector-Jacobian products (see
//! [`crate::nn`] and [`crate::render`]); small scalar geometry such as forward
//! kinematics runs on the [`Tape`]. [`ParamStore`] holds every trainable
//! array with its Adam moments.

mod check;
mod store;
mod tape;

pub use check::{finite_diff_check, relative_error, FdConfig, FdReport};
pub use store::{adam_step, adam_step_with, AdamConfig, Gradients, LrMap, ParamArray, ParamStore};
pub use tape::{Grad, Scalar, Tape, Var};
