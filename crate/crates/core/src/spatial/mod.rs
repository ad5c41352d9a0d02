//! Geometric queries against the posed mesh: closest point, neighbor
//! selection and ray depth bounds.

pub mod bvh;
pub mod geometry;
mod neighbors;
mod posed;

pub use neighbors::{select_neighbors, select_neighbors_with, NeighborRule};
pub use posed::{project_to_mesh, ray_bounds, PosedMesh, SurfaceProjection, DEFAULT_BOUNDS_PADDING};

#[cfg(test)]
mod tests;
