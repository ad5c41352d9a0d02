//! Volume rendering along camera rays.
//!
//! Densities and colors are alpha-composited front to back against a black
//! background; alpha is reported separately. Each ray draws from its own
//! random stream, seeded from the image seed and the pixel index, so images
//! do not depend on how rays are scheduled.

mod camera;
mod composite;
mod samples;

use nalgebra::Vector3;

pub use camera::Camera;
pub use composite::{composite_backward, composite_ray, Composite};
pub use samples::{deltas, importance_depths, sample_importance, sample_stratified, RaySamples};

use crate::image::Image;
use crate::pipeline::{render_rays, stream_seed, Model, Ray, RenderSettings};
use crate::real::Real;
use crate::spatial::PosedMesh;
use crate::{Error, Result};

/// Rays rendered per batch when rendering a whole image.
const IMAGE_BATCH: usize = 1024;

/// Color and alpha of an image render.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedImage {
    pub image: Image,
    pub alpha: Vec<f64>,
}

pub fn pixel_seed(seed: u64, width: usize, u: usize, v: usize) -> u64 {
    stream_seed(&[seed, (v * width + u) as u64])
}

/// Renders the ray through the center of pixel `(u, v)`.
pub fn render_pixel<T: Real>(
    camera: &Camera,
    pixel: (usize, usize),
    posed: &PosedMesh,
    model: &Model<T>,
    settings: &RenderSettings,
    seed: u64,
) -> Result<([f64; 3], f64)> {
    let (u, v) = pixel;
    if u >= camera.width || v >= camera.height {
        return Err(Error::Argument(format!(
            "pixel ({u}, {v}) outside a {}x{} image",
            camera.width, camera.height
        )));
    }
    let (origin, dir) = camera.ray(u, v);
    let ray = Ray { origin, dir, seed: pixel_seed(seed, camera.width, u, v) };
    let out = render_rays(model, posed, &[ray], settings)?;
    Ok((out[0].color, out[0].alpha))
}

/// Renders every pixel of `camera`.
pub fn render_image<T: Real>(
    camera: &Camera,
    posed: &PosedMesh,
    model: &Model<T>,
    settings: &RenderSettings,
    seed: u64,
) -> Result<RenderedImage> {
    let rays: Vec<Ray> = (0..camera.height)
        .flat_map(|v| (0..camera.width).map(move |u| (u, v)))
        .map(|(u, v)| {
            let (origin, dir) = camera.ray(u, v);
            Ray { origin, dir, seed: pixel_seed(seed, camera.width, u, v) }
        })
        .collect();
    let mut image = Image::new(camera.width, camera.height);
    let mut alpha = vec![0.0; rays.len()];
    for (b, batch) in rays.chunks(IMAGE_BATCH).enumerate() {
        let out = render_rays(model, posed, batch, settings)?;
        for (i, o) in out.into_iter().enumerate() {
            let idx = b * IMAGE_BATCH + i;
            image.pixels[idx] = o.color;
            alpha[idx] = o.alpha;
        }
    }
    Ok(RenderedImage { image, alpha })
}

/// World-space direction of the ray through the image center.
pub fn center_direction(camera: &Camera) -> Vector3<f64> {
    camera.ray_at(camera.cx, camera.cy).1
}
