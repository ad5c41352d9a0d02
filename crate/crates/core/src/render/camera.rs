use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pinhole camera in the computer-vision convention: camera `z` looks
/// forward, `x` right, `y` down, and `x_cam = R x_world + t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// World-to-camera rotation, row-major.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Argument("focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Argument("image size must be positive".into()));
        }
        let r = self.rotation_matrix();
        if (r * r.transpose() - Matrix3::identity()).abs().max() > 1e-6 || (r.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::Argument("camera rotation is not a proper rotation".into()));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`, with `up` pointing up in the image.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        fov_y: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let z = target - eye;
        if z.norm() == 0.0 {
            return Err(Error::Argument("camera eye and target coincide".into()));
        }
        let z = z.normalize();
        let x = z.cross(&up);
        if x.norm() < 1e-12 {
            return Err(Error::Argument("camera up vector is parallel to the view direction".into()));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let t = -(r * eye);
        let f = 0.5 * height as f64 / (0.5 * fov_y).tan();
        let cam = Camera {
            fx: f,
            fy: f,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
            rotation: [0, 1, 2].map(|i| [0, 1, 2].map(|j| r[(i, j)])),
            translation: t.into(),
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rotation[i][j])
    }

    /// Camera center in world space.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation_matrix().transpose() * Vector3::from(self.translation))
    }

    /// Unit ray through the center of pixel `(u, v)`.
    pub fn ray(&self, u: usize, v: usize) -> (Vector3<f64>, Vector3<f64>) {
        self.ray_at(u as f64 + 0.5, v as f64 + 0.5)
    }

    /// Unit ray through continuous image coordinates.
    pub fn ray_at(&self, px: f64, py: f64) -> (Vector3<f64>, Vector3<f64>) {
        let d_cam = Vector3::new((px - self.cx) / self.fx, (py - self.cy) / self.fy, 1.0);
        let d = (self.rotation_matrix().transpose() * d_cam).normalize();
        (self.center(), d)
    }

    /// Image coordinates of a world point; `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        let c = self.rotation_matrix() * p + Vector3::from(self.translation);
        if c.z <= 0.0 {
            return None;
        }
        Some((self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy))
    }

    /// Same camera at `factor` times the resolution.
    pub fn scaled(&self, factor: f64) -> Camera {
        Camera {
            fx: self.fx * factor,
            fy: self.fy * factor,
            cx: self.cx * factor,
            cy: self.cy * factor,
            width: (self.width as f64 * factor).round() as usize,
            height: (self.height as f64 * factor).round() as usize,
            ..self.clone()
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}
