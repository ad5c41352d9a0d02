//! Floating-point images and 8-bit PNG input/output.
//!
//! Values are linear in `[0, 1]`; writing clamps and rounds to 8 bits with no
//! gamma curve.

use std::path::Path;

use ::image::codecs::png::PngEncoder;
use ::image::{ColorType, ImageEncoder};

use crate::dataset::write_atomic;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB.
    pub pixels: Vec<[f64; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            pixels: vec![[0.0; 3]; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: [f64; 3]) -> Self {
        Image {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> [f64; 3] {
        self.pixels[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: [f64; 3]) {
        self.pixels[v * self.width + u] = value;
    }

    /// Rounds every value to the nearest 8-bit level.
    pub fn quantized(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|p| p.map(|c| to_u8(c) as f64 / 255.0)).collect(),
        }
    }
}

/// Per-pixel coverage, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode(path: &Path, bytes: &[u8], width: usize, height: usize, color: ColorType) -> Result<()> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(bytes, width as u32, height as u32, color.into())
        .map_err(|e| Error::Image { path: path.into(), source: e })?;
    write_atomic(path, &out)
}

pub fn save_rgb(path: &Path, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.pixels.iter().flat_map(|p| p.map(to_u8)).collect();
    encode(path, &bytes, img.width, img.height, ColorType::Rgb8)
}

/// Color plus a separate alpha channel.
pub fn save_rgba(path: &Path, img: &Image, alpha: &[f64]) -> Result<()> {
    assert_eq!(alpha.len(), img.pixels.len());
    let bytes: Vec<u8> = img
        .pixels
        .iter()
        .zip(alpha)
        .flat_map(|(p, a)| [to_u8(p[0]), to_u8(p[1]), to_u8(p[2]), to_u8(*a)])
        .collect();
    encode(path, &bytes, img.width, img.height, ColorType::Rgba8)
}

pub fn save_mask(path: &Path, mask: &Mask) -> Result<()> {
    let bytes: Vec<u8> = mask.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode(path, &bytes, mask.width, mask.height, ColorType::L8)
}

fn open(path: &Path) -> Result<::image::DynamicImage> {
    ::image::open(path).map_err(|e| match e {
        ::image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image { path: path.into(), source: other },
    })
}

/// Loads a PNG as RGB, dropping any alpha channel.
pub fn load_rgb(path: &Path) -> Result<Image> {
    let img = open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Image {
        width: w as usize,
        height: h as usize,
        pixels: img.pixels().map(|p| p.0.map(|c| c as f64 / 255.0)).collect(),
    })
}

/// Loads the alpha channel of an RGBA PNG (all ones when absent).
pub fn load_alpha(path: &Path) -> Result<Vec<f64>> {
    let img = open(path)?.to_rgba8();
    Ok(img.pixels().map(|p| p.0[3] as f64 / 255.0).collect())
}

pub fn load_mask(path: &Path) -> Result<Mask> {
    let img = open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    Ok(Mask {
        width: w as usize,
        height: h as usize,
        data: img.pixels().map(|p| p.0[0] >= 128).collect(),
    })
}
