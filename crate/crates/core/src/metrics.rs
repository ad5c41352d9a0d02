//! Image quality metrics: PSNR and windowed SSIM, optionally restricted to a
//! mask.

use serde::{Deserialize, Serialize};

use crate::image::{Image, Mask};
use crate::{Error, Result};

/// Reported PSNR for identical images.
pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Argument(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

fn check_mask(a: &Image, mask: &Mask) -> Result<()> {
    if mask.width != a.width || mask.height != a.height {
        return Err(Error::Argument(format!(
            "mask is {}x{} but the image is {}x{}",
            mask.width, mask.height, a.width, a.height
        )));
    }
    Ok(())
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

/// `10 log10(1 / MSE)` over all pixels and channels, capped at [`PSNR_CAP`].
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    psnr_over(a, b, |_| true)
}

/// PSNR over the pixels selected by `mask`; an empty mask scores the cap.
pub fn psnr_masked(a: &Image, b: &Image, mask: &Mask) -> Result<f64> {
    check_dims(a, b)?;
    check_mask(a, mask)?;
    psnr_over(a, b, |i| mask.data[i])
}

fn psnr_over(a: &Image, b: &Image, keep: impl Fn(usize) -> bool) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (pa, pb)) in a.pixels.iter().zip(&b.pixels).enumerate() {
        if !keep(i) {
            continue;
        }
        for c in 0..3 {
            let d = pa[c] - pb[c];
            sum += d * d;
        }
        n += 3;
    }
    if n == 0 {
        return Ok(PSNR_CAP);
    }
    Ok(psnr_from_mse(sum / n as f64))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - r;
        *t = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.map(|t| t / s)
}

/// Per-window SSIM for one channel over every window that fits inside the
/// image. Entry `(y, x)` belongs to the window whose top-left pixel is
/// `(x, y)`; the map is `(h - 10) x (w - 10)`.
pub fn ssim_map(a: &[f64], b: &[f64], width: usize, height: usize) -> Vec<f64> {
    let taps = gaussian_taps();
    let ow = width + 1 - SSIM_WINDOW;
    let oh = height + 1 - SSIM_WINDOW;
    // Horizontal pass on the five moment images, then vertical.
    let fields: [Vec<f64>; 5] = [
        a.to_vec(),
        b.to_vec(),
        a.iter().map(|x| x * x).collect(),
        b.iter().map(|x| x * x).collect(),
        a.iter().zip(b).map(|(x, y)| x * y).collect(),
    ];
    let filtered: Vec<Vec<f64>> = fields
        .iter()
        .map(|f| {
            let mut h = vec![0.0; height * ow];
            for y in 0..height {
                for x in 0..ow {
                    let row = &f[y * width + x..y * width + x + SSIM_WINDOW];
                    h[y * ow + x] = row.iter().zip(&taps).map(|(v, t)| v * t).sum();
                }
            }
            let mut out = vec![0.0; oh * ow];
            for y in 0..oh {
                for x in 0..ow {
                    out[y * ow + x] = (0..SSIM_WINDOW).map(|k| h[(y + k) * ow + x] * taps[k]).sum();
                }
            }
            out
        })
        .collect();
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    (0..oh * ow)
        .map(|i| {
            let (ma, mb) = (filtered[0][i], filtered[1][i]);
            let va = filtered[2][i] - ma * ma;
            let vb = filtered[3][i] - mb * mb;
            let cov = filtered[4][i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .collect()
}

fn channel(img: &Image, c: usize) -> Vec<f64> {
    img.pixels.iter().map(|p| p[c]).collect()
}

fn check_ssim_size(a: &Image) -> Result<()> {
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::Argument(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
            a.width, a.height
        )));
    }
    Ok(())
}

/// Mean SSIM over all valid windows, averaged across the three channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    check_ssim_size(a)?;
    ssim_over(a, b, |_, _| true)
}

/// SSIM averaged over the windows whose center pixel lies in `mask`; an
/// empty selection scores 1.
pub fn ssim_masked(a: &Image, b: &Image, mask: &Mask) -> Result<f64> {
    check_dims(a, b)?;
    check_mask(a, mask)?;
    check_ssim_size(a)?;
    let r = SSIM_WINDOW / 2;
    ssim_over(a, b, |x, y| mask.data[(y + r) * mask.width + x + r])
}

fn ssim_over(a: &Image, b: &Image, keep: impl Fn(usize, usize) -> bool) -> Result<f64> {
    let ow = a.width + 1 - SSIM_WINDOW;
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..3 {
        let map = ssim_map(&channel(a, c), &channel(b, c), a.width, a.height);
        for (i, s) in map.iter().enumerate() {
            if keep(i % ow, i / ow) {
                total += s;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Ok(1.0);
    }
    Ok(total / count as f64)
}

/// Which set of frames a report covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    NovelPose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetric {
    pub frame: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub split: Split,
    pub masked: bool,
    pub frames: Vec<FrameMetric>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl MetricReport {
    /// Scores each rendered image against its ground truth.
    pub fn compute(split: Split, rendered: &[Image], truth: &[Image], masks: Option<&[Mask]>) -> Result<Self> {
        if rendered.len() != truth.len() {
            return Err(Error::Shape {
                name: "evaluation frames".into(),
                expected: truth.len(),
                actual: rendered.len(),
            });
        }
        if let Some(m) = masks {
            if m.len() != truth.len() {
                return Err(Error::Shape { name: "masks".into(), expected: truth.len(), actual: m.len() });
            }
        }
        let mut frames = Vec::with_capacity(truth.len());
        for (i, (r, t)) in rendered.iter().zip(truth).enumerate() {
            let (p, s) = match masks {
                Some(m) => (psnr_masked(r, t, &m[i])?, ssim_masked(r, t, &m[i])?),
                None => (psnr(r, t)?, ssim(r, t)?),
            };
            frames.push(FrameMetric { frame: i, psnr: p, ssim: s });
        }
        let n = frames.len().max(1) as f64;
        Ok(MetricReport {
            split,
            masked: masks.is_some(),
            mean_psnr: frames.iter().map(|f| f.psnr).sum::<f64>() / n,
            mean_ssim: frames.iter().map(|f| f.ssim).sum::<f64>() / n,
            frames,
        })
    }
}
