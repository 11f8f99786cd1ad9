//! Full-reference quality metrics on `[0, 1]` images. Both inputs are
//! clamped to `[0, 1]` before comparison.

use super::Image;
use crate::error::{Error, Result};

/// Returned by [`psnr`] for identical images, and the upper bound of every
/// PSNR value.
pub const PSNR_CAP_DB: f64 = 99.0;
/// Side of the Gaussian SSIM window.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

pub fn mse(reference: &Image, estimate: &Image) -> Result<f64> {
    reference.same_dims(estimate)?;
    let n = reference.data().len() as f64;
    let s: f64 = reference
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(a, b)| {
            let d = a.clamp(0.0, 1.0) - b.clamp(0.0, 1.0);
            d * d
        })
        .sum();
    Ok(s / n)
}

/// Mean squared difference without clamping, for signed quantities such as
/// residuals.
pub fn mse_signed(reference: &Image, estimate: &Image) -> Result<f64> {
    reference.same_dims(estimate)?;
    let n = reference.data().len() as f64;
    let s: f64 = reference
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / n)
}

/// `10·log10(1/mse)` with peak 1, capped at [`PSNR_CAP_DB`].
pub fn psnr(reference: &Image, estimate: &Image) -> Result<f64> {
    let m = mse(reference, estimate)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering with the normalized 1-D window `g`.
fn filter_valid(p: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut tmp = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            tmp[i * ow + j] = (0..n).map(|k| g[k] * p[i * w + j + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..n).map(|k| g[k] * tmp[(i + k) * ow + j]).sum();
        }
    }
    out
}

/// Mean SSIM over all window positions that fit inside the image (11×11
/// Gaussian window, σ = 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1), averaged
/// over channels.
pub fn ssim(reference: &Image, estimate: &Image) -> Result<f64> {
    reference.same_dims(estimate)?;
    let (c, h, w) = reference.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::shape(
            "ssim",
            format!("image {h}×{w} smaller than the {SSIM_WINDOW}×{SSIM_WINDOW} window"),
        ));
    }
    let x = reference.clamped();
    let y = estimate.clamped();
    let g = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for ch in 0..c {
        let (px, py) = (x.plane(ch), y.plane(ch));
        let xx: Vec<f64> = px.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = py.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = px.iter().zip(py).map(|(a, b)| a * b).collect();
        let mx = filter_valid(px, h, w, &g);
        let my = filter_valid(py, h, w, &g);
        let sxx = filter_valid(&xx, h, w, &g);
        let syy = filter_valid(&yy, h, w, &g);
        let sxy = filter_valid(&xy, h, w, &g);
        let mut acc = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            acc += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += acc / mx.len() as f64;
    }
    Ok(total / c as f64)
}
