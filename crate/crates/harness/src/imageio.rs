//! Image and kernel files.
//!
//! Images load from PNG or PGM/PPM with 8- or 16-bit samples, mapped to
//! `[0, 1]` by dividing by the largest sample value. Saving clamps to `[0, 1]`
//! and quantizes to 8 bits with round-half-up; the format follows the file
//! extension (`.png`, `.pgm`, `.ppm`).

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use image::{DynamicImage, ImageFormat};
use semiblind_core::{Image, Kernel};

pub fn load_image(path: &Path) -> Result<Image> {
    let img = image::open(path).with_context(|| format!("cannot read image {}", path.display()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data): (usize, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.pixels().map(|p| p.0[0] as f64 / 255.0).collect()),
        DynamicImage::ImageLumaA8(b) => (1, b.pixels().map(|p| p.0[0] as f64 / 255.0).collect()),
        DynamicImage::ImageLuma16(b) => (1, b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect()),
        DynamicImage::ImageLumaA16(b) => (1, b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect()),
        DynamicImage::ImageRgb8(b) => (3, interleaved(b.as_raw(), 3, 3, 255.0)),
        DynamicImage::ImageRgba8(b) => (3, interleaved(b.as_raw(), 4, 3, 255.0)),
        DynamicImage::ImageRgb16(b) => (3, interleaved(b.as_raw(), 3, 3, 65535.0)),
        DynamicImage::ImageRgba16(b) => (3, interleaved(b.as_raw(), 4, 3, 65535.0)),
        other => bail!("{}: unsupported sample format {:?}", path.display(), other.color()),
    };
    let data = if channels == 3 { to_planar(&data, h * w) } else { data };
    Ok(Image::new(channels, h, w, data)?)
}

/// Keeps the first `keep` of every `stride` samples, scaled by `1/max`.
fn interleaved<T: Copy + Into<f64>>(raw: &[T], stride: usize, keep: usize, max: f64) -> Vec<f64> {
    raw.chunks(stride)
        .flat_map(|px| px[..keep].iter().map(move |&v| v.into() / max))
        .collect()
}

fn to_planar(hwc: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; hwc.len()];
    for (i, px) in hwc.chunks(3).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            out[c * n + i] = v;
        }
    }
    out
}

/// `[0, 1]` → 8-bit with clamping and round-half-up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn save_image(image: &Image, path: &Path) -> Result<()> {
    let (c, h, w) = image.dims();
    let format = ImageFormat::from_path(path).map_err(|_| anyhow!("{}: unknown image extension", path.display()))?;
    let n = h * w;
    let out = match c {
        1 => DynamicImage::ImageLuma8(
            image::GrayImage::from_raw(w as u32, h as u32, image.data().iter().map(|&v| quantize(v)).collect())
                .expect("buffer size matches"),
        ),
        3 => {
            let mut raw = Vec::with_capacity(3 * n);
            for i in 0..n {
                for ch in 0..3 {
                    raw.push(quantize(image.data()[ch * n + i]));
                }
            }
            DynamicImage::ImageRgb8(image::RgbImage::from_raw(w as u32, h as u32, raw).expect("buffer size matches"))
        }
        _ => bail!("cannot save a {c}-channel image"),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    out.save_with_format(path, format)
        .with_context(|| format!("cannot write image {}", path.display()))
}

pub fn load_kernel(path: &Path) -> Result<Kernel> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read kernel {}", path.display()))?;
    Kernel::from_text(&text).with_context(|| format!("bad kernel file {}", path.display()))
}

pub fn save_kernel(kernel: &Kernel, path: &Path) -> Result<()> {
    fs::write(path, kernel.to_text()).with_context(|| format!("cannot write kernel {}", path.display()))
}

/// Maps a signed image to `[0, 1]` through `v ↦ (v/m + 1)/2` with
/// `m = max|v|` (`m = 1` for an all-zero image). Returns the image and `m`.
pub fn signed_to_display(image: &Image) -> (Image, f64) {
    let m = image.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let m = if m > 0.0 { m } else { 1.0 };
    (image.map(|v| (v / m + 1.0) * 0.5), m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_rounds_half_up_and_clamps() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.3), 255);
        assert_eq!(quantize(0.5 / 255.0), 1);
    }

    #[test]
    fn signed_display_is_symmetric() {
        let img = Image::gray(1, 3, vec![-2.0, 0.0, 1.0]).unwrap();
        let (d, m) = signed_to_display(&img);
        assert_eq!(m, 2.0);
        assert_eq!(d.data(), &[0.0, 0.5, 0.75]);
    }
}
