//! Signal kernels shared by simulation, the sparse-artifact update and
//! evaluation. Everything here is a pure function of its inputs.
//!
//! Convolution is circular (periodic boundary): output pixel `(i, j)` is
//! `Σ k(a, b)·x((i-a) mod H, (j-b) mod W)` with kernel offsets `a, b`
//! measured from the kernel centre.

mod conv;
mod dct;
mod metrics;

pub use conv::{conv2d_adjoint, conv2d_circular_fft, conv2d_direct, CircularConvolver};
pub use dct::{dct2, idct2, Dct2};
pub use metrics::{mse, mse_signed, psnr, ssim, PSNR_CAP_DB, SSIM_WINDOW};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Channel-major image, `channels × height × width`. Pixels are nominally in
/// `[0, 1]` but are only clamped for metrics and file output.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::shape("image", format!("{channels}×{height}×{width}")));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(
                "image",
                format!("{channels}×{height}×{width} needs {} pixels, got {}", channels * height * width, data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image".into()));
        }
        Ok(Image {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn gray(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Image::new(1, height, width, data)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        Image {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn planes(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.height * self.width)
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn clamped(&self) -> Image {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Result<Image> {
        self.same_dims(other)?;
        Ok(Image {
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            ..*self
        })
    }

    pub fn same_dims(&self, other: &Image) -> Result<()> {
        if self.dims() == other.dims() {
            Ok(())
        } else {
            Err(Error::shape("image", format!("{:?} vs {:?}", self.dims(), other.dims())))
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_parts(vec![self.channels, self.height, self.width], self.data.clone())
    }

    /// Accepts `C×H×W` or `H×W` tensors.
    pub fn from_tensor(t: &Tensor) -> Result<Image> {
        let (c, h, w) = t.chw()?;
        Image::new(c, h, w, t.data().to_vec())
    }

    pub(crate) fn from_planes(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Image> {
        Image::new(channels, height, width, data)
    }
}

/// Anisotropic total variation `Σ|∇ₓ| + Σ|∇ᵧ|` with non-circular forward
/// differences, summed over channels.
pub fn tv_value(image: &Image) -> f64 {
    let (h, w) = (image.height, image.width);
    let mut total = 0.0;
    for p in image.planes() {
        for i in 0..h {
            for j in 0..w {
                let v = p[i * w + j];
                if j + 1 < w {
                    total += (p[i * w + j + 1] - v).abs();
                }
                if i + 1 < h {
                    total += (p[(i + 1) * w + j] - v).abs();
                }
            }
        }
    }
    total
}

/// Entrywise `max(|a|-δ, 0)·sgn(a)`, the proximal map of `δ‖·‖₁`.
pub fn soft_threshold(t: &Tensor, delta: f64) -> Result<Tensor> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold {delta} must be nonnegative")));
    }
    Ok(t.map(|v| crate::tensor::soft_shrink_value(v, delta)))
}
