//! Orthonormal separable 2-D DCT-II, `V = C_H · X · C_Wᵀ`, with its inverse
//! (the DCT-III) `X = C_Hᵀ · V · C_W`.

use std::f64::consts::PI;

use super::Image;
use crate::error::{Error, Result};
use crate::tensor::gemm::{gemm, Mat};

/// Cached basis matrices for one plane size.
#[derive(Clone, Debug)]
pub struct Dct2 {
    height: usize,
    width: usize,
    basis_h: Vec<f64>,
    basis_w: Vec<f64>,
}

/// Row `k` of the orthonormal DCT-II matrix of order `n` is
/// `α_k cos(π(2m+1)k / 2n)`, `α_0 = √(1/n)`, `α_k = √(2/n)`.
fn basis(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        let alpha = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for m in 0..n {
            c[k * n + m] = alpha * (PI * (2 * m + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    c
}

impl Dct2 {
    pub fn new(height: usize, width: usize) -> Self {
        Dct2 {
            height,
            width,
            basis_h: basis(height),
            basis_w: basis(width),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Forward transform of one row-major plane.
    pub fn forward_plane(&self, plane: &[f64]) -> Vec<f64> {
        self.sandwich(plane, false)
    }

    pub fn inverse_plane(&self, coeffs: &[f64]) -> Vec<f64> {
        self.sandwich(coeffs, true)
    }

    fn sandwich(&self, x: &[f64], inverse: bool) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        assert_eq!(x.len(), h * w, "plane size does not match the DCT plan");
        let ch = Mat::row_major(&self.basis_h, h, h);
        let cw = Mat::row_major(&self.basis_w, w, w);
        let (left, right) = if inverse { (ch.t(), cw) } else { (ch, cw.t()) };
        let mut tmp = vec![0.0; h * w];
        gemm(left, Mat::row_major(x, h, w), 0.0, &mut tmp);
        let mut out = vec![0.0; h * w];
        gemm(Mat::row_major(&tmp, h, w), right, 0.0, &mut out);
        out
    }

    pub fn forward(&self, image: &Image) -> Result<Image> {
        self.map(image, |p| self.forward_plane(p))
    }

    pub fn inverse(&self, coeffs: &Image) -> Result<Image> {
        self.map(coeffs, |p| self.inverse_plane(p))
    }

    fn map(&self, image: &Image, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Image> {
        let (c, h, w) = image.dims();
        if (h, w) != (self.height, self.width) {
            return Err(Error::shape("dct2", format!("plane {h}×{w}, plan {}×{}", self.height, self.width)));
        }
        let mut out = Vec::with_capacity(c * h * w);
        for p in image.planes() {
            out.extend(f(p));
        }
        Image::from_planes(c, h, w, out)
    }
}

/// Per-channel orthonormal 2-D DCT-II.
pub fn dct2(image: &Image) -> Result<Image> {
    Dct2::new(image.height(), image.width()).forward(image)
}

/// Inverse of [`dct2`].
pub fn idct2(coeffs: &Image) -> Result<Image> {
    Dct2::new(coeffs.height(), coeffs.width()).inverse(coeffs)
}
