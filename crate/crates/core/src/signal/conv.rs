use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Image;
use crate::error::{Error, Result};
use crate::kernel::Filter2d;

fn check_fit(h: usize, w: usize, k: &Filter2d) -> Result<()> {
    if k.height() % 2 == 0 || k.width() % 2 == 0 {
        return Err(Error::InvalidKernel(format!(
            "kernel {}×{} must have odd sides",
            k.height(),
            k.width()
        )));
    }
    if k.height() > h || k.width() > w {
        return Err(Error::InvalidKernel(format!(
            "kernel {}×{} larger than image {h}×{w}",
            k.height(),
            k.width()
        )));
    }
    Ok(())
}

/// Circular convolution by direct summation.
pub fn conv2d_direct(image: &Image, kernel: impl AsRef<Filter2d>) -> Result<Image> {
    direct(image, kernel.as_ref(), false)
}

/// Adjoint of circular convolution: circular correlation with the kernel,
/// `out(i, j) = Σ k(a, b)·y((i+a) mod H, (j+b) mod W)`.
pub fn conv2d_adjoint(image: &Image, kernel: impl AsRef<Filter2d>) -> Result<Image> {
    direct(image, kernel.as_ref(), true)
}

fn direct(image: &Image, k: &Filter2d, adjoint: bool) -> Result<Image> {
    let (c, h, w) = image.dims();
    check_fit(h, w, k)?;
    let (ry, rx) = ((k.height() / 2) as isize, (k.width() / 2) as isize);
    let sgn = if adjoint { 1 } else { -1 };
    let mut out = vec![0.0; c * h * w];
    for (plane, dst) in image.planes().zip(out.chunks_mut(h * w)) {
        for a in -ry..=ry {
            for b in -rx..=rx {
                let kv = k.at_offset(a, b);
                if kv == 0.0 {
                    continue;
                }
                for i in 0..h {
                    let si = (i as isize + sgn * a).rem_euclid(h as isize) as usize;
                    let src = &plane[si * w..(si + 1) * w];
                    let row = &mut dst[i * w..(i + 1) * w];
                    for (j, o) in row.iter_mut().enumerate() {
                        let sj = (j as isize + sgn * b).rem_euclid(w as isize) as usize;
                        *o += kv * src[sj];
                    }
                }
            }
        }
    }
    Image::from_planes(c, h, w, out)
}

/// Circular convolution through the FFT.
pub fn conv2d_circular_fft(image: &Image, kernel: impl AsRef<Filter2d>) -> Result<Image> {
    let (c, h, w) = image.dims();
    let conv = CircularConvolver::new(h, w, kernel.as_ref())?;
    let mut out = Vec::with_capacity(c * h * w);
    for p in image.planes() {
        out.extend(conv.apply_plane(p));
    }
    Image::from_planes(c, h, w, out)
}

/// FFT plans plus the kernel spectrum for repeated circular convolutions of
/// `height×width` planes with one kernel.
pub struct CircularConvolver {
    height: usize,
    width: usize,
    /// Kernel spectrum, stored transposed (`width` rows of `height`).
    spectrum: Vec<Complex64>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CircularConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CircularConvolver")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

impl CircularConvolver {
    pub fn new(height: usize, width: usize, kernel: &Filter2d) -> Result<Self> {
        check_fit(height, width, kernel)?;
        let mut planner = FftPlanner::new();
        let mut conv = CircularConvolver {
            height,
            width,
            spectrum: Vec::new(),
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        };
        let (ry, rx) = ((kernel.height() / 2) as isize, (kernel.width() / 2) as isize);
        let mut embedded = vec![0.0; height * width];
        for a in -ry..=ry {
            for b in -rx..=rx {
                let i = a.rem_euclid(height as isize) as usize;
                let j = b.rem_euclid(width as isize) as usize;
                embedded[i * width + j] += kernel.at_offset(a, b);
            }
        }
        conv.spectrum = conv.forward(&embedded);
        Ok(conv)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn forward(&self, plane: &[f64]) -> Vec<Complex64> {
        let (h, w) = (self.height, self.width);
        let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for row in buf.chunks_mut(w) {
            self.row_fwd.process(row);
        }
        let mut t = transpose(&buf, h, w);
        for col in t.chunks_mut(h) {
            self.col_fwd.process(col);
        }
        t
    }

    fn inverse(&self, mut t: Vec<Complex64>) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        for col in t.chunks_mut(h) {
            self.col_inv.process(col);
        }
        let mut buf = transpose(&t, w, h);
        for row in buf.chunks_mut(w) {
            self.row_inv.process(row);
        }
        let scale = 1.0 / (h * w) as f64;
        buf.iter().map(|z| z.re * scale).collect()
    }

    /// `kernel ⊗ plane` for one row-major `height×width` plane.
    pub fn apply_plane(&self, plane: &[f64]) -> Vec<f64> {
        let mut f = self.forward(plane);
        f.iter_mut().zip(&self.spectrum).for_each(|(a, k)| *a *= k);
        self.inverse(f)
    }

    /// Adjoint of [`apply_plane`](Self::apply_plane) (circular correlation).
    pub fn adjoint_plane(&self, plane: &[f64]) -> Vec<f64> {
        let mut f = self.forward(plane);
        f.iter_mut().zip(&self.spectrum).for_each(|(a, k)| *a *= k.conj());
        self.inverse(f)
    }

    pub fn apply(&self, image: &Image) -> Result<Image> {
        self.map_planes(image, |p| self.apply_plane(p))
    }

    pub fn adjoint(&self, image: &Image) -> Result<Image> {
        self.map_planes(image, |p| self.adjoint_plane(p))
    }

    fn map_planes(&self, image: &Image, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Image> {
        let (c, h, w) = image.dims();
        if (h, w) != (self.height, self.width) {
            return Err(Error::shape(
                "circular convolution",
                format!("image {h}×{w}, convolver {}×{}", self.height, self.width),
            ));
        }
        let mut out = Vec::with_capacity(c * h * w);
        for p in image.planes() {
            out.extend(f(p));
        }
        Image::from_planes(c, h, w, out)
    }
}

fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::new(0.0, 0.0); src.len()];
    for i in 0..rows {
        for j in 0..cols {
            dst[j * rows + i] = src[i * cols + j];
        }
    }
    dst
}
