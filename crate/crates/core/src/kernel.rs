//! Centred 2-D filters and normalized blur kernels.
//!
//! Text format shared with the command-line tools:
//!
//! ```text
//! H W
//! w00 w01 ... w0(W-1)
//! ...
//! ```
//!
//! `H` and `W` are odd. On load, a weight sum within `1e-6` of one is
//! renormalized to exactly one; anything further off is rejected.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Tolerance on the weight sum of a [`Kernel`].
pub const KERNEL_SUM_TOLERANCE: f64 = 1e-12;
/// Largest weight-sum deviation the text loader silently renormalizes.
pub const LOAD_SUM_TOLERANCE: f64 = 1e-6;

/// Odd-sized filter centred at `(height/2, width/2)`. Weights may be signed.
#[derive(Clone, Debug, PartialEq)]
pub struct Filter2d {
    height: usize,
    width: usize,
    weights: Vec<f64>,
}

impl Filter2d {
    pub fn new(height: usize, width: usize, weights: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || height % 2 == 0 || width % 2 == 0 {
            return Err(Error::InvalidKernel(format!(
                "kernel size {height}×{width} must be odd"
            )));
        }
        if weights.len() != height * width {
            return Err(Error::InvalidKernel(format!(
                "{height}×{width} kernel needs {} weights, got {}",
                height * width,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidKernel("non-finite weight".into()));
        }
        Ok(Filter2d {
            height,
            width,
            weights,
        })
    }

    /// `size×size` filter with a single one at the centre.
    pub fn delta(size: usize) -> Result<Self> {
        let mut w = vec![0.0; size * size];
        if size % 2 == 1 {
            w[(size / 2) * size + size / 2] = 1.0;
        }
        Filter2d::new(size, size, w)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(dy, dx)` from the centre; zero outside the support.
    pub fn at_offset(&self, dy: isize, dx: isize) -> f64 {
        let i = dy + (self.height / 2) as isize;
        let j = dx + (self.width / 2) as isize;
        if i < 0 || j < 0 || i >= self.height as isize || j >= self.width as isize {
            0.0
        } else {
            self.weights[i as usize * self.width + j as usize]
        }
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Zero-pads to `height×width` keeping the centre fixed.
    pub fn pad_to(&self, height: usize, width: usize) -> Result<Filter2d> {
        if height < self.height || width < self.width || height % 2 == 0 || width % 2 == 0 {
            return Err(Error::InvalidKernel(format!(
                "cannot pad {}×{} to {height}×{width}",
                self.height, self.width
            )));
        }
        let (oy, ox) = ((height - self.height) / 2, (width - self.width) / 2);
        let mut w = vec![0.0; height * width];
        for i in 0..self.height {
            let dst = (i + oy) * width + ox;
            w[dst..dst + self.width].copy_from_slice(&self.weights[i * self.width..(i + 1) * self.width]);
        }
        Filter2d::new(height, width, w)
    }

    /// `self - other` after padding both to a common odd size, centres aligned.
    pub fn difference(&self, other: &Filter2d) -> Result<Filter2d> {
        let h = self.height.max(other.height);
        let w = self.width.max(other.width);
        let a = self.pad_to(h, w)?;
        let b = other.pad_to(h, w)?;
        let d = a.weights.iter().zip(&b.weights).map(|(x, y)| x - y).collect();
        Filter2d::new(h, w, d)
    }

    pub fn transpose(&self) -> Filter2d {
        let mut w = vec![0.0; self.weights.len()];
        for i in 0..self.height {
            for j in 0..self.width {
                w[j * self.height + i] = self.weights[i * self.width + j];
            }
        }
        Filter2d {
            height: self.width,
            width: self.height,
            weights: w,
        }
    }

    /// Point reflection through the centre (the adjoint filter).
    pub fn flipped(&self) -> Filter2d {
        let mut w = self.weights.clone();
        w.reverse();
        Filter2d {
            height: self.height,
            width: self.width,
            weights: w,
        }
    }
}

impl AsRef<Filter2d> for Filter2d {
    fn as_ref(&self) -> &Filter2d {
        self
    }
}

/// Point spread function: odd-sized, nonnegative, unit sum.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel(Filter2d);

impl Kernel {
    /// Validates an already-normalized kernel.
    pub fn new(height: usize, width: usize, weights: Vec<f64>) -> Result<Self> {
        Kernel::try_from(Filter2d::new(height, width, weights)?)
    }

    /// Scales nonnegative weights to unit sum.
    pub fn normalized(height: usize, width: usize, mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidKernel("negative weight".into()));
        }
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidKernel(format!("weight sum {s} cannot be normalized")));
        }
        weights.iter_mut().for_each(|w| *w /= s);
        Kernel::try_from(Filter2d::new(height, width, weights)?)
    }

    pub fn delta() -> Kernel {
        Kernel(Filter2d::delta(1).expect("1×1 delta is valid"))
    }

    pub fn filter(&self) -> &Filter2d {
        &self.0
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.0.weights
    }

    /// Kernel error `self - other` with zero padding to a common size.
    pub fn difference(&self, other: &Kernel) -> Result<Filter2d> {
        self.0.difference(&other.0)
    }

    pub fn pad_to(&self, height: usize, width: usize) -> Result<Kernel> {
        Ok(Kernel(self.0.pad_to(height, width)?))
    }

    /// Serializes in the text format; decimals round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.height(), self.width());
        for row in self.weights().chunks(self.width()) {
            let line: Vec<String> = row.iter().map(|w| format!("{w:e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Kernel> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty kernel file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("bad kernel header {header:?}: {e}")))?;
        let [h, w] = dims[..] else {
            return Err(Error::Parse(format!("kernel header must be \"H W\", got {header:?}")));
        };
        let mut weights = Vec::with_capacity(h * w);
        for (row, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("kernel row {row}: {e}")))?;
            if vals.len() != w {
                return Err(Error::Parse(format!("kernel row {row} has {} values, expected {w}", vals.len())));
            }
            weights.extend(vals);
        }
        if weights.len() != h * w {
            return Err(Error::Parse(format!("expected {h} kernel rows, got {}", weights.len() / w.max(1))));
        }
        if weights.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidKernel("negative weight".into()));
        }
        let s: f64 = weights.iter().sum();
        if !((s - 1.0).abs() <= LOAD_SUM_TOLERANCE) {
            return Err(Error::InvalidKernel(format!("weights sum to {s}, expected 1")));
        }
        if (s - 1.0).abs() <= KERNEL_SUM_TOLERANCE {
            Kernel::new(h, w, weights)
        } else {
            Kernel::normalized(h, w, weights)
        }
    }
}

impl TryFrom<Filter2d> for Kernel {
    type Error = Error;

    fn try_from(f: Filter2d) -> Result<Kernel> {
        if f.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidKernel("negative weight".into()));
        }
        let s = f.sum();
        if (s - 1.0).abs() > KERNEL_SUM_TOLERANCE {
            return Err(Error::InvalidKernel(format!("weights sum to {s}, expected 1")));
        }
        Ok(Kernel(f))
    }
}

impl AsRef<Filter2d> for Kernel {
    fn as_ref(&self) -> &Filter2d {
        &self.0
    }
}
