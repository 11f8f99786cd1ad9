//! Ground-truth simulation: PSF families, controlled parameter bias on the
//! kernel handed to the solver, blur with additive Gaussian noise, and the
//! residual `(k - k̂) ⊗ x` that the kernel error induces.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kernel::{Filter2d, Kernel};
use crate::rng;
use crate::signal::{conv2d_direct, Image};

/// A parametric blur kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    /// Line of `length` pixels at `angle` degrees (counter-clockwise from the +x axis).
    Motion { length: f64, angle: f64 },
    /// Truncated isotropic Gaussian; an even `size` is realized as `size + 1`.
    Gaussian { size: f64, sigma: f64 },
    /// Uniform defocus disk.
    Disk { radius: f64 },
}

impl KernelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            KernelSpec::Motion { .. } => "motion",
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Disk { .. } => "disk",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            KernelSpec::Motion { .. } => &["length", "angle"],
            KernelSpec::Gaussian { .. } => &["size", "sigma"],
            KernelSpec::Disk { .. } => &["radius"],
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            KernelSpec::Motion { length, angle } => vec![length, angle],
            KernelSpec::Gaussian { size, sigma } => vec![size, sigma],
            KernelSpec::Disk { radius } => vec![radius],
        }
    }

    /// Builds a spec from a family name and its parameter list.
    pub fn from_family(family: &str, params: &[f64]) -> Result<KernelSpec> {
        let spec = match (family.to_ascii_lowercase().as_str(), params) {
            ("motion", &[length, angle]) => KernelSpec::Motion { length, angle },
            ("gaussian", &[size, sigma]) => KernelSpec::Gaussian { size, sigma },
            ("disk", &[radius]) => KernelSpec::Disk { radius },
            ("motion" | "gaussian" | "disk", p) => {
                return Err(Error::InvalidArgument(format!(
                    "wrong number of parameters for {family}: {p:?}"
                )))
            }
            _ => return Err(Error::InvalidArgument(format!("unknown kernel family {family:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Adds per-parameter offsets (same order as [`params`](Self::params)).
    pub fn biased(&self, offsets: &[f64]) -> Result<KernelSpec> {
        let p = self.params();
        if offsets.len() != p.len() {
            return Err(Error::InvalidArgument(format!(
                "{} takes {} bias offsets, got {}",
                self.family(),
                p.len(),
                offsets.len()
            )));
        }
        let q: Vec<f64> = p.iter().zip(offsets).map(|(a, b)| a + b).collect();
        KernelSpec::from_family(self.family(), &q)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match *self {
            KernelSpec::Motion { length, angle } => {
                if !(length >= 1.0) || !length.is_finite() || !angle.is_finite() {
                    return bad(format!("motion length {length} must be ≥ 1, angle {angle} finite"));
                }
            }
            KernelSpec::Gaussian { size, sigma } => {
                if !(size.fract() == 0.0) || odd_at_least(size as usize) < 3 || size < 0.0 {
                    return bad(format!("gaussian size {size} must be an integer ≥ 2"));
                }
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return bad(format!("gaussian sigma {sigma} must be > 0"));
                }
            }
            KernelSpec::Disk { radius } => {
                if !(radius > 0.0) || !radius.is_finite() {
                    return bad(format!("disk radius {radius} must be > 0"));
                }
            }
        }
        Ok(())
    }

    pub fn realize(&self) -> Result<Kernel> {
        match *self {
            KernelSpec::Motion { length, angle } => make_motion_kernel(length, angle),
            KernelSpec::Gaussian { size, sigma } => make_gaussian_kernel(size as usize, sigma),
            KernelSpec::Disk { radius } => make_disk_kernel(radius),
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p: Vec<String> = self.params().iter().map(|v| v.to_string()).collect();
        write!(f, "{}({})", self.family(), p.join(","))
    }
}

/// Realizes `spec` with parameters shifted by `bias`; a zero bias reproduces
/// the unbiased kernel exactly.
pub fn realize(spec: &KernelSpec, bias: &[f64]) -> Result<Kernel> {
    spec.biased(bias)?.realize()
}

fn odd_at_least(n: usize) -> usize {
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

/// Line PSF: the segment of `length - 1` pixels through the kernel centre is
/// sampled at sub-segment midpoints and each sample is spread bilinearly over
/// its four neighbouring pixels. Side is the smallest odd integer ≥ `length`.
pub fn make_motion_kernel(length: f64, angle_degrees: f64) -> Result<Kernel> {
    KernelSpec::Motion {
        length,
        angle: angle_degrees,
    }
    .validate()?;
    let side = odd_at_least(length.ceil() as usize);
    let c = (side / 2) as f64;
    let theta = angle_degrees.to_radians();
    let (dx, dy) = (snap(theta.cos()), snap(-theta.sin()));
    let span = length - 1.0;
    let samples = ((16.0 * span).ceil() as usize).max(1);
    let step = span / samples as f64;
    let mut w = vec![0.0; side * side];
    for k in 0..samples {
        // Half-integer offsets keep the sample set exactly symmetric about 0.
        let t = (k as f64 + 0.5 - samples as f64 / 2.0) * step;
        let (ox, oy) = (t * dx, t * dy);
        let (fx, fy) = (ox.floor(), oy.floor());
        let (ax, ay) = (ox - fx, oy - fy);
        let (ix, iy) = ((c + fx) as isize, (c + fy) as isize);
        for (yy, wy) in [(iy, 1.0 - ay), (iy + 1, ay)] {
            for (xx, wx) in [(ix, 1.0 - ax), (ix + 1, ax)] {
                let wt = wy * wx;
                if wt == 0.0 {
                    continue;
                }
                debug_assert!(xx >= 0 && yy >= 0 && (xx as usize) < side && (yy as usize) < side);
                w[yy as usize * side + xx as usize] += wt;
            }
        }
    }
    Kernel::normalized(side, side, w)
}

/// Normalized, truncated isotropic Gaussian of odd side `size` (even sizes
/// are bumped to the next odd integer).
pub fn make_gaussian_kernel(size: usize, sigma: f64) -> Result<Kernel> {
    KernelSpec::Gaussian {
        size: size as f64,
        sigma,
    }
    .validate()?;
    let side = odd_at_least(size);
    let r = (side / 2) as f64;
    let g: Vec<f64> = (0..side)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let mut w = Vec::with_capacity(side * side);
    for gy in &g {
        for gx in &g {
            w.push(gy * gx);
        }
    }
    Kernel::normalized(side, side, w)
}

/// Unnormalized disk coverage: each pixel holds the fraction of its 4×4
/// sub-pixel grid that falls inside the disk.
pub fn disk_coverage(radius: f64) -> Result<Filter2d> {
    KernelSpec::Disk { radius }.validate()?;
    let side = odd_at_least((2.0 * radius + 1.0).ceil() as usize);
    let c = (side / 2) as f64;
    const OFFSETS: [f64; 4] = [-0.375, -0.125, 0.125, 0.375];
    let r2 = radius * radius;
    let mut w = vec![0.0; side * side];
    for i in 0..side {
        for j in 0..side {
            let mut inside = 0u32;
            for oy in OFFSETS {
                for ox in OFFSETS {
                    let (y, x) = (i as f64 - c + oy, j as f64 - c + ox);
                    if x * x + y * y <= r2 {
                        inside += 1;
                    }
                }
            }
            w[i * side + j] = inside as f64 / 16.0;
        }
    }
    Filter2d::new(side, side, w)
}

/// Anti-aliased defocus disk, side = smallest odd integer ≥ `2·radius + 1`.
pub fn make_disk_kernel(radius: f64) -> Result<Kernel> {
    let f = disk_coverage(radius)?;
    Kernel::normalized(f.height(), f.width(), f.weights().to_vec())
}

/// Everything needed to synthesize one semi-blind test case.
#[derive(Clone, Debug, PartialEq)]
pub struct DegradationConfig {
    pub kernel_true: KernelSpec,
    /// Offsets added to the true parameters to obtain the inaccurate kernel.
    pub kernel_bias: Vec<f64>,
    /// Noise standard deviation as a fraction of the `[0, 1]` range.
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Output of [`DegradationConfig::simulate`].
#[derive(Clone, Debug)]
pub struct Scenario {
    pub blurry: Image,
    pub kernel_true: Kernel,
    pub kernel_hat: Kernel,
    pub residual_true: Image,
}

impl DegradationConfig {
    pub fn simulate(&self, clean: &Image) -> Result<Scenario> {
        let kernel_true = self.kernel_true.realize()?;
        let kernel_hat = realize(&self.kernel_true, &self.kernel_bias)?;
        let blurry = simulate_blur(clean, &kernel_true, self.noise_sigma, self.seed)?;
        let residual_true = true_residual(clean, &kernel_true, &kernel_hat)?;
        Ok(Scenario {
            blurry,
            kernel_true,
            kernel_hat,
            residual_true,
        })
    }
}

/// `y = k ⊗ x + n`, `n ~ N(0, noise_sigma²)` i.i.d., reproducible per seed.
pub fn simulate_blur(x: &Image, k: &Kernel, noise_sigma: f64, seed: u64) -> Result<Image> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise sigma {noise_sigma} must be ≥ 0")));
    }
    let mut y = conv2d_direct(x, k)?;
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = rng::stream(seed, rng::streams::BLUR_NOISE);
        for v in y.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(y)
}

/// `(k_true - k_hat) ⊗ x`, kernels zero-padded to a common size with centres
/// aligned.
pub fn true_residual(x: &Image, k_true: &Kernel, k_hat: &Kernel) -> Result<Image> {
    let dk = k_true.difference(k_hat)?;
    conv2d_direct(x, &dk)
}
