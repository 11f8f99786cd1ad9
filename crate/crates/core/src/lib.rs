//! Semi-blind image deblurring with untrained generator priors.
//!
//! A blurry observation `y` is explained as `k̂ ⊗ x + r + h + n`: the clear
//! image `x` blurred by a supplied (inaccurate) kernel `k̂`, a residual `r`
//! caused by the kernel error, ringing artifacts `h` that are sparse in the
//! DCT domain, and noise. Both `x` and `r` are produced by untrained
//! encoder-decoder networks fed with fixed noise; `h` is carried by its DCT
//! coefficients `v`. The solver alternates one Adam step on the network
//! weights with a proximal soft-thresholding step on `v`.
//!
//! Module map:
//!
//! - [`tensor`]: dense tensors, a reverse-mode tape, Adam, finite-difference checks.
//! - [`signal`]: circular convolution, orthonormal DCT, TV, soft-thresholding, metrics.
//! - [`kernel`] and [`degradation`]: PSF families, kernel bias, blur simulation.
//! - [`networks`]: the image and residual generators.
//! - [`solver`]: the alternating minimization loop and its ablations.

pub mod checkpoint;
pub mod degradation;
pub mod error;
pub mod kernel;
pub mod networks;
pub mod rng;
pub mod signal;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use kernel::{Filter2d, Kernel};
pub use signal::Image;
pub use tensor::Tensor;
