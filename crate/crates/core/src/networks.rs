//! Untrained encoder-decoder generators.
//!
//! Both generators share one topology and map a fixed noise tensor to an
//! image-sized output:
//!
//! - encoder level `l`: 3×3 stride-2 conv + leaky-ReLU, 3×3 conv + leaky-ReLU;
//! - skip `l`: 1×1 conv of the encoder level's input;
//! - decoder level `l` (deepest first): 2× upsample, concatenate skip `l`,
//!   two 3×3 convs each followed by leaky-ReLU;
//! - a final 1×1 conv and the head activation.
//!
//! The image generator ends in a sigmoid; the residual generator ends in a
//! soft-shrinkage with a fixed threshold, so small outputs are exactly zero.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{ConvGeom, Graph, Tensor, Upsample, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Head {
    Sigmoid,
    SoftShrink(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub input_channels: usize,
    pub output_channels: usize,
    pub depth: usize,
    pub encoder_channels: Vec<usize>,
    pub skip_channels: Vec<usize>,
    pub activation_slope: f64,
    pub head: Head,
    pub upsample: Upsample,
    /// Standard deviation of the fixed noise input.
    pub input_sigma: f64,
    /// Scale applied to the output layer's initial weights.
    pub output_init_gain: f64,
    /// Per-channel normalization with a learned affine map after every hidden
    /// convolution. Normalized convolutions carry no bias.
    pub normalization: bool,
    /// Number of finest decoder levels that run without their upsampling;
    /// the missing upsamplings are applied just before the output layer, so
    /// the output is an interpolated coarse field. Those levels take no skips.
    pub coarse_output_levels: usize,
    pub init_seed: u64,
}

pub const DEFAULT_SOFT_SHRINK: f64 = 0.01;
pub const DEFAULT_INPUT_SIGMA: f64 = 0.1;
pub const RESIDUAL_OUTPUT_GAIN: f64 = 0.1;
pub const NORM_EPS: f64 = 1e-5;

impl NetConfig {
    fn base(output_channels: usize, head: Head, init_seed: u64) -> Self {
        NetConfig {
            input_channels: 16,
            output_channels,
            depth: 4,
            encoder_channels: vec![16, 32, 64, 128],
            skip_channels: vec![4; 4],
            activation_slope: 0.2,
            head,
            upsample: Upsample::Bilinear,
            input_sigma: DEFAULT_INPUT_SIGMA,
            output_init_gain: 1.0,
            normalization: true,
            coarse_output_levels: 0,
            init_seed,
        }
    }

    /// Default image generator (sigmoid head).
    pub fn image(output_channels: usize, init_seed: u64) -> Self {
        Self::base(output_channels, Head::Sigmoid, init_seed)
    }

    /// Default residual generator: soft-shrinkage head, no skip connections,
    /// finest decoder level at half resolution and a small initial output
    /// layer. The output is a smooth field that starts near zero.
    pub fn residual(output_channels: usize, init_seed: u64) -> Self {
        let mut c = Self::base(output_channels, Head::SoftShrink(DEFAULT_SOFT_SHRINK), init_seed);
        c.skip_channels = vec![0; c.depth];
        c.coarse_output_levels = 1;
        c.output_init_gain = RESIDUAL_OUTPUT_GAIN;
        c
    }

    /// Replaces depth and channel widths, with `skip` channels at every level
    /// except the coarse output levels.
    pub fn with_widths(mut self, encoder_channels: &[usize], skip: usize) -> Self {
        self.depth = encoder_channels.len();
        self.encoder_channels = encoder_channels.to_vec();
        self.coarse_output_levels = self.coarse_output_levels.min(self.depth);
        let k = self.coarse_output_levels;
        self.skip_channels = (0..self.depth).map(|l| if l < k { 0 } else { skip }).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.depth == 0 {
            return bad("depth must be positive".into());
        }
        if self.encoder_channels.len() != self.depth || self.skip_channels.len() != self.depth {
            return bad(format!(
                "depth {} needs {0} encoder and skip widths, got {} and {}",
                self.depth,
                self.encoder_channels.len(),
                self.skip_channels.len()
            ));
        }
        if self.input_channels == 0 || self.output_channels == 0 || self.encoder_channels.contains(&0) {
            return bad("channel counts must be at least 1".into());
        }
        if !(self.input_sigma > 0.0) {
            return bad(format!("input sigma {} must be > 0", self.input_sigma));
        }
        let k = self.coarse_output_levels;
        if k > self.depth || self.skip_channels[..k.min(self.depth)].iter().any(|&s| s > 0) {
            return bad(format!("{k} coarse output levels need depth ≥ {k} and no skips on those levels"));
        }
        if let Head::SoftShrink(d) = self.head {
            if !(d >= 0.0) {
                return bad(format!("soft-shrinkage threshold {d} must be ≥ 0"));
            }
        }
        Ok(())
    }

    /// Divisor the generator needs for the image height and width.
    pub fn size_factor(&self) -> usize {
        1 << self.depth
    }
}

/// I.i.d. `N(0, sigma²)` tensor of shape `channels×height×width`.
pub fn sample_noise_input(channels: usize, height: usize, width: usize, sigma: f64, seed: u64) -> Result<Tensor> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise sigma {sigma} must be > 0")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut r = rng::stream(seed, rng::streams::NET_INPUT);
    let data = (0..channels * height * width).map(|_| normal.sample(&mut r)).collect();
    Tensor::new(vec![channels, height, width], data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetConfig,
    height: usize,
    width: usize,
    names: Vec<String>,
    params: Vec<Tensor>,
    fixed_input: Tensor,
}

/// Graph handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct NetOutput {
    pub output: Var,
    /// Output of the final 1×1 conv, before the head activation.
    pub pre_head: Var,
    /// Parameter leaves, in [`Network::param_names`] order.
    pub params: Vec<Var>,
}

struct ParamInit<'a> {
    names: Vec<String>,
    params: Vec<Tensor>,
    rng: &'a mut rand_chacha::ChaCha8Rng,
}

impl ParamInit<'_> {
    fn push(&mut self, name: String, t: Tensor) {
        self.names.push(name);
        self.params.push(t);
    }

    fn conv(&mut self, name: &str, out_c: usize, in_c: usize, k: usize, bound: f64, norm: bool) {
        let w: Vec<f64> = (0..out_c * in_c * k * k)
            .map(|_| self.rng.gen_range(-bound..=bound))
            .collect();
        self.push(format!("{name}.weight"), Tensor::from_parts(vec![out_c, in_c, k, k], w));
        if norm {
            self.push(format!("{name}.norm.gamma"), Tensor::full(&[out_c], 1.0));
            self.push(format!("{name}.norm.beta"), Tensor::zeros(&[out_c]));
        } else {
            self.push(format!("{name}.bias"), Tensor::zeros(&[out_c]));
        }
    }
}

/// Builds a generator for `height×width` outputs. Weights are drawn from the
/// fan-in-scaled uniform distribution `U(±√(6 / ((1+a²)·fan_in)))` (`a` the
/// leaky-ReLU slope; gain 1 for the output layer), biases start at zero.
pub fn build_net(config: NetConfig, height: usize, width: usize) -> Result<Network> {
    config.validate()?;
    let f = config.size_factor();
    if height == 0 || width == 0 || height % f != 0 || width % f != 0 {
        return Err(Error::InvalidArgument(format!(
            "{height}×{width} is not divisible by {f} (depth {})",
            config.depth
        )));
    }
    let mut r = rng::stream(config.init_seed, rng::streams::NET_WEIGHTS);
    let mut init = ParamInit {
        names: Vec::new(),
        params: Vec::new(),
        rng: &mut r,
    };
    let a = config.activation_slope;
    let hidden = |fan_in: usize| (6.0 / ((1.0 + a * a) * fan_in as f64)).sqrt();
    let c = &config.encoder_channels;
    let s = &config.skip_channels;
    let norm = config.normalization;
    for l in 0..config.depth {
        let cin = if l == 0 { config.input_channels } else { c[l - 1] };
        if s[l] > 0 {
            init.conv(&format!("skip{l}"), s[l], cin, 1, (3.0 / cin as f64).sqrt(), norm);
        }
        init.conv(&format!("enc{l}.down"), c[l], cin, 3, hidden(cin * 9), norm);
        init.conv(&format!("enc{l}.conv"), c[l], c[l], 3, hidden(c[l] * 9), norm);
    }
    for l in (0..config.depth).rev() {
        let up = if l + 1 < config.depth { c[l + 1] } else { c[l] };
        let cin = up + s[l];
        init.conv(&format!("dec{l}.conv1"), c[l], cin, 3, hidden(cin * 9), norm);
        init.conv(&format!("dec{l}.conv2"), c[l], c[l], 3, hidden(c[l] * 9), norm);
    }
    let out_bound = config.output_init_gain * (3.0 / c[0] as f64).sqrt();
    init.conv("out", config.output_channels, c[0], 1, out_bound, false);
    let ParamInit { names, params, .. } = init;

    let fixed_input = sample_noise_input(config.input_channels, height, width, config.input_sigma, config.init_seed)?;
    Ok(Network {
        config,
        height,
        width,
        names,
        params,
        fixed_input,
    })
}

impl Network {
    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn fixed_input(&self) -> &Tensor {
        &self.fixed_input
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Replaces parameters, e.g. from a checkpoint. Shapes must match.
    pub fn set_params(&mut self, params: Vec<Tensor>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::shape("set_params", format!("{} tensors, expected {}", params.len(), self.params.len())));
        }
        for (new, old) in params.iter().zip(&self.params) {
            new.same_shape(old, "set_params")?;
        }
        self.params = params;
        Ok(())
    }

    /// Records the generator's forward pass on `g` with tracked parameters.
    pub fn forward(&self, g: &mut Graph) -> Result<NetOutput> {
        let params: Vec<Var> = self.params.iter().map(|p| g.param(p.clone())).collect();
        let cfg = &self.config;
        let slope = cfg.activation_slope;
        let mut next = 0usize;
        // Convolution, then normalization (hidden layers only) consuming the
        // parameters in build order.
        let mut layer = |g: &mut Graph, x: Var, stride: usize, pad: usize, hidden: bool| -> Result<Var> {
            let w = params[next];
            let y = if hidden && cfg.normalization {
                let y = g.conv2d(x, w, None, ConvGeom::new(stride, pad))?;
                let y = g.channel_norm(y, params[next + 1], params[next + 2], NORM_EPS)?;
                next += 3;
                y
            } else {
                let y = g.conv2d(x, w, Some(params[next + 1]), ConvGeom::new(stride, pad))?;
                next += 2;
                y
            };
            Ok(y)
        };

        let mut h = g.constant(self.fixed_input.clone());
        let mut skips = Vec::with_capacity(cfg.depth);
        for l in 0..cfg.depth {
            skips.push(if cfg.skip_channels[l] > 0 {
                Some(layer(g, h, 1, 0, true)?)
            } else {
                None
            });
            let d = layer(g, h, 2, 1, true)?;
            let d = g.leaky_relu(d, slope)?;
            let e = layer(g, d, 1, 1, true)?;
            h = g.leaky_relu(e, slope)?;
        }
        for l in (0..cfg.depth).rev() {
            let late = l < cfg.coarse_output_levels;
            let u = if late { h } else { g.upsample2x(h, cfg.upsample)? };
            let x = match skips[l] {
                Some(s) => g.concat(&[u, s])?,
                None => u,
            };
            let x = layer(g, x, 1, 1, true)?;
            let x = g.leaky_relu(x, slope)?;
            let x = layer(g, x, 1, 1, true)?;
            h = g.leaky_relu(x, slope)?;
        }
        for _ in 0..cfg.coarse_output_levels {
            h = g.upsample2x(h, cfg.upsample)?;
        }
        let pre_head = layer(g, h, 1, 0, false)?;
        let output = match cfg.head {
            Head::Sigmoid => g.sigmoid(pre_head)?,
            Head::SoftShrink(delta) => g.soft_shrink(pre_head, delta)?,
        };
        Ok(NetOutput {
            output,
            pre_head,
            params,
        })
    }

    /// Output values only.
    pub fn generate(&self) -> Result<Tensor> {
        let mut g = Graph::new();
        let out = self.forward(&mut g)?;
        Ok(g.value(out.output).clone())
    }
}
