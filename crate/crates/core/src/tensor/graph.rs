//! Reverse-mode tape.
//!
//! A [`Graph`] records every operation in creation order, which is also a
//! topological order, so [`Graph::backward`] is a single reverse sweep. Values
//! that do not depend on any gradient-tracked leaf are stored as constants and
//! never visited by the sweep. Graphs are cheap to build and are rebuilt for
//! every forward pass of the solver.

use std::sync::Arc;

use super::gemm::{gemm, Mat};
use super::Tensor;
use crate::error::{Error, Result};
use crate::signal::CircularConvolver;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Stride and zero padding of a 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeom {
    pub fn new(stride: usize, padding: usize) -> Self {
        ConvGeom { stride, padding }
    }

    fn output_extent(&self, input: usize, kernel: usize) -> Option<usize> {
        let padded = input + 2 * self.padding;
        if self.stride == 0 || padded < kernel {
            None
        } else {
            Some((padded - kernel) / self.stride + 1)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Upsample {
    Nearest,
    /// Half-pixel-centred bilinear interpolation with edge clamping.
    Bilinear,
}

struct ConvSaved {
    input: Var,
    weight: Var,
    bias: Option<Var>,
    geom: ConvGeom,
    in_dims: (usize, usize, usize),
    kernel: (usize, usize),
    out_hw: (usize, usize),
    /// im2col matrix; `None` for pointwise convolutions, where it equals the input.
    cols: Option<Vec<f64>>,
}

struct NormSaved {
    input: Var,
    gamma: Var,
    beta: Var,
    /// Normalized input before the affine map.
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Conv2d(Box<ConvSaved>),
    Upsample2x(Var, Upsample),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    SoftShrink(Var, f64),
    Abs(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SumSquares(Var),
    DiffH(Var),
    DiffV(Var),
    Concat(Vec<Var>),
    ChannelNorm(Box<NormSaved>),
    CircularConv(Var, Arc<CircularConvolver>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients from one backward sweep, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `var`; zeros when the loss does not depend on it.
    pub fn wrt(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads[var.0].as_ref()
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        self.grads[var.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[var.0]))
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Gradient-tracked leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, name: &str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        value.ensure_finite(name)?;
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(value, op, rg))
    }

    fn binary(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        self.value(a).same_shape(self.value(b), op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add")?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p + q).collect();
        let t = Tensor::from_parts(x.shape().to_vec(), data);
        self.record("add", t, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub")?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p - q).collect();
        let t = Tensor::from_parts(x.shape().to_vec(), data);
        self.record("sub", t, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul")?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let t = Tensor::from_parts(x.shape().to_vec(), data);
        self.record("mul", t, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let t = self.value(a).map(|v| v * s);
        self.record("scale", t, Op::Scale(a, s), &[a])
    }

    /// Cross-correlation of a `C×H×W` input with `O×C×kh×kw` weights, as in
    /// common deep-learning frameworks.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Option<Var>, geom: ConvGeom) -> Result<Var> {
        let x = self.value(input);
        let w = self.value(weight);
        let (c, h, wd) = match x.shape() {
            &[c, h, w] => (c, h, w),
            s => return Err(Error::shape("conv2d", format!("input must be C×H×W, got {s:?}"))),
        };
        let (o, kc, kh, kw) = match w.shape() {
            &[o, kc, kh, kw] => (o, kc, kh, kw),
            s => return Err(Error::shape("conv2d", format!("weight must be O×C×kh×kw, got {s:?}"))),
        };
        if kc != c {
            return Err(Error::shape("conv2d", format!("input has {c} channels, weight expects {kc}")));
        }
        if let Some(b) = bias {
            if self.value(b).shape() != [o] {
                return Err(Error::shape("conv2d", format!("bias must have shape [{o}]")));
            }
        }
        let (ho, wo) = match (geom.output_extent(h, kh), geom.output_extent(wd, kw)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::shape(
                    "conv2d",
                    format!("kernel {kh}×{kw} does not fit {h}×{wd} with padding {}", geom.padding),
                ))
            }
        };
        let pointwise = kh == 1 && kw == 1 && geom.stride == 1 && geom.padding == 0;
        let cols = if pointwise {
            None
        } else {
            Some(im2col(x.data(), (c, h, wd), (kh, kw), geom, (ho, wo)))
        };
        let k = c * kh * kw;
        let n = ho * wo;
        let mut out = vec![0.0; o * n];
        if let Some(b) = bias {
            let bv = self.value(b).data();
            for (row, &bias) in out.chunks_mut(n).zip(bv) {
                row.iter_mut().for_each(|v| *v = bias);
            }
        }
        let beta = if bias.is_some() { 1.0 } else { 0.0 };
        let colmat = cols.as_deref().unwrap_or(x.data());
        gemm(
            Mat::row_major(w.data(), o, k),
            Mat::row_major(colmat, k, n),
            beta,
            &mut out,
        );
        let t = Tensor::from_parts(vec![o, ho, wo], out);
        let saved = ConvSaved {
            input,
            weight,
            bias,
            geom,
            in_dims: (c, h, wd),
            kernel: (kh, kw),
            out_hw: (ho, wo),
            cols,
        };
        let mut inputs = vec![input, weight];
        inputs.extend(bias);
        self.record("conv2d", t, Op::Conv2d(Box::new(saved)), &inputs)
    }

    /// 2× spatial upsampling of a `C×H×W` tensor.
    pub fn upsample2x(&mut self, input: Var, mode: Upsample) -> Result<Var> {
        let (c, h, w) = self.value(input).chw()?;
        let (rows, cols) = (upsample_taps(h, mode), upsample_taps(w, mode));
        let x = self.value(input).data();
        let (h2, w2) = (2 * h, 2 * w);
        let mut out = vec![0.0; c * h2 * w2];
        for ch in 0..c {
            let src = &x[ch * h * w..(ch + 1) * h * w];
            let dst = &mut out[ch * h2 * w2..(ch + 1) * h2 * w2];
            for (oy, ry) in rows.iter().enumerate() {
                for (ox, rx) in cols.iter().enumerate() {
                    let mut acc = 0.0;
                    for &(iy, wy) in ry.taps() {
                        for &(ix, wx) in rx.taps() {
                            acc += wy * wx * src[iy * w + ix];
                        }
                    }
                    dst[oy * w2 + ox] = acc;
                }
            }
        }
        let shape = if self.value(input).shape().len() == 2 {
            vec![h2, w2]
        } else {
            vec![c, h2, w2]
        };
        self.record("upsample2x", Tensor::from_parts(shape, out), Op::Upsample2x(input, mode), &[input])
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Result<Var> {
        let t = self.value(input).map(|v| if v > 0.0 { v } else { slope * v });
        self.record("leaky_relu", t, Op::LeakyRelu(input, slope), &[input])
    }

    pub fn sigmoid(&mut self, input: Var) -> Result<Var> {
        let t = self.value(input).map(sigmoid);
        self.record("sigmoid", t, Op::Sigmoid(input), &[input])
    }

    /// `max(|a|-δ, 0)·sgn(a)`; derivative 1 where `|a| > δ`, 0 elsewhere.
    pub fn soft_shrink(&mut self, input: Var, delta: f64) -> Result<Var> {
        if !(delta >= 0.0) {
            return Err(Error::InvalidArgument(format!("soft-shrinkage threshold {delta} < 0")));
        }
        let t = self.value(input).map(|v| soft_shrink(v, delta));
        self.record("soft_shrink", t, Op::SoftShrink(input, delta), &[input])
    }

    /// Absolute value; derivative `sgn(a)` with `sgn(0) = 0`.
    pub fn abs(&mut self, input: Var) -> Result<Var> {
        let t = self.value(input).map(f64::abs);
        self.record("abs", t, Op::Abs(input), &[input])
    }

    pub fn square(&mut self, input: Var) -> Result<Var> {
        let t = self.value(input).map(|v| v * v);
        self.record("square", t, Op::Square(input), &[input])
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let t = Tensor::scalar(self.value(input).sum());
        self.record("sum", t, Op::Sum(input), &[input])
    }

    pub fn mean(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let t = Tensor::scalar(x.sum() / x.len() as f64);
        self.record("mean", t, Op::Mean(input), &[input])
    }

    /// Squared Frobenius norm.
    pub fn sum_squares(&mut self, input: Var) -> Result<Var> {
        let t = Tensor::scalar(self.value(input).sum_squares());
        self.record("sum_squares", t, Op::SumSquares(input), &[input])
    }

    /// Horizontal forward difference `a[.., i, j+1] - a[.., i, j]`; the output
    /// is one column narrower (no wrap-around).
    pub fn diff_h(&mut self, input: Var) -> Result<Var> {
        let (shape, c, h, w) = plane_dims(self.value(input), "diff_h")?;
        if w < 2 {
            return Err(Error::shape("diff_h", "width must be at least 2"));
        }
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(c * h * (w - 1));
        for row in x.chunks(w) {
            out.extend(row.windows(2).map(|p| p[1] - p[0]));
        }
        let mut s = shape;
        *s.last_mut().unwrap() = w - 1;
        self.record("diff_h", Tensor::from_parts(s, out), Op::DiffH(input), &[input])
    }

    /// Vertical forward difference `a[.., i+1, j] - a[.., i, j]`; the output
    /// is one row shorter.
    pub fn diff_v(&mut self, input: Var) -> Result<Var> {
        let (shape, c, h, w) = plane_dims(self.value(input), "diff_v")?;
        if h < 2 {
            return Err(Error::shape("diff_v", "height must be at least 2"));
        }
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(c * (h - 1) * w);
        for plane in x.chunks(h * w) {
            for i in 0..h - 1 {
                let (r0, r1) = (&plane[i * w..(i + 1) * w], &plane[(i + 1) * w..(i + 2) * w]);
                out.extend(r0.iter().zip(r1).map(|(a, b)| b - a));
            }
        }
        let mut s = shape;
        let n = s.len();
        s[n - 2] = h - 1;
        self.record("diff_v", Tensor::from_parts(s, out), Op::DiffV(input), &[input])
    }

    /// Concatenates `C_i×H×W` tensors along the channel axis.
    pub fn concat(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::shape("concat", "no inputs"))?;
        let (_, h, w) = self.value(*first).chw()?;
        let mut data = Vec::new();
        let mut channels = 0;
        for &v in inputs {
            let t = self.value(v);
            let (c, hh, ww) = t.chw()?;
            if (hh, ww) != (h, w) {
                return Err(Error::shape("concat", format!("{hh}×{ww} vs {h}×{w}")));
            }
            channels += c;
            data.extend_from_slice(t.data());
        }
        let t = Tensor::from_parts(vec![channels, h, w], data);
        self.record("concat", t, Op::Concat(inputs.to_vec()), inputs)
    }

    /// Per-channel normalization over the spatial axes followed by a
    /// per-channel affine map: `γ_c·(x − μ_c)/√(σ²_c + eps) + β_c`, with the
    /// biased variance. `gamma` and `beta` have shape `[C]`.
    pub fn channel_norm(&mut self, input: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (c, h, w) = self.value(input).chw()?;
        for p in [gamma, beta] {
            if self.value(p).shape() != [c] {
                return Err(Error::shape(
                    "channel_norm",
                    format!("affine shape {:?} for {c} channels", self.value(p).shape()),
                ));
            }
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("channel_norm eps {eps} must be > 0")));
        }
        let n = (h * w) as f64;
        let x = self.value(input);
        let (gm, bt) = (self.value(gamma).data(), self.value(beta).data());
        let mut normalized = Vec::with_capacity(x.len());
        let mut inv_std = Vec::with_capacity(c);
        let mut out = Vec::with_capacity(x.len());
        for (ch, plane) in x.data().chunks(h * w).enumerate() {
            let mu = plane.iter().sum::<f64>() / n;
            let var = plane.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for &v in plane {
                let xh = (v - mu) * is;
                normalized.push(xh);
                out.push(gm[ch] * xh + bt[ch]);
            }
        }
        let t = Tensor::from_parts(vec![c, h, w], out);
        let saved = NormSaved {
            input,
            gamma,
            beta,
            normalized,
            inv_std,
        };
        self.record("channel_norm", t, Op::ChannelNorm(Box::new(saved)), &[input, gamma, beta])
    }

    /// Periodic convolution of every channel with the convolver's kernel.
    pub fn circular_conv(&mut self, input: Var, conv: &Arc<CircularConvolver>) -> Result<Var> {
        let x = self.value(input);
        let (c, h, w) = x.chw()?;
        if (h, w) != conv.dims() {
            return Err(Error::shape(
                "circular_conv",
                format!("input {h}×{w}, convolver {:?}", conv.dims()),
            ));
        }
        let mut out = Vec::with_capacity(c * h * w);
        for plane in x.data().chunks(h * w) {
            out.extend(conv.apply_plane(plane));
        }
        let t = Tensor::from_parts(x.shape().to_vec(), out);
        self.record("circular_conv", t, Op::CircularConv(input, Arc::clone(conv)), &[input])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::shape("backward", format!("loss has shape {:?}", lv.shape())));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));
        }
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, contrib: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc
                .data_mut()
                .iter_mut()
                .zip(contrib.data())
                .for_each(|(a, b)| *a += b),
            slot => *slot = Some(contrib),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                if self.wants(*b) {
                    self.accumulate(grads, *b, g.map(|v| -v));
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    let t = zip_map(g, self.value(*b), |gv, y| gv * y);
                    self.accumulate(grads, *a, t);
                }
                if self.wants(*b) {
                    let t = zip_map(g, self.value(*a), |gv, x| gv * x);
                    self.accumulate(grads, *b, t);
                }
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g.map(|v| v * s)),
            Op::Conv2d(saved) => self.conv_backward(saved, g, grads),
            Op::Upsample2x(a, mode) => {
                let x = self.value(*a);
                let (c, h, w) = x.chw()?;
                let (rows, cols) = (upsample_taps(h, *mode), upsample_taps(w, *mode));
                let w2 = 2 * w;
                let mut out = vec![0.0; c * h * w];
                for ch in 0..c {
                    let src = &g.data()[ch * 4 * h * w..(ch + 1) * 4 * h * w];
                    let dst = &mut out[ch * h * w..(ch + 1) * h * w];
                    for (oy, ry) in rows.iter().enumerate() {
                        for (ox, rx) in cols.iter().enumerate() {
                            let gv = src[oy * w2 + ox];
                            for &(iy, wy) in ry.taps() {
                                for &(ix, wx) in rx.taps() {
                                    dst[iy * w + ix] += wy * wx * gv;
                                }
                            }
                        }
                    }
                }
                self.accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), out));
            }
            Op::LeakyRelu(a, slope) => {
                let t = zip_map(g, self.value(*a), |gv, x| if x > 0.0 { gv } else { slope * gv });
                self.accumulate(grads, *a, t);
            }
            Op::Sigmoid(a) => {
                let t = zip_map(g, &node.value, |gv, s| gv * s * (1.0 - s));
                self.accumulate(grads, *a, t);
            }
            Op::SoftShrink(a, delta) => {
                let t = zip_map(g, self.value(*a), |gv, x| if x.abs() > *delta { gv } else { 0.0 });
                self.accumulate(grads, *a, t);
            }
            Op::Abs(a) => {
                let t = zip_map(g, self.value(*a), |gv, x| gv * sign(x));
                self.accumulate(grads, *a, t);
            }
            Op::Square(a) => {
                let t = zip_map(g, self.value(*a), |gv, x| 2.0 * gv * x);
                self.accumulate(grads, *a, t);
            }
            Op::Sum(a) => {
                let gv = g.data()[0];
                self.accumulate(grads, *a, Tensor::full(self.value(*a).shape(), gv));
            }
            Op::Mean(a) => {
                let x = self.value(*a);
                let gv = g.data()[0] / x.len() as f64;
                self.accumulate(grads, *a, Tensor::full(x.shape(), gv));
            }
            Op::SumSquares(a) => {
                let gv = g.data()[0];
                let t = self.value(*a).map(|x| 2.0 * gv * x);
                self.accumulate(grads, *a, t);
            }
            Op::DiffH(a) => {
                let x = self.value(*a);
                let (_, _, _, w) = plane_dims(x, "diff_h")?;
                let mut out = vec![0.0; x.len()];
                for (row, grow) in out.chunks_mut(w).zip(g.data().chunks(w - 1)) {
                    for (j, &gv) in grow.iter().enumerate() {
                        row[j + 1] += gv;
                        row[j] -= gv;
                    }
                }
                self.accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), out));
            }
            Op::DiffV(a) => {
                let x = self.value(*a);
                let (_, _, h, w) = plane_dims(x, "diff_v")?;
                let mut out = vec![0.0; x.len()];
                for (plane, gplane) in out.chunks_mut(h * w).zip(g.data().chunks((h - 1) * w)) {
                    for i in 0..h - 1 {
                        for j in 0..w {
                            let gv = gplane[i * w + j];
                            plane[(i + 1) * w + j] += gv;
                            plane[i * w + j] -= gv;
                        }
                    }
                }
                self.accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), out));
            }
            Op::Concat(inputs) => {
                let mut offset = 0;
                for &v in inputs {
                    let x = self.value(v);
                    let n = x.len();
                    if self.wants(v) {
                        let part = g.data()[offset..offset + n].to_vec();
                        self.accumulate(grads, v, Tensor::from_parts(x.shape().to_vec(), part));
                    }
                    offset += n;
                }
            }
            Op::ChannelNorm(s) => self.norm_backward(s, g, grads),
            Op::CircularConv(a, conv) => {
                let x = self.value(*a);
                let (_, h, w) = x.chw()?;
                let mut out = Vec::with_capacity(x.len());
                for plane in g.data().chunks(h * w) {
                    out.extend(conv.adjoint_plane(plane));
                }
                self.accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), out));
            }
        }
        Ok(())
    }

    fn norm_backward(&self, s: &NormSaved, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let (c, h, w) = s_dims(self.value(s.input));
        let hw = h * w;
        let gamma = self.value(s.gamma).data();
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        let mut dx = vec![0.0; c * hw];
        for ch in 0..c {
            let gs = &g.data()[ch * hw..(ch + 1) * hw];
            let xh = &s.normalized[ch * hw..(ch + 1) * hw];
            let sum_g: f64 = gs.iter().sum();
            let sum_gx: f64 = gs.iter().zip(xh).map(|(a, b)| a * b).sum();
            dbeta[ch] = sum_g;
            dgamma[ch] = sum_gx;
            // dx = γ·inv_std·(g − mean(g) − x̂·mean(g·x̂))
            let k = gamma[ch] * s.inv_std[ch];
            let (mg, mgx) = (sum_g / hw as f64, sum_gx / hw as f64);
            for ((d, &gv), &x) in dx[ch * hw..(ch + 1) * hw].iter_mut().zip(gs).zip(xh) {
                *d = k * (gv - mg - x * mgx);
            }
        }
        self.accumulate(grads, s.gamma, Tensor::from_parts(vec![c], dgamma));
        self.accumulate(grads, s.beta, Tensor::from_parts(vec![c], dbeta));
        self.accumulate(grads, s.input, Tensor::from_parts(vec![c, h, w], dx));
    }

    fn conv_backward(&self, s: &ConvSaved, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let (c, h, w) = s.in_dims;
        let (kh, kw) = s.kernel;
        let (ho, wo) = s.out_hw;
        let weight = self.value(s.weight);
        let o = weight.shape()[0];
        let k = c * kh * kw;
        let n = ho * wo;
        let gmat = Mat::row_major(g.data(), o, n);

        if let Some(b) = s.bias {
            if self.wants(b) {
                let db = g.data().chunks(n).map(|row| row.iter().sum()).collect();
                self.accumulate(grads, b, Tensor::from_parts(vec![o], db));
            }
        }
        if self.wants(s.weight) {
            let cols = s.cols.as_deref().unwrap_or(self.value(s.input).data());
            let mut dw = vec![0.0; o * k];
            gemm(gmat, Mat::row_major(cols, k, n).t(), 0.0, &mut dw);
            self.accumulate(grads, s.weight, Tensor::from_parts(weight.shape().to_vec(), dw));
        }
        if self.wants(s.input) {
            let mut dcols = vec![0.0; k * n];
            gemm(Mat::row_major(weight.data(), o, k).t(), gmat, 0.0, &mut dcols);
            let dx = if s.cols.is_some() {
                col2im(&dcols, (c, h, w), (kh, kw), s.geom, (ho, wo))
            } else {
                dcols
            };
            self.accumulate(grads, s.input, Tensor::from_parts(vec![c, h, w], dx));
        }
    }
}

fn s_dims(t: &Tensor) -> (usize, usize, usize) {
    t.chw().expect("validated in the forward pass")
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn soft_shrink(v: f64, delta: f64) -> f64 {
    (v.abs() - delta).max(0.0) * sign(v)
}

pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.shape().to_vec(), data)
}

fn plane_dims(t: &Tensor, op: &'static str) -> Result<(Vec<usize>, usize, usize, usize)> {
    let s = t.shape();
    if s.len() < 2 {
        return Err(Error::shape(op, format!("need rank ≥ 2, got {s:?}")));
    }
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    Ok((s.to_vec(), t.len() / (h * w), h, w))
}

/// Up to two source taps for one output coordinate of a 2× upsampling.
#[derive(Clone, Copy)]
struct Taps {
    taps: [(usize, f64); 2],
    count: usize,
}

impl Taps {
    fn taps(&self) -> &[(usize, f64)] {
        &self.taps[..self.count]
    }
}

fn upsample_taps(n: usize, mode: Upsample) -> Vec<Taps> {
    (0..2 * n)
        .map(|o| match mode {
            Upsample::Nearest => Taps {
                taps: [(o / 2, 1.0), (0, 0.0)],
                count: 1,
            },
            Upsample::Bilinear => {
                let src = ((o as f64 + 0.5) / 2.0 - 0.5).max(0.0);
                let i0 = (src.floor() as usize).min(n - 1);
                let i1 = (i0 + 1).min(n - 1);
                let frac = src - i0 as f64;
                if i1 == i0 || frac == 0.0 {
                    Taps {
                        taps: [(i0, 1.0), (0, 0.0)],
                        count: 1,
                    }
                } else {
                    Taps {
                        taps: [(i0, 1.0 - frac), (i1, frac)],
                        count: 2,
                    }
                }
            }
        })
        .collect()
}

/// Row `(ci·kh + i)·kw + j`, column `oy·wo + ox` holds the input sample seen by
/// kernel tap `(i, j)` of channel `ci` at output position `(oy, ox)`.
fn im2col(
    x: &[f64],
    (c, h, w): (usize, usize, usize),
    (kh, kw): (usize, usize),
    geom: ConvGeom,
    (ho, wo): (usize, usize),
) -> Vec<f64> {
    let n = ho * wo;
    let mut cols = vec![0.0; c * kh * kw * n];
    let (s, p) = (geom.stride, geom.padding as isize);
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for i in 0..kh {
            for j in 0..kw {
                let row = ((ci * kh + i) * kw + j) * n;
                let dst = &mut cols[row..row + n];
                for oy in 0..ho {
                    let iy = (oy * s + i) as isize - p;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    let out = &mut dst[oy * wo..(oy + 1) * wo];
                    for (ox, v) in out.iter_mut().enumerate() {
                        let ix = (ox * s + j) as isize - p;
                        if ix >= 0 && ix < w as isize {
                            *v = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(
    cols: &[f64],
    (c, h, w): (usize, usize, usize),
    (kh, kw): (usize, usize),
    geom: ConvGeom,
    (ho, wo): (usize, usize),
) -> Vec<f64> {
    let n = ho * wo;
    let mut x = vec![0.0; c * h * w];
    let (s, p) = (geom.stride, geom.padding as isize);
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for i in 0..kh {
            for j in 0..kw {
                let row = ((ci * kh + i) * kw + j) * n;
                let src = &cols[row..row + n];
                for oy in 0..ho {
                    let iy = (oy * s + i) as isize - p;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..wo {
                        let ix = (ox * s + j) as isize - p;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
    x
}
