//! Alternating minimization of
//!
//! ```text
//! ‖y − k̂⊗I_θ(z_x) − R_ζ(z_r) − Cᵀv‖²_F + λ1·TV(I_θ(z_x)) + λ2·‖R_ζ(z_r)‖₁ + λ3·‖v‖₁
//! ```
//!
//! Each outer iteration takes one Adam step on the generator weights `(θ, ζ)`
//! with `v` held fixed, then one proximal-gradient step on `v`:
//! `v ← S_{λ3/L}(v − ∇_v D / L)`. For `L = 2` that step is the exact
//! minimizer `S_{λ3/2}(dct2(c))` with `c = y − k̂⊗x̂ − r̂`; larger `L` gives a
//! damped step that still never increases the objective.
//!
//! The objective is evaluated on intensities multiplied by
//! [`SolverConfig::intensity_scale`]: `y` and `I_θ` are scaled, while `R_ζ`
//! and `v` are expressed directly in scaled units. Inputs and reported
//! outputs stay in `[0, 1]` units.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::networks::{build_net, Head, NetConfig, Network};
use crate::rng;
use crate::signal::{soft_threshold, CircularConvolver, Dct2, Image};
use crate::tensor::{AdamConfig, AdamState, Graph, Tensor, Var};

pub const DEFAULT_LAMBDA1: f64 = 5e-2;
pub const DEFAULT_LAMBDA2: f64 = 5e-5;
pub const DEFAULT_LAMBDA3: f64 = 5e-7;
pub const DEFAULT_LR_IMAGE: f64 = 9e-3;
pub const DEFAULT_LR_RESIDUAL: f64 = 5e-4;
pub const DEFAULT_ITERATIONS: usize = 1500;
pub const DEFAULT_INTENSITY_SCALE: f64 = 255.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ablation {
    Full,
    /// `λ2 = 0`.
    NoRSparsity,
    /// `λ3 = 0`.
    NoVSparsity,
    /// `λ1 = 0`.
    NoTv,
    /// Free logit tensor (zero start, sigmoid-squashed) instead of the image generator.
    NoDip,
    /// Free residual tensor (zero start, `λ2` L1 kept) instead of the residual generator.
    NoDrp,
    /// No residual at all.
    NoRTerm,
}

impl Ablation {
    pub const ALL: [Ablation; 7] = [
        Ablation::Full,
        Ablation::NoRSparsity,
        Ablation::NoVSparsity,
        Ablation::NoTv,
        Ablation::NoDip,
        Ablation::NoDrp,
        Ablation::NoRTerm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoRSparsity => "no_r_sparsity",
            Ablation::NoVSparsity => "no_v_sparsity",
            Ablation::NoTv => "no_tv",
            Ablation::NoDip => "no_dip",
            Ablation::NoDrp => "no_drp",
            Ablation::NoRTerm => "no_r_term",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Ablation::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!("unknown ablation mode {s:?} (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lr_image: f64,
    pub lr_residual: f64,
    pub iterations: usize,
    /// Step constant of the `v` update; must be at least 2 for descent.
    /// `None` selects `2·C·H·W`.
    pub lipschitz: Option<f64>,
    /// Factor mapping `[0, 1]` intensities to the units the objective is
    /// evaluated in. The residual generator and `v` live in these units.
    pub intensity_scale: f64,
    pub seed: u64,
    pub ablation: Ablation,
    /// When set, the reported image is an exponential moving average of the
    /// iterates with this decay.
    pub ema_decay: Option<f64>,
    pub adam: AdamConfig,
    /// Generator templates. `output_channels` and `init_seed` are replaced at
    /// build time by the observation's channel count and a seed derived from
    /// [`seed`](Self::seed).
    pub image_net: NetConfig,
    pub residual_net: NetConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda1: DEFAULT_LAMBDA1,
            lambda2: DEFAULT_LAMBDA2,
            lambda3: DEFAULT_LAMBDA3,
            lr_image: DEFAULT_LR_IMAGE,
            lr_residual: DEFAULT_LR_RESIDUAL,
            iterations: DEFAULT_ITERATIONS,
            lipschitz: None,
            intensity_scale: DEFAULT_INTENSITY_SCALE,
            seed: 0,
            ablation: Ablation::Full,
            ema_decay: None,
            adam: AdamConfig::default(),
            image_net: NetConfig::image(1, 0),
            residual_net: NetConfig::residual(1, 0),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} = {v} must be a finite value ≥ 0"));
            }
        }
        for (name, v) in [("lr_image", self.lr_image), ("lr_residual", self.lr_residual)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} = {v} must be a finite value ≥ 0"));
            }
        }
        if let Some(l) = self.lipschitz {
            if !(l > 0.0) || !l.is_finite() {
                return bad(format!("lipschitz = {l} must be > 0"));
            }
        }
        if !(self.intensity_scale > 0.0) || !self.intensity_scale.is_finite() {
            return bad(format!("intensity_scale = {} must be > 0", self.intensity_scale));
        }
        if let Some(d) = self.ema_decay {
            if !(0.0..1.0).contains(&d) {
                return bad(format!("ema decay {d} must lie in [0, 1)"));
            }
        }
        if self.image_net.head != Head::Sigmoid {
            return bad("the image generator needs a sigmoid head".into());
        }
        if !matches!(self.residual_net.head, Head::SoftShrink(_)) {
            return bad("the residual generator needs a soft-shrinkage head".into());
        }
        self.image_net.validate()?;
        self.residual_net.validate()
    }

    /// `(λ1, λ2, λ3)` after the ablation mode is applied.
    pub fn effective_lambdas(&self) -> (f64, f64, f64) {
        let (mut l1, mut l2, mut l3) = (self.lambda1, self.lambda2, self.lambda3);
        match self.ablation {
            Ablation::NoRSparsity => l2 = 0.0,
            Ablation::NoVSparsity => l3 = 0.0,
            Ablation::NoTv => l1 = 0.0,
            Ablation::NoRTerm => l2 = 0.0,
            _ => {}
        }
        (l1, l2, l3)
    }

    /// Largest power of two the generators need the image sides to divide.
    pub fn size_factor(&self) -> usize {
        self.image_net.size_factor().max(self.residual_net.size_factor())
    }
}

/// Objective terms, already weighted: `total = data + tv + r_l1 + v_l1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub data: f64,
    pub tv: f64,
    pub r_l1: f64,
    pub v_l1: f64,
    pub total: f64,
}

impl LossRecord {
    fn new(data: f64, tv: f64, r_l1: f64, v_l1: f64) -> Result<Self> {
        let total = data + tv + r_l1 + v_l1;
        for (name, v) in [("data", data), ("tv", tv), ("r_l1", r_l1), ("v_l1", v_l1)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("objective term {name} = {v}")));
            }
        }
        Ok(LossRecord {
            data,
            tv,
            r_l1,
            v_l1,
            total,
        })
    }

    fn to_array(self) -> [f64; 5] {
        [self.data, self.tv, self.r_l1, self.v_l1, self.total]
    }
}

pub const TRACE_HEADER: &str = "iter,data,tv,r_l1,v_l1,total";

/// Writes the trace as CSV with [`TRACE_HEADER`]; values use the shortest
/// exact decimal form.
pub fn write_trace_csv(trace: &[LossRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for (i, r) in trace.iter().enumerate() {
        writeln!(out, "{i},{:e},{:e},{:e},{:e},{:e}", r.data, r.tv, r.r_l1, r.v_l1, r.total)?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub x_hat: Image,
    pub r_hat: Image,
    pub h_hat: Image,
    pub trace: Vec<LossRecord>,
    pub config: SolverConfig,
}

enum ImageModel {
    Net(Network),
    Free(Tensor),
}

enum ResidualModel {
    Net(Network),
    Free(Tensor),
    Absent,
}

/// One recorded forward pass at the current parameters.
struct Pass {
    graph: Graph,
    x: Var,
    r: Option<Var>,
    image_params: Vec<Var>,
    residual_params: Vec<Var>,
}

pub struct SolverState {
    config: SolverConfig,
    lambdas: (f64, f64, f64),
    y: Image,
    conv: Arc<CircularConvolver>,
    dct: Dct2,
    image: ImageModel,
    residual: ResidualModel,
    adam_image: AdamState,
    adam_residual: Option<AdamState>,
    v: Image,
    iter: usize,
    trace: Vec<LossRecord>,
    pass: Pass,
    ema: Option<Tensor>,
}

fn diverged(iteration: usize) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::NonFinite(detail) => Error::Diverged { iteration, detail },
        other => other,
    }
}

impl SolverState {
    /// Fresh state: both generators built from the seed, `v = 0`.
    pub fn new(y: &Image, k_hat: &Kernel, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let (c, h, w) = y.dims();
        let conv = Arc::new(CircularConvolver::new(h, w, k_hat.filter())?);
        let image = match config.ablation {
            Ablation::NoDip => ImageModel::Free(Tensor::zeros(&[c, h, w])),
            _ => {
                let mut nc = config.image_net.clone();
                nc.output_channels = c;
                nc.init_seed = rng::derive(config.seed, rng::roles::IMAGE_NET);
                ImageModel::Net(build_net(nc, h, w)?)
            }
        };
        let residual = match config.ablation {
            Ablation::NoDrp => ResidualModel::Free(Tensor::zeros(&[c, h, w])),
            Ablation::NoRTerm => ResidualModel::Absent,
            _ => {
                let mut nc = config.residual_net.clone();
                nc.output_channels = c;
                nc.init_seed = rng::derive(config.seed, rng::roles::RESIDUAL_NET);
                ResidualModel::Net(build_net(nc, h, w)?)
            }
        };
        let adam_image = AdamState::new(image_params(&image), config.adam);
        let adam_residual = residual_params(&residual).map(|p| AdamState::new(p, config.adam));
        let mut state = SolverState {
            lambdas: config.effective_lambdas(),
            config,
            y: y.clone(),
            conv,
            dct: Dct2::new(h, w),
            image,
            residual,
            adam_image,
            adam_residual,
            v: Image::filled(c, h, w, 0.0),
            iter: 0,
            trace: Vec::new(),
            pass: Pass {
                graph: Graph::new(),
                x: Var::default(),
                r: None,
                image_params: Vec::new(),
                residual_params: Vec::new(),
            },
            ema: None,
        };
        state.pass = state.forward().map_err(diverged(0))?;
        if state.config.ema_decay.is_some() {
            state.ema = Some(state.pass.graph.value(state.pass.x).clone());
        }
        Ok(state)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Completed outer iterations.
    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn trace(&self) -> &[LossRecord] {
        &self.trace
    }

    /// Current DCT coefficients of the artifact layer.
    pub fn v(&self) -> &Image {
        &self.v
    }

    pub fn set_v(&mut self, v: Image) -> Result<()> {
        v.same_dims(&self.y)?;
        self.v = v;
        Ok(())
    }

    /// Current image estimate `I_θ(z_x)`.
    pub fn x_current(&self) -> Image {
        Image::from_tensor(self.pass.graph.value(self.pass.x)).expect("generator output is an image")
    }

    /// Current residual estimate in `[0, 1]` intensity units; zeros when the
    /// residual term is disabled.
    pub fn r_current(&self) -> Image {
        match self.pass.r {
            Some(r) => {
                let s = self.config.intensity_scale;
                let t = self.pass.graph.value(r).map(|v| v / s);
                Image::from_tensor(&t).expect("generator output is an image")
            }
            None => Image::filled(self.y.channels(), self.y.height(), self.y.width(), 0.0),
        }
    }

    /// Current artifact layer `Cᵀv` in `[0, 1]` intensity units.
    pub fn h_current(&self) -> Result<Image> {
        let s = self.config.intensity_scale;
        Ok(self.dct.inverse(&self.v)?.map(|v| v / s))
    }

    /// Step constant of the `v` update.
    pub fn lipschitz(&self) -> f64 {
        self.config
            .lipschitz
            .unwrap_or_else(|| 2.0 * self.y.data().len() as f64)
    }

    /// `c = y − k̂⊗x̂ − r̂` at the current weights, in objective units.
    pub fn misfit(&self) -> Result<Image> {
        let s = self.config.intensity_scale;
        let kx = self.conv.apply(&self.x_current())?;
        let r: Option<&Tensor> = self.pass.r.map(|r| self.pass.graph.value(r));
        let d: Vec<f64> = self
            .y
            .data()
            .iter()
            .zip(kx.data())
            .enumerate()
            .map(|(i, (y, kx))| s * y - s * kx - r.map_or(0.0, |r| r.data()[i]))
            .collect();
        Image::new(self.y.channels(), self.y.height(), self.y.width(), d)
    }

    /// Objective at the current weights and the current `v`.
    pub fn objective(&self) -> Result<LossRecord> {
        self.objective_at(&self.v)
    }

    /// Objective at the current weights with `v` replaced by `v`.
    pub fn objective_at(&self, v: &Image) -> Result<LossRecord> {
        v.same_dims(&self.y)?;
        let s = self.config.intensity_scale;
        let (l1, l2, l3) = self.lambdas;
        let c = self.misfit()?;
        let h = self.dct.inverse(v)?;
        let data: f64 = c.data().iter().zip(h.data()).map(|(c, h)| (c - h) * (c - h)).sum();
        let tv = l1 * crate::signal::tv_value(&self.x_current().map(|v| s * v));
        let r_l1 = match self.pass.r {
            Some(r) => l2 * self.pass.graph.value(r).abs_sum(),
            None => 0.0,
        };
        let v_l1 = l3 * v.data().iter().map(|v| v.abs()).sum::<f64>();
        LossRecord::new(data, tv, r_l1, v_l1)
    }

    fn forward(&self) -> Result<Pass> {
        let mut g = Graph::new();
        let (x, image_params) = match &self.image {
            ImageModel::Net(net) => {
                let out = net.forward(&mut g)?;
                (out.output, out.params)
            }
            ImageModel::Free(logits) => {
                let p = g.param(logits.clone());
                (g.sigmoid(p)?, vec![p])
            }
        };
        let (r, residual_params) = match &self.residual {
            ResidualModel::Net(net) => {
                let out = net.forward(&mut g)?;
                (Some(out.output), out.params)
            }
            ResidualModel::Free(t) => {
                let p = g.param(t.clone());
                (Some(p), vec![p])
            }
            ResidualModel::Absent => (None, Vec::new()),
        };
        Ok(Pass {
            graph: g,
            x,
            r,
            image_params,
            residual_params,
        })
    }

    /// One joint Adam step on the generator weights with `v` fixed. Returns
    /// (and records) the objective evaluated before the step.
    pub fn step_networks(&mut self) -> Result<LossRecord> {
        let it = self.iter;
        self.step_networks_inner().map_err(diverged(it))
    }

    fn step_networks_inner(&mut self) -> Result<LossRecord> {
        let (l1, l2, l3) = self.lambdas;
        let scale = self.config.intensity_scale;
        let h = self.dct.inverse(&self.v)?;
        let target: Vec<f64> = self.y.data().iter().zip(h.data()).map(|(y, h)| scale * y - h).collect();
        let v_l1 = l3 * self.v.data().iter().map(|v| v.abs()).sum::<f64>();

        let Pass {
            graph: g,
            x,
            r,
            image_params,
            residual_params,
        } = &mut self.pass;
        let r = *r;
        let x = if scale == 1.0 { *x } else { g.scale(*x, scale)? };
        let shape = g.value(x).shape().to_vec();
        let target = g.constant(Tensor::new(shape, target)?);
        let kx = g.circular_conv(x, &self.conv)?;
        let pred = match r {
            Some(r) => g.add(kx, r)?,
            None => kx,
        };
        let resid = g.sub(target, pred)?;
        let data = g.sum_squares(resid)?;
        let mut loss = data;
        let mut tv_val = 0.0;
        if l1 > 0.0 {
            let dh = g.diff_h(x)?;
            let dh = g.abs(dh)?;
            let sh = g.sum(dh)?;
            let dv = g.diff_v(x)?;
            let dv = g.abs(dv)?;
            let sv = g.sum(dv)?;
            let tv = g.add(sh, sv)?;
            let tv = g.scale(tv, l1)?;
            tv_val = g.value(tv).item()?;
            loss = g.add(loss, tv)?;
        }
        let mut r_val = 0.0;
        if let (Some(r), true) = (r, l2 > 0.0) {
            let a = g.abs(r)?;
            let s = g.sum(a)?;
            let s = g.scale(s, l2)?;
            r_val = g.value(s).item()?;
            loss = g.add(loss, s)?;
        }
        let record = LossRecord::new(g.value(data).item()?, tv_val, r_val, v_l1)?;

        let mut grads = g.backward(loss)?;
        let gi: Vec<Tensor> = image_params.iter().map(|&p| grads.take(p)).collect();
        let gr: Vec<Tensor> = residual_params.iter().map(|&p| grads.take(p)).collect();

        let lr_i = self.config.lr_image;
        match &mut self.image {
            ImageModel::Net(net) => self.adam_image.step(net.params_mut(), &gi, lr_i)?,
            ImageModel::Free(t) => self.adam_image.step(std::slice::from_mut(t), &gi, lr_i)?,
        }
        let lr_r = self.config.lr_residual;
        if let Some(adam) = &mut self.adam_residual {
            match &mut self.residual {
                ResidualModel::Net(net) => adam.step(net.params_mut(), &gr, lr_r)?,
                ResidualModel::Free(t) => adam.step(std::slice::from_mut(t), &gr, lr_r)?,
                ResidualModel::Absent => {}
            }
        }

        self.trace.push(record);
        self.iter += 1;
        self.pass = self.forward()?;
        if let (Some(d), Some(ema)) = (self.config.ema_decay, &mut self.ema) {
            let x = self.pass.graph.value(self.pass.x);
            for (e, &xv) in ema.data_mut().iter_mut().zip(x.data()) {
                *e = d * *e + (1.0 - d) * xv;
            }
        }
        Ok(record)
    }

    /// Proximal-gradient update of `v` at the current weights.
    pub fn step_v(&mut self) -> Result<()> {
        let it = self.iter;
        let c = self.misfit()?;
        let d = self.dct.forward(&c)?;
        let l = self.lipschitz();
        let l3 = self.lambdas.2;
        // ∇_v D = −2·(dct2(c) − v) because the DCT is orthonormal.
        let step = if l == 2.0 {
            d.to_tensor()
        } else {
            let s = 2.0 / l;
            let vals: Vec<f64> = self.v.data().iter().zip(d.data()).map(|(v, d)| v + s * (d - v)).collect();
            Tensor::new(d.to_tensor().shape().to_vec(), vals).map_err(diverged(it))?
        };
        let v = soft_threshold(&step, l3 / l)?;
        v.ensure_finite("v update").map_err(diverged(it))?;
        self.v = Image::from_tensor(&v)?;
        Ok(())
    }

    /// Runs outer iterations until the configured count is reached.
    pub fn run_to_end(&mut self) -> Result<()> {
        while self.iter < self.config.iterations {
            self.step_networks()?;
            self.step_v()?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<SolverResult> {
        let x_hat = match &self.ema {
            Some(e) => Image::from_tensor(e)?,
            None => self.x_current(),
        };
        Ok(SolverResult {
            r_hat: self.r_current(),
            h_hat: self.h_current()?,
            x_hat,
            trace: self.trace,
            config: self.config,
        })
    }

    /// Full optimization state: weights, Adam moments, `v`, trace, counters.
    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new();
        ck.set_meta("iter", self.iter)?;
        ck.set_meta("seed", self.config.seed)?;
        ck.set_meta("ablation", self.config.ablation)?;
        ck.set_meta("adam_image_steps", self.adam_image.step_count)?;
        push_list(&mut ck, "image", image_params(&self.image))?;
        push_list(&mut ck, "adam_image.m", &self.adam_image.first_moment)?;
        push_list(&mut ck, "adam_image.v", &self.adam_image.second_moment)?;
        if let (Some(adam), Some(p)) = (&self.adam_residual, residual_params(&self.residual)) {
            ck.set_meta("adam_residual_steps", adam.step_count)?;
            push_list(&mut ck, "residual", p)?;
            push_list(&mut ck, "adam_residual.m", &adam.first_moment)?;
            push_list(&mut ck, "adam_residual.v", &adam.second_moment)?;
        }
        ck.push("v", self.v.to_tensor())?;
        if let Some(e) = &self.ema {
            ck.push("ema", e.clone())?;
        }
        let rows: Vec<f64> = self.trace.iter().flat_map(|r| r.to_array()).collect();
        if !rows.is_empty() {
            ck.push("trace", Tensor::new(vec![self.trace.len(), 5], rows)?)?;
        }
        Ok(ck)
    }

    /// Rebuilds a state from [`checkpoint`](Self::checkpoint) output. The
    /// observation, kernel and configuration must match the original run,
    /// except for `iterations`.
    pub fn from_checkpoint(y: &Image, k_hat: &Kernel, config: SolverConfig, ck: &Checkpoint) -> Result<Self> {
        let mut s = SolverState::new(y, k_hat, config)?;
        if ck.meta_as::<u64>("seed")? != s.config.seed || ck.meta("ablation") != Some(s.config.ablation.name()) {
            return Err(Error::InvalidArgument("checkpoint was written by a different seed or mode".into()));
        }
        s.iter = ck.meta_as("iter")?;
        let n = image_params(&s.image).len();
        let p = pull_list(ck, "image", n)?;
        match &mut s.image {
            ImageModel::Net(net) => net.set_params(p)?,
            ImageModel::Free(t) => *t = p.into_iter().next().expect("one free tensor"),
        }
        restore_adam(&mut s.adam_image, ck, "adam_image", n)?;
        if let Some(n) = residual_params(&s.residual).map(<[Tensor]>::len) {
            let p = pull_list(ck, "residual", n)?;
            match &mut s.residual {
                ResidualModel::Net(net) => net.set_params(p)?,
                ResidualModel::Free(t) => *t = p.into_iter().next().expect("one free tensor"),
                ResidualModel::Absent => {}
            }
            let adam = s.adam_residual.as_mut().expect("residual optimizer");
            restore_adam(adam, ck, "adam_residual", n)?;
        }
        s.v = Image::from_tensor(ck.require("v")?)?;
        s.v.same_dims(y)?;
        s.ema = ck.get("ema").cloned();
        if s.config.ema_decay.is_some() != s.ema.is_some() {
            return Err(Error::InvalidArgument("checkpoint EMA setting differs from the configuration".into()));
        }
        s.trace = match ck.get("trace") {
            Some(t) => t
                .data()
                .chunks(5)
                .map(|r| LossRecord {
                    data: r[0],
                    tv: r[1],
                    r_l1: r[2],
                    v_l1: r[3],
                    total: r[4],
                })
                .collect(),
            None => Vec::new(),
        };
        s.pass = s.forward()?;
        Ok(s)
    }
}

fn image_params(m: &ImageModel) -> &[Tensor] {
    match m {
        ImageModel::Net(net) => net.params(),
        ImageModel::Free(t) => std::slice::from_ref(t),
    }
}

fn residual_params(m: &ResidualModel) -> Option<&[Tensor]> {
    match m {
        ResidualModel::Net(net) => Some(net.params()),
        ResidualModel::Free(t) => Some(std::slice::from_ref(t)),
        ResidualModel::Absent => None,
    }
}

fn push_list(ck: &mut Checkpoint, prefix: &str, ts: &[Tensor]) -> Result<()> {
    for (i, t) in ts.iter().enumerate() {
        ck.push(&format!("{prefix}.{i}"), t.clone())?;
    }
    Ok(())
}

fn pull_list(ck: &Checkpoint, prefix: &str, n: usize) -> Result<Vec<Tensor>> {
    (0..n).map(|i| ck.require(&format!("{prefix}.{i}")).cloned()).collect()
}

fn restore_adam(adam: &mut AdamState, ck: &Checkpoint, prefix: &str, n: usize) -> Result<()> {
    let m = pull_list(ck, &format!("{prefix}.m"), n)?;
    let v = pull_list(ck, &format!("{prefix}.v"), n)?;
    for ((new_m, new_v), old) in m.iter().zip(&v).zip(&adam.first_moment) {
        new_m.same_shape(old, "checkpoint moments")?;
        new_v.same_shape(old, "checkpoint moments")?;
    }
    adam.first_moment = m;
    adam.second_moment = v;
    adam.step_count = ck.meta_as(&format!("{prefix}_steps"))?;
    Ok(())
}

/// Runs the full alternating scheme for `config.iterations` iterations.
pub fn run(y: &Image, k_hat: &Kernel, config: SolverConfig) -> Result<SolverResult> {
    let mut state = SolverState::new(y, k_hat, config)?;
    state.run_to_end()?;
    state.finish()
}

/// [`run`] with the ablation mode replaced by `mode`.
pub fn run_ablation(y: &Image, k_hat: &Kernel, mut config: SolverConfig, mode: Ablation) -> Result<SolverResult> {
    config.ablation = mode;
    run(y, k_hat, config)
}
