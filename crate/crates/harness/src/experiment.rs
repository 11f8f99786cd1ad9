//! Single simulated runs and the two batch recipes built on them: the kernel
//! bias sweep and the ablation matrix.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use rayon::prelude::*;
use semiblind_core::degradation::{DegradationConfig, KernelSpec};
use semiblind_core::signal::{mse_signed, psnr, ssim, SSIM_WINDOW};
use semiblind_core::solver::{self, Ablation, SolverConfig};
use semiblind_core::Image;

use crate::imageio::load_image;
use crate::padding::pad_to_divisible;
use crate::scene::synthetic_scene;

/// Where a clean test image comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ImageSource {
    File(PathBuf),
    /// [`synthetic_scene`] with the given size and scene seed.
    Scene { size: usize, seed: u64 },
}

impl ImageSource {
    pub fn name(&self) -> String {
        match self {
            ImageSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            ImageSource::Scene { size, seed } => format!("scene{seed}_{size}"),
        }
    }

    pub fn load(&self) -> Result<Image> {
        match self {
            ImageSource::File(p) => load_image(p),
            ImageSource::Scene { size, seed } => Ok(synthetic_scene(*size, *size, *seed)?),
        }
    }
}

/// Metrics of one simulate-then-deblur run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub psnr: f64,
    /// `None` when the image is smaller than the SSIM window.
    pub ssim: Option<f64>,
    pub blurry_psnr: f64,
    pub residual_mse: f64,
    /// MSE of the all-zero residual estimate.
    pub residual_mse_zero: f64,
    pub wall_s: f64,
}

/// Output of [`deblur_padded`], cropped back to the observation size.
pub struct Deblurred {
    pub result: solver::SolverResult,
    pub x_hat: Image,
    pub r_hat: Image,
    pub h_hat: Image,
}

/// Pads `y` for the generators, runs the solver and crops the estimates.
pub fn deblur_padded(y: &Image, k_hat: &semiblind_core::Kernel, config: SolverConfig) -> Result<Deblurred> {
    let (padded, crop) = pad_to_divisible(y, config.size_factor())?;
    let result = solver::run(&padded, k_hat, config)?;
    Ok(Deblurred {
        x_hat: crop.apply(&result.x_hat)?,
        r_hat: crop.apply(&result.r_hat)?,
        h_hat: crop.apply(&result.h_hat)?,
        result,
    })
}

pub fn ssim_if_fits(a: &Image, b: &Image) -> Result<Option<f64>> {
    if a.height() < SSIM_WINDOW || a.width() < SSIM_WINDOW {
        return Ok(None);
    }
    Ok(Some(ssim(a, b)?))
}

/// Blurs `clean` per `degradation` and deblurs with the biased kernel.
pub fn simulate_and_deblur(clean: &Image, degradation: &DegradationConfig, config: SolverConfig) -> Result<RunMetrics> {
    let start = Instant::now();
    let sc = degradation.simulate(clean)?;
    let out = deblur_padded(&sc.blurry, &sc.kernel_hat, config)?;
    let zero = Image::filled(clean.channels(), clean.height(), clean.width(), 0.0);
    Ok(RunMetrics {
        psnr: psnr(clean, &out.x_hat)?,
        ssim: ssim_if_fits(clean, &out.x_hat)?,
        blurry_psnr: psnr(clean, &sc.blurry)?,
        residual_mse: mse_signed(&sc.residual_true, &out.r_hat)?,
        residual_mse_zero: mse_signed(&sc.residual_true, &zero)?,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs `f` over `items` on `jobs` threads (all cores when `None`), keeping
/// input order in the output.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: Option<usize>, f: impl Fn(&T) -> R + Sync) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Index of the parameter a bias sweep varies: motion angle, Gaussian sigma,
/// disk radius.
pub fn swept_parameter(spec: &KernelSpec) -> usize {
    match spec {
        KernelSpec::Motion { .. } => 1,
        KernelSpec::Gaussian { .. } => 1,
        KernelSpec::Disk { .. } => 0,
    }
}

/// Anchor kernels of the robustness study.
pub fn default_anchor(family: &str) -> Result<KernelSpec> {
    Ok(match family {
        "motion" => KernelSpec::Motion { length: 20.0, angle: 10.0 },
        "gaussian" => KernelSpec::Gaussian { size: 20.0, sigma: 4.0 },
        "disk" => KernelSpec::Disk { radius: 4.0 },
        other => bail!(crate::config::UsageError(format!("unknown kernel family {other:?}"))),
    })
}

/// Bias grid (offsets of the swept parameter) used when none is given:
/// degrees for motion, pixels for Gaussian sigma and disk radius.
pub fn default_grid(spec: &KernelSpec) -> Vec<f64> {
    match spec {
        KernelSpec::Motion { .. } => vec![0.0, 5.0, 10.0, 15.0, 20.0],
        KernelSpec::Gaussian { .. } | KernelSpec::Disk { .. } => vec![0.0, 0.5, 1.0, 1.5, 2.0],
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub kernel: KernelSpec,
    pub grid: Vec<f64>,
    pub images: Vec<ImageSource>,
    pub seeds: Vec<u64>,
    pub noise_sigma: f64,
    pub solver: SolverConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.grid.contains(&0.0) {
            bail!(crate::config::UsageError("the bias grid must contain 0".into()));
        }
        if self.images.is_empty() || self.seeds.is_empty() {
            bail!(crate::config::UsageError("a sweep needs at least one image and one seed".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub family: &'static str,
    pub bias: f64,
    pub image: String,
    pub seed: u64,
    pub outcome: std::result::Result<RunMetrics, String>,
}

pub const SWEEP_HEADER: &str = "family,bias,image,seed,psnr,ssim,rmse_residual,wall_s,status";

/// One run per (bias, image, seed), rows in that nesting order. A failed run
/// becomes a flagged row and the sweep continues.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let idx = swept_parameter(&spec.kernel);
    let n_params = spec.kernel.params().len();
    let mut plan = Vec::new();
    for &bias in &spec.grid {
        for image in &spec.images {
            for &seed in &spec.seeds {
                plan.push((bias, image, seed));
            }
        }
    }
    parallel_map(&plan, jobs, |&(bias, image, seed)| {
        let mut offsets = vec![0.0; n_params];
        offsets[idx] = bias;
        let outcome = image
            .load()
            .and_then(|clean| {
                let deg = DegradationConfig {
                    kernel_true: spec.kernel,
                    kernel_bias: offsets,
                    noise_sigma: spec.noise_sigma,
                    seed,
                };
                simulate_and_deblur(&clean, &deg, SolverConfig { seed, ..spec.solver.clone() })
            })
            .map_err(|e| format!("{e:#}"));
        SweepRow {
            family: spec.kernel.family(),
            bias,
            image: image.name(),
            seed,
            outcome,
        }
    })
}

fn csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

fn opt(v: Option<f64>, fmt: impl Fn(f64) -> String) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Long-format CSV. `wall_s` is left empty unless `timing` is set, so that
/// repeated runs produce identical bytes.
pub fn sweep_csv(rows: &[SweepRow], timing: bool) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let fields = match &r.outcome {
            Ok(m) => format!(
                "{:.6},{},{:.6e},{},ok",
                m.psnr,
                opt(m.ssim, |v| format!("{v:.6}")),
                m.residual_mse,
                opt(timing.then_some(m.wall_s), |v| format!("{v:.3}"))
            ),
            Err(e) => format!(",,,,failed: {}", csv_field(e)),
        };
        out.push_str(&format!("{},{},{},{},{fields}\n", r.family, r.bias, csv_field(&r.image), r.seed));
    }
    out
}

/// Mean of the successful rows' metrics per bias, in grid order:
/// `(bias, runs, mean psnr, mean ssim, mean residual mse)`.
pub fn sweep_means(rows: &[SweepRow], grid: &[f64]) -> Vec<(f64, usize, f64, Option<f64>, f64)> {
    grid.iter()
        .map(|&b| {
            let ok: Vec<&RunMetrics> = rows
                .iter()
                .filter(|r| r.bias == b)
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            let n = ok.len();
            let mean = |f: &dyn Fn(&RunMetrics) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    ok.iter().map(|m| f(m)).sum::<f64>() / n as f64
                }
            };
            let ssim = ok
                .iter()
                .map(|m| m.ssim)
                .collect::<Option<Vec<f64>>>()
                .filter(|v| !v.is_empty())
                .map(|v| v.iter().sum::<f64>() / v.len() as f64);
            (b, n, mean(&|m| m.psnr), ssim, mean(&|m| m.residual_mse))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct AblationSpec {
    pub degradation: DegradationConfig,
    pub images: Vec<ImageSource>,
    pub seeds: Vec<u64>,
    pub modes: Vec<Ablation>,
    pub solver: SolverConfig,
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub mode: Ablation,
    pub image: String,
    pub seed: u64,
    pub outcome: std::result::Result<RunMetrics, String>,
}

/// Every mode on identical inputs: per (image, seed) the same blurry
/// observation, kernel and network seeds, only the ablation changes.
pub fn run_ablation_matrix(spec: &AblationSpec, jobs: Option<usize>) -> Result<Vec<AblationRow>> {
    if spec.images.is_empty() || spec.seeds.is_empty() || spec.modes.is_empty() {
        bail!(crate::config::UsageError(
            "ablation needs at least one image, seed and mode".into()
        ));
    }
    let mut plan = Vec::new();
    for &mode in &spec.modes {
        for image in &spec.images {
            for &seed in &spec.seeds {
                plan.push((mode, image, seed));
            }
        }
    }
    parallel_map(&plan, jobs, |&(mode, image, seed)| {
        let outcome = image
            .load()
            .and_then(|clean| {
                let deg = DegradationConfig {
                    seed,
                    ..spec.degradation.clone()
                };
                let cfg = SolverConfig {
                    seed,
                    ablation: mode,
                    ..spec.solver.clone()
                };
                simulate_and_deblur(&clean, &deg, cfg)
            })
            .map_err(|e| format!("{e:#}"));
        AblationRow {
            mode,
            image: image.name(),
            seed,
            outcome,
        }
    })
}

pub const ABLATION_HEADER: &str = "mode,baseline,mean_psnr,mean_ssim,mean_rmse_residual,runs,failed";
pub const ABLATION_RUNS_HEADER: &str = "mode,image,seed,psnr,ssim,rmse_residual,wall_s,status";

/// `(mode, mean psnr, mean ssim, mean residual mse, ok runs, failed runs)`
/// per mode, in the order given.
pub fn ablation_means(rows: &[AblationRow], modes: &[Ablation]) -> Vec<(Ablation, f64, Option<f64>, f64, usize, usize)> {
    modes
        .iter()
        .map(|&mode| {
            let mine: Vec<&AblationRow> = rows.iter().filter(|r| r.mode == mode).collect();
            let ok: Vec<&RunMetrics> = mine.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let n = ok.len();
            let mean = |f: &dyn Fn(&RunMetrics) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    ok.iter().map(|m| f(m)).sum::<f64>() / n as f64
                }
            };
            let ssim = ok
                .iter()
                .map(|m| m.ssim)
                .collect::<Option<Vec<f64>>>()
                .filter(|v| !v.is_empty())
                .map(|v| v.iter().sum::<f64>() / v.len() as f64);
            (mode, mean(&|m| m.psnr), ssim, mean(&|m| m.residual_mse), n, mine.len() - n)
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow], modes: &[Ablation]) -> String {
    let mut out = String::from(ABLATION_HEADER);
    out.push('\n');
    for (mode, p, s, r, n, failed) in ablation_means(rows, modes) {
        out.push_str(&format!(
            "{mode},{},{p:.6},{},{r:.6e},{n},{failed}\n",
            mode == Ablation::Full,
            opt(s, |v| format!("{v:.6}"))
        ));
    }
    out
}

pub fn ablation_runs_csv(rows: &[AblationRow], timing: bool) -> String {
    let mut out = String::from(ABLATION_RUNS_HEADER);
    out.push('\n');
    for r in rows {
        let fields = match &r.outcome {
            Ok(m) => format!(
                "{:.6},{},{:.6e},{},ok",
                m.psnr,
                opt(m.ssim, |v| format!("{v:.6}")),
                m.residual_mse,
                opt(timing.then_some(m.wall_s), |v| format!("{v:.3}"))
            ),
            Err(e) => format!(",,,,failed: {}", csv_field(e)),
        };
        out.push_str(&format!("{},{},{},{fields}\n", r.mode, csv_field(&r.image), r.seed));
    }
    out
}
