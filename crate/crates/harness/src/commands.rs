//! The `semiblind` command-line tool.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use semiblind_core::degradation::{true_residual, DegradationConfig, KernelSpec};
use semiblind_core::signal::{mse, mse_signed, psnr};
use semiblind_core::solver::{write_trace_csv, Ablation, LossRecord};

use crate::config::{echo, echo_text, usage, SolverArgs};
use crate::experiment::{self, ImageSource};
use crate::imageio::{load_image, load_kernel, save_image, save_kernel, signed_to_display};
use crate::plot::{line_plot, Series};
use crate::scene::synthetic_scene;

#[derive(Parser, Debug)]
#[command(name = "semiblind", version, about = "Semi-blind deblurring with untrained generator priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Deblur an image with an inaccurate kernel.
    Deblur(DeblurArgs),
    /// Blur a clean image with a parametric kernel and a biased copy of it.
    Simulate(SimulateArgs),
    /// Kernel-bias robustness sweep.
    Sweep(SweepArgs),
    /// Run every ablation mode on one biased-kernel scenario.
    Ablate(AblateArgs),
    /// PSNR, SSIM and MSE between two images.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DeblurArgs {
    #[arg(long)]
    pub blurry: PathBuf,
    /// Inaccurate kernel k̂ (text format).
    #[arg(long)]
    pub kernel: PathBuf,
    /// Clear image, for PSNR and SSIM.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// True kernel, for the residual error (needs --truth).
    #[arg(long = "true-kernel")]
    pub true_kernel: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Write the per-iteration loss terms to trace.csv.
    #[arg(long)]
    pub trace: bool,
    /// Record wall-clock time in the report (makes it non-reproducible).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    /// Clean image; exclusive with --scene.
    #[arg(long, conflicts_with = "scene")]
    pub clean: Option<PathBuf>,
    /// Side length of a synthetic scene to use instead of --clean.
    #[arg(long)]
    pub scene: Option<usize>,
    /// motion, gaussian or disk.
    #[arg(long)]
    pub family: String,
    /// Comma-separated kernel parameters (motion: length,angle; gaussian:
    /// size,sigma; disk: radius). Defaults to the family's anchor.
    #[arg(long)]
    pub params: Option<String>,
    /// Comma-separated offsets added to the parameters for k̂.
    #[arg(long)]
    pub bias: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Comma-separated families, each at its anchor kernel.
    #[arg(long, default_value = "motion,gaussian,disk")]
    pub families: String,
    /// Offsets of the swept parameter (angle, sigma or radius); must include 0.
    /// Defaults to a per-family grid.
    #[arg(long = "bias-grid")]
    pub bias_grid: Option<String>,
    /// Clean images (repeatable). Synthetic scenes are used when absent.
    #[arg(long = "image")]
    pub images: Vec<PathBuf>,
    /// Number of synthetic scenes when no --image is given.
    #[arg(long, default_value_t = 1)]
    pub scenes: u64,
    /// Side length of synthetic scenes.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value = "0,1,2")]
    pub seeds: String,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value = "sweep")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Fill the wall_s column.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug, Clone)]
pub struct AblateArgs {
    #[arg(long = "image")]
    pub images: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub scenes: u64,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value = "gaussian")]
    pub family: String,
    #[arg(long, default_value = "9,2")]
    pub params: String,
    #[arg(long, default_value = "0,0.5")]
    pub bias: String,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value = "0,1,2,3,4")]
    pub seeds: String,
    /// Comma-separated subset of modes (default: all seven).
    #[arg(long)]
    pub modes: Option<String>,
    #[arg(long, default_value = "ablation")]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug, Clone)]
pub struct MetricsArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub estimate: PathBuf,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Default)]
pub struct Metrics {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub residual_mse: Option<f64>,
    /// Residual error of the all-zero estimate, for comparison.
    pub residual_mse_zero: Option<f64>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct FinalLoss {
    pub data: f64,
    pub tv: f64,
    pub r_l1: f64,
    pub v_l1: f64,
    pub total: f64,
}

impl From<&LossRecord> for FinalLoss {
    fn from(r: &LossRecord) -> Self {
        FinalLoss {
            data: r.data,
            tv: r.tv,
            r_l1: r.r_l1,
            v_l1: r.v_l1,
            total: r.total,
        }
    }
}

/// Everything `deblur` produced, written as `report.json`.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct RunReport {
    pub inputs: BTreeMap<String, String>,
    /// Effective solver settings; valid as a `--config` file when written
    /// one `key = value` per line (see `config.txt`).
    pub config: BTreeMap<String, String>,
    pub iterations: usize,
    pub metrics: Metrics,
    /// `r_hat.png` shows `(r/m + 1)/2` with this `m = max|r̂|`.
    pub residual_display_scale: f64,
    /// Same mapping for `h_hat.png`.
    pub artifact_display_scale: f64,
    /// Loss terms at the last iteration; absent for zero iterations.
    pub final_loss: Option<FinalLoss>,
    pub artifacts: BTreeMap<String, String>,
    /// Only filled with `--timing`.
    pub wall_s: Option<f64>,
}

fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| usage(format!("invalid {what} entry {t:?}"))))
        .collect()
}

fn kernel_spec(family: &str, params: Option<&str>) -> Result<KernelSpec> {
    let family = family.to_ascii_lowercase();
    match params {
        None => experiment::default_anchor(&family),
        Some(p) => KernelSpec::from_family(&family, &parse_list::<f64>("params", p)?).map_err(|e| usage(e.to_string())),
    }
}

fn bias_offsets(spec: &KernelSpec, bias: Option<&str>) -> Result<Vec<f64>> {
    let n = spec.params().len();
    let offsets = match bias {
        None => vec![0.0; n],
        Some(b) => parse_list::<f64>("bias", b)?,
    };
    if offsets.len() != n {
        return Err(usage(format!("{} takes {n} bias offsets, got {}", spec.family(), offsets.len())));
    }
    spec.biased(&offsets).map_err(|e| usage(e.to_string()))?;
    Ok(offsets)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

pub fn deblur(args: &DeblurArgs) -> Result<RunReport> {
    let start = Instant::now();
    let cfg = args.solver.resolve()?;
    let y = load_image(&args.blurry)?;
    let k_hat = load_kernel(&args.kernel)?;
    let truth = args.truth.as_deref().map(load_image).transpose()?;
    if let Some(t) = &truth {
        if t.dims() != y.dims() {
            return Err(usage(format!(
                "truth {:?} and blurry {:?} differ in size",
                t.dims(),
                y.dims()
            )));
        }
    }
    let r_true = match (&args.true_kernel, &truth) {
        (Some(p), Some(t)) => Some(true_residual(t, &load_kernel(p)?, &k_hat)?),
        (Some(_), None) => return Err(usage("--true-kernel needs --truth")),
        _ => None,
    };

    let out = experiment::deblur_padded(&y, &k_hat, cfg.clone())?;
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut artifacts = BTreeMap::new();
    let mut emit = |key: &str, name: &str| {
        let p = args.out.join(name);
        artifacts.insert(key.to_string(), path_string(&p));
        p
    };
    save_image(&out.x_hat, &emit("x_hat", "x_hat.png"))?;
    let (r_vis, r_scale) = signed_to_display(&out.r_hat);
    save_image(&r_vis, &emit("r_hat", "r_hat.png"))?;
    let (h_vis, h_scale) = signed_to_display(&out.h_hat);
    save_image(&h_vis, &emit("h_hat", "h_hat.png"))?;
    write(&emit("config", "config.txt"), echo_text(&cfg))?;
    if args.trace {
        let mut buf = Vec::new();
        write_trace_csv(&out.result.trace, &mut buf)?;
        write(&emit("trace", "trace.csv"), buf)?;
    }
    let report_path = emit("report", "report.json");

    let mut metrics = Metrics::default();
    if let Some(t) = &truth {
        metrics.psnr = Some(psnr(t, &out.x_hat)?);
        metrics.ssim = experiment::ssim_if_fits(t, &out.x_hat)?;
    }
    if let Some(r) = &r_true {
        metrics.residual_mse = Some(mse_signed(r, &out.r_hat)?);
        metrics.residual_mse_zero = Some(mse_signed(r, &r.map(|_| 0.0))?);
    }
    let mut inputs = BTreeMap::from([
        ("blurry".to_string(), path_string(&args.blurry)),
        ("kernel".to_string(), path_string(&args.kernel)),
    ]);
    if let Some(p) = &args.truth {
        inputs.insert("truth".into(), path_string(p));
    }
    if let Some(p) = &args.true_kernel {
        inputs.insert("true-kernel".into(), path_string(p));
    }
    let report = RunReport {
        inputs,
        config: echo(&cfg).into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        iterations: out.result.trace.len(),
        metrics,
        residual_display_scale: r_scale,
        artifact_display_scale: h_scale,
        final_loss: out.result.trace.last().map(FinalLoss::from),
        artifacts,
        wall_s: args.timing.then(|| start.elapsed().as_secs_f64()),
    };
    write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}

/// Writes the simulated observation and both kernels; returns the manifest.
pub fn simulate(args: &SimulateArgs) -> Result<String> {
    let spec = kernel_spec(&args.family, args.params.as_deref())?;
    let offsets = bias_offsets(&spec, args.bias.as_deref())?;
    let (clean, source) = match (&args.clean, args.scene) {
        (Some(p), None) => (load_image(p)?, path_string(p)),
        (None, Some(n)) => (synthetic_scene(n, n, args.seed)?, format!("scene {n} seed {}", args.seed)),
        _ => return Err(usage("give exactly one of --clean or --scene")),
    };
    let deg = DegradationConfig {
        kernel_true: spec,
        kernel_bias: offsets.clone(),
        noise_sigma: args.noise,
        seed: args.seed,
    };
    let sc = deg.simulate(&clean).map_err(|e| usage(e.to_string()))?;
    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    save_image(&sc.blurry, &out.join("blurry.png"))?;
    save_kernel(&sc.kernel_true, &out.join("kernel_true.txt"))?;
    save_kernel(&sc.kernel_hat, &out.join("kernel_hat.txt"))?;
    let (r_vis, r_scale) = signed_to_display(&sc.residual_true);
    save_image(&r_vis, &out.join("residual_true.png"))?;
    if args.scene.is_some() {
        save_image(&clean, &out.join("clean.png"))?;
    }
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let manifest = format!(
        "source = {source}\nfamily = {}\nparams = {}\nbias = {}\nsigma = {}\nseed = {}\nresidual_display_scale = {r_scale}\nblurry_psnr = {:.6}\nresidual_energy = {:e}\n",
        spec.family(),
        list(&spec.params()),
        list(&offsets),
        args.noise,
        args.seed,
        psnr(&clean, &sc.blurry)?,
        mse_signed(&sc.residual_true.map(|_| 0.0), &sc.residual_true)?,
    );
    write(&out.join("manifest.txt"), &manifest)?;
    Ok(manifest)
}

fn image_sources(files: &[PathBuf], scenes: u64, size: usize) -> Vec<ImageSource> {
    if files.is_empty() {
        (0..scenes).map(|seed| ImageSource::Scene { size, seed }).collect()
    } else {
        files.iter().cloned().map(ImageSource::File).collect()
    }
}

fn save_plot(series: Vec<(f64, f64)>, path: &Path) -> Result<()> {
    let img = line_plot(&[Series { points: series }], 480, 320);
    img.save(path).with_context(|| format!("cannot write {}", path.display()))
}

/// Returns the long-format CSV text.
pub fn sweep(args: &SweepArgs) -> Result<String> {
    let solver = args.solver.resolve()?;
    let seeds: Vec<u64> = parse_list("seeds", &args.seeds)?;
    let images = image_sources(&args.images, args.scenes, args.size);
    let mut specs = Vec::new();
    for family in parse_list::<String>("families", &args.families)? {
        let kernel = experiment::default_anchor(&family.to_ascii_lowercase())?;
        let grid = match &args.bias_grid {
            Some(g) => parse_list("bias grid", g)?,
            None => experiment::default_grid(&kernel),
        };
        let spec = experiment::SweepSpec {
            kernel,
            grid,
            images: images.clone(),
            seeds: seeds.clone(),
            noise_sigma: args.noise,
            solver: solver.clone(),
        };
        spec.validate()?;
        specs.push(spec);
    }
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut rows = Vec::new();
    let mut summary = String::from("family,bias,runs,mean_psnr,mean_ssim,mean_rmse_residual\n");
    for spec in &specs {
        let mine = experiment::run_sweep(spec, args.jobs)?;
        let means = experiment::sweep_means(&mine, &spec.grid);
        let family = spec.kernel.family();
        for &(b, n, p, s, r) in &means {
            let s = s.map(|v| format!("{v:.6}")).unwrap_or_default();
            summary.push_str(&format!("{family},{b},{n},{p:.6},{s},{r:.6e}\n"));
        }
        // Plot against the biased parameter in increasing order.
        let mut order: Vec<usize> = (0..means.len()).collect();
        order.sort_by(|&a, &b| means[a].0.total_cmp(&means[b].0));
        let psnr_pts = order.iter().map(|&i| (means[i].0, means[i].2)).collect();
        let ssim_pts = order.iter().map(|&i| (means[i].0, means[i].3.unwrap_or(f64::NAN))).collect();
        save_plot(psnr_pts, &args.out.join(format!("{family}_psnr.png")))?;
        save_plot(ssim_pts, &args.out.join(format!("{family}_ssim.png")))?;
        rows.extend(mine);
    }
    let csv = experiment::sweep_csv(&rows, args.timing);
    write(&args.out.join("sweep.csv"), &csv)?;
    write(&args.out.join("sweep_summary.csv"), &summary)?;
    write(&args.out.join("config.txt"), echo_text(&solver))?;
    Ok(csv)
}

/// Returns the per-mode summary CSV text.
pub fn ablate(args: &AblateArgs) -> Result<String> {
    let solver = args.solver.resolve()?;
    let spec = kernel_spec(&args.family, Some(&args.params))?;
    let offsets = bias_offsets(&spec, Some(&args.bias))?;
    let modes = match &args.modes {
        Some(m) => parse_list::<Ablation>("modes", m)?,
        None => Ablation::ALL.to_vec(),
    };
    let abl = experiment::AblationSpec {
        degradation: DegradationConfig {
            kernel_true: spec,
            kernel_bias: offsets,
            noise_sigma: args.noise,
            seed: 0,
        },
        images: image_sources(&args.images, args.scenes, args.size),
        seeds: parse_list("seeds", &args.seeds)?,
        modes: modes.clone(),
        solver: solver.clone(),
    };
    let rows = experiment::run_ablation_matrix(&abl, args.jobs)?;
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let csv = experiment::ablation_csv(&rows, &modes);
    write(&args.out.join("ablation.csv"), &csv)?;
    write(&args.out.join("ablation_runs.csv"), experiment::ablation_runs_csv(&rows, args.timing))?;
    write(&args.out.join("config.txt"), echo_text(&solver))?;
    Ok(csv)
}

/// `psnr`, `ssim` (empty below the window size) and `mse` lines.
pub fn metrics(args: &MetricsArgs) -> Result<String> {
    let a = load_image(&args.reference)?;
    let b = load_image(&args.estimate)?;
    if a.dims() != b.dims() {
        return Err(usage(format!("images differ in size: {:?} vs {:?}", a.dims(), b.dims())));
    }
    let s = experiment::ssim_if_fits(&a, &b)?;
    Ok(format!(
        "psnr {:.6}\nssim {}\nmse {:.6e}\n",
        psnr(&a, &b)?,
        s.map(|v| format!("{v:.6}")).unwrap_or_else(|| "n/a".into()),
        mse(&a, &b)?
    ))
}

/// Runs a parsed command, printing its summary to stdout.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Deblur(a) => {
            let r = deblur(a)?;
            if let Some(p) = r.metrics.psnr {
                println!("psnr {p:.4}");
            }
            if let Some(s) = r.metrics.ssim {
                println!("ssim {s:.4}");
            }
            if let Some(m) = r.metrics.residual_mse {
                println!("residual_mse {m:.6e}");
            }
            println!("report {}", r.artifacts["report"]);
        }
        Command::Simulate(a) => print!("{}", simulate(a)?),
        Command::Sweep(a) => print!("{}", sweep(a)?),
        Command::Ablate(a) => print!("{}", ablate(a)?),
        Command::Metrics(a) => print!("{}", metrics(a)?),
    }
    Ok(())
}

/// Maps an error to the process exit code: 1 for usage errors, 2 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<crate::config::UsageError>()) {
        1
    } else {
        2
    }
}
