use std::path::Path;
use std::process::{Command, Output};

use semiblind_harness::commands::RunReport;
use semiblind_harness::imageio::{load_image, load_kernel};

fn semiblind(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semiblind")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = semiblind(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--scene", "32", "--family", "gaussian", "--params", "9,2", "--out"];
    let out = s(dir);
    args.push(&out);
    args.extend_from_slice(extra);
    ok(&args);
}

fn manifest(dir: &Path) -> Vec<(String, String)> {
    std::fs::read_to_string(dir.join("manifest.txt"))
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(" = ").unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

#[test]
fn zero_bias_simulation_has_identical_kernels() {
    let t = tempfile::tempdir().unwrap();
    simulate(t.path(), &["--bias", "0,0"]);
    let a = load_kernel(&t.path().join("kernel_true.txt")).unwrap();
    let b = load_kernel(&t.path().join("kernel_hat.txt")).unwrap();
    assert_eq!(a, b);
    let r = load_image(&t.path().join("residual_true.png")).unwrap();
    // Zero residual maps to mid-grey in the signed display.
    assert!(r.data().iter().all(|&v| (v - 128.0 / 255.0).abs() < 1e-12));
}

#[test]
fn manifest_records_noise_sigma_and_seed() {
    let t = tempfile::tempdir().unwrap();
    simulate(t.path(), &["--noise", "0.02", "--seed", "7", "--bias", "0,0.5"]);
    let m = manifest(t.path());
    let get = |k: &str| m.iter().find(|(a, _)| a == k).map(|(_, v)| v.clone()).unwrap();
    assert_eq!(get("sigma"), "0.02");
    assert_eq!(get("seed"), "7");
    assert_eq!(get("family"), "gaussian");
    assert_eq!(get("bias"), "0,0.5");
    for f in ["blurry.png", "clean.png", "kernel_true.txt", "kernel_hat.txt", "residual_true.png"] {
        assert!(t.path().join(f).is_file(), "{f} missing");
    }
}

#[test]
fn zero_iterations_without_truth_report_null_metrics_and_defaults() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    simulate(&sim, &[]);
    let out = t.path().join("run");
    ok(&[
        "deblur",
        "--blurry",
        &s(&sim.join("blurry.png")),
        "--kernel",
        &s(&sim.join("kernel_hat.txt")),
        "--iters",
        "0",
        "--out",
        &s(&out),
    ]);
    let text = std::fs::read_to_string(out.join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(json["metrics"]["psnr"].is_null());
    assert!(json["final_loss"].is_null());
    assert!(json["wall_s"].is_null());
    let report: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.iterations, 0);
    let c = &report.config;
    assert_eq!(c["lambda1"], "0.05");
    assert_eq!(c["lambda2"], "0.00005");
    assert_eq!(c["lambda3"], "0.0000005");
    assert_eq!(c["lr-image"], "0.009");
    assert_eq!(c["lr-residual"], "0.0005");
    assert_eq!(c["iters"], "0");
    let x = load_image(&out.join("x_hat.png")).unwrap();
    assert_eq!(x.dims(), (1, 32, 32));
}

#[test]
fn odd_sized_input_is_padded_and_cropped_back() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    ok(&["simulate", "--scene", "30", "--family", "disk", "--params", "2", "--out", &s(&sim)]);
    let out = t.path().join("run");
    let stdout = ok(&[
        "deblur",
        "--blurry",
        &s(&sim.join("blurry.png")),
        "--kernel",
        &s(&sim.join("kernel_hat.txt")),
        "--truth",
        &s(&sim.join("clean.png")),
        "--true-kernel",
        &s(&sim.join("kernel_true.txt")),
        "--iters",
        "3",
        "--out",
        &s(&out),
    ]);
    assert!(stdout.contains("psnr "));
    for f in ["x_hat.png", "r_hat.png", "h_hat.png"] {
        assert_eq!(load_image(&out.join(f)).unwrap().dims(), (1, 30, 30), "{f}");
    }
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.iterations, 3);
    assert!(report.metrics.psnr.is_some());
    assert!(report.metrics.residual_mse.is_some());
    // The reported PSNR is the one `metrics` computes on the saved files up to quantization.
    let m = ok(&["metrics", "--reference", &s(&sim.join("clean.png")), "--estimate", &s(&out.join("x_hat.png"))]);
    let p: f64 = m.lines().next().unwrap().strip_prefix("psnr ").unwrap().parse().unwrap();
    assert!((p - report.metrics.psnr.unwrap()).abs() < 0.5, "{p} vs {:?}", report.metrics.psnr);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    simulate(&sim, &[]);
    let cfg = t.path().join("c.txt");
    std::fs::write(&cfg, "# settings\nlambda1 = 0.1\niters = 2\nseed = 4\n").unwrap();
    let out = t.path().join("run");
    ok(&[
        "deblur",
        "--blurry",
        &s(&sim.join("blurry.png")),
        "--kernel",
        &s(&sim.join("kernel_hat.txt")),
        "--config",
        &s(&cfg),
        "--iters",
        "1",
        "--out",
        &s(&out),
    ]);
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.config["lambda1"], "0.1");
    assert_eq!(report.config["seed"], "4");
    assert_eq!(report.iterations, 1);
}

#[test]
fn exit_codes() {
    assert_eq!(semiblind(&["--help"]).status.code(), Some(0));
    assert_eq!(semiblind(&[]).status.code(), Some(1));
    assert_eq!(semiblind(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(semiblind(&["simulate", "--scene", "16", "--family", "spiral"]).status.code(), Some(1));
    assert_eq!(
        semiblind(&["simulate", "--scene", "16", "--family", "gaussian", "--bias", "1"]).status.code(),
        Some(1)
    );
    let t = tempfile::tempdir().unwrap();
    let missing = s(&t.path().join("nope.png"));
    let out = semiblind(&["metrics", "--reference", &missing, "--estimate", &missing]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let sim = t.path().join("sim");
    simulate(&sim, &[]);
    let blurry = s(&sim.join("blurry.png"));
    let kernel = s(&sim.join("kernel_hat.txt"));
    assert_eq!(semiblind(&["deblur", "--blurry", &blurry, "--kernel", &kernel, "--lambda1", "-1"]).status.code(), Some(1));
    assert_eq!(semiblind(&["deblur", "--blurry", &blurry, "--kernel", &kernel, "--ablation", "nope"]).status.code(), Some(1));
}

#[test]
fn sweep_and_ablate_write_their_tables() {
    let t = tempfile::tempdir().unwrap();
    let sw = t.path().join("sweep");
    ok(&["sweep", "--families", "gaussian", "--bias-grid", "0,1", "--size", "32", "--seeds", "0", "--iters", "2", "--out", &s(&sw)]);
    let csv = std::fs::read_to_string(sw.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "family,bias,image,seed,psnr,ssim,rmse_residual,wall_s,status");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.starts_with("gaussian,") && r.ends_with(",ok")));
    for f in ["sweep_summary.csv", "gaussian_psnr.png", "gaussian_ssim.png", "config.txt"] {
        assert!(sw.join(f).is_file(), "{f} missing");
    }

    let ab = t.path().join("ablate");
    ok(&["ablate", "--size", "32", "--seeds", "0", "--modes", "full,no_tv", "--iters", "2", "--out", &s(&ab)]);
    let csv = std::fs::read_to_string(ab.join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "mode,baseline,mean_psnr,mean_ssim,mean_rmse_residual,runs,failed");
    assert!(lines[1].starts_with("full,"));
    assert!(lines[2].starts_with("no_tv,"));
    assert!(ab.join("ablation_runs.csv").is_file());
}
