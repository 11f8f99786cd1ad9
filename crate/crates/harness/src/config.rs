//! Solver settings from command-line flags and flat `key = value` files.
//!
//! File keys are the long flag names without the leading dashes. Blank lines
//! and lines starting with `#` are ignored. A flag given on the command line
//! overrides the file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use semiblind_core::solver::{Ablation, SolverConfig};

/// Bad input from the user (exit code 1), as opposed to a runtime failure.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Keys accepted in a config file, in echo order.
pub const KEYS: [&str; 11] = [
    "seed",
    "iters",
    "lambda1",
    "lambda2",
    "lambda3",
    "lr-image",
    "lr-residual",
    "ablation",
    "intensity-scale",
    "lipschitz",
    "ema-decay",
];

#[derive(Args, Clone, Debug, Default)]
pub struct SolverArgs {
    /// Flat key = value file with defaults for the flags below.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of iterations T.
    #[arg(long)]
    pub iters: Option<usize>,
    /// TV weight.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// L1 weight on the residual.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// L1 weight on the DCT coefficients of the artifact term.
    #[arg(long)]
    pub lambda3: Option<f64>,
    #[arg(long = "lr-image")]
    pub lr_image: Option<f64>,
    #[arg(long = "lr-residual")]
    pub lr_residual: Option<f64>,
    /// full, no_r_sparsity, no_v_sparsity, no_tv, no_dip, no_drp or no_r_term.
    #[arg(long)]
    pub ablation: Option<String>,
    /// Intensity units the objective is evaluated in (255 = 8-bit levels).
    #[arg(long = "intensity-scale")]
    pub intensity_scale: Option<f64>,
    /// Step constant of the v update; "auto" selects 2·C·H·W.
    #[arg(long)]
    pub lipschitz: Option<String>,
    /// Report an exponential moving average of the image iterates; "none" disables.
    #[arg(long = "ema-decay")]
    pub ema_decay: Option<String>,
}

/// Parses `key = value` lines into a map, rejecting unknown and repeated keys.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(usage(format!("config line {}: unknown key {k:?}", n + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(usage(format!("config line {}: duplicate key {k:?}", n + 1)));
        }
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| usage(format!("invalid value {v:?} for {key}")))
}

fn parse_optional(key: &str, v: &str, none_word: &str) -> Result<Option<f64>> {
    if v.eq_ignore_ascii_case(none_word) {
        Ok(None)
    } else {
        parse_value(key, v).map(Some)
    }
}

impl SolverArgs {
    fn cli_value(&self, key: &str) -> Option<String> {
        match key {
            "seed" => self.seed.map(|v| v.to_string()),
            "iters" => self.iters.map(|v| v.to_string()),
            "lambda1" => self.lambda1.map(|v| v.to_string()),
            "lambda2" => self.lambda2.map(|v| v.to_string()),
            "lambda3" => self.lambda3.map(|v| v.to_string()),
            "lr-image" => self.lr_image.map(|v| v.to_string()),
            "lr-residual" => self.lr_residual.map(|v| v.to_string()),
            "ablation" => self.ablation.clone(),
            "intensity-scale" => self.intensity_scale.map(|v| v.to_string()),
            "lipschitz" => self.lipschitz.clone(),
            "ema-decay" => self.ema_decay.clone(),
            _ => None,
        }
    }

    /// Merges defaults, the config file and the flags into a validated
    /// solver configuration.
    pub fn resolve(&self) -> Result<SolverConfig> {
        let file = match &self.config {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        let mut cfg = SolverConfig::default();
        for key in KEYS {
            let Some(v) = self.cli_value(key).or_else(|| file.get(key).cloned()) else {
                continue;
            };
            apply(&mut cfg, key, &v)?;
        }
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in config {}", path.display()))
}

fn apply(cfg: &mut SolverConfig, key: &str, v: &str) -> Result<()> {
    match key {
        "seed" => cfg.seed = parse_value(key, v)?,
        "iters" => cfg.iterations = parse_value(key, v)?,
        "lambda1" => cfg.lambda1 = parse_value(key, v)?,
        "lambda2" => cfg.lambda2 = parse_value(key, v)?,
        "lambda3" => cfg.lambda3 = parse_value(key, v)?,
        "lr-image" => cfg.lr_image = parse_value(key, v)?,
        "lr-residual" => cfg.lr_residual = parse_value(key, v)?,
        "ablation" => cfg.ablation = v.parse::<Ablation>().map_err(|e| usage(e.to_string()))?,
        "intensity-scale" => cfg.intensity_scale = parse_value(key, v)?,
        "lipschitz" => cfg.lipschitz = parse_optional(key, v, "auto")?,
        "ema-decay" => cfg.ema_decay = parse_optional(key, v, "none")?,
        _ => return Err(usage(format!("unknown key {key:?}"))),
    }
    Ok(())
}

/// Effective settings as `(key, value)` pairs. Floats use the shortest
/// representation that parses back to the same value, so the echo reproduces
/// the run exactly.
pub fn echo(cfg: &SolverConfig) -> Vec<(&'static str, String)> {
    vec![
        ("seed", cfg.seed.to_string()),
        ("iters", cfg.iterations.to_string()),
        ("lambda1", cfg.lambda1.to_string()),
        ("lambda2", cfg.lambda2.to_string()),
        ("lambda3", cfg.lambda3.to_string()),
        ("lr-image", cfg.lr_image.to_string()),
        ("lr-residual", cfg.lr_residual.to_string()),
        ("ablation", cfg.ablation.to_string()),
        ("intensity-scale", cfg.intensity_scale.to_string()),
        ("lipschitz", cfg.lipschitz.map_or("auto".into(), |v| v.to_string())),
        ("ema-decay", cfg.ema_decay.map_or("none".into(), |v| v.to_string())),
    ]
}

pub fn echo_text(cfg: &SolverConfig) -> String {
    echo(cfg).into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}
