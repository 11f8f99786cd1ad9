//! Central finite-difference gradient check.

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct FiniteDiffOptions {
    pub step: f64,
    /// Coordinate values where `f` is not differentiable; coordinates within
    /// `10·step` of any of them are skipped.
    pub kinks: Vec<f64>,
    /// Restrict the check to these flat indices (all coordinates when `None`).
    pub coords: Option<Vec<usize>>,
}

impl Default for FiniteDiffOptions {
    fn default() -> Self {
        FiniteDiffOptions {
            step: 1e-5,
            kinks: Vec::new(),
            coords: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteDiffReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares the backward-pass gradient of the scalar `f` at `point` with
/// central differences.
pub fn finite_diff_check<F>(f: F, point: &Tensor, opts: &FiniteDiffOptions) -> Result<FiniteDiffReport>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let eval = |p: Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.constant(p);
        let y = f(&mut g, x)?;
        let v = g.value(y).item()?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("finite-difference probe".into()))
        }
    };

    let mut g = Graph::new();
    let x = g.param(point.clone());
    let y = f(&mut g, x)?;
    let analytic = g.backward(y)?.wrt(x);

    let h = opts.step;
    let coords: Vec<usize> = match &opts.coords {
        Some(c) => c.clone(),
        None => (0..point.len()).collect(),
    };
    let mut report = FiniteDiffReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for i in coords {
        let xi = point.data()[i];
        if opts.kinks.iter().any(|k| (xi - k).abs() < 10.0 * h) {
            report.skipped += 1;
            continue;
        }
        let mut plus = point.clone();
        plus.data_mut()[i] += h;
        let mut minus = point.clone();
        minus.data_mut()[i] -= h;
        let fd = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let err = relative_error(analytic.data()[i], fd);
        report.max_rel_error = report.max_rel_error.max(err);
        report.checked += 1;
    }
    Ok(report)
}
