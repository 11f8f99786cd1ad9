//! Adam with bias correction.

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for a list of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &[Tensor], config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamState {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            config,
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
        adam_step(params, grads, self, lr)
    }
}

/// One Adam update of every parameter tensor. Nothing is modified when an
/// argument is rejected.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, lr: f64) -> Result<()> {
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(Error::InvalidArgument(format!("learning rate {lr}")));
    }
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "{} params, {} grads, {} moments",
                params.len(),
                grads.len(),
                state.first_moment.len()
            ),
        ));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first_moment) {
        p.same_shape(g, "adam_step")?;
        p.same_shape(m, "adam_step")?;
        g.ensure_finite("adam_step gradient")?;
    }

    let AdamConfig { beta1, beta2, epsilon } = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *mv = beta1 * *mv + (1.0 - beta1) * gv;
            *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
            let mhat = *mv / c1;
            let vhat = *vv / c2;
            *pv -= lr * mhat / (vhat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_on_fresh_state_is_identity() {
        let mut p = vec![Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap()];
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        st.step(&mut p, &[Tensor::zeros(&[3])], 0.1).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g = 1 and v̂ = g² = 1 after bias correction, so p ← 1 - 0.1/(1 + 1e-8).
        let mut p = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(&p, AdamConfig::default());
        st.step(&mut p, &[Tensor::scalar(1.0)], 0.1).unwrap();
        let want = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((p[0].data()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn two_steps_descend_on_quadratic() {
        let mut p = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(&p, AdamConfig::default());
        let mut f = 1.0;
        for _ in 0..2 {
            let x = p[0].data()[0];
            st.step(&mut p, &[Tensor::scalar(2.0 * x)], 0.1).unwrap();
            let nx = p[0].data()[0];
            assert!(nx * nx < f);
            f = nx * nx;
        }
    }

    #[test]
    fn second_moment_stays_nonnegative() {
        let mut p = vec![Tensor::new(vec![2], vec![0.3, -0.7]).unwrap()];
        let mut st = AdamState::new(&p, AdamConfig::default());
        for k in 0..20 {
            let g = Tensor::new(vec![2], vec![(k as f64).sin(), -(k as f64).cos()]).unwrap();
            st.step(&mut p, &[g], 0.01).unwrap();
            assert!(st.second_moment[0].data().iter().all(|&v| v >= 0.0));
        }
        assert_eq!(st.step_count, 20);
    }

    #[test]
    fn rejects_bad_input() {
        let mut p = vec![Tensor::zeros(&[2])];
        let mut st = AdamState::new(&p, AdamConfig::default());
        assert!(st.step(&mut p, &[Tensor::zeros(&[3])], 0.1).is_err());
        let bad = Tensor::from_parts(vec![2], vec![f64::NAN, 0.0]);
        assert!(st.step(&mut p, &[bad], 0.1).is_err());
        assert!(st.step(&mut p, &[Tensor::zeros(&[2])], -1.0).is_err());
        assert_eq!(st.step_count, 0);
    }
}
