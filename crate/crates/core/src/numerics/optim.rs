//! Adam and the parameter-visiting trait optimizers iterate over.

use crate::error::{shape_err, Error, Result};

/// A collection of named `f32` tensors.
///
/// `visit` and `visit_mut` must yield tensors in the same order every call;
/// optimizer state is matched to tensors by position.
pub trait Parameters {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32]));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32]));
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

/// First and second moments per tensor, kept in `f64`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new() -> Self {
        AdamState::default()
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam step over every tensor of `params`, using the
/// matching tensors of `grads` (same type, same layout).
///
/// Gradients are checked for finiteness before anything is written, so a
/// divergence error leaves parameters and state untouched.
pub fn adam_update<P: Parameters>(
    params: &mut P,
    grads: &P,
    prefix: &str,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    let mut grad_slices: Vec<(String, Vec<f32>)> = Vec::new();
    let mut bad: Option<String> = None;
    grads.visit(prefix, &mut |name, g| {
        if bad.is_none() && g.iter().any(|v| !v.is_finite()) {
            bad = Some(name.to_string());
        }
        grad_slices.push((name.to_string(), g.to_vec()));
    });
    if let Some(param) = bad {
        return Err(Error::TrainingDiverged { param });
    }

    if state.first.is_empty() {
        state.first = grad_slices
            .iter()
            .map(|(_, g)| vec![0.0; g.len()])
            .collect();
        state.second = state.first.clone();
    }
    if state.first.len() != grad_slices.len() {
        return Err(shape_err("optimizer state does not match parameter count"));
    }

    let mut shape_error: Option<String> = None;
    let mut idx = 0;
    params.visit_mut(prefix, &mut |name, p| {
        if shape_error.is_some() {
            return;
        }
        match grad_slices.get(idx) {
            Some((_, g)) if g.len() == p.len() && state.first[idx].len() == p.len() => {}
            _ => {
                shape_error = Some(format!("tensor `{name}` does not match its gradient/state"));
            }
        }
        idx += 1;
    });
    if let Some(msg) = shape_error {
        return Err(shape_err(msg));
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let mut idx = 0;
    params.visit_mut(prefix, &mut |_, p| {
        let g = &grad_slices[idx].1;
        let m = &mut state.first[idx];
        let v = &mut state.second[idx];
        for i in 0..p.len() {
            let gi = g[i] as f64;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] = (p[i] as f64 - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps)) as f32;
        }
        idx += 1;
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar(Vec<f32>);

    impl Parameters for Scalar {
        fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
            f(prefix, &self.0)
        }
        fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
            f(prefix, &mut self.0)
        }
    }

    #[test]
    fn first_step_is_lr_sized() {
        let mut p = Scalar(vec![0.0]);
        let mut s = AdamState::new();
        adam_update(
            &mut p,
            &Scalar(vec![1.0]),
            "x",
            &mut s,
            &AdamConfig::default(),
        )
        .unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p.0[0] as f64 - expected).abs() < 1e-9);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Scalar(vec![0.5, -2.0]);
        let mut s = AdamState::new();
        adam_update(
            &mut p,
            &Scalar(vec![0.0, 0.0]),
            "x",
            &mut s,
            &AdamConfig::default(),
        )
        .unwrap();
        assert_eq!(p.0, vec![0.5, -2.0]);
    }

    #[test]
    fn three_steps_match_scalar_recurrence() {
        // Independent f64 recurrence.
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=3 {
            let g = 2.0;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.001 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((x - (-0.0029999999849999945)).abs() < 1e-15);

        let mut p = Scalar(vec![0.0]);
        let mut s = AdamState::new();
        for _ in 0..3 {
            adam_update(
                &mut p,
                &Scalar(vec![2.0]),
                "x",
                &mut s,
                &AdamConfig::default(),
            )
            .unwrap();
        }
        assert!((p.0[0] as f64 - x).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut p = Scalar(vec![1.0]);
        let mut s = AdamState::new();
        let err = adam_update(
            &mut p,
            &Scalar(vec![f32::NAN]),
            "enc_a.w1",
            &mut s,
            &AdamConfig::default(),
        )
        .unwrap_err();
        match err {
            Error::TrainingDiverged { param } => assert_eq!(param, "enc_a.w1"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(p.0, vec![1.0]);
        assert_eq!(s.step(), 0);
    }
}
