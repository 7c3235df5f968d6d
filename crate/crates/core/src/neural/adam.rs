use std::collections::BTreeMap;

use super::mlp::Mlp;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates of one tensor.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// One bias-corrected Adam update; `t` counts from 1.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut Moments, t: u64, hyper: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::DimensionMismatch { expected: params.len(), actual: grads.len() });
    }
    if state.m.is_empty() {
        state.m = vec![0.0; params.len()];
        state.v = vec![0.0; params.len()];
    }
    if state.m.len() != params.len() {
        return Err(Error::DimensionMismatch { expected: params.len(), actual: state.m.len() });
    }
    let c1 = 1.0 - hyper.beta1.powi(t as i32);
    let c2 = 1.0 - hyper.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        params[i] -= hyper.lr * mhat / (vhat.sqrt() + hyper.eps);
    }
    Ok(())
}

/// Adam over named networks; moments are keyed by network name so that a
/// subset of networks can be optimized.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Adam {
    pub hyper: AdamConfig,
    pub t: u64,
    pub moments: BTreeMap<String, Vec<Moments>>,
}

impl Adam {
    pub fn new(hyper: AdamConfig) -> Self {
        Self { hyper, t: 0, moments: BTreeMap::new() }
    }

    pub fn step(&mut self, entries: Vec<(&str, &mut Mlp, &Mlp)>) -> Result<()> {
        self.t += 1;
        for (name, params, grads) in entries {
            let slots = self.moments.entry(name.to_string()).or_default();
            let mut tensors = params.tensors_mut();
            let grad_tensors = grads.tensors();
            if slots.is_empty() {
                slots.resize(tensors.len(), Moments::default());
            }
            if slots.len() != tensors.len() || grad_tensors.len() != tensors.len() {
                return Err(Error::DimensionMismatch { expected: tensors.len(), actual: grad_tensors.len() });
            }
            for ((p, g), s) in tensors.iter_mut().zip(grad_tensors).zip(slots.iter_mut()) {
                adam_step(p, g, s, self.t, &self.hyper)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![0.5, -1.0];
        let mut s = Moments::default();
        adam_step(&mut p, &[0.0, 0.0], &mut s, 1, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![0.5, -1.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g and v_hat = g^2 after bias correction, so the step is
        // lr * g / (|g| + eps)
        let hyper = AdamConfig::default();
        let mut p = vec![1.0, 1.0];
        let mut s = Moments::default();
        adam_step(&mut p, &[0.3, -4.0], &mut s, 1, &hyper).unwrap();
        assert!((p[0] - (1.0 - hyper.lr * 0.3 / (0.3 + hyper.eps))).abs() < 1e-15);
        assert!((p[1] - (1.0 + hyper.lr * 4.0 / (4.0 + hyper.eps))).abs() < 1e-15);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let hyper = AdamConfig { lr: 1e-3, ..AdamConfig::default() };
        let target = [0.2, -0.1, 0.05];
        let mut p = vec![0.0; 3];
        let mut s = Moments::default();
        for t in 1..=500 {
            let g: Vec<f64> = p.iter().zip(&target).map(|(x, c)| 2.0 * (x - c)).collect();
            adam_step(&mut p, &g, &mut s, t, &hyper).unwrap();
        }
        for (x, c) in p.iter().zip(&target) {
            assert!((x - c).abs() < 1e-2, "{x} vs {c}");
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut s = Moments::default();
        assert!(adam_step(&mut [0.0], &[0.0, 1.0], &mut s, 1, &AdamConfig::default()).is_err());
    }
}
