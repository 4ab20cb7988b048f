//! Adam with bias-corrected moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::params::{Gradients, ModelParameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moments per trainable tensor plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParameters<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor<T>> = params.trainable().map(|p| p.tensor.zeros_like()).collect();
        Self { config, m: zeros.clone(), v: zeros, t: 0 }
    }
}

/// One Adam update of every trainable tensor:
///
/// ```text
/// m ← β1·m + (1−β1)·g
/// v ← β2·v + (1−β2)·g²
/// θ ← θ − lr · m̂ / (√v̂ + ε),   m̂ = m/(1−β1ᵗ), v̂ = v/(1−β2ᵗ)
/// ```
pub fn adam_step<T: Scalar>(
    params: &mut ModelParameters<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    let trainable: Vec<_> = params.trainable_mut().collect();
    if trainable.len() != grads.tensors.len() || trainable.len() != state.m.len() {
        return Err(Error::shape(format!(
            "{} trainable tensors, {} gradients, {} moment slots",
            trainable.len(),
            grads.tensors.len(),
            state.m.len()
        )));
    }
    for (p, g) in trainable.iter().zip(&grads.tensors) {
        if p.tensor.shape() != g.shape() {
            return Err(Error::shape(format!("gradient {:?} for {} {:?}", g.shape(), p.name, p.tensor.shape())));
        }
    }
    state.t += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    let (b1, b2) = (T::of_f64(beta1), T::of_f64(beta2));
    let (ob1, ob2) = (T::of_f64(1.0 - beta1), T::of_f64(1.0 - beta2));
    for (((p, g), m), v) in trainable.into_iter().zip(&grads.tensors).zip(&mut state.m).zip(&mut state.v) {
        let theta = p.tensor.data_mut();
        for (((th, &gv), mv), vv) in theta.iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *mv = b1 * *mv + ob1 * gv;
            *vv = b2 * *vv + ob2 * gv * gv;
            let m_hat = mv.as_f64() / c1;
            let v_hat = vv.as_f64() / c2;
            *th = T::of_f64(th.as_f64() - lr * m_hat / (v_hat.sqrt() + eps));
        }
    }
    Ok(())
}
