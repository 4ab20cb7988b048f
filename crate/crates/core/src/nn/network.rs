//! Executor running an [`ArchitectureSpec`] forward and backward.

use std::borrow::Borrow;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Fill, Scalar, Tensor};

use super::arch::{ArchitectureSpec, LayerSpec};
use super::layers::{self, BatchNormCache, BatchNormState};
use super::params::{Gradients, ModelParameters, Param, ParamKind};

#[derive(Debug, Clone, Copy)]
enum Op {
    Conv { w: usize, b: usize, stride: usize, pad: usize },
    BatchNorm { gamma: usize, beta: usize, mean: usize, var: usize },
    Relu,
    MaxPool2,
    Dropout { p: f64 },
    Flatten,
    Dense { w: usize, b: usize },
    Softmax,
}

enum Cache<T> {
    Conv { x: Tensor<T> },
    BatchNorm(BatchNormCache<T>),
    Relu { x: Tensor<T> },
    MaxPool { argmax: Vec<usize>, input_shape: Vec<usize> },
    Dropout { mask: Option<Vec<T>> },
    Flatten { input_shape: Vec<usize> },
    Dense { x: Tensor<T> },
    Softmax,
}

/// Per-layer state recorded by a train-mode forward pass.
pub struct Tape<T> {
    caches: Vec<Cache<T>>,
}

impl<T: Scalar> Tape<T> {
    /// Hash of every ReLU sign and max-pool routing decision. Two passes with
    /// equal patterns lie in the same piecewise-smooth region of the loss.
    pub fn activation_pattern(&self) -> u64 {
        use std::hash::{DefaultHasher, Hasher};
        let mut h = DefaultHasher::new();
        for cache in &self.caches {
            match cache {
                Cache::Relu { x } => {
                    for chunk in x.data().chunks(64) {
                        let bits = chunk.iter().enumerate().fold(0u64, |acc, (i, v)| acc | (((*v > T::zero()) as u64) << i));
                        h.write_u64(bits);
                    }
                }
                Cache::MaxPool { argmax, .. } => argmax.iter().for_each(|&i| h.write_usize(i)),
                _ => {}
            }
        }
        h.finish()
    }
}

/// A network instance: its architecture, its parameters, and the layer → tensor wiring.
#[derive(Debug, Clone)]
pub struct Network<T> {
    spec: ArchitectureSpec,
    params: ModelParameters<T>,
    ops: Vec<Op>,
    /// Gradient slot of each parameter entry (trainable entries only).
    grad_slot: Vec<Option<usize>>,
}

struct Wiring<T> {
    entries: Vec<Param<T>>,
    ops: Vec<Op>,
}

fn wire<T: Scalar>(spec: &ArchitectureSpec, mut init: impl FnMut(&str, &[usize], usize) -> Result<Tensor<T>>) -> Result<Wiring<T>> {
    let shapes = spec.shapes()?;
    let mut entries = Vec::new();
    let mut ops = Vec::with_capacity(spec.layers.len());
    let (mut conv_i, mut bn_i, mut dense_i) = (0, 0, 0);
    let mut push = |entries: &mut Vec<Param<T>>, name: String, kind, shape: &[usize], fan_in: usize| -> Result<usize> {
        let tensor = init(&name, shape, fan_in)?;
        entries.push(Param { name, kind, tensor });
        Ok(entries.len() - 1)
    };
    for (i, layer) in spec.layers.iter().enumerate() {
        let in_shape: &[usize] = if i == 0 { &spec.input } else { &shapes[i - 1] };
        let op = match *layer {
            LayerSpec::Conv { out_channels, kernel, stride, pad } => {
                let c = in_shape[0];
                let fan_in = c * kernel * kernel;
                let w = push(&mut entries, format!("conv{conv_i}.weight"), ParamKind::Trainable, &[out_channels, c, kernel, kernel], fan_in)?;
                let b = push(&mut entries, format!("conv{conv_i}.bias"), ParamKind::Trainable, &[out_channels], 0)?;
                conv_i += 1;
                Op::Conv { w, b, stride, pad }
            }
            LayerSpec::BatchNorm => {
                let c = in_shape[0];
                let p = format!("bn{bn_i}");
                bn_i += 1;
                Op::BatchNorm {
                    gamma: push(&mut entries, format!("{p}.gamma"), ParamKind::Trainable, &[c], 0)?,
                    beta: push(&mut entries, format!("{p}.beta"), ParamKind::Trainable, &[c], 0)?,
                    mean: push(&mut entries, format!("{p}.running_mean"), ParamKind::Buffer, &[c], 0)?,
                    var: push(&mut entries, format!("{p}.running_var"), ParamKind::Buffer, &[c], 0)?,
                }
            }
            LayerSpec::Dense { units } => {
                let d = in_shape[0];
                let w = push(&mut entries, format!("dense{dense_i}.weight"), ParamKind::Trainable, &[d, units], d)?;
                let b = push(&mut entries, format!("dense{dense_i}.bias"), ParamKind::Trainable, &[units], 0)?;
                dense_i += 1;
                Op::Dense { w, b }
            }
            LayerSpec::Relu => Op::Relu,
            LayerSpec::MaxPool2 => Op::MaxPool2,
            LayerSpec::Dropout { p } => Op::Dropout { p },
            LayerSpec::Flatten => Op::Flatten,
            LayerSpec::Softmax => Op::Softmax,
        };
        ops.push(op);
    }
    Ok(Wiring { entries, ops })
}

fn slots<T: Scalar>(params: &ModelParameters<T>) -> Vec<Option<usize>> {
    let mut next = 0;
    params
        .iter()
        .map(|p| {
            (p.kind == ParamKind::Trainable).then(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// Builds a freshly initialized network: He fan-in Gaussian weights, zero
/// biases, `gamma = 1`, `beta = 0`, running mean 0 and running variance 1.
pub fn build_satellite_net<T: Scalar>(spec: &ArchitectureSpec, rng: &mut Rng) -> Result<Network<T>> {
    Network::new(spec, rng)
}

impl<T: Scalar> Network<T> {
    pub fn new(spec: &ArchitectureSpec, rng: &mut Rng) -> Result<Self> {
        let wiring = wire(spec, |name, shape, fan_in| {
            if name.ends_with(".weight") {
                let std = (2.0 / fan_in as f64).sqrt();
                Tensor::random(shape, Fill::Gaussian { mean: 0.0, std }, rng)
            } else if name.ends_with(".gamma") || name.ends_with(".running_var") {
                Tensor::full(shape, T::one())
            } else {
                Tensor::zeros(shape)
            }
        })?;
        let params = ModelParameters::new(wiring.entries)?;
        let grad_slot = slots(&params);
        Ok(Self { spec: spec.clone(), params, ops: wiring.ops, grad_slot })
    }

    /// Rebinds existing parameters to an architecture, checking names, kinds and shapes.
    pub fn from_parameters(spec: &ArchitectureSpec, params: ModelParameters<T>) -> Result<Self> {
        let wiring = wire::<T>(spec, |_, shape, _| Tensor::zeros(shape))?;
        if wiring.entries.len() != params.len() {
            return Err(Error::Spec(format!(
                "architecture needs {} tensors, got {}",
                wiring.entries.len(),
                params.len()
            )));
        }
        for (want, have) in wiring.entries.iter().zip(params.iter()) {
            if want.name != have.name || want.kind != have.kind || want.tensor.shape() != have.tensor.shape() {
                return Err(Error::Spec(format!(
                    "tensor {:?} {:?} does not match expected {:?} {:?}",
                    have.name,
                    have.tensor.shape(),
                    want.name,
                    want.tensor.shape()
                )));
            }
        }
        let grad_slot = slots(&params);
        Ok(Self { spec: spec.clone(), params, ops: wiring.ops, grad_slot })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn params(&self) -> &ModelParameters<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParameters<T> {
        &mut self.params
    }

    pub fn into_params(self) -> ModelParameters<T> {
        self.params
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network { spec: self.spec.clone(), params: self.params.cast(), ops: self.ops.clone(), grad_slot: self.grad_slot.clone() }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let s = x.shape();
        if s.len() != 4 || s[1..] != self.spec.input {
            return Err(Error::shape(format!("network expects [N, {:?}], got {s:?}", self.spec.input)));
        }
        Ok(())
    }

    fn tensor(&self, idx: usize) -> &Tensor<T> {
        &self.params.entries()[idx].tensor
    }

    /// Forward pass in train mode: batch statistics in batch norm (running
    /// stats are updated), dropout masks drawn from `rng`. Returns the logits
    /// (pre-softmax) and the tape needed by [`Network::backward`].
    pub fn forward_train(&mut self, x: &Tensor<T>, rng: &mut Rng) -> Result<(Tensor<T>, Tape<T>)> {
        self.check_input(x)?;
        let (momentum, eps) = (self.spec.bn_momentum, self.spec.bn_eps);
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.ops.len());
        for &op in &self.ops {
            let (next, cache) = match op {
                Op::Conv { w, b, stride, pad } => {
                    let y = layers::conv2d_forward(&h, self.tensor(w), self.tensor(b), stride, pad)?;
                    (y, Cache::Conv { x: h })
                }
                Op::BatchNorm { gamma, beta, mean, var } => {
                    debug_assert!(gamma < beta && beta < mean && mean + 1 == var);
                    let (left, right) = self.params.entries_mut().split_at_mut(mean);
                    let (rm, rv) = right.split_at_mut(1);
                    let state = BatchNormState {
                        running_mean: &mut rm[0].tensor,
                        running_var: &mut rv[0].tensor,
                        momentum,
                        eps,
                    };
                    let (y, cache) = layers::batchnorm_train(&h, &left[gamma].tensor, &left[beta].tensor, state)?;
                    (y, Cache::BatchNorm(cache))
                }
                Op::Relu => (layers::relu_forward(&h), Cache::Relu { x: h }),
                Op::MaxPool2 => {
                    let (y, argmax) = layers::maxpool2_forward(&h)?;
                    (y, Cache::MaxPool { argmax, input_shape: h.shape().to_vec() })
                }
                Op::Dropout { p } => {
                    let (y, mask) = layers::dropout_forward(&h, p, true, rng)?;
                    (y, Cache::Dropout { mask })
                }
                Op::Flatten => {
                    let input_shape = h.shape().to_vec();
                    let n = input_shape[0];
                    let d = h.len() / n;
                    (h.reshape(&[n, d])?, Cache::Flatten { input_shape })
                }
                Op::Dense { w, b } => {
                    let y = layers::dense_forward(&h, self.tensor(w), self.tensor(b))?;
                    (y, Cache::Dense { x: h })
                }
                Op::Softmax => (h, Cache::Softmax),
            };
            h = next;
            caches.push(cache);
        }
        Ok((h, Tape { caches }))
    }

    /// Replaces every batch-norm running mean and variance with the
    /// sample-weighted average of per-batch statistics over `batches`,
    /// computed with dropout disabled (as at inference). Batches of fewer than
    /// two samples are ignored; with none left the buffers are unchanged.
    pub fn recalibrate_batchnorm<B: Borrow<Tensor<T>>>(&mut self, batches: impl IntoIterator<Item = B>) -> Result<()> {
        let eps = self.spec.bn_eps;
        let bn: Vec<(usize, usize, usize, usize)> = self
            .ops
            .iter()
            .filter_map(|op| match *op {
                Op::BatchNorm { gamma, beta, mean, var } => Some((gamma, beta, mean, var)),
                _ => None,
            })
            .collect();
        let mut sums: Vec<(Vec<f64>, Vec<f64>)> =
            bn.iter().map(|&(_, _, m, _)| (vec![0.0; self.tensor(m).len()], vec![0.0; self.tensor(m).len()])).collect();
        let mut seen = 0usize;
        for x in batches {
            let x = x.borrow();
            self.check_input(x)?;
            let n = x.shape()[0];
            if n < 2 {
                continue;
            }
            let mut h = x.clone();
            let mut k = 0;
            for &op in &self.ops {
                h = match op {
                    Op::Conv { w, b, stride, pad } => layers::conv2d_forward(&h, self.tensor(w), self.tensor(b), stride, pad)?,
                    Op::BatchNorm { gamma, beta, mean, .. } => {
                        let c = self.tensor(mean).len();
                        let (mut bm, mut bv) = (Tensor::zeros(&[c])?, Tensor::zeros(&[c])?);
                        let state = BatchNormState { running_mean: &mut bm, running_var: &mut bv, momentum: 0.0, eps };
                        let (y, _) = layers::batchnorm_train(&h, self.tensor(gamma), self.tensor(beta), state)?;
                        let (sm, sv) = &mut sums[k];
                        for ch in 0..c {
                            sm[ch] += n as f64 * bm.data()[ch].as_f64();
                            sv[ch] += n as f64 * bv.data()[ch].as_f64();
                        }
                        k += 1;
                        y
                    }
                    Op::Relu => layers::relu_forward(&h),
                    Op::MaxPool2 => layers::maxpool2_forward(&h)?.0,
                    Op::Dropout { .. } | Op::Softmax => h,
                    Op::Flatten => {
                        let n = h.shape()[0];
                        let d = h.len() / n;
                        h.reshape(&[n, d])?
                    }
                    Op::Dense { w, b } => layers::dense_forward(&h, self.tensor(w), self.tensor(b))?,
                };
            }
            seen += n;
        }
        if seen == 0 {
            return Ok(());
        }
        let entries = self.params.entries_mut();
        for (&(_, _, mean, var), (sm, sv)) in bn.iter().zip(&sums) {
            for (dst, s) in entries[mean].tensor.data_mut().iter_mut().zip(sm) {
                *dst = T::of_f64(s / seen as f64);
            }
            for (dst, s) in entries[var].tensor.data_mut().iter_mut().zip(sv) {
                *dst = T::of_f64(s / seen as f64);
            }
        }
        Ok(())
    }

    /// Eval-mode forward pass returning logits. Pure: no state is touched.
    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let eps = self.spec.bn_eps;
        let mut h = x.clone();
        for &op in &self.ops {
            h = match op {
                Op::Conv { w, b, stride, pad } => layers::conv2d_forward(&h, self.tensor(w), self.tensor(b), stride, pad)?,
                Op::BatchNorm { gamma, beta, mean, var } => layers::batchnorm_eval(
                    &h,
                    self.tensor(gamma),
                    self.tensor(beta),
                    self.tensor(mean),
                    self.tensor(var),
                    eps,
                )?,
                Op::Relu => layers::relu_forward(&h),
                Op::MaxPool2 => layers::maxpool2_forward(&h)?.0,
                Op::Dropout { .. } | Op::Softmax => h,
                Op::Flatten => {
                    let n = h.shape()[0];
                    let d = h.len() / n;
                    h.reshape(&[n, d])?
                }
                Op::Dense { w, b } => layers::dense_forward(&h, self.tensor(w), self.tensor(b))?,
            };
        }
        Ok(h)
    }

    /// Eval-mode class probabilities `[N, classes]`.
    pub fn predict_probs(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        layers::softmax(&self.forward_eval(x)?)
    }

    /// Backpropagates `dlogits` through a recorded pass. Returns the input
    /// gradient and the parameter gradients.
    pub fn backward(&self, tape: Tape<T>, dlogits: &Tensor<T>) -> Result<(Tensor<T>, Gradients<T>)> {
        if tape.caches.len() != self.ops.len() {
            return Err(Error::shape("tape was recorded by a different network"));
        }
        let mut grads = self.params.zero_gradients();
        let set = |grads: &mut Gradients<T>, idx: usize, g: Tensor<T>| {
            let slot = self.grad_slot[idx].expect("gradient for a trainable tensor");
            grads.tensors[slot] = g;
        };
        let mut d = dlogits.clone();
        for (&op, cache) in self.ops.iter().zip(tape.caches).rev() {
            d = match (op, cache) {
                (Op::Conv { w, b, stride, pad }, Cache::Conv { x }) => {
                    let g = layers::conv2d_backward(&d, &x, self.tensor(w), self.tensor(b), stride, pad)?;
                    set(&mut grads, w, g.dw);
                    set(&mut grads, b, g.db);
                    g.dx
                }
                (Op::BatchNorm { gamma, beta, .. }, Cache::BatchNorm(cache)) => {
                    let (dx, dg, db) = layers::batchnorm_backward(&d, &cache, self.tensor(gamma))?;
                    set(&mut grads, gamma, dg);
                    set(&mut grads, beta, db);
                    dx
                }
                (Op::Relu, Cache::Relu { x }) => layers::relu_backward(&d, &x)?,
                (Op::MaxPool2, Cache::MaxPool { argmax, input_shape }) => {
                    layers::maxpool2_backward(&d, &argmax, &input_shape)?
                }
                (Op::Dropout { .. }, Cache::Dropout { mask }) => layers::dropout_backward(&d, mask.as_deref())?,
                (Op::Flatten, Cache::Flatten { input_shape }) => d.reshape(&input_shape)?,
                (Op::Dense { w, b }, Cache::Dense { x }) => {
                    let (dx, dw, db) = layers::dense_backward(&d, &x, self.tensor(w), self.tensor(b))?;
                    set(&mut grads, w, dw);
                    set(&mut grads, b, db);
                    dx
                }
                (Op::Softmax, Cache::Softmax) => d,
                _ => return Err(Error::shape("tape does not match the layer sequence")),
            };
        }
        Ok((d, grads))
    }
}
