//! Central finite-difference verification of analytic gradients.
//!
//! Every differentiable piece is wrapped in a probe exposing its tensors and
//! a scalar objective. Layer probes reduce the layer output to a scalar with
//! a fixed random projection `L = Σ y ⊙ R`, so `∂L/∂y = R`.

use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::{Fill, Tensor};

use super::layers::{self, BatchNormState};
use super::network::Network;

/// Something whose gradients can be checked in `f64`.
pub trait GradCheckTarget {
    fn tensor_names(&self) -> Vec<String>;
    fn tensor_mut(&mut self, index: usize) -> &mut Tensor<f64>;
    /// Scalar objective at the current tensor values.
    fn loss(&mut self) -> Result<f64>;
    /// Analytic gradients, one per tensor, in [`GradCheckTarget::tensor_names`] order.
    fn analytic(&mut self) -> Result<Vec<Tensor<f64>>>;
    /// Identifier of the piecewise-smooth region the last [`GradCheckTarget::loss`]
    /// call landed in, for targets with kinks.
    fn region(&self) -> Option<u64> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Above this many coordinates a random subsample is checked instead.
    pub max_coords: usize,
    /// Subsampling still visits at least this many coordinates of every tensor.
    pub min_per_tensor: usize,
    /// Denominator floor of the relative error.
    pub floor: f64,
    pub seed: u64,
    /// Times the step is divided by 10 when a probe crosses a kink before the
    /// coordinate is skipped.
    pub kink_retries: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { eps: 1e-4, max_coords: 10_000, min_per_tensor: 4, floor: 1e-8, seed: 0, kink_retries: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coordinates: usize,
    /// Coordinates skipped because every probe step crossed a kink.
    pub kinks: usize,
    /// Tensor name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric derivative at the worst coordinate.
    pub worst_values: (f64, f64),
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares analytic gradients to `(L(θ+ε) − L(θ−ε)) / 2ε` coordinate by coordinate.
pub fn gradient_check(target: &mut dyn GradCheckTarget, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let names = target.tensor_names();
    let analytic = target.analytic()?;
    let lens: Vec<usize> = analytic.iter().map(|t| t.len()).collect();
    let total: usize = lens.iter().sum();
    let mut rng = Rng::new(opts.seed);
    let mut report = GradCheckReport { max_rel_error: 0.0, coordinates: 0, kinks: 0, worst: None, worst_values: (0.0, 0.0) };
    target.loss()?;
    let base = target.region();
    for (ti, name) in names.iter().enumerate() {
        let len = lens[ti];
        let coords: Vec<usize> = if total <= opts.max_coords {
            (0..len).collect()
        } else {
            let share = (opts.max_coords as f64 * len as f64 / total as f64).floor() as usize;
            let quota = share.max(opts.min_per_tensor).min(len);
            (0..quota).map(|_| rng.below(len)).collect()
        };
        for idx in coords {
            let orig = target.tensor_mut(ti).data()[idx];
            let mut step = opts.eps;
            let mut numeric = None;
            for _ in 0..=opts.kink_retries {
                target.tensor_mut(ti).data_mut()[idx] = orig + step;
                let plus = target.loss()?;
                let same_plus = target.region() == base;
                target.tensor_mut(ti).data_mut()[idx] = orig - step;
                let minus = target.loss()?;
                let same_minus = target.region() == base;
                target.tensor_mut(ti).data_mut()[idx] = orig;
                if same_plus && same_minus {
                    numeric = Some((plus - minus) / (2.0 * step));
                    break;
                }
                step /= 10.0;
            }
            let Some(numeric) = numeric else {
                report.kinks += 1;
                continue;
            };
            let err = relative_error(analytic[ti].data()[idx], numeric, opts.floor);
            report.coordinates += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), idx));
                report.worst_values = (analytic[ti].data()[idx], numeric);
            }
        }
    }
    Ok(report)
}

fn gaussian(shape: &[usize], std: f64, rng: &mut Rng) -> Tensor<f64> {
    Tensor::random(shape, Fill::Gaussian { mean: 0.0, std }, rng).expect("valid probe shape")
}

fn projected(y: &Tensor<f64>, proj: &Tensor<f64>) -> Result<f64> {
    y.dot(proj)
}

pub struct DenseProbe {
    pub x: Tensor<f64>,
    pub w: Tensor<f64>,
    pub b: Tensor<f64>,
    pub proj: Tensor<f64>,
}

impl DenseProbe {
    pub fn random(n: usize, d: usize, u: usize, rng: &mut Rng) -> Self {
        Self { x: gaussian(&[n, d], 1.0, rng), w: gaussian(&[d, u], 1.0, rng), b: gaussian(&[u], 1.0, rng), proj: gaussian(&[n, u], 1.0, rng) }
    }
}

impl GradCheckTarget for DenseProbe {
    fn tensor_names(&self) -> Vec<String> {
        vec!["x".into(), "w".into(), "b".into()]
    }
    fn tensor_mut(&mut self, i: usize) -> &mut Tensor<f64> {
        [&mut self.x, &mut self.w, &mut self.b].into_iter().nth(i).expect("tensor index")
    }
    fn loss(&mut self) -> Result<f64> {
        projected(&layers::dense_forward(&self.x, &self.w, &self.b)?, &self.proj)
    }
    fn analytic(&mut self) -> Result<Vec<Tensor<f64>>> {
        let (dx, dw, db) = layers::dense_backward(&self.proj, &self.x, &self.w, &self.b)?;
        Ok(vec![dx, dw, db])
    }
}

pub struct ConvProbe {
    pub x: Tensor<f64>,
    pub w: Tensor<f64>,
    pub b: Tensor<f64>,
    pub stride: usize,
    pub pad: usize,
    pub proj: Tensor<f64>,
}

impl ConvProbe {
    /// `x: [n, c, h, w]`, `o` filters of `k × k`.
    pub fn random(x_shape: [usize; 4], o: usize, k: usize, stride: usize, pad: usize, rng: &mut Rng) -> Result<Self> {
        let x = gaussian(&x_shape, 1.0, rng);
        let w = gaussian(&[o, x_shape[1], k, k], 0.5, rng);
        let b = gaussian(&[o], 0.5, rng);
        let y = layers::conv2d_forward(&x, &w, &b, stride, pad)?;
        let proj = gaussian(y.shape(), 1.0, rng);
        Ok(Self { x, w, b, stride, pad, proj })
    }
}

impl GradCheckTarget for ConvProbe {
    fn tensor_names(&self) -> Vec<String> {
        vec!["x".into(), "w".into(), "b".into()]
    }
    fn tensor_mut(&mut self, i: usize) -> &mut Tensor<f64> {
        [&mut self.x, &mut self.w, &mut self.b].into_iter().nth(i).expect("tensor index")
    }
    fn loss(&mut self) -> Result<f64> {
        projected(&layers::conv2d_forward(&self.x, &self.w, &self.b, self.stride, self.pad)?, &self.proj)
    }
    fn analytic(&mut self) -> Result<Vec<Tensor<f64>>> {
        let g = layers::conv2d_backward(&self.proj, &self.x, &self.w, &self.b, self.stride, self.pad)?;
        Ok(vec![g.dx, g.dw, g.db])
    }
}

/// Train-mode batch normalization (the mode with a non-trivial backward pass).
pub struct BatchNormProbe {
    pub x: Tensor<f64>,
    pub gamma: Tensor<f64>,
    pub beta: Tensor<f64>,
    pub eps: f64,
    pub proj: Tensor<f64>,
}

impl BatchNormProbe {
    pub fn random(shape: &[usize], rng: &mut Rng) -> Self {
        let c = shape[1];
        Self {
            x: gaussian(shape, 1.0, rng),
            gamma: Tensor::random(&[c], Fill::Uniform { low: 0.5, high: 1.5 }, rng).expect("shape"),
            beta: gaussian(&[c], 0.5, rng),
            eps: 1e-5,
            proj: gaussian(shape, 1.0, rng),
        }
    }

    fn run(&self) -> Result<(Tensor<f64>, layers::BatchNormCache<f64>)> {
        let c = self.gamma.len();
        let mut rm = Tensor::zeros(&[c])?;
        let mut rv = Tensor::full(&[c], 1.0)?;
        let state = BatchNormState { running_mean: &mut rm, running_var: &mut rv, momentum: 0.9, eps: self.eps };
        layers::batchnorm_train(&self.x, &self.gamma, &self.beta, state)
    }
}

impl GradCheckTarget for BatchNormProbe {
    fn tensor_names(&self) -> Vec<String> {
        vec!["x".into(), "gamma".into(), "beta".into()]
    }
    fn tensor_mut(&mut self, i: usize) -> &mut Tensor<f64> {
        [&mut self.x, &mut self.gamma, &mut self.beta].into_iter().nth(i).expect("tensor index")
    }
    fn loss(&mut self) -> Result<f64> {
        projected(&self.run()?.0, &self.proj)
    }
    fn analytic(&mut self) -> Result<Vec<Tensor<f64>>> {
        let (_, cache) = self.run()?;
        let (dx, dg, db) = layers::batchnorm_backward(&self.proj, &cache, &self.gamma)?;
        Ok(vec![dx, dg, db])
    }
}

pub struct ReluProbe {
    pub x: Tensor<f64>,
    pub proj: Tensor<f64>,
}

impl ReluProbe {
    /// Inputs are kept at least `0.01` away from the kink.
    pub fn random(shape: &[usize], rng: &mut Rng) -> Self {
        let mut x = gaussian(shape, 1.0, rng);
        x.data_mut().iter_mut().for_each(|v| *v += 0.01_f64.copysign(*v));
        Self { x, proj: gaussian(shape, 1.0, rng) }
    }
}

impl GradCheckTarget for ReluProbe {
    fn tensor_names(&self) -> Vec<String> {
        vec!["x".into()]
    }
    fn tensor_mut(&mut self, _: usize) -> &mut Tensor<f64> {
        &mut self.x
    }
    fn loss(&mut self) -> Result<f64> {
        projected(&layers::relu_forward(&self.x), &self.proj)
    }
    fn analytic(&mut self) -> Result<Vec<Tensor<f64>>> {
        Ok(vec![layers::relu_backward(&self.proj, &self.x)?])
    }
}

pub struct MaxPoolProbe {
    pub x: Tensor<f64>,
    pub proj: Tensor<f64>,
}

impl MaxPoolProbe {
    /// Distinct inputs spaced `0.01` apart, so no window has a tie within `eps`.
    pub fn random(shape: [usize; 4], rng: &mut Rng) -> Self {
        let len: usize = shape.iter().product();
        let data: Vec<f64> = rng.permutation(len).into_iter().map(|k| k as f64 * 0.01 - len as f64 * 0.005).collect();
        let x = Tensor::from_vec(&shape, data).expect("shape");
        let proj = gaussian(&[shape[0], shape[1], shape[2] / 2, shape[3] / 2], 1.0, rng);
        Self { x, proj }
    }
}

impl GradCheckTarget for MaxPoolProbe {
    fn tensor_names(&self) -> Vec<String> {
        vec!["x".into()]
    }
    fn tensor_mut(&mut self, _: usize) -> &mut Tensor<f64> {
        &mut self.x
    }
    fn loss(&mut self) -> Result<f64> {
        projected(&layers::maxpool2_forward(&self.x)?.0, &self.proj)
    }
    fn analytic(&mut self) -> Result<Vec<Tensor<f64>>> {
        let (_, argmax) = layers::maxpool2_forward(&self.x)?;
        Ok(vec![layers::maxpool2_backward(&self.proj, &argmax, self.x.shape())?])
    }
}

/// Dropout with its mask frozen by reseeding the generator on every evaluation.
pub struct DropoutProbe {
    pub x: Tensor<f64>,
    pub p: f64,
    pub mask_seed: u64,
    pub proj: Tensor<f64>,
}

impl DropoutProbe {
    pub fn random(shape: &[usize], p: f64, rng: &mut Rng) -> Self {
        Self { x: gaussian(shape, 1.0, rng), p, mask_seed: rng.next_u64(), proj: gaussian(shape, 1.0, rng) }
    }
}

impl GradCheckTarget for DropoutProbe {
    fn tensor_names(&self) -> Vec<String> {
        vec!["x".into()]
    }
    fn tensor_mut(&mut self, _: usize) -> &mut Tensor<f64> {
        &mut self.x
    }
    fn loss(&mut self) -> Result<f64> {
        let (y, _) = layers::dropout_forward(&self.x, self.p, true, &mut Rng::new(self.mask_seed))?;
        projected(&y, &self.proj)
    }
    fn analytic(&mut self) -> Result<Vec<Tensor<f64>>> {
        let (_, mask) = layers::dropout_forward(&self.x, self.p, true, &mut Rng::new(self.mask_seed))?;
        Ok(vec![layers::dropout_backward(&self.proj, mask.as_deref())?])
    }
}

pub struct SoftmaxXentProbe {
    pub logits: Tensor<f64>,
    pub labels: Vec<usize>,
}

impl SoftmaxXentProbe {
    pub fn random(n: usize, k: usize, rng: &mut Rng) -> Self {
        let labels = (0..n).map(|_| rng.below(k)).collect();
        Self { logits: gaussian(&[n, k], 2.0, rng), labels }
    }
}

impl GradCheckTarget for SoftmaxXentProbe {
    fn tensor_names(&self) -> Vec<String> {
        vec!["logits".into()]
    }
    fn tensor_mut(&mut self, _: usize) -> &mut Tensor<f64> {
        &mut self.logits
    }
    fn loss(&mut self) -> Result<f64> {
        Ok(layers::softmax_xent(&self.logits, &self.labels)?.loss)
    }
    fn analytic(&mut self) -> Result<Vec<Tensor<f64>>> {
        Ok(vec![layers::softmax_xent(&self.logits, &self.labels)?.dlogits])
    }
}

/// Whole-network check: mean softmax cross-entropy of a train-mode pass with
/// dropout masks fixed by `mask_seed`, over the input and every trainable tensor.
pub struct NetworkProbe {
    pub net: Network<f64>,
    pub x: Tensor<f64>,
    pub labels: Vec<usize>,
    pub mask_seed: u64,
    last_region: Option<u64>,
}

impl NetworkProbe {
    pub fn new(net: Network<f64>, x: Tensor<f64>, labels: Vec<usize>, mask_seed: u64) -> Self {
        Self { net, x, labels, mask_seed, last_region: None }
    }

    fn trainable_indices(&self) -> Vec<usize> {
        self.net
            .params()
            .iter()
            .enumerate()
            .filter(|(_, p)| p.kind == super::params::ParamKind::Trainable)
            .map(|(i, _)| i)
            .collect()
    }
}

impl GradCheckTarget for NetworkProbe {
    fn tensor_names(&self) -> Vec<String> {
        std::iter::once("input".to_string()).chain(self.net.params().trainable().map(|p| p.name.clone())).collect()
    }
    fn tensor_mut(&mut self, i: usize) -> &mut Tensor<f64> {
        if i == 0 {
            return &mut self.x;
        }
        let idx = self.trainable_indices()[i - 1];
        &mut self.net.params_mut().entries_mut()[idx].tensor
    }
    fn loss(&mut self) -> Result<f64> {
        let (logits, tape) = self.net.forward_train(&self.x, &mut Rng::new(self.mask_seed))?;
        self.last_region = Some(tape.activation_pattern());
        Ok(layers::softmax_xent(&logits, &self.labels)?.loss)
    }
    fn region(&self) -> Option<u64> {
        self.last_region
    }
    fn analytic(&mut self) -> Result<Vec<Tensor<f64>>> {
        let (logits, tape) = self.net.forward_train(&self.x, &mut Rng::new(self.mask_seed))?;
        let out = layers::softmax_xent(&logits, &self.labels)?;
        let (dx, grads) = self.net.backward(tape, &out.dlogits)?;
        Ok(std::iter::once(dx).chain(grads.tensors).collect())
    }
}
