//! Differentiable layer kernels.
//!
//! Each layer is a forward function returning its output (plus whatever the
//! backward pass needs) and a backward function mapping the output gradient to
//! input and parameter gradients. Tensors are NCHW for image features and
//! `[N, D]` for flat features.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{col2im_sample, gemm, im2col_sample, ConvGeometry, MatRef, Scalar, Tensor};

fn nchw(shape: &[usize], what: &str) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(Error::shape(format!("{what}: expected NCHW input, got {shape:?}"))),
    }
}

fn conv_dims<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<(usize, usize, usize, usize, usize, ConvGeometry, (usize, usize))> {
    let (n, c, h, wd) = nchw(x.shape(), "conv2d")?;
    let (o, wc, kh, kw) = match *w.shape() {
        [o, c, kh, kw] => (o, c, kh, kw),
        _ => return Err(Error::shape(format!("conv2d: weight must be OIHW, got {:?}", w.shape()))),
    };
    if wc != c {
        return Err(Error::shape(format!("conv2d: input has {c} channels, weight expects {wc}")));
    }
    if b.shape() != [o] {
        return Err(Error::shape(format!("conv2d: bias {:?} does not match {o} filters", b.shape())));
    }
    let g = ConvGeometry::new(kh, kw, stride, pad);
    let out = g.output_size(h, wd)?;
    Ok((n, c, h, wd, o, g, out))
}

/// Cross-correlation plus per-filter bias, lowered to im2col + GEMM per sample.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let (n, c, h, wd, o, g, (ho, wo)) = conv_dims(x, w, b, stride, pad)?;
    let k = c * g.kh * g.kw;
    let plane = ho * wo;
    let mut y = Tensor::zeros(&[n, o, ho, wo])?;
    let wmat = MatRef::new(w.data(), o, k);
    let bias = b.data();
    y.data_mut()
        .par_chunks_mut(o * plane)
        .zip(x.data().par_chunks(c * h * wd))
        .for_each_init(
            || vec![T::zero(); k * plane],
            |cols, (ys, xs)| {
                im2col_sample(xs, (c, h, wd), g, (ho, wo), cols);
                gemm(T::one(), wmat, MatRef::new(cols, k, plane), T::zero(), ys);
                for (row, &bv) in ys.chunks_mut(plane).zip(bias) {
                    row.iter_mut().for_each(|v| *v = *v + bv);
                }
            },
        );
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

/// Gradients of [`conv2d_forward`]. Columns are recomputed from `x` rather
/// than cached. Per-sample weight gradients are reduced in sample order so
/// the result does not depend on thread scheduling.
pub fn conv2d_backward<T: Scalar>(
    dy: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<ConvGrads<T>> {
    let (n, c, h, wd, o, g, (ho, wo)) = conv_dims(x, w, b, stride, pad)?;
    if dy.shape() != [n, o, ho, wo] {
        return Err(Error::shape(format!(
            "conv2d backward: gradient {:?} does not match output {:?}",
            dy.shape(),
            [n, o, ho, wo]
        )));
    }
    let k = c * g.kh * g.kw;
    let plane = ho * wo;
    let wmat = MatRef::new(w.data(), o, k);
    let mut dx = x.zeros_like();
    let partials: Vec<(Vec<T>, Vec<T>)> = dx
        .data_mut()
        .par_chunks_mut(c * h * wd)
        .zip(x.data().par_chunks(c * h * wd))
        .zip(dy.data().par_chunks(o * plane))
        .map_init(
            || (vec![T::zero(); k * plane], vec![T::zero(); k * plane]),
            |(cols, dcols), ((dxs, xs), dys)| {
                im2col_sample(xs, (c, h, wd), g, (ho, wo), cols);
                let dymat = MatRef::new(dys, o, plane);
                let mut dw = vec![T::zero(); o * k];
                gemm(T::one(), dymat, MatRef::new(cols, k, plane).t(), T::zero(), &mut dw);
                let db: Vec<T> = dys.chunks(plane).map(|r| r.iter().copied().sum()).collect();
                gemm(T::one(), wmat.t(), dymat, T::zero(), dcols);
                col2im_sample(dcols, (c, h, wd), g, (ho, wo), dxs);
                (dw, db)
            },
        )
        .collect();
    let mut dw = w.zeros_like();
    let mut db = b.zeros_like();
    for (pw, pb) in &partials {
        for (a, &v) in dw.data_mut().iter_mut().zip(pw) {
            *a = *a + v;
        }
        for (a, &v) in db.data_mut().iter_mut().zip(pb) {
            *a = *a + v;
        }
    }
    Ok(ConvGrads { dx, dw, db })
}

/// Splits a feature tensor into (batch, channels, elements per channel).
fn bn_layout(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(Error::shape(format!("batchnorm: expected [N, C, ...], got {shape:?}")));
    }
    Ok((shape[0], shape[1], shape[2..].iter().product()))
}

fn bn_check<T: Scalar>(x: &Tensor<T>, params: &[&Tensor<T>]) -> Result<(usize, usize, usize)> {
    let (n, c, s) = bn_layout(x.shape())?;
    for p in params {
        if p.shape() != [c] {
            return Err(Error::shape(format!(
                "batchnorm: parameter {:?} does not match {c} channels",
                p.shape()
            )));
        }
    }
    Ok((n, c, s))
}

/// Running statistics and hyperparameters of one batch-normalization layer.
pub struct BatchNormState<'a, T> {
    pub running_mean: &'a mut Tensor<T>,
    pub running_var: &'a mut Tensor<T>,
    pub momentum: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<f64>,
}

/// Train-mode batch normalization: statistics over batch and spatial positions
/// per channel. Running stats move as `r ← momentum·r + (1 − momentum)·batch`.
pub fn batchnorm_train<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    state: BatchNormState<'_, T>,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let (n, c, s) = bn_check(x, &[gamma, beta, state.running_mean, state.running_var])?;
    if n < 2 {
        return Err(Error::DegenerateBatch(n));
    }
    let m = (n * s) as f64;
    let xd = x.data();
    let mut mean = vec![0.0f64; c];
    let mut var = vec![0.0f64; c];
    for i in 0..n {
        for ch in 0..c {
            let base = (i * c + ch) * s;
            mean[ch] += xd[base..base + s].iter().map(|v| v.as_f64()).sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    for i in 0..n {
        for ch in 0..c {
            let base = (i * c + ch) * s;
            let mu = mean[ch];
            var[ch] += xd[base..base + s].iter().map(|v| (v.as_f64() - mu).powi(2)).sum::<f64>();
        }
    }
    var.iter_mut().for_each(|v| *v /= m);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + state.eps).sqrt()).collect();

    let mut xhat = x.zeros_like();
    let mut y = x.zeros_like();
    let (g, bt) = (gamma.data(), beta.data());
    for i in 0..n {
        for ch in 0..c {
            let base = (i * c + ch) * s;
            let (mu, is) = (mean[ch], inv_std[ch]);
            let (gv, bv) = (g[ch].as_f64(), bt[ch].as_f64());
            for j in base..base + s {
                let z = (xd[j].as_f64() - mu) * is;
                xhat.data_mut()[j] = T::of_f64(z);
                y.data_mut()[j] = T::of_f64(gv * z + bv);
            }
        }
    }
    let mom = state.momentum;
    for ch in 0..c {
        let rm = &mut state.running_mean.data_mut()[ch];
        *rm = T::of_f64(mom * rm.as_f64() + (1.0 - mom) * mean[ch]);
        let rv = &mut state.running_var.data_mut()[ch];
        *rv = T::of_f64(mom * rv.as_f64() + (1.0 - mom) * var[ch]);
    }
    Ok((y, BatchNormCache { xhat, inv_std }))
}

/// Eval-mode batch normalization from running statistics only.
pub fn batchnorm_eval<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    let (n, c, s) = bn_check(x, &[gamma, beta, running_mean, running_var])?;
    let scale: Vec<T> = (0..c)
        .map(|ch| T::of_f64(gamma.data()[ch].as_f64() / (running_var.data()[ch].as_f64() + eps).sqrt()))
        .collect();
    let shift: Vec<T> = (0..c)
        .map(|ch| T::of_f64(beta.data()[ch].as_f64() - running_mean.data()[ch].as_f64() * scale[ch].as_f64()))
        .collect();
    let mut y = x.clone();
    for (idx, chunk) in y.data_mut().chunks_mut(s).enumerate() {
        let ch = idx % c;
        chunk.iter_mut().for_each(|v| *v = *v * scale[ch] + shift[ch]);
    }
    debug_assert_eq!(y.len(), n * c * s);
    Ok(y)
}

/// Returns `(dx, dgamma, dbeta)` for a train-mode forward pass.
pub fn batchnorm_backward<T: Scalar>(
    dy: &Tensor<T>,
    cache: &BatchNormCache<T>,
    gamma: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    if dy.shape() != cache.xhat.shape() {
        return Err(Error::shape(format!(
            "batchnorm backward: gradient {:?} vs cached {:?}",
            dy.shape(),
            cache.xhat.shape()
        )));
    }
    let (n, c, s) = bn_layout(dy.shape())?;
    let m = (n * s) as f64;
    let (dyd, xh) = (dy.data(), cache.xhat.data());
    let mut sum_dy = vec![0.0f64; c];
    let mut sum_dy_xhat = vec![0.0f64; c];
    for i in 0..n {
        for ch in 0..c {
            let base = (i * c + ch) * s;
            for j in base..base + s {
                let d = dyd[j].as_f64();
                sum_dy[ch] += d;
                sum_dy_xhat[ch] += d * xh[j].as_f64();
            }
        }
    }
    let mut dx = dy.zeros_like();
    for i in 0..n {
        for ch in 0..c {
            let base = (i * c + ch) * s;
            let k = gamma.data()[ch].as_f64() * cache.inv_std[ch] / m;
            for j in base..base + s {
                let v = m * dyd[j].as_f64() - sum_dy[ch] - xh[j].as_f64() * sum_dy_xhat[ch];
                dx.data_mut()[j] = T::of_f64(k * v);
            }
        }
    }
    let dgamma = Tensor::from_vec(&[c], sum_dy_xhat.iter().map(|&v| T::of_f64(v)).collect())?;
    let dbeta = Tensor::from_vec(&[c], sum_dy.iter().map(|&v| T::of_f64(v)).collect())?;
    Ok((dx, dgamma, dbeta))
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `dy` where the forward input was strictly positive.
pub fn relu_backward<T: Scalar>(dy: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    if dy.shape() != x.shape() {
        return Err(Error::shape(format!("relu backward: {:?} vs {:?}", dy.shape(), x.shape())));
    }
    let data = dy
        .data()
        .iter()
        .zip(x.data())
        .map(|(&d, &v)| if v > T::zero() { d } else { T::zero() })
        .collect();
    Tensor::from_vec(dy.shape(), data)
}

/// 2×2 max pooling with stride 2. Returns the output and, per output cell,
/// the flat input index of the selected element (first maximum in row-major
/// window order).
pub fn maxpool2_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let (n, c, h, w) = nchw(x.shape(), "maxpool2")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(format!("maxpool2: spatial size {h}x{w} is not even")));
    }
    let (ho, wo) = (h / 2, w / 2);
    let mut y = Tensor::zeros(&[n, c, ho, wo])?;
    let mut argmax = vec![0usize; n * c * ho * wo];
    let xd = x.data();
    let yd = y.data_mut();
    for plane in 0..n * c {
        let base = plane * h * w;
        for i in 0..ho {
            for j in 0..wo {
                let mut best = base + 2 * i * w + 2 * j;
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * i + di) * w + 2 * j + dj;
                    if xd[idx] > xd[best] {
                        best = idx;
                    }
                }
                let o = plane * ho * wo + i * wo + j;
                yd[o] = xd[best];
                argmax[o] = best;
            }
        }
    }
    Ok((y, argmax))
}

pub fn maxpool2_backward<T: Scalar>(dy: &Tensor<T>, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor<T>> {
    if dy.len() != argmax.len() {
        return Err(Error::shape("maxpool2 backward: gradient does not match routing table"));
    }
    let mut dx = Tensor::zeros(input_shape)?;
    let dxd = dx.data_mut();
    for (&g, &idx) in dy.data().iter().zip(argmax) {
        dxd[idx] = dxd[idx] + g;
    }
    Ok(dx)
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

/// Inverted dropout. In train mode returns the output and the mask (entries
/// `0` or `1/(1−p)`); in eval mode the input is returned unchanged and no mask.
pub fn dropout_forward<T: Scalar>(
    x: &Tensor<T>,
    p: f64,
    train: bool,
    rng: &mut Rng,
) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    check_probability(p)?;
    if !train || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = T::of_f64(1.0 / (1.0 - p));
    let mask: Vec<T> = (0..x.len()).map(|_| if rng.bernoulli(p) { T::zero() } else { keep }).collect();
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor::from_vec(x.shape(), data)?, Some(mask)))
}

pub fn dropout_backward<T: Scalar>(dy: &Tensor<T>, mask: Option<&[T]>) -> Result<Tensor<T>> {
    match mask {
        None => Ok(dy.clone()),
        Some(mask) => {
            if mask.len() != dy.len() {
                return Err(Error::shape("dropout backward: mask length differs from gradient"));
            }
            Tensor::from_vec(dy.shape(), dy.data().iter().zip(mask).map(|(&d, &m)| d * m).collect())
        }
    }
}

fn dense_dims<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let (n, d) = match *x.shape() {
        [n, d] => (n, d),
        _ => return Err(Error::shape(format!("dense: expected [N, D] input, got {:?}", x.shape()))),
    };
    let (wd, u) = match *w.shape() {
        [wd, u] => (wd, u),
        _ => return Err(Error::shape(format!("dense: expected [D, U] weight, got {:?}", w.shape()))),
    };
    if wd != d || b.shape() != [u] {
        return Err(Error::shape(format!(
            "dense: input {:?}, weight {:?}, bias {:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    Ok((n, d, u))
}

/// `x·w + b` for `x: [N, D]`, `w: [D, U]`, `b: [U]`.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, _, u) = dense_dims(x, w, b)?;
    let mut y = Tensor::zeros(&[n, u])?;
    for row in y.data_mut().chunks_mut(u) {
        row.copy_from_slice(b.data());
    }
    gemm(T::one(), x.as_matrix()?, w.as_matrix()?, T::one(), y.data_mut());
    Ok(y)
}

/// Returns `(dx, dw, db)`.
pub fn dense_backward<T: Scalar>(
    dy: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, _, u) = dense_dims(x, w, b)?;
    if dy.shape() != [n, u] {
        return Err(Error::shape(format!("dense backward: gradient {:?} vs [{n}, {u}]", dy.shape())));
    }
    let dymat = dy.as_matrix()?;
    let mut dx = x.zeros_like();
    gemm(T::one(), dymat, w.as_matrix()?.t(), T::zero(), dx.data_mut());
    let mut dw = w.zeros_like();
    gemm(T::one(), x.as_matrix()?.t(), dymat, T::zero(), dw.data_mut());
    let mut db = b.zeros_like();
    for row in dy.data().chunks(u) {
        for (a, &v) in db.data_mut().iter_mut().zip(row) {
            *a = *a + v;
        }
    }
    Ok((dx, dw, db))
}

/// Row-wise softmax of `[N, K]` logits (max-shifted).
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let k = match *logits.shape() {
        [_, k] => k,
        _ => return Err(Error::shape(format!("softmax: expected [N, K], got {:?}", logits.shape()))),
    };
    let mut probs = logits.clone();
    for row in probs.data_mut().chunks_mut(k) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()));
        let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (v, e) in row.iter_mut().zip(exps) {
            *v = T::of_f64(e / total);
        }
    }
    Ok(probs)
}

#[derive(Debug, Clone)]
pub struct SoftmaxXent<T> {
    pub probs: Tensor<T>,
    /// Mean negative log-likelihood over the batch.
    pub loss: f64,
    /// `(probs − onehot) / N`.
    pub dlogits: Tensor<T>,
}

pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<SoftmaxXent<T>> {
    let (n, k) = match *logits.shape() {
        [n, k] => (n, k),
        _ => return Err(Error::shape(format!("softmax: expected [N, K], got {:?}", logits.shape()))),
    };
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for a batch of {n}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidLabel { label: bad, classes: k });
    }
    let mut loss = 0.0;
    let mut probs = logits.clone();
    let mut dlogits = logits.zeros_like();
    let inv_n = 1.0 / n as f64;
    for (i, &label) in labels.iter().enumerate() {
        let row = &logits.data()[i * k..(i + 1) * k];
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()));
        let shifted: Vec<f64> = row.iter().map(|v| v.as_f64() - max).collect();
        let log_z = shifted.iter().map(|v| v.exp()).sum::<f64>().ln();
        loss -= shifted[label] - log_z;
        for j in 0..k {
            let p = (shifted[j] - log_z).exp();
            probs.data_mut()[i * k + j] = T::of_f64(p);
            let onehot = if j == label { 1.0 } else { 0.0 };
            dlogits.data_mut()[i * k + j] = T::of_f64((p - onehot) * inv_n);
        }
    }
    Ok(SoftmaxXent { probs, loss: loss * inv_n, dlogits })
}
