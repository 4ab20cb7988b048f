//! Naive reference implementations shared by the integration tests.
#![allow(dead_code)]

use terracover::data::{LandCoverClass, NUM_CLASSES};
use terracover::tensor::{Fill, Tensor};
use terracover::{ClassificationMatrix, Rng};

pub fn random(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    Tensor::random(shape, Fill::Uniform { low: -1.0, high: 1.0 }, rng).unwrap()
}

pub fn naive_matmul(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                out[i * n + j] += a.data()[i * k + p] * b.data()[p * n + j];
            }
        }
    }
    Tensor::from_vec(&[m, n], out).unwrap()
}

/// Direct seven-loop convolution with zero padding.
pub fn naive_conv2d(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
    let [n, c, h, wd] = x.shape().try_into().unwrap();
    let [o, _, kh, kw] = w.shape().try_into().unwrap();
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (wd + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; n * o * ho * wo];
    for s in 0..n {
        for oc in 0..o {
            for i in 0..ho {
                for j in 0..wo {
                    let mut acc = b.data()[oc];
                    for ic in 0..c {
                        for u in 0..kh {
                            for v in 0..kw {
                                let y = (i * stride + u) as isize - pad as isize;
                                let xx = (j * stride + v) as isize - pad as isize;
                                if y < 0 || xx < 0 || y >= h as isize || xx >= wd as isize {
                                    continue;
                                }
                                let xi = ((s * c + ic) * h + y as usize) * wd + xx as usize;
                                let wi = ((oc * c + ic) * kh + u) * kw + v;
                                acc += x.data()[xi] * w.data()[wi];
                            }
                        }
                    }
                    out[((s * o + oc) * ho + i) * wo + j] = acc;
                }
            }
        }
    }
    Tensor::from_vec(&[n, o, ho, wo], out).unwrap()
}

pub fn naive_maxpool2(x: &Tensor<f64>) -> Tensor<f64> {
    let [n, c, h, w] = x.shape().try_into().unwrap();
    let mut out = Vec::new();
    for nc in 0..n * c {
        for i in 0..h / 2 {
            for j in 0..w / 2 {
                let at = |a: usize, b: usize| x.data()[(nc * h + a) * w + b];
                out.push(at(2 * i, 2 * j).max(at(2 * i, 2 * j + 1)).max(at(2 * i + 1, 2 * j)).max(at(2 * i + 1, 2 * j + 1)));
            }
        }
    }
    Tensor::from_vec(&[n, c, h / 2, w / 2], out).unwrap()
}

/// Row `(ic·kh + u)·kw + v`, column `s·Ho·Wo + i·Wo + j`.
pub fn naive_im2col(x: &Tensor<f64>, kh: usize, kw: usize, stride: usize, pad: usize) -> Tensor<f64> {
    let [n, c, h, w] = x.shape().try_into().unwrap();
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (w + 2 * pad - kw) / stride + 1;
    let cols = n * ho * wo;
    let mut out = vec![0.0; c * kh * kw * cols];
    for s in 0..n {
        for ic in 0..c {
            for u in 0..kh {
                for v in 0..kw {
                    for i in 0..ho {
                        for j in 0..wo {
                            let y = (i * stride + u) as isize - pad as isize;
                            let xx = (j * stride + v) as isize - pad as isize;
                            let val = if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                                0.0
                            } else {
                                x.data()[((s * c + ic) * h + y as usize) * w + xx as usize]
                            };
                            let row = (ic * kh + u) * kw + v;
                            out[row * cols + s * ho * wo + i * wo + j] = val;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[c * kh * kw, cols], out).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> ClassificationMatrix {
    let labels = (0..rows * cols).map(|_| LandCoverClass::from_index(rng.below(NUM_CLASSES)).unwrap()).collect();
    ClassificationMatrix::from_labels(rows, cols, labels).unwrap()
}

/// Single pass over the labels, region test per cell.
pub fn oracle_counts(m: &ClassificationMatrix, r0: usize, r1: usize, c0: usize, c1: usize) -> [u64; NUM_CLASSES] {
    let mut counts = [0u64; NUM_CLASSES];
    for (i, l) in m.labels().iter().enumerate() {
        let (r, c) = (i / m.cols(), i % m.cols());
        if (r0..r1).contains(&r) && (c0..c1).contains(&c) {
            counts[l.index()] += 1;
        }
    }
    counts
}

#[derive(Debug, Default, Clone, Copy)]
pub struct OracleSweep {
    pub cases: usize,
    pub conv: f64,
    pub conv_f32: f64,
    pub maxpool: f64,
    pub im2col: f64,
}

/// Random small shapes: batch 1–3, channels 1–4, spatial 2–9 (even for
/// pooling), kernel 1–3, stride 1–2, padding 0–1.
pub fn oracle_sweep(cases: usize, seed: u64) -> OracleSweep {
    use terracover::nn::layers::{conv2d_forward, maxpool2_forward};
    use terracover::tensor::{im2col, ConvGeometry};

    let mut rng = Rng::new(seed);
    let mut out = OracleSweep { cases, ..Default::default() };
    let mut done = 0;
    while done < cases {
        let (n, c, o) = (1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4));
        let (h, w) = (2 + rng.below(8), 2 + rng.below(8));
        let (k, stride, pad) = (1 + rng.below(3), 1 + rng.below(2), rng.below(2));
        if k > h + 2 * pad || k > w + 2 * pad {
            continue;
        }
        done += 1;
        let x = random(&[n, c, h, w], &mut rng);
        let wt = random(&[o, c, k, k], &mut rng);
        let b = random(&[o], &mut rng);
        let oracle = naive_conv2d(&x, &wt, &b, stride, pad);
        out.conv = out.conv.max(conv2d_forward(&x, &wt, &b, stride, pad).unwrap().max_abs_diff(&oracle));
        let got32 = conv2d_forward(&x.cast::<f32>(), &wt.cast::<f32>(), &b.cast::<f32>(), stride, pad).unwrap();
        out.conv_f32 = out.conv_f32.max(got32.cast::<f64>().max_abs_diff(&oracle));

        let cols = im2col(&x, ConvGeometry::new(k, k, stride, pad)).unwrap();
        out.im2col = out.im2col.max(cols.max_abs_diff(&naive_im2col(&x, k, k, stride, pad)));

        let xp = random(&[n, c, h & !1, w & !1], &mut rng);
        let (pooled, _) = maxpool2_forward(&xp).unwrap();
        out.maxpool = out.maxpool.max(pooled.max_abs_diff(&naive_maxpool2(&xp)));
    }
    out
}

pub struct GradCase {
    pub name: &'static str,
    pub tolerance: f64,
    pub report: terracover::nn::GradCheckReport,
}

/// Finite-difference checks of every layer kind on random small batches.
pub fn layer_gradient_suite(seed: u64) -> Vec<GradCase> {
    use terracover::nn::gradcheck::*;
    let mut rng = Rng::new(seed);
    let opts = GradCheckOptions::default();
    let mut cases = Vec::new();
    let mut run = |name, tolerance, target: &mut dyn GradCheckTarget| {
        let report = gradient_check(target, &opts).unwrap();
        cases.push(GradCase { name, tolerance, report });
    };
    run("dense", 1e-4, &mut DenseProbe::random(4, 7, 5, &mut rng));
    run("conv 3x3 s1 p1", 1e-4, &mut ConvProbe::random([2, 3, 6, 6], 4, 3, 1, 1, &mut rng).unwrap());
    run("conv 2x2 s2 p0", 1e-4, &mut ConvProbe::random([2, 2, 7, 5], 3, 2, 2, 0, &mut rng).unwrap());
    run("batchnorm spatial", 1e-3, &mut BatchNormProbe::random(&[3, 4, 3, 3], &mut rng));
    run("batchnorm dense", 1e-3, &mut BatchNormProbe::random(&[5, 6], &mut rng));
    run("relu", 1e-4, &mut ReluProbe::random(&[3, 2, 4, 4], &mut rng));
    run("maxpool2", 1e-4, &mut MaxPoolProbe::random([2, 3, 4, 6], &mut rng));
    run("dropout", 1e-4, &mut DropoutProbe::random(&[4, 9], 0.5, &mut rng));
    run("softmax cross-entropy", 1e-4, &mut SoftmaxXentProbe::random(5, 10, &mut rng));
    cases
}

/// Central differences through a whole `f64` network on a two-sample batch,
/// probing a random subsample of coordinates in every tensor.
pub fn network_gradient_check(
    spec: &terracover::nn::ArchitectureSpec,
    seed: u64,
    max_coords: usize,
) -> terracover::nn::GradCheckReport {
    use terracover::nn::gradcheck::*;
    use terracover::nn::Network;
    let mut rng = Rng::new(seed);
    let net: Network<f64> = Network::new(spec, &mut rng).unwrap();
    let [c, h, w] = spec.input;
    let x = Tensor::random(&[2, c, h, w], Fill::Gaussian { mean: 0.0, std: 1.0 }, &mut rng).unwrap();
    let labels = vec![rng.below(spec.classes), rng.below(spec.classes)];
    let mut probe = NetworkProbe::new(net, x, labels, rng.next_u64());
    // A smaller step than the per-layer checks keeps kink crossings rare; the
    // floor keeps round-off on near-zero derivatives from dominating.
    let opts = GradCheckOptions { eps: 1e-5, max_coords, floor: 1e-6, seed, ..Default::default() };
    gradient_check(&mut probe, &opts).unwrap()
}
