//! Layer descriptors and the default Satellite-Net topology.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { out_channels: usize, kernel: usize, stride: usize, pad: usize },
    BatchNorm,
    Relu,
    /// 2×2 window, stride 2.
    MaxPool2,
    Dropout { p: f64 },
    Flatten,
    Dense { units: usize },
    Softmax,
}

/// Count of layers per kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LayerCensus {
    pub conv: usize,
    pub batch_norm: usize,
    pub relu: usize,
    pub max_pool: usize,
    pub dropout: usize,
    pub flatten: usize,
    pub dense: usize,
    pub softmax: usize,
}

/// Widths and switches of the Satellite-Net family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteNetOptions {
    pub conv_channels: [usize; 4],
    pub hidden_units: usize,
    pub dropout: f64,
    /// Batch norm + ReLU between the last dense layer and the softmax.
    pub head_norm: bool,
}

impl Default for SatelliteNetOptions {
    fn default() -> Self {
        Self { conv_channels: [32, 32, 64, 128], hidden_units: 512, dropout: 0.5, head_norm: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    /// Per-sample input shape `[channels, height, width]`.
    pub input: [usize; 3],
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for ArchitectureSpec {
    fn default() -> Self {
        Self::satellite_net(&SatelliteNetOptions::default())
    }
}

impl ArchitectureSpec {
    /// Three convolutional blocks (the first with two conv stages), then two
    /// dense stages and a softmax:
    ///
    /// ```text
    /// [conv-BN-ReLU, conv-BN-ReLU, pool, drop]
    /// [conv-BN-ReLU, pool, drop]
    /// [conv-BN-ReLU, pool, drop]
    /// flatten, dense-BN-ReLU, dense(10)-BN-ReLU, softmax
    /// ```
    pub fn satellite_net(opts: &SatelliteNetOptions) -> Self {
        use LayerSpec::*;
        let conv = |c| Conv { out_channels: c, kernel: 3, stride: 1, pad: 1 };
        let drop = Dropout { p: opts.dropout };
        let [c1, c2, c3, c4] = opts.conv_channels;
        let mut layers = vec![
            conv(c1), BatchNorm, Relu,
            conv(c2), BatchNorm, Relu,
            MaxPool2, drop.clone(),
            conv(c3), BatchNorm, Relu,
            MaxPool2, drop.clone(),
            conv(c4), BatchNorm, Relu,
            MaxPool2, drop,
            Flatten,
            Dense { units: opts.hidden_units }, BatchNorm, Relu,
            Dense { units: 10 },
        ];
        if opts.head_norm {
            layers.extend([BatchNorm, Relu]);
        }
        layers.push(Softmax);
        Self { input: [3, 64, 64], classes: 10, layers, bn_momentum: 0.9, bn_eps: 1e-5 }
    }

    pub fn census(&self) -> LayerCensus {
        let mut c = LayerCensus::default();
        for l in &self.layers {
            match l {
                LayerSpec::Conv { .. } => c.conv += 1,
                LayerSpec::BatchNorm => c.batch_norm += 1,
                LayerSpec::Relu => c.relu += 1,
                LayerSpec::MaxPool2 => c.max_pool += 1,
                LayerSpec::Dropout { .. } => c.dropout += 1,
                LayerSpec::Flatten => c.flatten += 1,
                LayerSpec::Dense { .. } => c.dense += 1,
                LayerSpec::Softmax => c.softmax += 1,
            }
        }
        c
    }

    /// Per-sample output shape of every layer, checking that consecutive
    /// layers fit together and the chain ends in a softmax over `classes`.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let spec_err = |i: usize, msg: String| Error::Spec(format!("layer {i}: {msg}"));
        if self.input.contains(&0) || self.classes == 0 {
            return Err(Error::Spec(format!("degenerate input {:?} or class count", self.input)));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) || self.bn_eps <= 0.0 {
            return Err(Error::Spec("batch-norm momentum must be in [0, 1) and eps positive".into()));
        }
        let mut shape = self.input.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            shape = match (layer, shape.as_slice()) {
                (LayerSpec::Conv { out_channels, kernel, stride, pad }, &[_, h, w]) => {
                    if *out_channels == 0 || *kernel == 0 || *stride == 0 {
                        return Err(spec_err(i, "conv needs positive channels, kernel and stride".into()));
                    }
                    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
                    if *kernel > ph || *kernel > pw {
                        return Err(spec_err(i, format!("kernel {kernel} exceeds padded input {ph}x{pw}")));
                    }
                    vec![*out_channels, (ph - kernel) / stride + 1, (pw - kernel) / stride + 1]
                }
                (LayerSpec::Conv { .. }, s) => return Err(spec_err(i, format!("conv needs CHW input, got {s:?}"))),
                (LayerSpec::MaxPool2, &[c, h, w]) => {
                    if h % 2 != 0 || w % 2 != 0 {
                        return Err(spec_err(i, format!("max-pool input {h}x{w} is not even")));
                    }
                    vec![c, h / 2, w / 2]
                }
                (LayerSpec::MaxPool2, s) => return Err(spec_err(i, format!("max-pool needs CHW input, got {s:?}"))),
                (LayerSpec::Flatten, s) => vec![s.iter().product()],
                (LayerSpec::Dense { units }, &[_]) => {
                    if *units == 0 {
                        return Err(spec_err(i, "dense layer with zero units".into()));
                    }
                    vec![*units]
                }
                (LayerSpec::Dense { .. }, s) => return Err(spec_err(i, format!("dense needs flat input, got {s:?}"))),
                (LayerSpec::Dropout { p }, s) => {
                    if !(0.0..1.0).contains(p) {
                        return Err(spec_err(i, format!("dropout probability {p} outside [0, 1)")));
                    }
                    s.to_vec()
                }
                (LayerSpec::Softmax, s) => {
                    if i + 1 != self.layers.len() {
                        return Err(spec_err(i, "softmax must be the final layer".into()));
                    }
                    if s != [self.classes] {
                        return Err(spec_err(i, format!("softmax over {s:?}, expected [{}]", self.classes)));
                    }
                    s.to_vec()
                }
                (LayerSpec::BatchNorm | LayerSpec::Relu, s) => s.to_vec(),
            };
            out.push(shape.clone());
        }
        if self.layers.last() != Some(&LayerSpec::Softmax) {
            return Err(Error::Spec("the final layer must be a softmax".into()));
        }
        Ok(out)
    }
}
