//! The `.snet` checkpoint file.
//!
//! ```text
//! "SNET" | version: u16 LE | header length: u32 LE | JSON header | f32 LE payload
//! ```
//!
//! The header records the architecture, class table, normalization
//! statistics and a tensor manifest (name, kind, shape, byte offset into the
//! payload). Tensors are stored back to back in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{class_table, ClassEntry, NormalizationStats, LandCoverClass};
use crate::error::{Error, Result};
use crate::nn::{ArchitectureSpec, ModelParameters, Network, Param, ParamKind};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SNET";
pub const CHECKPOINT_VERSION: u16 = 1;

/// A trained model together with everything needed to reproduce its preprocessing.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub normalization: NormalizationStats,
    pub classes: Vec<ClassEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    kind: ParamKind,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: ArchitectureSpec,
    classes: Vec<ClassEntry>,
    normalization: NormalizationStats,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn new(network: Network<f32>, normalization: NormalizationStats) -> Self {
        Self { network, normalization, classes: class_table() }
    }

    /// Eval-mode logits for an already standardized batch.
    pub fn logits(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.network.forward_eval(x)
    }

    /// Arg-max label and its softmax probability for each row of a standardized batch.
    pub fn predict(&self, x: &Tensor<f32>) -> Result<Vec<(LandCoverClass, f32)>> {
        let probs = self.network.predict_probs(x)?;
        let k = probs.shape()[1];
        probs
            .data()
            .chunks(k)
            .map(|row| {
                let (best, p) = row
                    .iter()
                    .enumerate()
                    .fold((0, f32::NEG_INFINITY), |(bi, bp), (i, &p)| if p > bp { (i, p) } else { (bi, bp) });
                Ok((LandCoverClass::from_index(best)?, p.clamp(0.0, 1.0)))
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0;
        let tensors = self
            .network
            .params()
            .iter()
            .map(|p| {
                let e = TensorEntry { name: p.name.clone(), kind: p.kind, shape: p.tensor.shape().to_vec(), offset };
                offset += p.tensor.len() * 4;
                e
            })
            .collect();
        let header = Header {
            architecture: self.network.spec().clone(),
            classes: self.classes.clone(),
            normalization: self.normalization,
            tensors,
        };
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(10 + header.len() + offset);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for p in self.network.params().iter() {
            for v in p.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < 10 {
            return Err(corrupt("file is shorter than the fixed preamble"));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic bytes"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
        }
        let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
        let payload_start = 10usize
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| corrupt("header extends past end of file"))?;
        let header: Header = serde_json::from_slice(&bytes[10..payload_start])
            .map_err(|e| Error::CorruptCheckpoint(format!("unreadable header: {e}")))?;
        let payload = &bytes[payload_start..];

        let mut expected_offset = 0usize;
        let mut entries = Vec::with_capacity(header.tensors.len());
        for t in header.tensors {
            let count = t
                .shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| corrupt("tensor shape overflows"))?;
            if t.offset != expected_offset {
                return Err(Error::CorruptCheckpoint(format!("tensor {} has offset {}, expected {expected_offset}", t.name, t.offset)));
            }
            let end = count.checked_mul(4).and_then(|b| b.checked_add(t.offset)).ok_or_else(|| corrupt("tensor size overflows"))?;
            let raw = payload
                .get(t.offset..end)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("tensor {} is truncated", t.name)))?;
            let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
            let tensor = Tensor::from_vec(&t.shape, data).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
            entries.push(Param { name: t.name, kind: t.kind, tensor });
            expected_offset = end;
        }
        if expected_offset != payload.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "payload is {} bytes, manifest describes {expected_offset}",
                payload.len()
            )));
        }
        if header.classes != class_table() {
            return Err(corrupt("class table does not match this build"));
        }
        let params = ModelParameters::new(entries).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let network = Network::from_parameters(&header.architecture, params)
            .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        Ok(Self { network, normalization: header.normalization, classes: header.classes })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    checkpoint.save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::SatelliteNetOptions;
    use crate::rng::Rng;

    fn small() -> Checkpoint {
        let opts = SatelliteNetOptions { conv_channels: [2, 2, 2, 2], hidden_units: 4, ..Default::default() };
        let net = Network::new(&ArchitectureSpec::satellite_net(&opts), &mut Rng::new(1)).unwrap();
        Checkpoint::new(net, NormalizationStats { mean: [0.1, 0.2, 0.3], std: [0.4, 0.5, 0.6] })
    }

    #[test]
    fn bit_exact_round_trip() {
        let c = small();
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back.network.params(), c.network.params());
        assert_eq!(back.normalization, c.normalization);
    }

    #[test]
    fn bad_magic_and_version() {
        let mut b = small().to_bytes().unwrap();
        b[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&b), Err(Error::CorruptCheckpoint(_))));
        b[0] = b'S';
        b[4] = 7;
        assert!(matches!(Checkpoint::from_bytes(&b), Err(Error::VersionMismatch { found: 7, expected: 1 })));
    }

    #[test]
    fn trailing_bytes_are_corrupt() {
        let mut b = small().to_bytes().unwrap();
        b.push(0);
        assert!(matches!(Checkpoint::from_bytes(&b), Err(Error::CorruptCheckpoint(_))));
    }
}
