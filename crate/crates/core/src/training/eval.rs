use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{stack_normalized, LandCoverClass, NormalizationStats, Sample, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::nn::Network;

use super::checkpoint::Checkpoint;

/// Samples per eval-mode forward pass.
pub const EVAL_BATCH: usize = 64;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: LandCoverClass, predicted: LandCoverClass) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> [u64; NUM_CLASSES] {
        self.counts.map(|r| r.iter().sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `trace / total`, in `[0, 1]`.
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    /// Accuracy as a percentage with two decimals, e.g. `"98.22%"`.
    pub fn accuracy_percent(&self) -> String {
        format!("{:.2}%", self.accuracy * 100.0)
    }
}

/// Eval-mode labels of `samples`, in input order.
pub fn predict_labels(network: &Network<f32>, norm: &NormalizationStats, samples: &[Sample]) -> Result<Vec<LandCoverClass>> {
    let chunks: Vec<Vec<LandCoverClass>> = samples
        .par_chunks(EVAL_BATCH)
        .map(|chunk| {
            let refs: Vec<&Sample> = chunk.iter().collect();
            let logits = network.forward_eval(&stack_normalized(&refs, norm))?;
            let k = logits.shape()[1];
            logits.data().chunks(k).map(|row| LandCoverClass::from_index(argmax(row))).collect()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

pub(crate) fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn evaluate_network(network: &Network<f32>, norm: &NormalizationStats, samples: &[Sample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty sample set".into()));
    }
    let predicted = predict_labels(network, norm, samples)?;
    let mut confusion = ConfusionMatrix::default();
    for (s, p) in samples.iter().zip(predicted) {
        confusion.record(s.label, p);
    }
    let accuracy = confusion.trace() as f64 / confusion.total() as f64;
    Ok(EvalReport { accuracy, confusion })
}

pub fn evaluate(checkpoint: &Checkpoint, samples: &[Sample]) -> Result<EvalReport> {
    evaluate_network(&checkpoint.network, &checkpoint.normalization, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ArchitectureSpec, SatelliteNetOptions};
    use crate::rng::Rng;
    use crate::tensor::Tensor;

    /// A model whose head always lights up class `k`: the last batch norm has
    /// zero scale and a positive shift on `k` only.
    fn constant_model(k: usize) -> Checkpoint {
        let opts = SatelliteNetOptions { conv_channels: [2, 2, 2, 2], hidden_units: 4, ..Default::default() };
        let mut net = Network::new(&ArchitectureSpec::satellite_net(&opts), &mut Rng::new(0)).unwrap();
        let last = net.params().iter().filter(|p| p.name.ends_with(".gamma")).last().unwrap().name.clone();
        let bn = last.trim_end_matches(".gamma").to_string();
        net.params_mut().get_mut(&last).unwrap().data_mut().fill(0.0);
        net.params_mut().get_mut(&format!("{bn}.beta")).unwrap().data_mut()[k] = 5.0;
        Checkpoint::new(net, NormalizationStats { mean: [0.5; 3], std: [0.25; 3] })
    }

    fn samples(class: LandCoverClass, n: usize) -> Vec<Sample> {
        let mut rng = Rng::new(3);
        (0..n)
            .map(|i| {
                let t = Tensor::random(&[3, 64, 64], crate::tensor::Fill::Uniform { low: 0.0, high: 1.0 }, &mut rng).unwrap();
                Sample::new(t, class, format!("{i}")).unwrap()
            })
            .collect()
    }

    #[test]
    fn forced_predictions() {
        let model = constant_model(1);
        let right = evaluate(&model, &samples(LandCoverClass::Forest, 10)).unwrap();
        assert_eq!(right.accuracy, 1.0);
        assert_eq!(right.confusion.counts[1][1], 10);
        let wrong = evaluate(&model, &samples(LandCoverClass::AnnualCrop, 10)).unwrap();
        assert_eq!(wrong.accuracy, 0.0);
        assert_eq!(wrong.confusion.counts[0][1], 10);
        assert_eq!(wrong.confusion.total(), 10);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = ConfusionMatrix::default();
        a.record(LandCoverClass::River, LandCoverClass::SeaLake);
        let mut b = a.clone();
        b.record(LandCoverClass::River, LandCoverClass::River);
        a.merge(&b);
        assert_eq!(a.counts[8][9], 2);
        assert_eq!(a.trace(), 1);
        assert_eq!(a.row_sums()[8], 3);
    }

    #[test]
    fn percent_rendering() {
        let r = EvalReport { accuracy: 0.98222, confusion: Default::default() };
        assert_eq!(r.accuracy_percent(), "98.22%");
    }

    #[test]
    fn empty_input() {
        assert!(evaluate(&constant_model(0), &[]).is_err());
    }
}
