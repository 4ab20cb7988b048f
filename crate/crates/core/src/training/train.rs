use std::ops::ControlFlow;
use std::time::Instant;

use crate::data::{batches, compute_normalization, BatchConfig, DatasetSplit};
use crate::error::{Error, Result};
use crate::nn::{adam_step, layers::softmax_xent, AdamState, Network};
use crate::rng::Rng;

use super::checkpoint::Checkpoint;
use super::config::TrainingConfig;
use super::eval::{argmax, evaluate_network};
use super::history::{EpochRecord, TrainingHistory};

// Stream ids for the seeded generators derived from `config.seed`.
const INIT_STREAM: u64 = 1;
const ORDER_STREAM: u64 = 1 << 32;
const DROPOUT_STREAM: u64 = 2 << 32;

pub fn train(config: &TrainingConfig, split: &DatasetSplit) -> Result<(Checkpoint, TrainingHistory)> {
    train_with(config, split, |_| ControlFlow::Continue(()))
}

/// Trains and calls `on_epoch` after every epoch; returning
/// [`ControlFlow::Break`] ends the run early. The returned checkpoint is the
/// one with the highest validation accuracy (earliest on ties).
pub fn train_with(
    config: &TrainingConfig,
    split: &DatasetSplit,
    mut on_epoch: impl FnMut(&EpochRecord) -> ControlFlow<()>,
) -> Result<(Checkpoint, TrainingHistory)> {
    config.validate()?;
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(Error::Config("training needs nonempty train and validation sets".into()));
    }
    let norm = compute_normalization(&split.train)?;
    let mut net: Network<f32> = Network::new(&config.architecture, &mut Rng::derive(config.seed, INIT_STREAM))?;
    let mut adam = AdamState::new(net.params(), config.adam);
    let mut history = TrainingHistory::default();
    let mut best: Option<(f64, Network<f32>)> = None;

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let order_seed = Rng::derive(config.seed, ORDER_STREAM + epoch as u64).next_u64();
        let mut dropout_rng = Rng::derive(config.seed, DROPOUT_STREAM + epoch as u64);
        let batch_config = BatchConfig {
            batch_size: config.batch_size,
            seed: order_seed,
            shuffle: true,
            augmentation: config.augment.then_some(config.augmentation),
        };
        let (mut loss_sum, mut correct, mut seen) = (0.0f64, 0usize, 0usize);
        for batch in batches(&split.train, &norm, &batch_config)? {
            // Batch norm has no train-mode statistics for a single sample.
            if batch.labels.len() < 2 {
                continue;
            }
            let (logits, tape) = net.forward_train(&batch.x, &mut dropout_rng)?;
            let xent = softmax_xent(&logits, &batch.labels)?;
            if !xent.loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let (_, grads) = net.backward(tape, &xent.dlogits)?;
            adam_step(net.params_mut(), &grads, &mut adam, config.learning_rate)?;

            let n = batch.labels.len();
            let k = xent.probs.shape()[1];
            loss_sum += xent.loss * n as f64;
            correct += xent.probs.data().chunks(k).zip(&batch.labels).filter(|(row, &l)| argmax(row) == l).count();
            seen += n;
        }
        if seen == 0 {
            return Err(Error::Config("every training batch had fewer than 2 samples".into()));
        }
        let train_loss = loss_sum / seen as f64;
        if !train_loss.is_finite() || net.params().iter().any(|p| p.tensor.data().iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged { epoch });
        }
        if config.recalibrate_batchnorm {
            let plain = BatchConfig { batch_size: config.batch_size, seed: 0, shuffle: false, augmentation: None };
            net.recalibrate_batchnorm(batches(&split.train, &norm, &plain)?.map(|b| b.x))?;
        }
        let val_acc = evaluate_network(&net, &norm, &split.validation)?.accuracy;
        if best.as_ref().is_none_or(|(b, _)| val_acc > *b) {
            best = Some((val_acc, net.clone()));
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc: correct as f64 / seen as f64,
            val_acc,
            seconds: start.elapsed().as_secs_f64(),
        };
        history.epochs.push(record);
        if on_epoch(&record).is_break() {
            break;
        }
    }

    let (_, network) = best.expect("at least one epoch ran");
    let checkpoint = Checkpoint::new(network, norm);
    if let Some(path) = &config.checkpoint_path {
        checkpoint.save(path)?;
    }
    Ok((checkpoint, history))
}
