use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use exo_core::Class;

use crate::adam::{adam_step, AdamState};
use crate::data::Sample;
use crate::model::{self, DropoutMask};
use crate::params::{Arch, ModelParams};
use crate::IntentError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
    pub anneal_factor: f64,
    /// Epochs without a new best validation loss before the rate is annealed.
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub bn_momentum: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 20,
            dropout: crate::DEFAULT_DROPOUT,
            leaky_slope: model::LEAKY_SLOPE,
            anneal_factor: 5.0,
            early_stop_patience: 10,
            max_epochs: 40,
            bn_momentum: 0.9,
            seed: 42,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), IntentError> {
        let ok = self.dropout > 0.0
            && self.dropout < 1.0
            && self.learning_rate > 0.0
            && self.anneal_factor > 1.0
            && self.batch_size > 0
            && self.early_stop_patience > 0
            && (0.0..1.0).contains(&self.bn_momentum);
        if !ok {
            return Err(IntentError::Hyper(format!("{self:?}")));
        }
        if self.leaky_slope != model::LEAKY_SLOPE {
            return Err(IntentError::Hyper("leaky slope is fixed at 0.01".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
}

fn evaluate_set(params: &ModelParams, set: &[Sample]) -> Result<(f64, f64), IntentError> {
    let xs: Vec<&[f64]> = set.iter().map(|s| s.values.as_slice()).collect();
    let labels: Vec<Class> = set.iter().map(|s| s.label).collect();
    let probs = model::predict(params, &xs)?;
    let loss = model::cross_entropy(&probs, &labels);
    let correct = probs.iter().zip(&labels).filter(|(p, l)| p.argmax() == **l).count();
    Ok((loss, correct as f64 / set.len() as f64))
}

/// Mini-batch Adam with validation-driven annealing and early stopping.
///
/// The rate is divided by `anneal_factor` once `early_stop_patience` epochs
/// pass without a new best validation loss; training ends after the second
/// consecutive such decay, or at `max_epochs`. The weights with the best
/// validation accuracy are returned.
pub fn train(train: &[Sample], val: &[Sample], arch: Arch, hyper: &Hyperparams) -> Result<(ModelParams, TrainHistory), IntentError> {
    train_with_progress(train, val, arch, hyper, |_| {})
}

pub fn train_with_progress(
    train: &[Sample],
    val: &[Sample],
    arch: Arch,
    hyper: &Hyperparams,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<(ModelParams, TrainHistory), IntentError> {
    hyper.validate()?;
    if train.len() < hyper.batch_size {
        return Err(IntentError::TrainingSetTooSmall {
            have: train.len(),
            need: hyper.batch_size,
        });
    }
    if val.is_empty() {
        return Err(IntentError::EmptyValidationSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut params = ModelParams::init(arch, &mut rng)?;
    let mut opt = AdamState::new(&params);
    let mut lr = hyper.learning_rate;
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = TrainHistory::default();
    let mut best = params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_loss = f64::INFINITY;
    let mut since_improvement = 0;
    let mut fruitless_decays = 0;

    for epoch in 0..hyper.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(hyper.batch_size) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| train[i].values.as_slice()).collect();
            let labels: Vec<Class> = chunk.iter().map(|&i| train[i].label).collect();
            let mask = DropoutMask::sample(xs.len(), arch.hidden, hyper.dropout, &mut rng);
            let (grads, loss, cache) = model::backward(&params, &xs, &labels, &mask)?;
            adam_step(&mut params, &grads, &mut opt, lr)?;
            model::update_running_stats(&mut params, &cache, hyper.bn_momentum);
            loss_sum += loss;
            batches += 1;
        }
        let (val_loss, val_acc) = evaluate_set(&params, val)?;
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / batches as f64,
            val_loss,
            val_accuracy: val_acc,
        };
        progress(&record);
        history.epochs.push(record);

        if val_acc > best_acc {
            best_acc = val_acc;
            best = params.clone();
            history.best_epoch = epoch;
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            since_improvement = 0;
            fruitless_decays = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= hyper.early_stop_patience {
                lr /= hyper.anneal_factor;
                since_improvement = 0;
                fruitless_decays += 1;
                if fruitless_decays >= 2 {
                    history.stopped_early = true;
                    break;
                }
            }
        }
    }
    history.best_val_accuracy = best_acc;
    Ok((best, history))
}
