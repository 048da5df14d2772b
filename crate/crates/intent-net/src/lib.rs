//! Per-muscle CNN+LSTM intent classifier written from scratch: layers with
//! hand-derived gradients, Adam, annealed training with early stopping,
//! confusion-matrix evaluation and JSON checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod data;
pub mod eval;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod params;
pub mod pipeline;
pub mod train;

use thiserror::Error;

pub use checkpoint::Checkpoint;
pub use eval::ConfusionMatrix;
pub use model::{forward, forward_batch, ClassProbs, DropoutMask, Mode};
pub use params::{Arch, ModelParams};
pub use train::{train, Hyperparams, TrainHistory};

pub const DEFAULT_DROPOUT: f64 = 0.3;

#[derive(Debug, Error, PartialEq)]
pub enum IntentError {
    #[error("{layer}: expected shape {expected:?}, found {found:?}")]
    Shape {
        layer: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("invalid architecture: {0}")]
    Arch(String),
    #[error("invalid hyperparameters: {0}")]
    Hyper(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("training set has {have} samples, fewer than one batch of {need}")]
    TrainingSetTooSmall { have: usize, need: usize },
    #[error("empty validation set")]
    EmptyValidationSet,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Dsp(#[from] exo_core::dsp::DspError),
}
