//! End-to-end: epoch the dataset, train one network per channel, evaluate
//! each on its held-out repetitions and pool the matrices per muscle pair.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use exo_core::synth::LabeledDataset;
use exo_core::Muscle;

use crate::checkpoint::{Checkpoint, MuscleModel};
use crate::data::{self, DataConfig};
use crate::eval::{self, MuscleEval, PairEval};
use crate::params::Arch;
use crate::train::{self, EpochRecord, Hyperparams, TrainHistory};
use crate::IntentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleRun {
    pub muscle: Muscle,
    pub train_samples: usize,
    pub val_samples: usize,
    pub history: TrainHistory,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub runs: Vec<MuscleRun>,
    pub per_muscle: Vec<MuscleEval>,
    pub per_pair: Vec<PairEval>,
    pub seconds: f64,
}

/// Evaluates every model in the checkpoint on the test split of `ds`.
pub fn evaluate_checkpoint(ck: &Checkpoint, ds: &LabeledDataset) -> Result<(Vec<MuscleEval>, Vec<PairEval>), IntentError> {
    let mut per_muscle = Vec::new();
    for m in &ck.models {
        let d = data::muscle_data(ds, m.muscle, &ck.data)?;
        let cm = eval::evaluate(&m.params, &d.test)?;
        per_muscle.push(MuscleEval {
            muscle: m.muscle,
            accuracy: cm.accuracy(),
            confusion: cm,
        });
    }
    let pairs = eval::pair_view(&per_muscle);
    Ok((per_muscle, pairs))
}

pub fn train_all(
    ds: &LabeledDataset,
    muscles: &[Muscle],
    hyper: &Hyperparams,
    cfg: &DataConfig,
    mut progress: impl FnMut(Muscle, &EpochRecord),
) -> Result<(Checkpoint, TrainReport), IntentError> {
    let start = Instant::now();
    let mut models = Vec::new();
    let mut runs = Vec::new();
    let mut per_muscle = Vec::new();
    for &muscle in muscles {
        let t0 = Instant::now();
        let d = data::muscle_data(ds, muscle, cfg)?;
        let arch = Arch {
            input_len: d.train.first().map_or(Arch::default().input_len, |s| s.values.len()),
            ..Arch::default()
        };
        let h = Hyperparams {
            seed: hyper.seed ^ (muscle.index() as u64 + 1),
            ..*hyper
        };
        let (params, history) = train::train_with_progress(&d.train, &d.val, arch, &h, |r| progress(muscle, r))?;
        let cm = eval::evaluate(&params, &d.test)?;
        per_muscle.push(MuscleEval {
            muscle,
            accuracy: cm.accuracy(),
            confusion: cm,
        });
        runs.push(MuscleRun {
            muscle,
            train_samples: d.train.len(),
            val_samples: d.val.len(),
            history,
            seconds: t0.elapsed().as_secs_f64(),
        });
        models.push(MuscleModel { muscle, params });
    }
    let per_pair = eval::pair_view(&per_muscle);
    Ok((
        Checkpoint::new(*hyper, *cfg, models),
        TrainReport {
            runs,
            per_muscle,
            per_pair,
            seconds: start.elapsed().as_secs_f64(),
        },
    ))
}
