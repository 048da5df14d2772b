use serde::{Deserialize, Serialize};

use exo_core::dsp::{FilterSpec, DEFAULT_STRIDE_MS, DEFAULT_WINDOW_MS};
use exo_core::synth::{LabeledDataset, Repetition};
use exo_core::{Class, Motion, Muscle};

use crate::IntentError;

/// One labeled, scaled epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub values: Vec<f64>,
    pub label: Class,
    pub motion: Motion,
    pub rep: usize,
}

/// Epoching and subsampling of the synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub filter: FilterSpec,
    pub window_ms: f64,
    pub stride_ms: f64,
    /// Keep one of every `k` training/validation repetitions in which the
    /// channel is not the agonist (those are all-rest). Test sets are never
    /// subsampled.
    pub non_agonist_keep_every: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            window_ms: DEFAULT_WINDOW_MS,
            stride_ms: DEFAULT_STRIDE_MS,
            non_agonist_keep_every: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MuscleData {
    pub muscle: Muscle,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

pub fn rep_samples(rep: &Repetition, muscle: Muscle, cfg: &DataConfig) -> Result<Vec<Sample>, IntentError> {
    Ok(rep
        .epochs(muscle, &cfg.filter, cfg.window_ms, cfg.stride_ms)?
        .into_iter()
        .map(|e| Sample {
            label: e.label.unwrap_or(Class::Rest),
            values: e.values,
            motion: rep.motion,
            rep: rep.index,
        })
        .collect())
}

fn collect(reps: &[&Repetition], muscle: Muscle, cfg: &DataConfig, subsample: bool) -> Result<Vec<Sample>, IntentError> {
    let keep = cfg.non_agonist_keep_every.max(1);
    let mut out = Vec::new();
    let mut other = 0usize;
    for rep in reps {
        if subsample && rep.motion.agonist() != muscle {
            other += 1;
            if (other - 1) % keep != 0 {
                continue;
            }
        }
        out.extend(rep_samples(rep, muscle, cfg)?);
    }
    Ok(out)
}

/// Per-channel train/validation/test sets from the 60/20/20 repetition split.
pub fn muscle_data(ds: &LabeledDataset, muscle: Muscle, cfg: &DataConfig) -> Result<MuscleData, IntentError> {
    let split = ds.split();
    Ok(MuscleData {
        muscle,
        train: collect(&split.train, muscle, cfg, true)?,
        val: collect(&split.val, muscle, cfg, true)?,
        test: collect(&split.test, muscle, cfg, false)?,
    })
}

pub fn class_counts(samples: &[Sample]) -> [usize; 3] {
    let mut c = [0; 3];
    for s in samples {
        c[s.label.index()] += 1;
    }
    c
}
