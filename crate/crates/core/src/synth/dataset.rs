use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{synth_trace, ActivationEvent, ActivationProfile, NoiseConfig, SynthError};
use crate::dsp::{self, DspError, Epoch, FilterSpec};
use crate::muscle::{Motion, Muscle};
use crate::trace::EmgTrace;

/// Recipe for a labeled multi-motion dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub motions: Vec<Motion>,
    pub repetitions: usize,
    pub duration_ms: f64,
    pub fs: f64,
    /// Range of the agonist burst start within a repetition.
    pub onset_ms: (f64, f64),
    /// Range of the burst length.
    pub burst_ms: (f64, f64),
    pub intensity: (f64, f64),
    pub ramp_ms: f64,
    pub baseline_sigma_mv: f64,
    pub powerline_amp_mv: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            motions: Motion::ALL.to_vec(),
            repetitions: 50,
            duration_ms: 4000.0,
            fs: super::DEFAULT_FS,
            onset_ms: (800.0, 1400.0),
            burst_ms: (1800.0, 2400.0),
            intensity: (0.6, 1.0),
            ramp_ms: super::DEFAULT_RAMP_MS,
            baseline_sigma_mv: 0.02,
            powerline_amp_mv: 0.05,
            seed: 42,
        }
    }
}

/// One recorded trial: all four channels, with the agonist bursting once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub motion: Motion,
    pub index: usize,
    pub seed: u64,
    /// Activation profile per channel, in `Muscle::ALL` order.
    pub profiles: Vec<ActivationProfile>,
    /// Traces in `Muscle::ALL` order.
    pub traces: Vec<EmgTrace>,
}

impl Repetition {
    pub fn trace(&self, muscle: Muscle) -> &EmgTrace {
        &self.traces[muscle.index()]
    }

    pub fn profile(&self, muscle: Muscle) -> &ActivationProfile {
        &self.profiles[muscle.index()]
    }

    /// Preprocessed, labeled epochs of one channel.
    pub fn epochs(
        &self,
        muscle: Muscle,
        filter: &FilterSpec,
        window_ms: f64,
        stride_ms: f64,
    ) -> Result<Vec<Epoch>, DspError> {
        let trace = self.trace(muscle);
        let mut epochs = dsp::preprocess(trace, filter, window_ms, stride_ms)?;
        let labels = super::label_epochs(trace, self.profile(muscle), window_ms, stride_ms);
        for (e, l) in epochs.iter_mut().zip(labels) {
            e.label = Some(l);
        }
        Ok(epochs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub spec: DatasetSpec,
    pub repetitions: Vec<Repetition>,
}

/// Repetition-level train/validation/test partition.
#[derive(Debug, Clone)]
pub struct Split<'a> {
    pub train: Vec<&'a Repetition>,
    pub val: Vec<&'a Repetition>,
    pub test: Vec<&'a Repetition>,
}

/// Sizes of a 60/20/20 split of `n` repetitions.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (0.6 * n as f64).round() as usize;
    let val = ((0.2 * n as f64).round() as usize).min(n - train);
    (train, val, n - train - val)
}

impl LabeledDataset {
    pub fn generate(spec: &DatasetSpec) -> Result<Self, SynthError> {
        make_dataset(spec)
    }

    pub fn len(&self) -> usize {
        self.repetitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.repetitions.is_empty()
    }

    /// 60/20/20 by repetition index within each motion.
    pub fn split(&self) -> Split<'_> {
        let mut split = Split {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for motion in &self.spec.motions {
            let reps: Vec<&Repetition> = self
                .repetitions
                .iter()
                .filter(|r| r.motion == *motion)
                .collect();
            let (tr, va, _) = split_sizes(reps.len());
            for (i, r) in reps.into_iter().enumerate() {
                if i < tr {
                    split.train.push(r);
                } else if i < tr + va {
                    split.val.push(r);
                } else {
                    split.test.push(r);
                }
            }
        }
        split
    }
}

/// Generates `repetitions` trials of each motion.
pub fn make_dataset(spec: &DatasetSpec) -> Result<LabeledDataset, SynthError> {
    if spec.motions.is_empty() || spec.repetitions == 0 {
        return Err(SynthError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut repetitions = Vec::with_capacity(spec.motions.len() * spec.repetitions);
    for &motion in &spec.motions {
        for index in 0..spec.repetitions {
            let start = rng.random_range(spec.onset_ms.0..=spec.onset_ms.1);
            let len = rng.random_range(spec.burst_ms.0..=spec.burst_ms.1);
            let intensity = rng.random_range(spec.intensity.0..=spec.intensity.1);
            let seed: u64 = rng.random();
            let noise = NoiseConfig {
                baseline_sigma_mv: spec.baseline_sigma_mv,
                powerline_amp_mv: spec.powerline_amp_mv,
                seed,
            };
            let mut profiles = Vec::with_capacity(4);
            let mut traces = Vec::with_capacity(4);
            for muscle in Muscle::ALL {
                let profile = if muscle == motion.agonist() {
                    ActivationProfile {
                        events: vec![ActivationEvent {
                            start_ms: start,
                            end_ms: (start + len).min(spec.duration_ms),
                            intensity,
                        }],
                        ramp_ms: spec.ramp_ms,
                    }
                } else {
                    ActivationProfile {
                        events: Vec::new(),
                        ramp_ms: spec.ramp_ms,
                    }
                };
                traces.push(synth_trace(&profile, muscle, spec.duration_ms, spec.fs, &noise)?);
                profiles.push(profile);
            }
            repetitions.push(Repetition {
                motion,
                index,
                seed,
                profiles,
                traces,
            });
        }
    }
    Ok(LabeledDataset {
        spec: spec.clone(),
        repetitions,
    })
}
