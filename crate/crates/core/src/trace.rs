use serde::{Deserialize, Serialize};

use crate::muscle::Muscle;

/// Uniformly sampled voltage series (millivolts) for one muscle channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgTrace {
    pub muscle: Muscle,
    /// Sampling rate in Hz.
    pub fs: f64,
    pub samples: Vec<f64>,
    /// Start time of the first sample in ms.
    pub t0_ms: f64,
}

impl EmgTrace {
    pub fn new(muscle: Muscle, fs: f64, samples: Vec<f64>, t0_ms: f64) -> Self {
        Self {
            muscle,
            fs,
            samples,
            t0_ms,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_ms(&self) -> f64 {
        self.samples.len() as f64 * 1000.0 / self.fs
    }

    /// Timestamp of sample `i` in ms.
    pub fn time_ms(&self, i: usize) -> f64 {
        self.t0_ms + i as f64 * 1000.0 / self.fs
    }

    /// Same channel metadata with new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            muscle: self.muscle,
            fs: self.fs,
            samples,
            t0_ms: self.t0_ms,
        }
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }
}

pub(crate) fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}
