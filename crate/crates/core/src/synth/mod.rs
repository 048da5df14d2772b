//! Labeled synthetic surface EMG.
//!
//! A trace is `gain · envelope(t) · texture(t) + baseline(t) + powerline(t)`
//! where the texture is a unit-RMS train of motor-unit action potentials
//! (Poisson firing with Gaussian amplitudes, shaped to 20–150 Hz), the
//! baseline is white Gaussian noise and the power-line term is a 60 Hz
//! sinusoid. Every random draw comes from a ChaCha stream keyed by the seed
//! and the channel, so equal inputs give bit-identical traces.

pub mod dataset;
pub mod store;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::butter::{Band, Sos};
use crate::muscle::{Class, Muscle};
use crate::trace::{rms, EmgTrace};

pub use dataset::{DatasetSpec, LabeledDataset, Repetition, Split};

/// Lowest accepted sampling rate: twice the 250 Hz band-pass cutoff.
pub const MIN_FS: f64 = 500.0;
pub const DEFAULT_FS: f64 = 500.0;
pub const DEFAULT_RAMP_MS: f64 = 100.0;
/// EMG amplitude (RMS, mV) of a fully activated channel.
pub const FULL_SCALE_MV: f64 = 1.0;
pub const POWERLINE_HZ: f64 = 60.0;
const TEXTURE_BAND: (f64, f64) = (20.0, 150.0);
/// Aggregate firing rate of the motor units under one electrode.
const MUAP_RATE_HZ: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("sampling rate {0} Hz is below the 500 Hz minimum")]
    SamplingRateTooLow(f64),
    #[error("duration must be positive")]
    NonPositiveDuration,
    #[error("activation events overlap or are out of order at event {0}")]
    OverlappingEvents(usize),
    #[error("invalid activation event {0}: {1}")]
    InvalidEvent(usize, String),
    #[error("invalid noise configuration: {0}")]
    InvalidNoise(String),
    #[error("dataset spec must name at least one motion and one repetition")]
    EmptyDataset,
    #[error("dataset store: {0}")]
    Store(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationEvent {
    pub start_ms: f64,
    pub end_ms: f64,
    /// Fraction of full-scale activation in [0, 1].
    pub intensity: f64,
}

/// Time-ordered, non-overlapping activation bursts with a linear onset ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationProfile {
    pub events: Vec<ActivationEvent>,
    pub ramp_ms: f64,
}

impl Default for ActivationProfile {
    fn default() -> Self {
        Self::rest()
    }
}

impl ActivationProfile {
    pub fn rest() -> Self {
        Self {
            events: Vec::new(),
            ramp_ms: DEFAULT_RAMP_MS,
        }
    }

    pub fn single(start_ms: f64, end_ms: f64, intensity: f64) -> Self {
        Self {
            events: vec![ActivationEvent {
                start_ms,
                end_ms,
                intensity,
            }],
            ramp_ms: DEFAULT_RAMP_MS,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.ramp_ms >= 0.0) {
            return Err(SynthError::InvalidEvent(0, "ramp must be non-negative".into()));
        }
        for (i, e) in self.events.iter().enumerate() {
            if !(e.start_ms < e.end_ms) {
                return Err(SynthError::InvalidEvent(i, "start must precede end".into()));
            }
            if !(0.0..=1.0).contains(&e.intensity) {
                return Err(SynthError::InvalidEvent(i, "intensity outside [0, 1]".into()));
            }
            if i > 0 && e.start_ms < self.events[i - 1].end_ms {
                return Err(SynthError::OverlappingEvents(i));
            }
        }
        Ok(())
    }

    /// Activation level at time `t_ms`.
    pub fn intensity_at(&self, t_ms: f64) -> f64 {
        self.events
            .iter()
            .find(|e| t_ms >= e.start_ms && t_ms < e.end_ms)
            .map(|e| {
                let ramp = if self.ramp_ms > 0.0 {
                    ((t_ms - e.start_ms) / self.ramp_ms).min(1.0)
                } else {
                    1.0
                };
                e.intensity * ramp
            })
            .unwrap_or(0.0)
    }

    /// Class of the window `[ws, we]` (both ends inclusive): `onset` if an
    /// event starts inside it, `activation` if it lies within an event that
    /// started earlier, `rest` otherwise.
    pub fn class_of_window(&self, ws: f64, we: f64) -> Class {
        if self.events.iter().any(|e| e.start_ms >= ws && e.start_ms <= we) {
            Class::Onset
        } else if self
            .events
            .iter()
            .any(|e| e.start_ms < ws && e.end_ms >= we)
        {
            Class::Activation
        } else {
            Class::Rest
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub baseline_sigma_mv: f64,
    pub powerline_amp_mv: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            baseline_sigma_mv: 0.02,
            powerline_amp_mv: 0.05,
            seed: 42,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.baseline_sigma_mv >= 0.0) || !(self.powerline_amp_mv >= 0.0) {
            return Err(SynthError::InvalidNoise("amplitudes must be non-negative".into()));
        }
        Ok(())
    }
}

fn channel_seed(seed: u64, muscle: Muscle) -> u64 {
    seed ^ (muscle.index() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Synthesizes one channel whose envelope follows `profile`.
pub fn synth_trace(
    profile: &ActivationProfile,
    muscle: Muscle,
    duration_ms: f64,
    fs: f64,
    noise: &NoiseConfig,
) -> Result<EmgTrace, SynthError> {
    if !(duration_ms > 0.0) {
        return Err(SynthError::NonPositiveDuration);
    }
    profile.validate()?;
    let n = (duration_ms * fs / 1000.0).round() as usize;
    let envelope: Vec<f64> = (0..n)
        .map(|i| profile.intensity_at(i as f64 * 1000.0 / fs))
        .collect();
    synth_from_envelope(&envelope, muscle, fs, noise, FULL_SCALE_MV)
}

/// Synthesizes one channel from an explicit per-sample activation envelope
/// (values in [0, 1]) with `gain_mv` RMS at full activation.
pub fn synth_from_envelope(
    envelope: &[f64],
    muscle: Muscle,
    fs: f64,
    noise: &NoiseConfig,
    gain_mv: f64,
) -> Result<EmgTrace, SynthError> {
    if !(fs >= MIN_FS) {
        return Err(SynthError::SamplingRateTooLow(fs));
    }
    noise.validate()?;
    let n = envelope.len();
    let mut rng = ChaCha8Rng::seed_from_u64(channel_seed(noise.seed, muscle));
    let p_fire = MUAP_RATE_HZ / fs;
    let white: Vec<f64> = (0..n)
        .map(|_| {
            let fires = rng.random::<f64>() < p_fire;
            let a: f64 = StandardNormal.sample(&mut rng);
            if fires {
                a
            } else {
                0.0
            }
        })
        .collect();
    let baseline: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();

    let shaper = Sos::butterworth(2, Band::Bandpass(TEXTURE_BAND.0, TEXTURE_BAND.1), fs);
    let mut texture = shaper.filter(&white);
    let norm = rms(&texture);
    if norm > 0.0 {
        texture.iter_mut().for_each(|v| *v /= norm);
    }

    let w = 2.0 * std::f64::consts::PI * POWERLINE_HZ / fs;
    let samples = (0..n)
        .map(|i| {
            gain_mv * envelope[i] * texture[i]
                + noise.baseline_sigma_mv * baseline[i]
                + noise.powerline_amp_mv * (w * i as f64).sin()
        })
        .collect();
    Ok(EmgTrace::new(muscle, fs, samples, 0.0))
}

/// Labels every `window_ms` window taken every `stride_ms`.
pub fn label_epochs(
    trace: &EmgTrace,
    profile: &ActivationProfile,
    window_ms: f64,
    stride_ms: f64,
) -> Vec<Class> {
    let Ok(plan) = crate::dsp::WindowPlan::new(trace.fs, window_ms, stride_ms) else {
        return Vec::new();
    };
    plan.starts(trace.len())
        .map(|s| {
            let ws = trace.time_ms(s);
            profile.class_of_window(ws, ws + window_ms)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(seed: u64) -> NoiseConfig {
        NoiseConfig {
            baseline_sigma_mv: 0.0,
            powerline_amp_mv: 0.0,
            seed,
        }
    }

    #[test]
    fn no_sources_gives_zero_trace() {
        let t = synth_trace(&ActivationProfile::rest(), Muscle::Biceps, 2000.0, 500.0, &quiet(1)).unwrap();
        assert_eq!(t.len(), 1000);
        assert!(t.samples.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn burst_dominates_rest() {
        let p = ActivationProfile::single(1000.0, 2000.0, 1.0);
        let noise = NoiseConfig {
            baseline_sigma_mv: 0.01,
            powerline_amp_mv: 0.0,
            seed: 7,
        };
        let t = synth_trace(&p, Muscle::Triceps, 3000.0, 500.0, &noise).unwrap();
        let inside = rms(&t.samples[500..1000]);
        let outside = rms(&[&t.samples[..500], &t.samples[1000..]].concat());
        assert!(inside >= 10.0 * outside, "inside {inside} outside {outside}");
    }

    #[test]
    fn deterministic_per_seed_and_channel() {
        let p = ActivationProfile::single(200.0, 900.0, 0.8);
        let n = NoiseConfig::default();
        let a = synth_trace(&p, Muscle::Biceps, 1000.0, 500.0, &n).unwrap();
        let b = synth_trace(&p, Muscle::Biceps, 1000.0, 500.0, &n).unwrap();
        assert_eq!(a, b);
        let c = synth_trace(&p, Muscle::Triceps, 1000.0, 500.0, &n).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ActivationProfile::rest();
        let n = NoiseConfig::default();
        assert_eq!(
            synth_trace(&p, Muscle::Biceps, 1000.0, 400.0, &n),
            Err(SynthError::SamplingRateTooLow(400.0))
        );
        assert_eq!(
            synth_trace(&p, Muscle::Biceps, 0.0, 500.0, &n),
            Err(SynthError::NonPositiveDuration)
        );
        let overlapping = ActivationProfile {
            events: vec![
                ActivationEvent { start_ms: 0.0, end_ms: 500.0, intensity: 0.5 },
                ActivationEvent { start_ms: 400.0, end_ms: 800.0, intensity: 0.5 },
            ],
            ramp_ms: 100.0,
        };
        assert_eq!(
            synth_trace(&overlapping, Muscle::Biceps, 1000.0, 500.0, &n),
            Err(SynthError::OverlappingEvents(1))
        );
    }

    #[test]
    fn onset_ramp_is_linear() {
        let p = ActivationProfile::single(1000.0, 3000.0, 0.8);
        assert_eq!(p.intensity_at(999.0), 0.0);
        assert!((p.intensity_at(1050.0) - 0.4).abs() < 1e-12);
        assert_eq!(p.intensity_at(1500.0), 0.8);
        assert_eq!(p.intensity_at(3000.0), 0.0);
    }

    #[test]
    fn labels_without_events_are_rest() {
        let t = EmgTrace::new(Muscle::Biceps, 500.0, vec![0.0; 2000], 0.0);
        let labels = label_epochs(&t, &ActivationProfile::rest(), 1000.0, 250.0);
        assert_eq!(labels.len(), 13);
        assert!(labels.iter().all(|c| *c == Class::Rest));
    }

    #[test]
    fn onset_windows_are_those_containing_the_start() {
        // Windows start every 250 ms; those with start in [1000, 2000]
        // contain t = 2000 (closed interval).
        let t = EmgTrace::new(Muscle::Biceps, 500.0, vec![0.0; 3000], 0.0);
        let p = ActivationProfile::single(2000.0, 4500.0, 1.0);
        let labels = label_epochs(&t, &p, 1000.0, 250.0);
        let expected: Vec<Class> = (0..labels.len())
            .map(|k| {
                let ws = k as f64 * 250.0;
                if (1000.0..=2000.0).contains(&ws) {
                    Class::Onset
                } else if ws > 2000.0 && ws + 1000.0 <= 4500.0 {
                    Class::Activation
                } else {
                    Class::Rest
                }
            })
            .collect();
        assert_eq!(labels, expected);
        assert_eq!(labels.iter().filter(|c| **c == Class::Onset).count(), 5);
        // ws = 2250 .. 3500 lie fully inside the burst.
        assert_eq!(labels[9], Class::Activation);
        assert_eq!(labels.len(), 21);
    }

    #[test]
    fn short_trace_has_no_labels() {
        let t = EmgTrace::new(Muscle::Biceps, 500.0, vec![0.0; 100], 0.0);
        assert!(label_epochs(&t, &ActivationProfile::rest(), 1000.0, 250.0).is_empty());
    }
}
