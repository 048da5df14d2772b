//! Intention-to-assistance latency from a recorded timeline.
//!
//! Each scripted onset is paired with the first valve command caused by an
//! epoch whose window contains that onset. The latency is the time from the
//! onset to the valve command plus the PAM actuation delay, and it splits
//! exactly into window alignment, uplink, inference, downlink, valve
//! response and PAM actuation.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use exo_core::plant::PlantConfig;
use exo_core::{Motion, Muscle};

use crate::classifier::ClassifierSource;
use crate::engine::run_scenario;
use crate::latency::{LatencyConfig, ACCEPT_BAND_MS, TARGET_BAND_MS};
use crate::scenario::Scenario;
use crate::timeline::{EventKind, Timeline};
use crate::{us_to_ms, RtError};

/// One onset and the hop-by-hop path to its assistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub muscle: Muscle,
    pub onset_ms: f64,
    pub epoch: u64,
    pub alignment_ms: f64,
    pub sensor_to_cloud_ms: f64,
    pub inference_ms: f64,
    pub cloud_to_driver_ms: f64,
    pub valve_ms: f64,
    pub pam_ms: f64,
    pub total_ms: f64,
}

impl LatencySample {
    pub fn hops(&self) -> [f64; 6] {
        [
            self.alignment_ms,
            self.sensor_to_cloud_ms,
            self.inference_ms,
            self.cloud_to_driver_ms,
            self.valve_ms,
            self.pam_ms,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        Self {
            n,
            mean,
            std: var.sqrt(),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Mean of each hop, ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub alignment_ms: f64,
    pub sensor_to_cloud_ms: f64,
    pub inference_ms: f64,
    pub cloud_to_driver_ms: f64,
    pub valve_ms: f64,
    pub pam_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub samples: Vec<LatencySample>,
    pub total: Stats,
    pub breakdown: Breakdown,
    /// Onsets with no attributable valve command.
    pub unmatched: usize,
    pub target_band_ms: (f64, f64),
    pub accept_band_ms: (f64, f64),
    pub mean_in_target: bool,
    pub mean_in_accept: bool,
}

impl LatencyReport {
    pub fn from_samples(samples: Vec<LatencySample>, unmatched: usize) -> Result<Self, RtError> {
        if samples.is_empty() {
            return Err(RtError::NoMatchedPairs);
        }
        let col = |f: fn(&LatencySample) -> f64| Stats::of(&samples.iter().map(f).collect::<Vec<_>>()).mean;
        let total = Stats::of(&samples.iter().map(|s| s.total_ms).collect::<Vec<_>>());
        let breakdown = Breakdown {
            alignment_ms: col(|s| s.alignment_ms),
            sensor_to_cloud_ms: col(|s| s.sensor_to_cloud_ms),
            inference_ms: col(|s| s.inference_ms),
            cloud_to_driver_ms: col(|s| s.cloud_to_driver_ms),
            valve_ms: col(|s| s.valve_ms),
            pam_ms: col(|s| s.pam_ms),
        };
        let within = |b: (f64, f64)| total.mean >= b.0 && total.mean <= b.1;
        Ok(Self {
            mean_in_target: within(TARGET_BAND_MS),
            mean_in_accept: within(ACCEPT_BAND_MS),
            target_band_ms: TARGET_BAND_MS,
            accept_band_ms: ACCEPT_BAND_MS,
            samples,
            total,
            breakdown,
            unmatched,
        })
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let b = &self.breakdown;
        let flag = if self.mean_in_target {
            "within target band"
        } else if self.mean_in_accept {
            "WARN outside target band, within acceptance band"
        } else {
            "FAIL outside acceptance band"
        };
        format!(
            "latency over {} onsets ({} unmatched): mean {:.1} ms, std {:.1}, min {:.1}, max {:.1}; {flag} [{:.0}, {:.0}] ms\n\
             breakdown: alignment {:.1} + uplink {:.1} + inference {:.1} + downlink {:.1} + valve {:.1} + pam {:.1}",
            self.total.n,
            self.unmatched,
            self.total.mean,
            self.total.std,
            self.total.min,
            self.total.max,
            self.target_band_ms.0,
            self.target_band_ms.1,
            b.alignment_ms,
            b.sensor_to_cloud_ms,
            b.inference_ms,
            b.cloud_to_driver_ms,
            b.valve_ms,
            b.pam_ms,
        )
    }
}

struct EpochInfo {
    window: (f64, f64),
    ready_us: u64,
    arrived_us: Option<u64>,
    done_us: Option<u64>,
}

/// Pairs every onset in `timeline` with its assistance.
pub fn measure_latency(timeline: &Timeline) -> Result<LatencyReport, RtError> {
    let (samples, unmatched) = collect_samples(timeline);
    LatencyReport::from_samples(samples, unmatched)
}

fn collect_samples(timeline: &Timeline) -> (Vec<LatencySample>, usize) {
    let mut epochs: HashMap<u64, EpochInfo> = HashMap::new();
    for ev in &timeline.events {
        match &ev.kind {
            EventKind::EpochReady {
                epoch,
                window_start_ms,
                window_end_ms,
            } => {
                epochs.insert(
                    *epoch,
                    EpochInfo {
                        window: (*window_start_ms, *window_end_ms),
                        ready_us: ev.t_us,
                        arrived_us: None,
                        done_us: None,
                    },
                );
            }
            EventKind::ClassResult { epoch, arrived_us, .. } => {
                if let Some(e) = epochs.get_mut(epoch) {
                    e.arrived_us = Some(*arrived_us);
                    e.done_us = Some(ev.t_us);
                }
            }
            _ => {}
        }
    }
    let pam_ms = timeline.latency.pam_actuation_ms;
    let mut samples = Vec::new();
    let mut unmatched = 0;
    for onset in &timeline.events {
        let EventKind::IntentOnset { muscle } = onset.kind else {
            continue;
        };
        let onset_ms = us_to_ms(onset.t_us);
        let hit = timeline.events.iter().find_map(|ev| match ev.kind {
            EventKind::ValveCmd {
                epoch: Some(k),
                received_us,
                ..
            } if ev.t_us >= onset.t_us => {
                let info = epochs.get(&k)?;
                let contains = info.window.0 <= onset_ms && onset_ms <= info.window.1;
                let (arrived, done) = (info.arrived_us?, info.done_us?);
                contains.then_some((ev.t_us, k, info.ready_us, arrived, done, received_us))
            }
            _ => None,
        });
        match hit {
            Some((valve_us, epoch, ready, arrived, done, received)) => {
                let alignment_ms = us_to_ms(ready) - onset_ms;
                let sensor_to_cloud_ms = us_to_ms(arrived - ready);
                let inference_ms = us_to_ms(done - arrived);
                let cloud_to_driver_ms = us_to_ms(received - done);
                let valve_ms = us_to_ms(valve_us - received);
                samples.push(LatencySample {
                    muscle,
                    onset_ms,
                    epoch,
                    alignment_ms,
                    sensor_to_cloud_ms,
                    inference_ms,
                    cloud_to_driver_ms,
                    valve_ms,
                    pam_ms,
                    total_ms: us_to_ms(valve_us) + pam_ms - onset_ms,
                })
            }
            None => unmatched += 1,
        }
    }
    (samples, unmatched)
}

/// Repeated single-motion trials with randomized onsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialConfig {
    pub trials: usize,
    pub latency: LatencyConfig,
    pub seed: u64,
    /// Onsets are drawn uniformly from this range, ms.
    pub onset_range_ms: (f64, f64),
    pub burst_ms: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            latency: LatencyConfig::default(),
            seed: 42,
            onset_range_ms: (1500.0, 2500.0),
            burst_ms: 1500.0,
        }
    }
}

/// Assistance that starts on an agonist onset.
const FLEXIONS: [Motion; 2] = [Motion::ElbowFlexion, Motion::ShoulderFlexion];

/// Runs `trials` flexion scenarios, alternating joints, and pools their
/// latency samples.
pub fn latency_trials(cfg: &TrialConfig, source: &ClassifierSource, plant: &PlantConfig) -> Result<LatencyReport, RtError> {
    cfg.latency.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.trials);
    let mut unmatched = 0;
    for i in 0..cfg.trials {
        let motion = FLEXIONS[i % FLEXIONS.len()];
        let (lo, hi) = cfg.onset_range_ms;
        let onset = if hi > lo { rng.random_range(lo..hi) } else { lo };
        // Integer-millisecond onsets keep event times exact on the clock.
        let onset = onset.round();
        let mut s = Scenario::motion(motion, onset, cfg.burst_ms, onset + cfg.burst_ms + 1500.0);
        s.latency = cfg.latency;
        s.seed = rng.random();
        s.record_emg = false;
        let t = run_scenario(&s, source, plant)?;
        let (got, miss) = collect_samples(&t);
        samples.extend(got);
        unmatched += miss;
    }
    LatencyReport::from_samples(samples, unmatched)
}
