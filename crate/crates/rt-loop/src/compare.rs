//! Assisted versus unassisted muscle activation for a flexion repetition.
//!
//! Each repetition raises the joint from 0° to the hold angle along a
//! minimum-jerk path and holds it. The assisted run goes through the full
//! loop so the PAM pressure rises only once the onset has been classified
//! and the valves have opened; the unassisted run carries the whole load.
//! Residual effort drives the synthesized agonist EMG, and both runs share
//! the same noise seed, so any difference in %MVC comes from the assist.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use exo_core::dsp::{self, FilterSpec};
use exo_core::pam::PamId;
use exo_core::plant::{self, JointState, PlantConfig};
use exo_core::synth::{self, NoiseConfig, DEFAULT_FS, FULL_SCALE_MV};
use exo_core::{Motion, Muscle};

use crate::classifier::ClassifierSource;
use crate::engine::{joint_angle, Engine};
use crate::latency::LatencyConfig;
use crate::measure::Stats;
use crate::scenario::Scenario;
use crate::{ms_to_us, RtError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub reps: usize,
    pub load_kg: f64,
    pub seed: u64,
    /// Onsets are drawn uniformly from this range so the window alignment
    /// varies between repetitions, ms.
    pub onset_range_ms: (f64, f64),
    /// Analysis span from the onset, ms.
    pub measure_ms: f64,
    pub fs: f64,
    pub baseline_sigma_mv: f64,
    pub powerline_amp_mv: f64,
    pub latency: LatencyConfig,
    pub plant: PlantConfig,
    /// Keep every PAM vented in the assisted run.
    pub zero_assist: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            reps: 5,
            load_kg: 0.0,
            seed: 42,
            onset_range_ms: (1500.0, 1750.0),
            measure_ms: 3000.0,
            fs: DEFAULT_FS,
            baseline_sigma_mv: 0.02,
            powerline_amp_mv: 0.05,
            latency: LatencyConfig::default(),
            plant: PlantConfig::default(),
            zero_assist: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub onset_ms: f64,
    pub unassisted_pct_mvc: f64,
    pub assisted_pct_mvc: f64,
    /// Peak delivered assist, Nm.
    pub peak_assist_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub motion: Motion,
    pub load_kg: f64,
    pub seed: u64,
    pub reps: Vec<RepResult>,
    pub unassisted: Stats,
    pub assisted: Stats,
    /// Unassisted over assisted mean %MVC.
    pub ratio: f64,
}

fn assisted_pams(joint: exo_core::Joint) -> Vec<PamId> {
    PamId::ALL.into_iter().filter(|p| p.joint() == joint).collect()
}

/// Mean conditioned amplitude of EMG synthesized from `envelope`.
fn mean_amplitude(envelope: &[f64], muscle: Muscle, fs: f64, noise: &NoiseConfig) -> Result<f64, RtError> {
    let raw = synth::synth_from_envelope(envelope, muscle, fs, noise, FULL_SCALE_MV)?;
    let c = dsp::condition(&raw, &FilterSpec::default())?;
    Ok(c.samples.iter().sum::<f64>() / c.samples.len() as f64)
}

fn pct_mvc(amplitude: f64, mvc: f64) -> f64 {
    if mvc <= 0.0 {
        return 0.0;
    }
    (amplitude / mvc * 100.0).clamp(0.0, 100.0)
}

/// Residual-effort envelopes (unassisted, assisted) for one repetition,
/// with the peak delivered assist.
fn effort_envelopes(
    motion: Motion,
    onset_ms: f64,
    seed: u64,
    cfg: &CompareConfig,
) -> Result<(Vec<f64>, Vec<f64>, f64), RtError> {
    let joint = motion.joint();
    let mut s = Scenario::motion(motion, onset_ms, cfg.measure_ms + 1000.0, onset_ms + cfg.measure_ms);
    s.latency = cfg.latency;
    s.load_kg = cfg.load_kg;
    s.seed = seed;
    s.fs = cfg.fs;
    s.baseline_sigma_mv = cfg.baseline_sigma_mv;
    s.powerline_amp_mv = cfg.powerline_amp_mv;
    s.record_emg = false;
    let profiles = s.profiles();
    let mut engine = Engine::new(s, &ClassifierSource::Oracle, cfg.plant.clone())?;
    let pams = assisted_pams(joint);
    let tau = cfg.plant.muscle_max_torque_nm.get(joint);
    let n = (cfg.measure_ms * cfg.fs / 1000.0).round() as usize;
    let mut unassisted = Vec::with_capacity(n);
    let mut assisted = Vec::with_capacity(n);
    let mut peak = 0.0f64;
    for i in 0..n {
        let t_ms = onset_ms + i as f64 * 1000.0 / cfg.fs;
        engine.run_until(ms_to_us(t_ms))?;
        let p = engine.pressures();
        let psi: Vec<f64> = if cfg.zero_assist {
            vec![0.0; pams.len()]
        } else {
            pams.iter().map(|pam| p[pam.index()]).collect()
        };
        let angle = joint_angle(&profiles, joint, t_ms);
        let req = plant::required_torque(&JointState::at(joint, angle, cfg.load_kg), &cfg.plant)?;
        let assist = plant::delivered_assist_nm(joint, req, &psi, &cfg.plant);
        peak = peak.max(assist);
        unassisted.push(plant::muscle_effort(req, 0.0, tau)?);
        assisted.push(plant::muscle_effort(req, assist, tau)?);
    }
    Ok((unassisted, assisted, peak))
}

/// Runs `cfg.reps` repetitions of a flexion and compares %MVC.
pub fn run_comparison(motion: Motion, cfg: &CompareConfig) -> Result<ComparisonReport, RtError> {
    if !matches!(motion, Motion::ElbowFlexion | Motion::ShoulderFlexion) {
        return Err(RtError::UnsupportedMotion(motion.name().into()));
    }
    if cfg.reps == 0 {
        return Err(RtError::Scenario("reps must be positive".into()));
    }
    if !(cfg.measure_ms > 0.0) {
        return Err(RtError::Scenario("measure_ms must be positive".into()));
    }
    let muscle = motion.agonist();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut reps = Vec::with_capacity(cfg.reps);
    for _ in 0..cfg.reps {
        let (lo, hi) = cfg.onset_range_ms;
        let onset_ms = if hi > lo { rng.random_range(lo..hi) } else { lo }.round();
        let seed: u64 = rng.random();
        let (un, assisted, peak) = effort_envelopes(motion, onset_ms, seed, cfg)?;
        let noise = NoiseConfig {
            baseline_sigma_mv: cfg.baseline_sigma_mv,
            powerline_amp_mv: cfg.powerline_amp_mv,
            seed,
        };
        let mvc = match cfg.plant.mvc(muscle) {
            m if m > 0.0 => m,
            _ => mean_amplitude(&vec![1.0; un.len()], muscle, cfg.fs, &noise)?,
        };
        reps.push(RepResult {
            onset_ms,
            unassisted_pct_mvc: pct_mvc(mean_amplitude(&un, muscle, cfg.fs, &noise)?, mvc),
            assisted_pct_mvc: pct_mvc(mean_amplitude(&assisted, muscle, cfg.fs, &noise)?, mvc),
            peak_assist_nm: peak,
        });
    }
    let unassisted = Stats::of(&reps.iter().map(|r| r.unassisted_pct_mvc).collect::<Vec<_>>());
    let assisted = Stats::of(&reps.iter().map(|r| r.assisted_pct_mvc).collect::<Vec<_>>());
    Ok(ComparisonReport {
        motion,
        load_kg: cfg.load_kg,
        seed: cfg.seed,
        ratio: unassisted.mean / assisted.mean,
        reps,
        unassisted,
        assisted,
    })
}
