//! Scenario files: per-muscle activation scripts, hand load, operator
//! commands, latency overrides and the seed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use exo_core::fsm::{FsmConfig, ManualCommand};
use exo_core::pam::AUTO_MAX_PSI;
use exo_core::synth::{ActivationEvent, ActivationProfile, DEFAULT_FS, DEFAULT_RAMP_MS};
use exo_core::{Motion, Muscle};

use crate::latency::LatencyConfig;
use crate::RtError;

fn default_ramp() -> f64 {
    DEFAULT_RAMP_MS
}

fn default_seed() -> u64 {
    42
}

fn default_fs() -> f64 {
    DEFAULT_FS
}

fn default_baseline() -> f64 {
    0.02
}

fn default_powerline() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuscleScript {
    pub muscle: Muscle,
    pub events: Vec<ActivationEvent>,
    #[serde(default = "default_ramp")]
    pub ramp_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedCommand {
    pub t_ms: f64,
    pub command: ManualCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration_ms: f64,
    #[serde(default)]
    pub scripts: Vec<MuscleScript>,
    #[serde(default)]
    pub load_kg: f64,
    #[serde(default)]
    pub latency: LatencyConfig,
    #[serde(default)]
    pub commands: Vec<TimedCommand>,
    #[serde(default)]
    pub fsm: FsmConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_fs")]
    pub fs: f64,
    #[serde(default = "default_baseline")]
    pub baseline_sigma_mv: f64,
    #[serde(default = "default_powerline")]
    pub powerline_amp_mv: f64,
    /// Record decimated raw EMG as `emg_sample` events.
    #[serde(default = "default_true")]
    pub record_emg: bool,
}

impl Scenario {
    pub fn empty(name: &str, duration_ms: f64) -> Self {
        Self {
            name: name.into(),
            duration_ms,
            scripts: Vec::new(),
            load_kg: 0.0,
            latency: LatencyConfig::default(),
            commands: Vec::new(),
            fsm: FsmConfig::default(),
            seed: default_seed(),
            fs: DEFAULT_FS,
            baseline_sigma_mv: default_baseline(),
            powerline_amp_mv: default_powerline(),
            record_emg: true,
        }
    }

    /// One burst of the motion's agonist.
    pub fn motion(motion: Motion, onset_ms: f64, burst_ms: f64, duration_ms: f64) -> Self {
        let mut s = Self::empty(motion.name(), duration_ms);
        s.scripts.push(MuscleScript {
            muscle: motion.agonist(),
            events: vec![ActivationEvent {
                start_ms: onset_ms,
                end_ms: (onset_ms + burst_ms).min(duration_ms),
                intensity: 0.8,
            }],
            ramp_ms: DEFAULT_RAMP_MS,
        });
        s
    }

    /// Built-in scenarios by name: `idle`, `motion1` … `motion4`, `demo`.
    pub fn builtin(name: &str) -> Option<Self> {
        let motion_n = |i: usize| {
            let m = Motion::ALL[i];
            let mut s = Self::motion(m, 1500.0, 2500.0, 6000.0);
            s.name = format!("motion{}", i + 1);
            s
        };
        match name {
            "idle" => Some(Self::empty("idle", 10_000.0)),
            "motion1" => Some(motion_n(0)),
            "motion2" => Some(motion_n(1)),
            "motion3" => Some(motion_n(2)),
            "motion4" => Some(motion_n(3)),
            "demo" => Some(Self::demo()),
            _ => None,
        }
    }

    /// Elbow and shoulder cycles: flex, pause, vent, then extend.
    pub fn demo() -> Self {
        let mut s = Self::empty("demo", 60_000.0);
        let burst = |start: f64, len: f64| ActivationEvent {
            start_ms: start,
            end_ms: start + len,
            intensity: 0.8,
        };
        let mut scripts: Vec<MuscleScript> = Muscle::ALL
            .iter()
            .map(|&muscle| MuscleScript {
                muscle,
                events: Vec::new(),
                ramp_ms: DEFAULT_RAMP_MS,
            })
            .collect();
        let mut t = 1000.0;
        while t + 14_000.0 <= s.duration_ms {
            for (flexor, extensor) in [
                (Muscle::Biceps, Muscle::Triceps),
                (Muscle::MedialDeltoid, Muscle::LatissimusDorsi),
            ] {
                scripts[flexor.index()].events.push(burst(t, 2500.0));
                scripts[extensor.index()].events.push(burst(t + 3500.0, 1600.0));
                scripts[extensor.index()].events.push(burst(t + 6000.0, 1600.0));
                t += 9000.0;
            }
        }
        s.scripts = scripts.into_iter().filter(|m| !m.events.is_empty()).collect();
        s
    }

    pub fn from_json(text: &str) -> Result<Self, RtError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| RtError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, RtError> {
        let text = std::fs::read_to_string(path).map_err(|e| RtError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), RtError> {
        if !(self.duration_ms.is_finite() && self.duration_ms > 0.0) {
            return Err(RtError::Scenario("duration_ms must be positive".into()));
        }
        if !(self.load_kg.is_finite() && self.load_kg >= 0.0) {
            return Err(RtError::Scenario("load_kg must be non-negative".into()));
        }
        if !(self.fs >= exo_core::synth::MIN_FS) {
            return Err(RtError::Scenario(format!("fs {} below {}", self.fs, exo_core::synth::MIN_FS)));
        }
        if !(self.baseline_sigma_mv >= 0.0 && self.powerline_amp_mv >= 0.0) {
            return Err(RtError::Scenario("noise amplitudes must be non-negative".into()));
        }
        self.latency.validate()?;
        let mut seen = [false; 4];
        for script in &self.scripts {
            let i = script.muscle.index();
            if seen[i] {
                return Err(RtError::Scenario(format!("{} scripted twice", script.muscle)));
            }
            seen[i] = true;
            self.profile_of(script)
                .validate()
                .map_err(|e| RtError::Scenario(format!("{}: {e}", script.muscle)))?;
        }
        for c in &self.commands {
            if !(c.t_ms >= 0.0 && c.t_ms <= self.duration_ms) {
                return Err(RtError::Scenario(format!("command at {} ms outside the scenario", c.t_ms)));
            }
            if let ManualCommand::SetPressure { psi, .. } = c.command {
                if !(0.0..=AUTO_MAX_PSI).contains(&psi) {
                    return Err(RtError::Scenario(format!("set_pressure {psi} psi outside [0, {AUTO_MAX_PSI}]")));
                }
            }
        }
        Ok(())
    }

    fn profile_of(&self, script: &MuscleScript) -> ActivationProfile {
        ActivationProfile {
            events: script.events.clone(),
            ramp_ms: script.ramp_ms,
        }
    }

    /// Activation profile of every channel, in `Muscle::ALL` order.
    pub fn profiles(&self) -> [ActivationProfile; 4] {
        let mut out: [ActivationProfile; 4] = Default::default();
        for script in &self.scripts {
            out[script.muscle.index()] = self.profile_of(script);
        }
        out
    }
}
