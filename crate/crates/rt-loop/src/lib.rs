//! Closed-loop runtime on a virtual clock.
//!
//! EMG is synthesized per channel, windowed every stride, shipped to a
//! simulated cloud classifier, and the resulting classes drive the motion
//! state machine at the valve driver. Every hop carries a configured delay,
//! and all activity is recorded as a totally ordered event timeline.

pub mod classifier;
pub mod compare;
pub mod engine;
pub mod latency;
pub mod measure;
pub mod replay;
pub mod scenario;
pub mod telemetry;
pub mod timeline;

use thiserror::Error;

pub use classifier::{Classifier, ClassifierSource, NetClassifier, OracleClassifier};
pub use compare::{run_comparison, CompareConfig, ComparisonReport};
pub use engine::{run_scenario, Engine};
pub use latency::LatencyConfig;
pub use measure::{measure_latency, LatencyReport};
pub use replay::{replay_motions_1_to_4, MotionReplay};
pub use scenario::Scenario;
pub use telemetry::TelemetryFrame;
pub use timeline::{EventKind, Timeline, TimelineEvent};

#[derive(Debug, Error)]
pub enum RtError {
    #[error("malformed scenario: {0}")]
    Scenario(String),
    #[error("invalid latency configuration: {0}")]
    Latency(String),
    #[error("no model for {0} in checkpoint")]
    MissingModel(String),
    #[error("no onset was followed by an attributable valve command")]
    NoMatchedPairs,
    #[error("no assistance model for {0}")]
    UnsupportedMotion(String),
    #[error("timeline: {0}")]
    Timeline(String),
    #[error(transparent)]
    Intent(#[from] exo_intent::IntentError),
    #[error(transparent)]
    Synth(#[from] exo_core::synth::SynthError),
    #[error(transparent)]
    Dsp(#[from] exo_core::dsp::DspError),
    #[error(transparent)]
    Fsm(#[from] exo_core::fsm::FsmError),
    #[error(transparent)]
    Plant(#[from] exo_core::plant::PlantError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Milliseconds to integer microseconds on the virtual clock.
pub fn ms_to_us(ms: f64) -> u64 {
    (ms * 1000.0).round().max(0.0) as u64
}

pub fn us_to_ms(us: u64) -> f64 {
    us as f64 / 1000.0
}
