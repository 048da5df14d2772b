//! Snapshots published to monitoring clients.

use serde::{Deserialize, Serialize};

use exo_core::fsm::FsmState;
use exo_core::plant::PerJoint;
use exo_core::Muscle;
use exo_intent::ClassProbs;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PamPressures {
    pub elbow: f64,
    pub shoulder: f64,
    pub shoulder_aux: f64,
}

impl PamPressures {
    pub fn from_array(p: [f64; 3]) -> Self {
        Self {
            elbow: p[0],
            shoulder: p[1],
            shoulder_aux: p[2],
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.elbow, self.shoulder, self.shoulder_aux]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuscleProbs {
    pub muscle: Muscle,
    pub probs: ClassProbs,
}

/// Raw EMG since the previous frame, decimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmgChunk {
    pub muscle: Muscle,
    pub samples_mv: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryFrame {
    pub t_ms: f64,
    pub pressures_psi: PamPressures,
    pub fsm_state: FsmState,
    pub class_probs: Vec<MuscleProbs>,
    pub emg: Vec<EmgChunk>,
    /// Motion being assisted, if any.
    pub motion: Option<String>,
    pub joint_angles_deg: PerJoint,
}

/// Motion label of an assist state.
pub fn motion_label(state: FsmState) -> Option<&'static str> {
    match state {
        FsmState::ElbowFlexAssist | FsmState::CombinedShoulderPausedElbowFlex => Some("elbow_flexion"),
        FsmState::ElbowExtAssist => Some("elbow_extension"),
        FsmState::ShoulderFlexAssist | FsmState::CombinedElbowPausedShoulderFlex => Some("shoulder_flexion"),
        FsmState::ShoulderExtAssist => Some("shoulder_extension"),
        _ => None,
    }
}
