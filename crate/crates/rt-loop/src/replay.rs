//! The four demonstration motions run through the full loop.

use serde::{Deserialize, Serialize};

use exo_core::fsm::FsmState;
use exo_core::pam::{PamId, AUTO_MAX_PSI};
use exo_core::plant::PlantConfig;
use exo_core::Motion;

use crate::classifier::ClassifierSource;
use crate::engine::{run_scenario, ARRIVED_PSI};
use crate::scenario::Scenario;
use crate::RtError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionReplay {
    pub motion: Motion,
    pub expected: Vec<FsmState>,
    pub observed: Vec<FsmState>,
    /// Pressures at the end of the run, in `PamId::ALL` order.
    pub final_psi: [f64; 3],
    pub passed: bool,
}

/// States a motion should pass through, and the PAM left pumped (if any).
pub fn expectation(motion: Motion) -> (Vec<FsmState>, Option<PamId>) {
    match motion {
        Motion::ElbowFlexion => (vec![FsmState::ElbowFlexAssist], Some(PamId::Elbow)),
        Motion::ShoulderFlexion => (vec![FsmState::ShoulderFlexAssist], Some(PamId::Shoulder)),
        Motion::ElbowExtension => (vec![FsmState::ElbowExtAssist, FsmState::Rest], None),
        Motion::ShoulderExtension => (vec![FsmState::ShoulderExtAssist, FsmState::Rest], None),
    }
}

/// Runs the built-in `motion1` … `motion4` scenarios.
pub fn replay_motions_1_to_4(source: &ClassifierSource, plant: &PlantConfig) -> Result<Vec<MotionReplay>, RtError> {
    Motion::ALL
        .iter()
        .enumerate()
        .map(|(i, &motion)| {
            let mut s = Scenario::builtin(&format!("motion{}", i + 1)).expect("built-in motion");
            s.record_emg = false;
            let t = run_scenario(&s, source, plant)?;
            let observed = t.state_trajectory();
            let final_psi = t.telemetry().last().map(|f| f.pressures_psi.as_array()).unwrap_or([0.0; 3]);
            let (expected, pumped) = expectation(motion);
            let pressures_ok = PamId::ALL.iter().all(|&p| {
                let want = if Some(p) == pumped { AUTO_MAX_PSI } else { 0.0 };
                (final_psi[p.index()] - want).abs() <= ARRIVED_PSI
            });
            Ok(MotionReplay {
                motion,
                passed: observed == expected && pressures_ok,
                expected,
                observed,
                final_psi,
            })
        })
        .collect()
}
