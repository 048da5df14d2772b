//! Motion state machine: per-muscle classes in, per-PAM valve directives out.
//!
//! Flexion assists start on an agonist `onset`; pausing and venting respond
//! to antagonist `activation`, so stopping a motion always takes two
//! separate antagonist contractions (pause, then vent). Extension is assisted
//! by venting the flexor PAM of that joint.
//!
//! The machine consumes [`InputClass`] values. A class vector maps to one
//! input class; muscles that did not change class since the previous vector
//! are first masked to rest by [`EdgeDetector`], so a sustained contraction
//! triggers once.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::muscle::{Class, Muscle};
use crate::pam::{PamId, AUTO_MAX_PSI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FsmState {
    Rest,
    ElbowFlexAssist,
    ElbowPaused,
    ElbowVenting,
    ElbowExtAssist,
    ShoulderFlexAssist,
    ShoulderPaused,
    ShoulderVenting,
    ShoulderExtAssist,
    CombinedElbowPausedShoulderFlex,
    CombinedShoulderPausedElbowFlex,
    ManualOverride,
    EmergencyVent,
}

impl FsmState {
    pub const ALL: [FsmState; 13] = [
        FsmState::Rest,
        FsmState::ElbowFlexAssist,
        FsmState::ElbowPaused,
        FsmState::ElbowVenting,
        FsmState::ElbowExtAssist,
        FsmState::ShoulderFlexAssist,
        FsmState::ShoulderPaused,
        FsmState::ShoulderVenting,
        FsmState::ShoulderExtAssist,
        FsmState::CombinedElbowPausedShoulderFlex,
        FsmState::CombinedShoulderPausedElbowFlex,
        FsmState::ManualOverride,
        FsmState::EmergencyVent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FsmState::Rest => "Rest",
            FsmState::ElbowFlexAssist => "ElbowFlexAssist",
            FsmState::ElbowPaused => "ElbowPaused",
            FsmState::ElbowVenting => "ElbowVenting",
            FsmState::ElbowExtAssist => "ElbowExtAssist",
            FsmState::ShoulderFlexAssist => "ShoulderFlexAssist",
            FsmState::ShoulderPaused => "ShoulderPaused",
            FsmState::ShoulderVenting => "ShoulderVenting",
            FsmState::ShoulderExtAssist => "ShoulderExtAssist",
            FsmState::CombinedElbowPausedShoulderFlex => "CombinedElbowPausedShoulderFlex",
            FsmState::CombinedShoulderPausedElbowFlex => "CombinedShoulderPausedElbowFlex",
            FsmState::ManualOverride => "ManualOverride",
            FsmState::EmergencyVent => "EmergencyVent",
        }
    }

    /// States in which the operator, not the classifier, drives the PAMs.
    pub fn is_manual(self) -> bool {
        matches!(self, FsmState::ManualOverride | FsmState::EmergencyVent)
    }
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum PamDirective {
    /// Fill toward `target_psi`, or bleed down to it if above.
    Pump { target_psi: f64 },
    Hold,
    Vent,
}

impl PamDirective {
    pub fn pump() -> Self {
        PamDirective::Pump {
            target_psi: AUTO_MAX_PSI,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PamDirective::Pump { target_psi } => format!("pump@{target_psi}"),
            PamDirective::Hold => "hold".into(),
            PamDirective::Vent => "vent".into(),
        }
    }
}

/// One directive per PAM, indexed by [`PamId::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionCommand {
    pub pams: [PamDirective; 3],
}

impl MotionCommand {
    pub fn hold_all() -> Self {
        Self {
            pams: [PamDirective::Hold; 3],
        }
    }

    pub fn vent_all() -> Self {
        Self {
            pams: [PamDirective::Vent; 3],
        }
    }

    pub fn with(mut self, pam: PamId, d: PamDirective) -> Self {
        self.pams[pam.index()] = d;
        self
    }

    pub fn get(&self, pam: PamId) -> PamDirective {
        self.pams[pam.index()]
    }

    /// Highest pump target in the command, if any PAM is pumped.
    pub fn max_target(&self) -> Option<f64> {
        self.pams
            .iter()
            .filter_map(|d| match d {
                PamDirective::Pump { target_psi } => Some(*target_psi),
                _ => None,
            })
            .reduce(f64::max)
    }

    /// `elbow:pump@60;shoulder:hold;shoulder_aux:hold`
    pub fn label(&self) -> String {
        PamId::ALL
            .iter()
            .map(|p| format!("{}:{}", p, self.get(*p).label()))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// One class per muscle, in `Muscle::ALL` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuscleClassVector {
    pub classes: [Class; 4],
    pub t_ms: u64,
}

impl MuscleClassVector {
    pub fn rest(t_ms: u64) -> Self {
        Self {
            classes: [Class::Rest; 4],
            t_ms,
        }
    }

    pub fn with(mut self, muscle: Muscle, class: Class) -> Self {
        self.classes[muscle.index()] = class;
        self
    }

    pub fn get(&self, muscle: Muscle) -> Class {
        self.classes[muscle.index()]
    }

    pub fn input_class(&self) -> InputClass {
        let mut active = Muscle::ALL
            .iter()
            .filter(|m| self.get(**m) != Class::Rest);
        match (active.next(), active.next()) {
            (None, _) => InputClass::Quiet,
            (Some(&m), None) => match self.get(m) {
                Class::Onset => InputClass::Onset(m),
                _ => InputClass::Activation(m),
            },
            _ => InputClass::Multiple,
        }
    }
}

/// Masks muscles whose class did not change since the previous vector.
#[derive(Debug, Clone, Default)]
pub struct EdgeDetector {
    last: Option<[Class; 4]>,
}

impl EdgeDetector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, v: &MuscleClassVector) -> MuscleClassVector {
        let prev = self.last.unwrap_or([Class::Rest; 4]);
        self.last = Some(v.classes);
        let mut out = *v;
        for (o, p) in out.classes.iter_mut().zip(prev) {
            if *o == p {
                *o = Class::Rest;
            }
        }
        out
    }
}

/// Operator commands accepted by [`MotionFsm::manual_override`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ManualCommand {
    PauseAll,
    VentAll,
    SetPressure { pam: PamId, psi: f64 },
    /// Hand control back to the classifier.
    Release,
}

/// Equivalence classes of machine input used by the transition table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputClass {
    Quiet,
    Onset(Muscle),
    Activation(Muscle),
    /// More than one muscle changed class at once.
    Multiple,
    /// The PAMs being vented have reached ambient pressure.
    PamsSettled,
    PauseAll,
    VentAll,
    SetPressure,
    Release,
}

impl InputClass {
    pub fn all() -> Vec<InputClass> {
        let mut v = vec![InputClass::Quiet];
        v.extend(Muscle::ALL.iter().map(|m| InputClass::Onset(*m)));
        v.extend(Muscle::ALL.iter().map(|m| InputClass::Activation(*m)));
        v.extend([
            InputClass::Multiple,
            InputClass::PamsSettled,
            InputClass::PauseAll,
            InputClass::VentAll,
            InputClass::SetPressure,
            InputClass::Release,
        ]);
        v
    }

    pub fn label(&self) -> String {
        match self {
            InputClass::Quiet => "quiet".into(),
            InputClass::Onset(m) => format!("{m}=onset"),
            InputClass::Activation(m) => format!("{m}=activation"),
            InputClass::Multiple => "multiple".into(),
            InputClass::PamsSettled => "pams_settled".into(),
            InputClass::PauseAll => "pause_all".into(),
            InputClass::VentAll => "vent_all".into(),
            InputClass::SetPressure => "set_pressure".into(),
            InputClass::Release => "release".into(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FsmError {
    #[error("set_pressure {psi} psi outside [0, {max}]")]
    PressureOutOfRange { psi: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsmConfig {
    pub target_psi: f64,
    /// Pump the auxiliary shoulder PAM alongside the shoulder PAM.
    pub aux_shoulder: bool,
}

impl Default for FsmConfig {
    fn default() -> Self {
        Self {
            target_psi: AUTO_MAX_PSI,
            aux_shoulder: false,
        }
    }
}

/// Pure transition logic under a fixed configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionFsm {
    pub config: FsmConfig,
}

use FsmState as S;
use InputClass as I;
use Muscle::{Biceps, LatissimusDorsi as Lat, MedialDeltoid as Deltoid, Triceps};

impl MotionFsm {
    pub fn new(config: FsmConfig) -> Self {
        Self { config }
    }

    fn pump(&self) -> PamDirective {
        PamDirective::Pump {
            target_psi: self.config.target_psi.min(AUTO_MAX_PSI),
        }
    }

    fn shoulder(&self, cmd: MotionCommand, d: PamDirective) -> MotionCommand {
        let aux = if self.config.aux_shoulder || d == PamDirective::Vent {
            d
        } else {
            cmd.get(PamId::ShoulderAux)
        };
        cmd.with(PamId::Shoulder, d).with(PamId::ShoulderAux, aux)
    }

    /// Directive a state emits while nothing changes.
    pub fn steady(&self, state: FsmState) -> MotionCommand {
        let hold = MotionCommand::hold_all();
        match state {
            S::Rest | S::ElbowPaused | S::ShoulderPaused | S::ManualOverride => hold,
            S::ElbowFlexAssist => hold.with(PamId::Elbow, self.pump()),
            S::ShoulderFlexAssist => self.shoulder(hold, self.pump()),
            S::ElbowExtAssist => hold.with(PamId::Elbow, PamDirective::Vent),
            S::ShoulderExtAssist => self.shoulder(hold, PamDirective::Vent),
            S::ElbowVenting | S::ShoulderVenting | S::EmergencyVent => MotionCommand::vent_all(),
            S::CombinedElbowPausedShoulderFlex => self.shoulder(hold, self.pump()),
            S::CombinedShoulderPausedElbowFlex => hold.with(PamId::Elbow, self.pump()),
        }
    }

    /// Transition on one input class. Manual inputs other than
    /// `SetPressure` are handled here too; `SetPressure` carries a payload
    /// and goes through [`MotionFsm::manual_override`].
    pub fn step_input(&self, state: FsmState, input: InputClass) -> (FsmState, MotionCommand) {
        match input {
            I::PauseAll => return (S::ManualOverride, MotionCommand::hold_all()),
            I::VentAll => return (S::EmergencyVent, MotionCommand::vent_all()),
            I::SetPressure => return (S::ManualOverride, MotionCommand::hold_all()),
            I::Release => {
                return match state {
                    S::ManualOverride => (S::EmergencyVent, MotionCommand::vent_all()),
                    s => (s, self.steady(s)),
                }
            }
            _ => {}
        }
        let next = match (state, input) {
            (S::Rest, I::Onset(Biceps)) => S::ElbowFlexAssist,
            (S::Rest, I::Activation(Triceps)) => S::ElbowExtAssist,
            (S::Rest, I::Onset(Deltoid)) => S::ShoulderFlexAssist,
            (S::Rest, I::Activation(Lat)) => S::ShoulderExtAssist,

            (S::ElbowFlexAssist, I::Activation(Triceps)) => S::ElbowPaused,
            (S::ElbowFlexAssist, I::Quiet | I::Onset(_) | I::Activation(_) | I::PamsSettled) => state,
            (S::ElbowPaused, I::Activation(Triceps)) => S::ElbowVenting,
            (S::ElbowPaused, I::Onset(Biceps)) => S::ElbowFlexAssist,
            (S::ElbowPaused, I::Onset(Deltoid)) => S::CombinedElbowPausedShoulderFlex,

            (S::ShoulderFlexAssist, I::Activation(Lat)) => S::ShoulderPaused,
            (S::ShoulderFlexAssist, I::Quiet | I::Onset(_) | I::Activation(_) | I::PamsSettled) => state,
            (S::ShoulderPaused, I::Activation(Lat)) => S::ShoulderVenting,
            (S::ShoulderPaused, I::Onset(Deltoid)) => S::ShoulderFlexAssist,
            (S::ShoulderPaused, I::Onset(Biceps)) => S::CombinedShoulderPausedElbowFlex,

            (S::CombinedElbowPausedShoulderFlex, I::Activation(Lat)) => S::ShoulderPaused,
            (S::CombinedElbowPausedShoulderFlex, I::Activation(Triceps)) => S::ElbowVenting,
            (S::CombinedShoulderPausedElbowFlex, I::Activation(Triceps)) => S::ElbowPaused,
            (S::CombinedShoulderPausedElbowFlex, I::Activation(Lat)) => S::ShoulderVenting,

            (S::ElbowVenting | S::ShoulderVenting | S::EmergencyVent, I::PamsSettled) => S::Rest,
            (S::ElbowExtAssist | S::ShoulderExtAssist, I::PamsSettled) => S::Rest,
            (S::ElbowVenting | S::ShoulderVenting | S::ElbowExtAssist | S::ShoulderExtAssist, _) => state,
            (S::ManualOverride | S::EmergencyVent, _) => state,
            (S::CombinedElbowPausedShoulderFlex | S::CombinedShoulderPausedElbowFlex, I::Quiet) => state,
            (s, I::Quiet | I::PamsSettled) => s,
            // Fail-safe for every other combination.
            (s, _) => return (s, MotionCommand::hold_all()),
        };
        (next, self.steady(next))
    }

    /// Classifier-driven step on a class vector.
    pub fn step(&self, state: FsmState, classes: &MuscleClassVector) -> (FsmState, MotionCommand) {
        self.step_input(state, classes.input_class())
    }

    /// Operator command; applies from any state.
    pub fn manual_override(&self, state: FsmState, cmd: ManualCommand) -> Result<(FsmState, MotionCommand), FsmError> {
        match cmd {
            ManualCommand::PauseAll => Ok(self.step_input(state, I::PauseAll)),
            ManualCommand::VentAll => Ok(self.step_input(state, I::VentAll)),
            ManualCommand::Release => Ok(self.step_input(state, I::Release)),
            ManualCommand::SetPressure { pam, psi } => {
                if !(0.0..=AUTO_MAX_PSI).contains(&psi) {
                    return Err(FsmError::PressureOutOfRange { psi, max: AUTO_MAX_PSI });
                }
                Ok((
                    S::ManualOverride,
                    MotionCommand::hold_all().with(pam, PamDirective::Pump { target_psi: psi }),
                ))
            }
        }
    }

    /// Every (state, input class) pair with its outcome.
    pub fn transition_table(&self) -> Vec<Transition> {
        let inputs = InputClass::all();
        let mut rows = Vec::with_capacity(FsmState::ALL.len() * inputs.len());
        for &state in &FsmState::ALL {
            for &input in &inputs {
                let (next, command) = self.step_input(state, input);
                rows.push(Transition {
                    state,
                    input,
                    next,
                    command,
                });
            }
        }
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub state: FsmState,
    pub input: InputClass,
    pub next: FsmState,
    pub command: MotionCommand,
}

pub fn write_table_csv<W: Write>(rows: &[Transition], mut out: W) -> std::io::Result<()> {
    writeln!(out, "state,input_class,next_state,pam_cmds")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.state, r.input.label(), r.next, r.command.label())?;
    }
    Ok(())
}

/// Scripted class sequence for one of the four demonstration motions, with
/// the states the machine is expected to pass through.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionScript {
    pub steps: Vec<InputClass>,
    pub expected: Vec<FsmState>,
}

/// Agonist contraction, then relaxation; extensions settle back to rest.
pub fn motion_script(motion: crate::muscle::Motion) -> MotionScript {
    use crate::muscle::Motion;
    let m = motion.agonist();
    let steps = vec![I::Onset(m), I::Activation(m), I::Quiet, I::PamsSettled];
    let expected = match motion {
        Motion::ElbowFlexion => vec![S::ElbowFlexAssist; 4],
        Motion::ShoulderFlexion => vec![S::ShoulderFlexAssist; 4],
        Motion::ElbowExtension => vec![S::Rest, S::ElbowExtAssist, S::ElbowExtAssist, S::Rest],
        Motion::ShoulderExtension => vec![S::Rest, S::ShoulderExtAssist, S::ShoulderExtAssist, S::Rest],
    };
    MotionScript { steps, expected }
}

/// States visited when replaying `inputs` from `start`.
pub fn replay(fsm: &MotionFsm, start: FsmState, inputs: &[InputClass]) -> Vec<(FsmState, MotionCommand)> {
    let mut s = start;
    inputs
        .iter()
        .map(|i| {
            let out = fsm.step_input(s, *i);
            s = out.0;
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::{HashSet, VecDeque};

    use super::*;
    use crate::muscle::Motion;

    fn fsm() -> MotionFsm {
        MotionFsm::default()
    }

    fn on(m: Muscle) -> MuscleClassVector {
        MuscleClassVector::rest(0).with(m, Class::Onset)
    }

    fn act(m: Muscle) -> MuscleClassVector {
        MuscleClassVector::rest(0).with(m, Class::Activation)
    }

    #[test]
    fn biceps_onset_pumps_elbow() {
        let (s, c) = fsm().step(S::Rest, &on(Biceps));
        assert_eq!(s, S::ElbowFlexAssist);
        assert_eq!(c.get(PamId::Elbow), PamDirective::Pump { target_psi: 60.0 });
        assert_eq!(c.get(PamId::Shoulder), PamDirective::Hold);
    }

    #[test]
    fn triceps_pauses_flexion() {
        let (s, c) = fsm().step(S::ElbowFlexAssist, &act(Triceps));
        assert_eq!(s, S::ElbowPaused);
        assert_eq!(c.get(PamId::Elbow), PamDirective::Hold);
    }

    #[test]
    fn quiet_rest_holds() {
        assert_eq!(
            fsm().step(S::Rest, &MuscleClassVector::rest(0)),
            (S::Rest, MotionCommand::hold_all())
        );
    }

    #[test]
    fn scripted_transitions() {
        let f = fsm();
        let cases = [
            (S::Rest, on(Biceps), S::ElbowFlexAssist),
            (S::ElbowFlexAssist, act(Triceps), S::ElbowPaused),
            (S::ElbowPaused, act(Triceps), S::ElbowVenting),
            (S::ElbowFlexAssist, MuscleClassVector::rest(0), S::ElbowFlexAssist),
            (S::Rest, act(Triceps), S::ElbowExtAssist),
            (S::Rest, on(Deltoid), S::ShoulderFlexAssist),
            (S::ShoulderFlexAssist, act(Lat), S::ShoulderPaused),
            (S::ShoulderPaused, act(Lat), S::ShoulderVenting),
            (S::Rest, act(Lat), S::ShoulderExtAssist),
            (S::ElbowPaused, on(Deltoid), S::CombinedElbowPausedShoulderFlex),
            (S::ShoulderPaused, on(Biceps), S::CombinedShoulderPausedElbowFlex),
        ];
        for (from, input, to) in cases {
            assert_eq!(f.step(from, &input).0, to, "{from} + {:?}", input.input_class());
        }
        assert_eq!(f.step_input(S::ElbowVenting, I::PamsSettled).0, S::Rest);
        assert_eq!(f.step_input(S::ShoulderVenting, I::PamsSettled).0, S::Rest);
    }

    #[test]
    fn flexion_continues_without_antagonist() {
        let f = fsm();
        let mut s = S::ElbowFlexAssist;
        for input in [I::Quiet, I::Activation(Biceps), I::Onset(Triceps), I::Quiet] {
            let (n, c) = f.step_input(s, input);
            assert_eq!(n, S::ElbowFlexAssist);
            assert_eq!(c.get(PamId::Elbow), PamDirective::pump());
            s = n;
        }
    }

    #[test]
    fn single_antagonist_activation_never_vents() {
        let f = fsm();
        for row in f.transition_table() {
            if matches!(row.input, I::Activation(Triceps | Lat))
                && matches!(row.state, S::ElbowFlexAssist | S::ShoulderFlexAssist)
            {
                assert!(!row.command.pams.contains(&PamDirective::Vent), "{row:?}");
            }
        }
    }

    #[test]
    fn table_is_total() {
        let rows = fsm().transition_table();
        assert_eq!(rows.len(), 13 * 15);
        let keys: HashSet<_> = rows.iter().map(|r| (r.state, r.input)).collect();
        assert_eq!(keys.len(), rows.len());
    }

    #[test]
    fn automatic_states_stay_within_envelope() {
        for aux in [false, true] {
            let f = MotionFsm::new(FsmConfig {
                target_psi: 75.0,
                aux_shoulder: aux,
            });
            for row in f.transition_table() {
                if let Some(t) = row.command.max_target() {
                    assert!(t <= AUTO_MAX_PSI, "{row:?}");
                }
            }
        }
    }

    #[test]
    fn rest_reachable_within_three_steps() {
        let f = fsm();
        let rows = f.transition_table();
        for start in FsmState::ALL {
            let mut seen = HashSet::from([start]);
            let mut queue = VecDeque::from([(start, 0)]);
            let mut found = None;
            while let Some((s, d)) = queue.pop_front() {
                if s == S::Rest {
                    found = Some(d);
                    break;
                }
                for r in rows.iter().filter(|r| r.state == s) {
                    if seen.insert(r.next) {
                        queue.push_back((r.next, d + 1));
                    }
                }
            }
            assert!(found.is_some_and(|d| d <= 3), "{start}: {found:?}");
        }
    }

    #[test]
    fn vent_all_from_every_state() {
        let f = fsm();
        for s in FsmState::ALL {
            let (n, c) = f.manual_override(s, ManualCommand::VentAll).unwrap();
            assert_eq!(n, S::EmergencyVent);
            assert_eq!(c, MotionCommand::vent_all());
        }
    }

    #[test]
    fn manual_precedence() {
        let f = fsm();
        for input in InputClass::all() {
            if matches!(input, I::Onset(_) | I::Activation(_) | I::Quiet | I::Multiple) {
                assert_eq!(f.step_input(S::ManualOverride, input).0, S::ManualOverride);
            }
        }
        let (s, _) = f.manual_override(S::ManualOverride, ManualCommand::Release).unwrap();
        assert_eq!(s, S::EmergencyVent);
        assert_eq!(f.step_input(s, I::PamsSettled).0, S::Rest);
    }

    #[test]
    fn set_pressure_bounds() {
        let f = fsm();
        assert_eq!(
            f.manual_override(S::ElbowFlexAssist, ManualCommand::SetPressure { pam: PamId::Elbow, psi: 61.0 }),
            Err(FsmError::PressureOutOfRange { psi: 61.0, max: 60.0 })
        );
        let (s, c) = f
            .manual_override(S::Rest, ManualCommand::SetPressure { pam: PamId::Elbow, psi: 45.0 })
            .unwrap();
        assert_eq!(s, S::ManualOverride);
        assert_eq!(c.get(PamId::Elbow), PamDirective::Pump { target_psi: 45.0 });
    }

    #[test]
    fn unknown_combination_holds() {
        let f = fsm();
        assert_eq!(f.step_input(S::ElbowPaused, I::Multiple), (S::ElbowPaused, MotionCommand::hold_all()));
        assert_eq!(f.step_input(S::Rest, I::Onset(Triceps)), (S::Rest, MotionCommand::hold_all()));
    }

    #[test]
    fn edge_detector_passes_changes_only() {
        let mut e = EdgeDetector::new();
        assert_eq!(e.feed(&on(Biceps)).input_class(), I::Onset(Biceps));
        assert_eq!(e.feed(&act(Biceps)).input_class(), I::Activation(Biceps));
        assert_eq!(e.feed(&act(Biceps)).input_class(), I::Quiet);
        assert_eq!(e.feed(&MuscleClassVector::rest(0)).input_class(), I::Quiet);
    }

    #[test]
    fn two_step_vent_through_edges() {
        let f = fsm();
        let mut e = EdgeDetector::new();
        let seq = [
            on(Biceps),
            act(Biceps),
            MuscleClassVector::rest(0),
            on(Triceps),
            act(Triceps),
            act(Triceps),
            MuscleClassVector::rest(0),
            on(Triceps),
            act(Triceps),
        ];
        let mut s = S::Rest;
        let mut trail = Vec::new();
        for v in &seq {
            s = f.step(s, &e.feed(v)).0;
            trail.push(s);
        }
        assert_eq!(trail[3], S::ElbowFlexAssist);
        assert_eq!(trail[4], S::ElbowPaused);
        assert_eq!(trail[7], S::ElbowPaused);
        assert_eq!(trail[8], S::ElbowVenting);
    }

    #[test]
    fn motion_scripts_replay() {
        let f = fsm();
        for m in Motion::ALL {
            let script = motion_script(m);
            let states: Vec<_> = replay(&f, S::Rest, &script.steps).into_iter().map(|x| x.0).collect();
            assert_eq!(states, script.expected, "{m}");
        }
    }

    #[test]
    fn aux_flag_drives_third_pam() {
        let on_aux = MotionFsm::new(FsmConfig {
            aux_shoulder: true,
            ..FsmConfig::default()
        });
        let c = on_aux.steady(S::ShoulderFlexAssist);
        assert_eq!(c.get(PamId::ShoulderAux), PamDirective::pump());
        assert_eq!(fsm().steady(S::ShoulderFlexAssist).get(PamId::ShoulderAux), PamDirective::Hold);
    }

    #[test]
    fn csv_export() {
        let rows = fsm().transition_table();
        let mut buf = Vec::new();
        write_table_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 195);
        assert!(text.contains("Rest,biceps=onset,ElbowFlexAssist,elbow:pump@60;shoulder:hold;shoulder_aux:hold"));
    }
}
