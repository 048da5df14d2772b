//! Discrete-event loop on an integer-microsecond virtual clock.
//!
//! Pending events sit in a min-heap ordered by `(time, sequence)`, so two
//! events scheduled for the same instant run in the order they were
//! scheduled. The motion state machine runs at the valve driver: class
//! vectors travel sensor → cloud (inference) → driver, operator commands
//! travel cloud → driver, and every state-machine decision reaches the
//! valves after the valve response time.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use exo_core::dsp::{self, FilterSpec, DEFAULT_WINDOW_MS};
use exo_core::fsm::{EdgeDetector, FsmState, InputClass, ManualCommand, MotionCommand, MotionFsm, MuscleClassVector, PamDirective};
use exo_core::pam::{self, PamId, PamState, Valve};
use exo_core::plant::{self, JointState, PerJoint, PlantConfig};
use exo_core::synth::{self, ActivationProfile, NoiseConfig, FULL_SCALE_MV};
use exo_core::{Class, EmgTrace, Joint, Muscle};
use exo_intent::ClassProbs;

use crate::classifier::{Classifier, ClassifierSource, WindowInput};
use crate::latency::LatencyConfig;
use crate::scenario::Scenario;
use crate::telemetry::{self, EmgChunk, MuscleProbs, PamPressures, TelemetryFrame};
use crate::timeline::{EventKind, Timeline};
use crate::{ms_to_us, us_to_ms, RtError};

pub const PLANT_TICK_MS: f64 = 5.0;
/// 10 Hz.
pub const TELEMETRY_PERIOD_MS: f64 = 100.0;
pub const EMG_RECORD_PERIOD_MS: f64 = 20.0;
/// Raw EMG decimation inside telemetry frames.
pub const TELEMETRY_DECIMATION: usize = 10;
/// A venting PAM at or below this pressure counts as empty.
pub const SETTLE_PSI: f64 = 0.5;
/// A pumping PAM within this band of its target counts as arrived.
pub const ARRIVED_PSI: f64 = 1.0;
/// Over-pressure tolerated before a pumping PAM is vented back down.
pub const REGULATION_BAND_PSI: f64 = 0.5;
/// Duration of a scripted limb movement.
pub const MOVE_MS: f64 = 1000.0;
pub const HOLD_ANGLE_DEG: f64 = 90.0;
const CHUNK_MS: f64 = 1000.0;
/// History conditioned ahead of each window to keep filter transients out.
const CONDITION_MARGIN_MS: f64 = 500.0;
const FLEX_PAMS: [PamId; 3] = [PamId::Elbow, PamId::Shoulder, PamId::ShoulderAux];

#[derive(Debug)]
enum Pending {
    Onset(Muscle),
    EpochReady(u64),
    CloudArrive {
        epoch: u64,
        ready_us: u64,
        windows: Box<[Vec<f64>; 4]>,
        start_ms: f64,
        end_ms: f64,
    },
    ClassDone {
        epoch: u64,
        ready_us: u64,
        arrived_us: u64,
        probs: [ClassProbs; 4],
    },
    DriverClasses {
        epoch: u64,
        classes: [Class; 4],
    },
    ValveSwitch {
        command: MotionCommand,
        epoch: Option<u64>,
        received_us: u64,
    },
    Operator {
        command: ManualCommand,
        issued_us: u64,
    },
    PlantTick,
    EmgTick,
    Telemetry,
}

#[derive(Debug)]
struct Queued {
    t_us: u64,
    seq: u64,
    ev: Pending,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        (self.t_us, self.seq) == (other.t_us, other.seq)
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.t_us, self.seq).cmp(&(other.t_us, other.seq))
    }
}

fn flexor_extensor(joint: Joint) -> (Muscle, Muscle) {
    match joint {
        Joint::Elbow => (Muscle::Biceps, Muscle::Triceps),
        Joint::Shoulder => (Muscle::MedialDeltoid, Muscle::LatissimusDorsi),
    }
}

fn latest_start(p: &ActivationProfile, t_ms: f64) -> Option<f64> {
    p.events
        .iter()
        .map(|e| e.start_ms)
        .filter(|&s| s <= t_ms)
        .fold(None, |acc, s| Some(acc.map_or(s, |a: f64| a.max(s))))
}

/// Scripted limb angle: a flexor burst raises the joint to the hold angle
/// along a minimum-jerk path, an extensor burst lowers it again.
pub fn joint_angle(profiles: &[ActivationProfile; 4], joint: Joint, t_ms: f64) -> f64 {
    let (flex, ext) = flexor_extensor(joint);
    let f = latest_start(&profiles[flex.index()], t_ms);
    let e = latest_start(&profiles[ext.index()], t_ms);
    match (f, e) {
        (None, _) => 0.0,
        (Some(fs), Some(es)) if es > fs => HOLD_ANGLE_DEG * (1.0 - plant::min_jerk((t_ms - es) / MOVE_MS)),
        (Some(fs), _) => HOLD_ANGLE_DEG * plant::min_jerk((t_ms - fs) / MOVE_MS),
    }
}

fn chunk_seed(seed: u64, k: u64) -> u64 {
    seed ^ (k + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

pub struct Engine {
    scenario: Scenario,
    latency: LatencyConfig,
    fsm: MotionFsm,
    plant: PlantConfig,
    classifier: Box<dyn Classifier>,
    profiles: [ActivationProfile; 4],
    filter: FilterSpec,
    window_ms: f64,
    horizon_us: u64,
    now_us: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<Queued>>,
    rng: ChaCha8Rng,
    emg: [Vec<f64>; 4],
    state: FsmState,
    edge: EdgeDetector,
    pams: [PamState; 3],
    directive: MotionCommand,
    arrived: [bool; 3],
    plant_us: u64,
    last_probs: [ClassProbs; 4],
    frame_sample: usize,
    timeline: Timeline,
    record: bool,
    frames: Vec<TelemetryFrame>,
}

impl Engine {
    /// Engine bounded by the scenario duration, recording a timeline.
    pub fn new(scenario: Scenario, source: &ClassifierSource, plant: PlantConfig) -> Result<Self, RtError> {
        let horizon = ms_to_us(scenario.duration_ms);
        Self::build(scenario, source, plant, horizon, true)
    }

    /// Unbounded engine for live service; keeps no timeline.
    pub fn live(scenario: Scenario, source: &ClassifierSource, plant: PlantConfig) -> Result<Self, RtError> {
        Self::build(scenario, source, plant, u64::MAX, false)
    }

    fn build(
        scenario: Scenario,
        source: &ClassifierSource,
        mut plant: PlantConfig,
        horizon_us: u64,
        record: bool,
    ) -> Result<Self, RtError> {
        scenario.validate()?;
        let latency = scenario.latency;
        plant.pam.actuation_delay_ms = latency.pam_actuation_ms;
        let profiles = scenario.profiles();
        let classifier = source.build(profiles.clone())?;
        let fsm = MotionFsm::new(scenario.fsm);
        let uniform = ClassProbs::from_slice(&[1.0, 0.0, 0.0]);
        let mut e = Self {
            latency,
            fsm,
            plant,
            classifier,
            profiles,
            filter: FilterSpec::default(),
            window_ms: DEFAULT_WINDOW_MS,
            horizon_us,
            now_us: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed ^ 0x5EED_C10D),
            emg: Default::default(),
            state: FsmState::Rest,
            edge: EdgeDetector::new(),
            pams: [PamState::default(); 3],
            directive: MotionCommand::hold_all(),
            arrived: [false; 3],
            plant_us: 0,
            last_probs: [uniform; 4],
            frame_sample: 0,
            timeline: Timeline::new(latency),
            record,
            frames: Vec::new(),
            scenario,
        };
        for (i, p) in e.profiles.clone().iter().enumerate() {
            for ev in &p.events {
                e.schedule(ms_to_us(ev.start_ms), Pending::Onset(Muscle::ALL[i]));
            }
        }
        for c in e.scenario.commands.clone() {
            let issued = ms_to_us(c.t_ms);
            e.schedule(
                issued + ms_to_us(e.latency.cloud_to_driver_ms),
                Pending::Operator {
                    command: c.command,
                    issued_us: issued,
                },
            );
        }
        e.schedule(ms_to_us(e.window_ms), Pending::EpochReady(0));
        e.schedule(0, Pending::PlantTick);
        if e.scenario.record_emg && record {
            e.schedule(0, Pending::EmgTick);
        }
        e.schedule(ms_to_us(TELEMETRY_PERIOD_MS), Pending::Telemetry);
        Ok(e)
    }

    fn schedule(&mut self, t_us: u64, ev: Pending) {
        if t_us > self.horizon_us {
            return;
        }
        self.seq += 1;
        self.queue.push(Reverse(Queued { t_us, seq: self.seq, ev }));
    }

    fn emit(&mut self, kind: EventKind) {
        if self.record {
            self.timeline.push(self.now_us, kind);
        }
    }

    pub fn now_ms(&self) -> f64 {
        us_to_ms(self.now_us)
    }

    pub fn state(&self) -> FsmState {
        self.state
    }

    pub fn pressures(&self) -> [f64; 3] {
        [self.pams[0].pressure_psi, self.pams[1].pressure_psi, self.pams[2].pressure_psi]
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Processes every event up to and including `t_us`.
    pub fn run_until(&mut self, t_us: u64) -> Result<(), RtError> {
        while let Some(Reverse(top)) = self.queue.peek() {
            if top.t_us > t_us {
                break;
            }
            let Reverse(q) = self.queue.pop().expect("peeked");
            self.now_us = q.t_us;
            self.handle(q.ev)?;
        }
        self.now_us = self.now_us.max(t_us.min(self.horizon_us));
        Ok(())
    }

    /// Queues an operator command issued now; it reaches the driver after
    /// the cloud-to-driver delay.
    pub fn submit(&mut self, command: ManualCommand) -> Result<(), RtError> {
        self.fsm.manual_override(self.state, command)?;
        let issued = self.now_us;
        self.schedule(
            issued + ms_to_us(self.latency.cloud_to_driver_ms),
            Pending::Operator { command, issued_us: issued },
        );
        Ok(())
    }

    /// Telemetry frames produced since the previous call.
    pub fn drain_frames(&mut self) -> Vec<TelemetryFrame> {
        std::mem::take(&mut self.frames)
    }

    pub fn finish(self) -> Timeline {
        self.timeline
    }

    fn sample_index(&self, t_us: u64) -> usize {
        (us_to_ms(t_us) * self.scenario.fs / 1000.0).round() as usize
    }

    fn ensure_emg(&mut self, n: usize) -> Result<(), RtError> {
        let fs = self.scenario.fs;
        let chunk = (CHUNK_MS * fs / 1000.0).round() as usize;
        while self.emg[0].len() < n {
            let k = (self.emg[0].len() / chunk) as u64;
            let t0 = k as f64 * CHUNK_MS;
            let noise = NoiseConfig {
                baseline_sigma_mv: self.scenario.baseline_sigma_mv,
                powerline_amp_mv: self.scenario.powerline_amp_mv,
                seed: chunk_seed(self.scenario.seed, k),
            };
            for m in Muscle::ALL {
                let env: Vec<f64> = (0..chunk)
                    .map(|i| self.profiles[m.index()].intensity_at(t0 + i as f64 * 1000.0 / fs))
                    .collect();
                let mut tr = synth::synth_from_envelope(&env, m, fs, &noise, FULL_SCALE_MV)?;
                // Keep the power-line phase continuous across chunks.
                if self.scenario.powerline_amp_mv > 0.0 {
                    let w = 2.0 * std::f64::consts::PI * synth::POWERLINE_HZ / fs;
                    let base = k as usize * chunk;
                    for (i, v) in tr.samples.iter_mut().enumerate() {
                        *v += self.scenario.powerline_amp_mv * ((w * (base + i) as f64).sin() - (w * i as f64).sin());
                    }
                }
                self.emg[m.index()].extend(tr.samples);
            }
        }
        Ok(())
    }

    fn handle(&mut self, ev: Pending) -> Result<(), RtError> {
        match ev {
            Pending::Onset(muscle) => self.emit(EventKind::IntentOnset { muscle }),
            Pending::EpochReady(k) => self.on_epoch(k)?,
            Pending::CloudArrive {
                epoch,
                ready_us,
                windows,
                start_ms,
                end_ms,
            } => {
                let mut probs = self.last_probs;
                for m in Muscle::ALL {
                    probs[m.index()] = self.classifier.classify(&WindowInput {
                        muscle: m,
                        values: &windows[m.index()],
                        start_ms,
                        end_ms,
                    })?;
                }
                let inference = self.latency.sample_inference_us(&mut self.rng);
                self.schedule(
                    self.now_us + inference,
                    Pending::ClassDone {
                        epoch,
                        ready_us,
                        arrived_us: self.now_us,
                        probs,
                    },
                );
            }
            Pending::ClassDone {
                epoch,
                ready_us,
                arrived_us,
                probs,
            } => {
                let classes = probs.map(|p| p.argmax());
                self.last_probs = probs;
                self.emit(EventKind::ClassResult {
                    epoch,
                    ready_us,
                    arrived_us,
                    classes,
                    probs,
                });
                self.schedule(
                    self.now_us + ms_to_us(self.latency.cloud_to_driver_ms),
                    Pending::DriverClasses { epoch, classes },
                );
            }
            Pending::DriverClasses { epoch, classes } => {
                let v = MuscleClassVector {
                    classes,
                    t_ms: (self.now_us / 1000),
                };
                let input = self.edge.feed(&v).input_class();
                if self.state.is_manual() {
                    return Ok(());
                }
                let (next, cmd) = self.fsm.step_input(self.state, input);
                self.transition(next, &input.label(), Some(epoch));
                self.schedule_switch(cmd, Some(epoch));
            }
            Pending::ValveSwitch {
                command,
                epoch,
                received_us,
            } => self.apply(command, epoch, received_us)?,
            Pending::Operator { command, issued_us } => {
                self.emit(EventKind::OperatorCommand { command, issued_us });
                if let Ok((next, cmd)) = self.fsm.manual_override(self.state, command) {
                    let label = serde_json::to_value(command)
                        .ok()
                        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(String::from))
                        .unwrap_or_default();
                    self.transition(next, &label, None);
                    self.schedule_switch(cmd, None);
                }
            }
            Pending::PlantTick => {
                self.advance_plant(self.now_us)?;
                self.check_settled()?;
                self.schedule(self.now_us + ms_to_us(PLANT_TICK_MS), Pending::PlantTick);
            }
            Pending::EmgTick => {
                let i = self.sample_index(self.now_us);
                self.ensure_emg(i + 1)?;
                for m in Muscle::ALL {
                    let mv = self.emg[m.index()][i];
                    self.emit(EventKind::EmgSample { muscle: m, mv });
                }
                self.schedule(self.now_us + ms_to_us(EMG_RECORD_PERIOD_MS), Pending::EmgTick);
            }
            Pending::Telemetry => {
                self.advance_plant(self.now_us)?;
                let frame = self.frame()?;
                self.emit(EventKind::Telemetry { frame: frame.clone() });
                self.frames.push(frame);
                self.schedule(self.now_us + ms_to_us(TELEMETRY_PERIOD_MS), Pending::Telemetry);
            }
        }
        Ok(())
    }

    fn on_epoch(&mut self, k: u64) -> Result<(), RtError> {
        let fs = self.scenario.fs;
        let len = (self.window_ms * fs / 1000.0).round() as usize;
        let end = self.sample_index(self.now_us);
        let start = end - len;
        let margin = (CONDITION_MARGIN_MS * fs / 1000.0).round() as usize;
        let from = start.saturating_sub(margin);
        self.ensure_emg(end)?;
        let mut windows: [Vec<f64>; 4] = Default::default();
        for m in Muscle::ALL {
            let raw = EmgTrace::new(m, fs, self.emg[m.index()][from..end].to_vec(), from as f64 * 1000.0 / fs);
            let cond = dsp::condition(&raw, &self.filter)?;
            windows[m.index()] = dsp::scale(&cond.samples[start - from..]);
        }
        let start_ms = start as f64 * 1000.0 / fs;
        let end_ms = start_ms + self.window_ms;
        self.emit(EventKind::EpochReady {
            epoch: k,
            window_start_ms: start_ms,
            window_end_ms: end_ms,
        });
        let ready = self.now_us;
        self.schedule(
            ready + ms_to_us(self.latency.sensor_to_cloud_ms),
            Pending::CloudArrive {
                epoch: k,
                ready_us: ready,
                windows: Box::new(windows),
                start_ms,
                end_ms,
            },
        );
        self.schedule(ready + ms_to_us(self.latency.window_stride_ms), Pending::EpochReady(k + 1));
        Ok(())
    }

    fn transition(&mut self, next: FsmState, input: &str, epoch: Option<u64>) {
        if next != self.state {
            self.emit(EventKind::FsmTransition {
                from: self.state,
                to: next,
                input: input.to_string(),
                epoch,
            });
            self.state = next;
        }
    }

    fn schedule_switch(&mut self, command: MotionCommand, epoch: Option<u64>) {
        let received = self.now_us;
        self.schedule(
            received + ms_to_us(self.latency.valve_response_ms),
            Pending::ValveSwitch {
                command,
                epoch,
                received_us: received,
            },
        );
    }

    fn valve_for(&self, pam: PamId, d: PamDirective) -> Valve {
        match d {
            PamDirective::Hold => Valve::Closed,
            PamDirective::Vent => Valve::Vent,
            PamDirective::Pump { target_psi } => {
                if self.pams[pam.index()].pressure_psi > target_psi + REGULATION_BAND_PSI {
                    Valve::Vent
                } else {
                    Valve::Fill
                }
            }
        }
    }

    fn apply(&mut self, command: MotionCommand, epoch: Option<u64>, received_us: u64) -> Result<(), RtError> {
        self.advance_plant(self.now_us)?;
        for pam in PamId::ALL {
            let d = command.get(pam);
            if d != self.directive.get(pam) {
                let valve = self.valve_for(pam, d);
                let target_psi = match d {
                    PamDirective::Pump { target_psi } => Some(target_psi),
                    _ => None,
                };
                self.arrived[pam.index()] = false;
                self.emit(EventKind::ValveCmd {
                    pam,
                    valve,
                    target_psi,
                    epoch,
                    received_us,
                });
            }
        }
        self.directive = command;
        Ok(())
    }

    fn joint_load_n(&self, pam: PamId) -> Result<f64, RtError> {
        let joint = pam.joint();
        let angle = joint_angle(&self.profiles, joint, us_to_ms(self.plant_us));
        let req = plant::required_torque(&JointState::at(joint, angle, self.scenario.load_kg), &self.plant)?;
        let sharing = FLEX_PAMS
            .iter()
            .filter(|p| p.joint() == joint && self.pams[p.index()].pressure_psi > 0.0)
            .count()
            .max(1);
        Ok(req / (self.plant.cable_radius_mm.get(joint) / 1000.0) / sharing as f64)
    }

    fn advance_plant(&mut self, to_us: u64) -> Result<(), RtError> {
        if to_us <= self.plant_us {
            return Ok(());
        }
        let dt = us_to_ms(to_us - self.plant_us);
        let mut next = self.pams;
        for pam in PamId::ALL {
            let d = self.directive.get(pam);
            let valve = self.valve_for(pam, d);
            let supply = match d {
                PamDirective::Pump { target_psi } => target_psi,
                _ => 0.0,
            };
            let load = self.joint_load_n(pam)?;
            next[pam.index()] = pam::update(&self.pams[pam.index()], valve, supply, load, dt, &self.plant.pam);
        }
        self.pams = next;
        self.plant_us = to_us;
        Ok(())
    }

    fn check_settled(&mut self) -> Result<(), RtError> {
        for pam in PamId::ALL {
            if let PamDirective::Pump { target_psi } = self.directive.get(pam) {
                let p = self.pams[pam.index()].pressure_psi;
                if !self.arrived[pam.index()] && (p - target_psi).abs() <= ARRIVED_PSI {
                    self.arrived[pam.index()] = true;
                    self.emit(EventKind::PamSettled { pam, pressure_psi: p });
                }
            }
        }
        let venting = matches!(
            self.state,
            FsmState::ElbowVenting
                | FsmState::ShoulderVenting
                | FsmState::EmergencyVent
                | FsmState::ElbowExtAssist
                | FsmState::ShoulderExtAssist
        );
        if !venting || self.directive != self.fsm.steady(self.state) {
            return Ok(());
        }
        let vented: Vec<PamId> = PamId::ALL
            .into_iter()
            .filter(|p| self.directive.get(*p) == PamDirective::Vent)
            .collect();
        if vented.iter().all(|p| self.pams[p.index()].pressure_psi <= SETTLE_PSI) {
            for &pam in &vented {
                let pressure_psi = self.pams[pam.index()].pressure_psi;
                self.emit(EventKind::PamSettled { pam, pressure_psi });
            }
            let input = InputClass::PamsSettled;
            let (next, cmd) = self.fsm.step_input(self.state, input);
            self.transition(next, &input.label(), None);
            self.schedule_switch(cmd, None);
        }
        Ok(())
    }

    fn frame(&mut self) -> Result<TelemetryFrame, RtError> {
        let end = self.sample_index(self.now_us);
        self.ensure_emg(end)?;
        let emg = Muscle::ALL
            .iter()
            .map(|&m| EmgChunk {
                muscle: m,
                samples_mv: self.emg[m.index()][self.frame_sample.min(end)..end]
                    .iter()
                    .step_by(TELEMETRY_DECIMATION)
                    .copied()
                    .collect(),
            })
            .collect();
        self.frame_sample = end;
        let t_ms = self.now_ms();
        Ok(TelemetryFrame {
            t_ms,
            pressures_psi: PamPressures::from_array(self.pressures()),
            fsm_state: self.state,
            class_probs: Muscle::ALL
                .iter()
                .map(|&m| MuscleProbs {
                    muscle: m,
                    probs: self.last_probs[m.index()],
                })
                .collect(),
            emg,
            motion: telemetry::motion_label(self.state).map(String::from),
            joint_angles_deg: PerJoint {
                elbow: joint_angle(&self.profiles, Joint::Elbow, t_ms),
                shoulder: joint_angle(&self.profiles, Joint::Shoulder, t_ms),
            },
        })
    }
}

/// Runs the scenario to its end and returns the timeline.
pub fn run_scenario(scenario: &Scenario, source: &ClassifierSource, plant: &PlantConfig) -> Result<Timeline, RtError> {
    let mut e = Engine::new(scenario.clone(), source, plant.clone())?;
    let end = ms_to_us(scenario.duration_ms);
    e.run_until(end)?;
    Ok(e.finish())
}
