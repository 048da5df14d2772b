//! Totally ordered record of a run, exportable as JSON lines.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use exo_core::fsm::{FsmState, ManualCommand};
use exo_core::pam::{PamId, Valve};
use exo_core::{Class, Muscle};
use exo_intent::ClassProbs;

use crate::latency::LatencyConfig;
use crate::telemetry::TelemetryFrame;
use crate::RtError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Ground-truth start of a scripted contraction.
    IntentOnset { muscle: Muscle },
    EmgSample { muscle: Muscle, mv: f64 },
    /// A window closed at the sensor.
    EpochReady { epoch: u64, window_start_ms: f64, window_end_ms: f64 },
    /// Inference finished in the cloud.
    ClassResult {
        epoch: u64,
        ready_us: u64,
        arrived_us: u64,
        classes: [Class; 4],
        probs: [ClassProbs; 4],
    },
    /// Operator command reached the driver.
    OperatorCommand { command: ManualCommand, issued_us: u64 },
    FsmTransition {
        from: FsmState,
        to: FsmState,
        input: String,
        epoch: Option<u64>,
    },
    /// A valve changed state at the driver.
    ValveCmd {
        pam: PamId,
        valve: Valve,
        target_psi: Option<f64>,
        /// Epoch whose classification caused the change.
        epoch: Option<u64>,
        received_us: u64,
    },
    PamSettled { pam: PamId, pressure_psi: f64 },
    Telemetry { frame: TelemetryFrame },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub t_us: u64,
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub latency: LatencyConfig,
    pub events: Vec<TimelineEvent>,
}

impl Timeline {
    pub fn new(latency: LatencyConfig) -> Self {
        Self {
            latency,
            events: Vec::new(),
        }
    }

    /// Appends an event at `t_us` with the next sequence number.
    pub fn push(&mut self, t_us: u64, kind: EventKind) {
        let seq = self.events.len() as u64;
        self.events.push(TimelineEvent { t_us, seq, kind });
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), RtError> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String, RtError> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        String::from_utf8(buf).map_err(|e| RtError::Timeline(e.to_string()))
    }

    pub fn read_jsonl<R: BufRead>(input: R, latency: LatencyConfig) -> Result<Self, RtError> {
        let mut events = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line)?);
        }
        Ok(Self { latency, events })
    }

    /// Checks the (t, seq) total order.
    pub fn is_ordered(&self) -> bool {
        self.events
            .windows(2)
            .all(|w| (w[0].t_us, w[0].seq) < (w[1].t_us, w[1].seq))
    }

    pub fn count(&self, pred: impl Fn(&EventKind) -> bool) -> usize {
        self.events.iter().filter(|e| pred(&e.kind)).count()
    }

    pub fn telemetry(&self) -> impl Iterator<Item = &TelemetryFrame> {
        self.events.iter().filter_map(|e| match &e.kind {
            EventKind::Telemetry { frame } => Some(frame),
            _ => None,
        })
    }

    /// States entered, in order.
    pub fn state_trajectory(&self) -> Vec<FsmState> {
        self.events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::FsmTransition { to, .. } => Some(*to),
                _ => None,
            })
            .collect()
    }
}
