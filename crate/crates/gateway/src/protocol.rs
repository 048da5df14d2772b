//! Wire protocol v1.
//!
//! Every message is one JSON object `{"v": 1, "type": ..., "body": {...}}`
//! where `type` is `hello`, `telemetry`, `command` or `error`. Unknown
//! fields are rejected at every level, the version tag is mandatory, and
//! the encoder refuses messages that break a value invariant.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use exo_core::fsm::ManualCommand;
use exo_core::pam::{PamId, AUTO_MAX_PSI, RELIEF_PSI};
use exo_rt::TelemetryFrame;

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("missing version tag")]
    MissingVersion,
    #[error("unsupported protocol version {0}")]
    Version(u64),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// May issue commands; one at a time.
    Control,
    /// Read-only.
    Observe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommandKind {
    SetPressure { pam: PamId, psi: f64 },
    PauseAll,
    VentAll,
    /// Hand control back to the classifier.
    ResumeAuto,
    StartScenario { name: String },
}

impl CommandKind {
    /// Equivalent state-machine command; scenario control has none.
    pub fn manual(&self) -> Option<ManualCommand> {
        match *self {
            CommandKind::SetPressure { pam, psi } => Some(ManualCommand::SetPressure { pam, psi }),
            CommandKind::PauseAll => Some(ManualCommand::PauseAll),
            CommandKind::VentAll => Some(ManualCommand::VentAll),
            CommandKind::ResumeAuto => Some(ManualCommand::Release),
            CommandKind::StartScenario { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorCommand {
    pub command: CommandKind,
    /// Simulation time at which the gateway accepted the command; clients
    /// leave it unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issued_t_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    Version,
    /// First message was not a hello, or a hello was repeated.
    Handshake,
    /// Observers may not issue commands.
    ReadOnly,
    /// Another client already holds control.
    ControlTaken,
    Rejected,
    UnknownScenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello(Hello),
    Telemetry(Box<TelemetryFrame>),
    /// From a control client; echoed back once accepted.
    Command(OperatorCommand),
    Error(ErrorBody),
}

impl Message {
    pub fn type_tag(&self) -> &'static str {
        match self {
            Message::Hello(_) => "hello",
            Message::Telemetry(_) => "telemetry",
            Message::Command(_) => "command",
            Message::Error(_) => "error",
        }
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Message::Error(ErrorBody {
            code,
            message: message.into(),
        })
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        match self {
            Message::Telemetry(f) => {
                for (name, p) in ["elbow", "shoulder", "shoulder_aux"].iter().zip(f.pressures_psi.as_array()) {
                    if !(0.0..=RELIEF_PSI).contains(&p) {
                        return Err(ProtocolError::Invariant(format!("{name} pressure {p} outside [0, {RELIEF_PSI}]")));
                    }
                }
                if !f.t_ms.is_finite() || f.t_ms < 0.0 {
                    return Err(ProtocolError::Invariant(format!("timestamp {}", f.t_ms)));
                }
                Ok(())
            }
            Message::Command(c) => match &c.command {
                CommandKind::SetPressure { psi, .. } if !(0.0..=AUTO_MAX_PSI).contains(psi) => Err(
                    ProtocolError::Invariant(format!("set_pressure {psi} outside [0, {AUTO_MAX_PSI}]")),
                ),
                CommandKind::StartScenario { name } if name.is_empty() => {
                    Err(ProtocolError::Invariant("empty scenario name".into()))
                }
                _ => Ok(()),
            },
            Message::Hello(_) | Message::Error(_) => Ok(()),
        }
    }
}

fn schema(e: impl std::fmt::Display) -> ProtocolError {
    ProtocolError::Schema(e.to_string())
}

/// Serializes a message after checking its invariants.
pub fn encode(msg: &Message) -> Result<Vec<u8>, ProtocolError> {
    msg.validate()?;
    let body = body_value(msg)?;
    let mut obj = Map::new();
    obj.insert("v".into(), Value::from(PROTOCOL_VERSION));
    obj.insert("type".into(), Value::from(msg.type_tag()));
    obj.insert("body".into(), body);
    serde_json::to_vec(&Value::Object(obj)).map_err(schema)
}

/// Parses and validates one message.
pub fn decode(bytes: &[u8]) -> Result<Message, ProtocolError> {
    let value: Value = serde_json::from_slice(bytes).map_err(schema)?;
    let Value::Object(mut obj) = value else {
        return Err(ProtocolError::Schema("message is not an object".into()));
    };
    let v = obj.remove("v").ok_or(ProtocolError::MissingVersion)?;
    let v = v.as_u64().ok_or_else(|| ProtocolError::Schema(format!("version tag {v} is not an integer")))?;
    if v != PROTOCOL_VERSION {
        return Err(ProtocolError::Version(v));
    }
    let tag = obj.remove("type").ok_or_else(|| ProtocolError::Schema("missing type".into()))?;
    let body = obj.remove("body").ok_or_else(|| ProtocolError::Schema("missing body".into()))?;
    if let Some(k) = obj.keys().next() {
        return Err(ProtocolError::Schema(format!("unknown field `{k}`")));
    }
    let parsed = body.clone();
    let msg = match tag.as_str() {
        Some("hello") => Message::Hello(serde_json::from_value(parsed).map_err(schema)?),
        Some("telemetry") => Message::Telemetry(Box::new(serde_json::from_value(parsed).map_err(schema)?)),
        Some("command") => Message::Command(serde_json::from_value(parsed).map_err(schema)?),
        Some("error") => Message::Error(serde_json::from_value(parsed).map_err(schema)?),
        _ => return Err(ProtocolError::Schema(format!("unknown message type {tag}"))),
    };
    if let Some(path) = unknown_key(&body, &body_value(&msg)?, String::new()) {
        return Err(ProtocolError::Schema(format!("unknown field `{path}`")));
    }
    msg.validate()?;
    Ok(msg)
}

fn body_value(msg: &Message) -> Result<Value, ProtocolError> {
    match msg {
        Message::Hello(h) => serde_json::to_value(h),
        Message::Telemetry(f) => serde_json::to_value(f),
        Message::Command(c) => serde_json::to_value(c),
        Message::Error(e) => serde_json::to_value(e),
    }
    .map_err(schema)
}

/// First key of `received` that the canonical encoding does not contain.
/// Unit enum variants ignore extra fields when deserialized, so this
/// catches what the derived decoders let through.
fn unknown_key(received: &Value, canonical: &Value, path: String) -> Option<String> {
    match (received, canonical) {
        (Value::Object(r), Value::Object(c)) => r.iter().find_map(|(k, v)| {
            let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
            match c.get(k) {
                Some(cv) => unknown_key(v, cv, p),
                None if v.is_null() => None,
                None => Some(p),
            }
        }),
        (Value::Array(r), Value::Array(c)) => r
            .iter()
            .zip(c)
            .enumerate()
            .find_map(|(i, (rv, cv))| unknown_key(rv, cv, format!("{path}[{i}]"))),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmd(kind: CommandKind) -> Message {
        Message::Command(OperatorCommand {
            command: kind,
            issued_t_ms: None,
        })
    }

    #[test]
    fn command_wire_shape() {
        let bytes = encode(&cmd(CommandKind::SetPressure {
            pam: PamId::Elbow,
            psi: 45.0,
        }))
        .unwrap();
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"v":1,"type":"command","body":{"command":{"kind":"set_pressure","pam":"elbow","psi":45.0}}})
        );
    }

    #[test]
    fn missing_version_rejected() {
        let r = decode(br#"{"type":"hello","body":{"role":"observe"}}"#);
        assert_eq!(r, Err(ProtocolError::MissingVersion));
    }

    #[test]
    fn wrong_version_rejected() {
        let r = decode(br#"{"v":2,"type":"hello","body":{"role":"observe"}}"#);
        assert_eq!(r, Err(ProtocolError::Version(2)));
    }

    #[test]
    fn unknown_fields_rejected() {
        for bad in [
            &br#"{"v":1,"type":"hello","body":{"role":"observe"},"x":1}"#[..],
            br#"{"v":1,"type":"hello","body":{"role":"observe","x":1}}"#,
            br#"{"v":1,"type":"command","body":{"command":{"kind":"vent_all","x":1}}}"#,
            br#"{"v":1,"type":"command","body":{"command":{"kind":"launch"}}}"#,
            br#"{"v":1,"type":"shout","body":{}}"#,
            br#"[1,2]"#,
        ] {
            assert!(matches!(decode(bad), Err(ProtocolError::Schema(_))), "{}", String::from_utf8_lossy(bad));
        }
    }

    #[test]
    fn pressure_guards() {
        assert!(matches!(
            encode(&cmd(CommandKind::SetPressure {
                pam: PamId::Shoulder,
                psi: 61.0
            })),
            Err(ProtocolError::Invariant(_))
        ));
        let r = decode(br#"{"v":1,"type":"command","body":{"command":{"kind":"set_pressure","pam":"elbow","psi":-1}}}"#);
        assert!(matches!(r, Err(ProtocolError::Invariant(_))));
    }

    #[test]
    fn resume_maps_to_release() {
        assert_eq!(CommandKind::ResumeAuto.manual(), Some(ManualCommand::Release));
        assert_eq!(CommandKind::StartScenario { name: "demo".into() }.manual(), None);
    }
}
