//! Service boundary: the v1 wire protocol, a TCP telemetry and command
//! service around a live simulation, and the `exo` command line.

pub mod cli;
pub mod client;
pub mod framing;
pub mod protocol;
pub mod server;

use thiserror::Error;

pub use client::Client;
pub use protocol::{decode, encode, CommandKind, Message, OperatorCommand, ProtocolError, Role};
pub use server::{serve, ServeConfig, ServerHandle};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("cannot bind {0}: {1}")]
    Bind(String, std::io::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Runtime(#[from] exo_rt::RtError),
    #[error("connection closed")]
    Closed,
    #[error("simulation thread panicked")]
    Thread,
}
