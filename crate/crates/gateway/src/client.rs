//! Blocking protocol client, used by tests and tooling.

use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use exo_rt::TelemetryFrame;

use crate::framing::{read_frame, write_frame};
use crate::protocol::{decode, encode, CommandKind, ErrorBody, Hello, Message, OperatorCommand, Role};
use crate::GatewayError;

pub struct Client {
    stream: TcpStream,
}

impl Client {
    /// Connects and sends a hello; returns the server's answer to it.
    pub fn connect(addr: impl ToSocketAddrs, role: Role) -> Result<(Self, Message), GatewayError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(Some(Duration::from_secs(10)))?;
        let mut c = Self { stream };
        c.send(&Message::Hello(Hello { role, client: None }))?;
        let reply = c.recv()?.ok_or(GatewayError::Closed)?;
        Ok((c, reply))
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), GatewayError> {
        write_frame(&mut self.stream, &encode(msg)?)?;
        Ok(())
    }

    /// Sends raw payload bytes as one frame, bypassing the encoder.
    pub fn send_raw(&mut self, payload: &[u8]) -> Result<(), GatewayError> {
        write_frame(&mut self.stream, payload)?;
        Ok(())
    }

    pub fn command(&mut self, command: CommandKind) -> Result<(), GatewayError> {
        self.send(&Message::Command(OperatorCommand {
            command,
            issued_t_ms: None,
        }))
    }

    /// Next message, or `None` once the server closed the connection.
    pub fn recv(&mut self) -> Result<Option<Message>, GatewayError> {
        match read_frame(&mut self.stream)? {
            Some(bytes) => Ok(Some(decode(&bytes)?)),
            None => Ok(None),
        }
    }

    /// Skips telemetry until a reply (command echo or error) arrives.
    pub fn reply(&mut self) -> Result<Result<OperatorCommand, ErrorBody>, GatewayError> {
        loop {
            match self.recv()?.ok_or(GatewayError::Closed)? {
                Message::Command(c) => return Ok(Ok(c)),
                Message::Error(e) => return Ok(Err(e)),
                _ => {}
            }
        }
    }

    /// Next telemetry frame, skipping anything else.
    pub fn telemetry(&mut self) -> Result<TelemetryFrame, GatewayError> {
        loop {
            if let Message::Telemetry(f) = self.recv()?.ok_or(GatewayError::Closed)? {
                return Ok(*f);
            }
        }
    }
}
