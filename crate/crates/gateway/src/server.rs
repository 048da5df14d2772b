//! TCP service around a live simulation.
//!
//! One simulation thread owns the engine and every session record. Client
//! connections talk to it only through a request queue, and it answers
//! through one outbound queue per client, drained by that client's writer
//! thread. Telemetry therefore reaches each client in publication order.

use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};

use exo_core::plant::PlantConfig;
use exo_rt::{ms_to_us, ClassifierSource, Engine, Scenario};

use crate::framing::{read_frame, write_frame};
use crate::protocol::{decode, encode, CommandKind, ErrorCode, Hello, Message, OperatorCommand, ProtocolError, Role};
use crate::GatewayError;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub bind: String,
    pub scenario: Scenario,
    pub plant: PlantConfig,
    pub source: ClassifierSource,
    /// Simulated seconds per wall-clock second; non-finite or non-positive
    /// runs unpaced.
    pub speed: f64,
    /// Simulation advance per loop iteration, ms.
    pub tick_ms: f64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:7878".into(),
            scenario: Scenario::demo(),
            plant: PlantConfig::default(),
            source: ClassifierSource::Oracle,
            speed: 1.0,
            tick_ms: 10.0,
        }
    }
}

enum Request {
    Join {
        hello: Hello,
        out: Sender<Vec<u8>>,
        reply: Sender<Option<u64>>,
    },
    Command {
        client: u64,
        command: OperatorCommand,
    },
    Leave {
        client: u64,
    },
}

struct Session {
    id: u64,
    role: Role,
    out: Sender<Vec<u8>>,
}

fn send(out: &Sender<Vec<u8>>, msg: &Message) -> bool {
    match encode(msg) {
        Ok(bytes) => out.send(bytes).is_ok(),
        Err(e) => {
            warn!("dropping outbound {}: {e}", msg.type_tag());
            true
        }
    }
}

struct Sim {
    engine: Engine,
    source: ClassifierSource,
    plant: PlantConfig,
    /// Simulation time at which the current engine started, ms.
    base_ms: f64,
    sessions: Vec<Session>,
    control: Option<u64>,
    next_id: u64,
}

impl Sim {
    fn now_ms(&self) -> f64 {
        self.base_ms + self.engine.now_ms()
    }

    fn handle(&mut self, req: Request) {
        match req {
            Request::Join { hello, out, reply } => {
                if hello.role == Role::Control && self.control.is_some() {
                    send(&out, &Message::error(ErrorCode::ControlTaken, "another client holds control"));
                    let _ = reply.send(None);
                    return;
                }
                let id = self.next_id;
                self.next_id += 1;
                if hello.role == Role::Control {
                    self.control = Some(id);
                }
                send(&out, &Message::Hello(Hello { role: hello.role, client: None }));
                info!("client {id} joined as {:?}", hello.role);
                self.sessions.push(Session { id, role: hello.role, out });
                let _ = reply.send(Some(id));
            }
            Request::Leave { client } => {
                self.sessions.retain(|s| s.id != client);
                if self.control == Some(client) {
                    self.control = None;
                }
                info!("client {client} left");
            }
            Request::Command { client, command } => {
                let Some(session) = self.sessions.iter().find(|s| s.id == client) else {
                    return;
                };
                let out = session.out.clone();
                let reply = if session.role != Role::Control || self.control != Some(client) {
                    Message::error(ErrorCode::ReadOnly, "observer sessions cannot issue commands")
                } else {
                    self.apply(&command.command)
                        .map(|()| {
                            Message::Command(OperatorCommand {
                                issued_t_ms: Some(self.now_ms()),
                                ..command
                            })
                        })
                        .unwrap_or_else(|e| e)
                };
                send(&out, &reply);
            }
        }
    }

    fn apply(&mut self, cmd: &CommandKind) -> Result<(), Message> {
        if let Some(manual) = cmd.manual() {
            return self
                .engine
                .submit(manual)
                .map_err(|e| Message::error(ErrorCode::Rejected, e.to_string()));
        }
        let CommandKind::StartScenario { name } = cmd else {
            return Ok(());
        };
        let scenario = Scenario::builtin(name)
            .ok_or_else(|| Message::error(ErrorCode::UnknownScenario, format!("no scenario named {name}")))?;
        let engine = Engine::live(scenario, &self.source, self.plant.clone())
            .map_err(|e| Message::error(ErrorCode::Rejected, e.to_string()))?;
        self.base_ms = self.now_ms();
        self.engine = engine;
        info!("started scenario {name} at {:.0} ms", self.base_ms);
        Ok(())
    }

    fn publish(&mut self) {
        for mut frame in self.engine.drain_frames() {
            frame.t_ms += self.base_ms;
            let msg = Message::Telemetry(Box::new(frame));
            let bytes = match encode(&msg) {
                Ok(b) => b,
                Err(e) => {
                    warn!("telemetry frame refused: {e}");
                    continue;
                }
            };
            self.sessions.retain(|s| s.out.send(bytes.clone()).is_ok());
            if let Some(c) = self.control {
                if !self.sessions.iter().any(|s| s.id == c) {
                    self.control = None;
                }
            }
        }
    }
}

fn sim_loop(mut sim: Sim, rx: Receiver<Request>, stop: Arc<AtomicBool>, speed: f64, tick_ms: f64) -> Result<(), GatewayError> {
    let paced = speed.is_finite() && speed > 0.0;
    let start = Instant::now();
    let mut virtual_ms = 0.0;
    while !stop.load(Ordering::Relaxed) {
        while let Ok(req) = rx.try_recv() {
            sim.handle(req);
        }
        virtual_ms += tick_ms;
        let target = ms_to_us(sim.engine.now_ms() + tick_ms);
        sim.engine.run_until(target)?;
        sim.publish();
        if paced {
            let due = start + Duration::from_secs_f64(virtual_ms / 1000.0 / speed);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        } else {
            thread::yield_now();
        }
    }
    Ok(())
}

fn write_error(stream: &mut TcpStream, code: ErrorCode, e: impl std::fmt::Display) {
    if let Ok(bytes) = encode(&Message::error(code, e.to_string())) {
        let _ = write_frame(stream, &bytes);
    }
}

fn error_code(e: &ProtocolError) -> ErrorCode {
    match e {
        ProtocolError::Version(_) | ProtocolError::MissingVersion => ErrorCode::Version,
        ProtocolError::Invariant(_) => ErrorCode::Rejected,
        ProtocolError::Schema(_) => ErrorCode::Malformed,
    }
}

fn session(mut stream: TcpStream, requests: Sender<Request>) {
    let hello = match read_frame(&mut stream).map(|f| f.map(|b| decode(&b))) {
        Ok(Some(Ok(Message::Hello(h)))) => h,
        Ok(Some(Ok(other))) => {
            write_error(&mut stream, ErrorCode::Handshake, format!("expected hello, got {}", other.type_tag()));
            return;
        }
        Ok(Some(Err(e))) => {
            write_error(&mut stream, error_code(&e), e);
            return;
        }
        Ok(None) | Err(_) => return,
    };
    let role = hello.role;
    let Ok(mut writer) = stream.try_clone() else {
        return;
    };
    let (out, out_rx) = mpsc::channel::<Vec<u8>>();
    let write_thread = thread::spawn(move || {
        for bytes in out_rx {
            if write_frame(&mut writer, &bytes).is_err() {
                break;
            }
        }
        let _ = writer.shutdown(std::net::Shutdown::Both);
    });
    let (reply_tx, reply_rx) = mpsc::channel();
    let joined = requests
        .send(Request::Join {
            hello,
            out: out.clone(),
            reply: reply_tx,
        })
        .ok()
        .and_then(|()| reply_rx.recv().ok())
        .flatten();
    let Some(id) = joined else {
        drop(out);
        let _ = write_thread.join();
        return;
    };
    loop {
        let frame = match read_frame(&mut stream) {
            Ok(Some(f)) => f,
            Ok(None) | Err(_) => break,
        };
        let reply = match decode(&frame) {
            Err(e) => Some(Message::error(error_code(&e), e.to_string())),
            Ok(Message::Command(_)) if role == Role::Observe => {
                Some(Message::error(ErrorCode::ReadOnly, "observer sessions cannot issue commands"))
            }
            Ok(Message::Command(command)) => {
                if requests.send(Request::Command { client: id, command }).is_err() {
                    break;
                }
                None
            }
            Ok(Message::Hello(_)) => Some(Message::error(ErrorCode::Handshake, "already greeted")),
            Ok(other) => Some(Message::error(
                ErrorCode::Malformed,
                format!("clients may not send {}", other.type_tag()),
            )),
        };
        if let Some(msg) = reply {
            debug!("client {id}: {msg:?}");
            if !send(&out, &msg) {
                break;
            }
        }
    }
    let _ = requests.send(Request::Leave { client: id });
    drop(out);
    let _ = write_thread.join();
}

/// A running service.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    streams: Arc<Mutex<Vec<TcpStream>>>,
    accept: Option<JoinHandle<()>>,
    sim: Option<JoinHandle<Result<(), GatewayError>>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the simulation stops.
    pub fn wait(mut self) -> Result<(), GatewayError> {
        let r = self.sim.take().map(|h| h.join().unwrap_or(Err(GatewayError::Thread)));
        self.shutdown_inner();
        r.unwrap_or(Ok(()))
    }

    pub fn shutdown(mut self) -> Result<(), GatewayError> {
        self.shutdown_inner();
        self.sim.take().map(|h| h.join().unwrap_or(Err(GatewayError::Thread))).unwrap_or(Ok(()))
    }

    fn shutdown_inner(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Ok(streams) = self.streams.lock() {
            for s in streams.iter() {
                let _ = s.shutdown(std::net::Shutdown::Both);
            }
        }
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown_inner();
    }
}

/// Binds and starts the simulation and accept threads.
pub fn serve(cfg: ServeConfig) -> Result<ServerHandle, GatewayError> {
    let listener = TcpListener::bind(&cfg.bind).map_err(|e| GatewayError::Bind(cfg.bind.clone(), e))?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let engine = Engine::live(cfg.scenario.clone(), &cfg.source, cfg.plant.clone())?;
    let sim = Sim {
        engine,
        source: cfg.source.clone(),
        plant: cfg.plant.clone(),
        base_ms: 0.0,
        sessions: Vec::new(),
        control: None,
        next_id: 1,
    };
    let stop = Arc::new(AtomicBool::new(false));
    let (req_tx, req_rx) = mpsc::channel();
    let sim_stop = stop.clone();
    let (speed, tick) = (cfg.speed, cfg.tick_ms.max(1.0));
    let sim_thread = thread::spawn(move || sim_loop(sim, req_rx, sim_stop, speed, tick));

    let streams: Arc<Mutex<Vec<TcpStream>>> = Arc::default();
    let accept_stop = stop.clone();
    let accept_streams = streams.clone();
    let accept = thread::spawn(move || {
        while !accept_stop.load(Ordering::Relaxed) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    debug!("connection from {peer}");
                    if stream.set_nonblocking(false).is_err() {
                        continue;
                    }
                    if let (Ok(clone), Ok(mut list)) = (stream.try_clone(), accept_streams.lock()) {
                        list.push(clone);
                    }
                    let tx = req_tx.clone();
                    thread::spawn(move || session(stream, tx));
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
                Err(e) => {
                    warn!("accept failed: {e}");
                    thread::sleep(Duration::from_millis(10));
                }
            }
        }
    });
    info!("serving on {addr}");
    Ok(ServerHandle {
        addr,
        stop,
        streams,
        accept: Some(accept),
        sim: Some(sim_thread),
    })
}
