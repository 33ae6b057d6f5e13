use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::{decode, encode, BridgeMessage};
use crate::sim::{EgoDecision, EgoPolicy, PolicyFailure, ScenarioConfig, SimError};
use crate::vista::Vista;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "snake_case")]
pub enum Transport {
    /// Spawn `command[0]` with the remaining arguments and talk over its
    /// standard input and output.
    Stdio {
        command: Vec<String>,
    },
    Tcp {
        host: String,
        port: u16,
    },
}

fn default_deadline() -> u64 {
    1000
}
fn default_handshake() -> u64 {
    5000
}

#[derive(Clone, Serialize, Deserialize)]
pub struct AgentConfig {
    pub transport: Transport,
    #[serde(default = "default_deadline")]
    pub tick_deadline_ms: u64,
    #[serde(default = "default_handshake")]
    pub handshake_timeout_ms: u64,
    /// Tracks live sessions so that a supervisor can terminate them.
    #[serde(skip)]
    pub registry: Option<Arc<SessionRegistry>>,
}

impl AgentConfig {
    pub fn new(transport: Transport) -> Self {
        AgentConfig {
            transport,
            tick_deadline_ms: default_deadline(),
            handshake_timeout_ms: default_handshake(),
            registry: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.tick_deadline_ms == 0 || self.handshake_timeout_ms == 0 {
            return Err(SimError::Config("agent deadlines must be positive".into()));
        }
        if let Transport::Stdio { command } = &self.transport {
            if command.is_empty() {
                return Err(SimError::Config("agent command is empty".into()));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for AgentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgentConfig")
            .field("transport", &self.transport)
            .field("tick_deadline_ms", &self.tick_deadline_ms)
            .field("handshake_timeout_ms", &self.handshake_timeout_ms)
            .finish_non_exhaustive()
    }
}

impl PartialEq for AgentConfig {
    fn eq(&self, other: &Self) -> bool {
        self.transport == other.transport
            && self.tick_deadline_ms == other.tick_deadline_ms
            && self.handshake_timeout_ms == other.handshake_timeout_ms
    }
}

#[derive(Clone)]
enum KillHandle {
    Child(Arc<Mutex<Child>>),
    Socket(Arc<TcpStream>),
}

impl KillHandle {
    fn kill(&self) {
        match self {
            KillHandle::Child(c) => {
                let mut c = c.lock().unwrap_or_else(|e| e.into_inner());
                let _ = c.kill();
                let _ = c.wait();
            }
            KillHandle::Socket(s) => {
                let _ = s.shutdown(Shutdown::Both);
            }
        }
    }
}

#[derive(Default)]
struct RegistryState {
    next_id: u64,
    started: u64,
    live: BTreeMap<u64, (String, KillHandle)>,
    killed: Vec<String>,
}

/// Live agent sessions, keyed by the label of the case they serve.
#[derive(Default)]
pub struct SessionRegistry {
    state: Mutex<RegistryState>,
}

impl fmt::Debug for SessionRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionRegistry").field("active", &self.active()).finish()
    }
}

impl SessionRegistry {
    pub fn new() -> Arc<Self> {
        Arc::new(SessionRegistry::default())
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, RegistryState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn register(&self, label: String, handle: KillHandle) -> u64 {
        let mut s = self.lock();
        s.next_id += 1;
        s.started += 1;
        let id = s.next_id;
        s.live.insert(id, (label, handle));
        id
    }

    fn deregister(&self, id: u64) {
        self.lock().live.remove(&id);
    }

    pub fn active(&self) -> usize {
        self.lock().live.len()
    }

    /// Sessions that completed their handshake so far.
    pub fn started(&self) -> u64 {
        self.lock().started
    }

    /// Terminates every live session and returns their labels.
    pub fn kill_all(&self) -> Vec<String> {
        let victims: Vec<(String, KillHandle)> = {
            let mut s = self.lock();
            let v: Vec<_> = std::mem::take(&mut s.live).into_values().collect();
            s.killed.extend(v.iter().map(|(l, _)| l.clone()));
            v
        };
        for (_, h) in &victims {
            h.kill();
        }
        victims.into_iter().map(|(l, _)| l).collect()
    }

    /// Labels of all sessions terminated through this registry.
    pub fn killed(&self) -> Vec<String> {
        self.lock().killed.clone()
    }
}

/// Label under which a run's session is registered.
pub fn session_label(cfg: &ScenarioConfig) -> String {
    let c = &cfg.case;
    match c.x_a {
        Some(x_a) => format!("{} v_e={} x_a={} x_f={}", c.context.kind, c.v_e, x_a, c.x_f),
        None => format!("{} v_e={} x_f={}", c.context.kind, c.v_e, c.x_f),
    }
}

/// An open session with an external agent, usable as the ego policy.
pub struct AgentSession {
    writer: Box<dyn Write + Send>,
    replies: Receiver<io::Result<String>>,
    deadline: Duration,
    kill: KillHandle,
    registration: Option<(Arc<SessionRegistry>, u64)>,
    closed: bool,
}

fn spawn_reader(source: impl Read + Send + 'static) -> Receiver<io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(source);
        loop {
            let mut line = String::new();
            let item = match reader.read_line(&mut line) {
                Ok(0) => Err(io::Error::new(io::ErrorKind::UnexpectedEof, "agent closed its output")),
                Ok(_) => Ok(line),
                Err(e) => Err(e),
            };
            let stop = item.is_err();
            if tx.send(item).is_err() || stop {
                break;
            }
        }
    });
    rx
}

/// Opens a session for one run of `scenario` and completes the handshake.
pub fn connect(agent: &AgentConfig, scenario: &ScenarioConfig) -> Result<AgentSession, SimError> {
    agent.validate()?;
    let handshake = Duration::from_millis(agent.handshake_timeout_ms);
    let session_err = |m: String| SimError::Session(m);
    let (writer, replies, kill): (Box<dyn Write + Send>, _, _) = match &agent.transport {
        Transport::Stdio { command } => {
            let mut child = Command::new(&command[0])
                .args(&command[1..])
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::null())
                .spawn()
                .map_err(|e| session_err(format!("cannot start agent '{}': {e}", command[0])))?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            (Box::new(stdin), spawn_reader(stdout), KillHandle::Child(Arc::new(Mutex::new(child))))
        }
        Transport::Tcp { host, port } => {
            let addr = (host.as_str(), *port)
                .to_socket_addrs()
                .map_err(|e| session_err(format!("cannot resolve {host}:{port}: {e}")))?
                .next()
                .ok_or_else(|| session_err(format!("no address for {host}:{port}")))?;
            let stream = TcpStream::connect_timeout(&addr, handshake)
                .map_err(|e| session_err(format!("cannot connect to {addr}: {e}")))?;
            let _ = stream.set_nodelay(true);
            let read_half = stream.try_clone().map_err(|e| session_err(e.to_string()))?;
            let write_half = stream.try_clone().map_err(|e| session_err(e.to_string()))?;
            (Box::new(write_half), spawn_reader(read_half), KillHandle::Socket(Arc::new(stream)))
        }
    };
    let mut session = AgentSession {
        writer,
        replies,
        deadline: Duration::from_millis(agent.tick_deadline_ms),
        kill,
        registration: None,
        closed: false,
    };
    let init = BridgeMessage::Init {
        context: scenario.case.context,
        profile: scenario.ego_profile.clone(),
        dt: scenario.dt,
        vehicle_length: scenario.vehicle_length,
    };
    let reply = session.send(&init).and_then(|_| session.receive(handshake));
    match reply {
        Ok(BridgeMessage::Ready { .. }) => {}
        Ok(other) => {
            session.abort();
            return Err(session_err(format!("expected ready, agent sent {}", other.type_name())));
        }
        Err(reason) => {
            session.abort();
            return Err(session_err(format!("handshake failed: {reason}")));
        }
    }
    if let Some(reg) = &agent.registry {
        let id = reg.register(session_label(scenario), session.kill.clone());
        session.registration = Some((reg.clone(), id));
    }
    Ok(session)
}

impl AgentSession {
    fn send(&mut self, msg: &BridgeMessage) -> Result<(), String> {
        self.writer
            .write_all(encode(msg).as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| format!("agent disconnected: {e}"))
    }

    fn receive(&mut self, wait: Duration) -> Result<BridgeMessage, String> {
        let start = Instant::now();
        loop {
            let left = wait.saturating_sub(start.elapsed());
            let line = match self.replies.recv_timeout(left) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(format!("agent disconnected: {e}")),
                Err(RecvTimeoutError::Timeout) => return Err(format!("no reply within {} ms", wait.as_millis())),
                Err(RecvTimeoutError::Disconnected) => return Err("agent disconnected".into()),
            };
            if line.trim().is_empty() {
                continue;
            }
            return decode(&line).map_err(|e| format!("malformed reply: {e}"));
        }
    }

    fn deregister(&mut self) {
        if let Some((reg, id)) = self.registration.take() {
            reg.deregister(id);
        }
    }

    fn abort(&mut self) {
        self.closed = true;
        self.deregister();
        self.kill.kill();
    }
}

impl EgoPolicy for AgentSession {
    fn decide(&mut self, tick: u64, vista: &Vista) -> Result<EgoDecision, PolicyFailure> {
        if self.closed {
            return Err(PolicyFailure::new("agent session is closed"));
        }
        let outcome = self
            .send(&BridgeMessage::TickRequest { tick, vista: vista.clone() })
            .and_then(|_| self.receive(self.deadline))
            .and_then(|reply| match reply {
                BridgeMessage::ControlReply { tick: t, command, lane_change } if t == tick => {
                    Ok(EgoDecision { command, lane_change })
                }
                BridgeMessage::ControlReply { tick: t, .. } => {
                    Err(format!("protocol violation: reply for tick {t} while tick {tick} is pending"))
                }
                other => Err(format!("protocol violation: unexpected {} message", other.type_name())),
            });
        outcome.map_err(|reason| {
            self.abort();
            PolicyFailure::new(reason)
        })
    }

    fn finish(&mut self, reason: &str) {
        self.deregister();
        if !self.closed {
            self.closed = true;
            let _ = self.send(&BridgeMessage::Shutdown { reason: reason.to_string() });
        }
    }
}

impl Drop for AgentSession {
    fn drop(&mut self) {
        self.deregister();
        self.writer = Box::new(io::sink());
        match &self.kill {
            KillHandle::Child(c) => {
                let deadline = Instant::now() + Duration::from_millis(200);
                let mut c = c.lock().unwrap_or_else(|e| e.into_inner());
                while Instant::now() < deadline {
                    if let Ok(Some(_)) = c.try_wait() {
                        return;
                    }
                    thread::sleep(Duration::from_millis(2));
                }
                let _ = c.kill();
                let _ = c.wait();
            }
            KillHandle::Socket(s) => {
                let _ = s.shutdown(Shutdown::Both);
            }
        }
    }
}
