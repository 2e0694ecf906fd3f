//! Algorithm-side SDK: receive snapshots, run a strategy, send commands back.

use std::fmt::Display;
use std::io::{ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use swarmstep_core::sim::Command;

use crate::frame::FrameDecoder;
use crate::messages::{CommandMsg, ControlMsg, Message};
use crate::snapshot::SnapshotMsg;
use crate::WireError;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("could not reach {addr} after {attempts} attempts: {source}")]
    Connect { addr: String, attempts: u32, source: std::io::Error },
    #[error("server closed the connection")]
    Closed,
    #[error("no hello from server within {0:?}")]
    NoHello(Duration),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("strategy failed: {0}")]
    Strategy(String),
}

/// Reconnect attempts with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial: Duration,
    pub max: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 5, initial: Duration::from_millis(50), max: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy { attempts: 1, ..Default::default() }
    }

    fn delay(&self, attempt: u32) -> Duration {
        self.initial.saturating_mul(1u32 << attempt.min(16)).min(self.max)
    }
}

/// A framed TCP connection.
pub struct Connection {
    stream: TcpStream,
    decoder: FrameDecoder,
    buf: Vec<u8>,
}

impl Connection {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> std::io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Connection { stream, decoder: FrameDecoder::new(), buf: vec![0; 64 * 1024] })
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), ClientError> {
        self.send_raw(&msg.encode())
    }

    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), ClientError> {
        self.stream.write_all(bytes)?;
        Ok(())
    }

    /// Next known message. `Ok(None)` if `timeout` passes first.
    pub fn recv(&mut self, timeout: Duration) -> Result<Option<Message>, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            while let Some(frame) = self.decoder.next_frame()? {
                if let Some(msg) = Message::from_frame(&frame)? {
                    return Ok(Some(msg));
                }
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            self.stream.set_read_timeout(Some(left))?;
            match self.stream.read(&mut self.buf) {
                Ok(0) => return Err(ClientError::Closed),
                Ok(n) => self.decoder.push(&self.buf[..n]),
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => return Ok(None),
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn stream(&self) -> &TcpStream {
        &self.stream
    }
}

/// Totals from [`AlgoClient::run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub snapshots: u64,
    pub command_msgs: u64,
    pub reconnects: u32,
    pub last_tick: Option<u64>,
}

/// Connection to the algorithm endpoint.
pub struct AlgoClient {
    addr: SocketAddr,
    policy: RetryPolicy,
    conn: Connection,
    dt: f64,
    hello_timeout: Duration,
    snapshot_limit: Option<u64>,
}

impl AlgoClient {
    /// Connects, retrying per `policy`, and waits for the server's hello.
    pub fn connect(addr: SocketAddr, policy: RetryPolicy) -> Result<Self, ClientError> {
        let hello_timeout = Duration::from_secs(5);
        let (conn, dt) = Self::open(addr, &policy, hello_timeout)?;
        Ok(AlgoClient { addr, policy, conn, dt, hello_timeout, snapshot_limit: None })
    }

    fn open(addr: SocketAddr, policy: &RetryPolicy, hello_timeout: Duration) -> Result<(Connection, f64), ClientError> {
        let attempts = policy.attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(policy.delay(attempt - 1));
            }
            let mut conn = match Connection::connect(addr) {
                Ok(c) => c,
                Err(e) => {
                    log::debug!("connect to {addr} failed (attempt {}): {e}", attempt + 1);
                    last = Some(e);
                    continue;
                }
            };
            match conn.recv(hello_timeout) {
                Ok(Some(Message::Control(ControlMsg::Hello { dt, version }))) => {
                    log::info!("connected to {addr}, protocol {version}, dt {dt}");
                    return Ok((conn, dt));
                }
                Ok(_) => return Err(ClientError::NoHello(hello_timeout)),
                // accepted by a listener that was going away
                Err(ClientError::Io(e)) => last = Some(e),
                Err(ClientError::Closed) => last = Some(ErrorKind::ConnectionReset.into()),
                Err(e) => return Err(e),
            }
        }
        Err(ClientError::Connect { addr: addr.to_string(), attempts, source: last.expect("at least one attempt") })
    }

    /// Returns from [`run`](Self::run) after this many snapshots.
    pub fn with_snapshot_limit(mut self, n: u64) -> Self {
        self.snapshot_limit = Some(n);
        self
    }

    /// Simulation step announced by the server.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn connection(&mut self) -> &mut Connection {
        &mut self.conn
    }

    pub fn send_commands(&mut self, tick_hint: u64, commands: &[Command]) -> Result<(), ClientError> {
        self.conn.send(&Message::Command(CommandMsg::from_commands(tick_hint, commands)))
    }

    pub fn send_control(&mut self, msg: ControlMsg) -> Result<(), ClientError> {
        self.conn.send(&Message::Control(msg))
    }

    /// Feeds every received snapshot to `strategy` and sends what it returns.
    ///
    /// Lost connections are re-established per the retry policy. Ends with an
    /// error once retries run out, on a protocol error, or when the strategy
    /// fails; ends with `Ok` only when the snapshot limit is reached.
    pub fn run<F, E>(&mut self, mut strategy: F) -> Result<RunSummary, ClientError>
    where
        F: FnMut(&SnapshotMsg, f64) -> Result<Vec<Command>, E>,
        E: Display,
    {
        let mut summary = RunSummary::default();
        loop {
            if self.snapshot_limit.is_some_and(|n| summary.snapshots >= n) {
                return Ok(summary);
            }
            let msg = match self.conn.recv(Duration::from_millis(200)) {
                Ok(Some(m)) => m,
                Ok(None) => continue,
                Err(ClientError::Closed | ClientError::Io(_)) => {
                    log::warn!("lost connection to {}; reconnecting", self.addr);
                    let (conn, dt) = Self::open(self.addr, &self.policy, self.hello_timeout)?;
                    self.conn = conn;
                    self.dt = dt;
                    summary.reconnects += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            match msg {
                Message::Snapshot(snap) => {
                    if summary.last_tick.is_some_and(|t| snap.tick <= t) {
                        continue;
                    }
                    summary.last_tick = Some(snap.tick);
                    summary.snapshots += 1;
                    let cmds = strategy(&snap, self.dt).map_err(|e| ClientError::Strategy(e.to_string()))?;
                    if !cmds.is_empty() {
                        self.send_commands(snap.tick, &cmds)?;
                        summary.command_msgs += 1;
                    }
                }
                Message::Control(ControlMsg::Hello { dt, .. }) => self.dt = dt,
                _ => {}
            }
        }
    }
}
