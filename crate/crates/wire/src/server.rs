//! Central-side endpoints: TCP for algorithm and viewer clients, plus a
//! WebSocket binding of the same frames for browsers.
//!
//! Every connection runs on its own threads. [`HubSink`] only parks the
//! latest snapshot for a publisher thread, which encodes it once and fans it
//! out to per-client queues, so neither client count nor a slow or stuck
//! client adds work to a tick.

use std::io::{ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use swarmstep_core::sim::{NetConfig, SimEvent, SnapshotSink, World};
use swarmstep_core::state::WorldSnapshot;

use crate::frame::{decode_frame, Decoded, FrameDecoder, MAX_FRAME_LEN};
use crate::messages::{CommandMsg, ControlMsg, Message, ViewerInputMsg};
use crate::queue::{Bytes, ClientQueue};
use crate::snapshot::encode_world_payload;
use crate::{WireError, CLIENT_QUEUE_CAP, MSG_SNAPSHOT, PROTOCOL_VERSION};

const POLL: Duration = Duration::from_millis(10);
const READ_TIMEOUT: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Algo,
    Viewer,
}

pub type ClientId = u64;

/// Something a client sent that the simulation should act on.
#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Commands { client: ClientId, msg: CommandMsg },
    Viewer { client: ClientId, msg: ViewerInputMsg },
    Control { client: ClientId, msg: ControlMsg },
    /// A viewer input that could not be interpreted, such as an unknown mode.
    RejectedInput { client: ClientId },
}

#[derive(Debug, Clone)]
pub struct HubConfig {
    pub bind: String,
    /// 0 picks a free port.
    pub algo_port: u16,
    pub viewer_port: u16,
    /// `None` disables the WebSocket binding.
    pub ws_port: Option<u16>,
    /// Announced to clients in `hello`.
    pub dt: f64,
    pub queue_cap: usize,
}

impl HubConfig {
    pub fn from_net(net: &NetConfig, dt: f64) -> Self {
        HubConfig {
            bind: net.bind.clone(),
            algo_port: net.algo_port,
            viewer_port: net.viewer_port,
            ws_port: (net.ws_port != 0).then_some(net.ws_port),
            dt,
            queue_cap: CLIENT_QUEUE_CAP,
        }
    }

    /// Loopback with free ports, for tests.
    pub fn ephemeral(dt: f64) -> Self {
        HubConfig { bind: "127.0.0.1".into(), algo_port: 0, viewer_port: 0, ws_port: Some(0), dt, queue_cap: CLIENT_QUEUE_CAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HubAddrs {
    pub algo: SocketAddr,
    pub viewer: SocketAddr,
    pub ws: Option<SocketAddr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HubStats {
    pub clients: usize,
    pub accepted: u64,
    pub published: u64,
    /// Snapshots dropped across all clients, including departed ones.
    pub dropped: u64,
    /// Snapshots replaced by a newer one before the publisher got to them.
    pub superseded: u64,
}

struct Client {
    queue: Arc<ClientQueue>,
    socket: TcpStream,
}

#[derive(Default)]
struct Outbox {
    snapshot: Option<Arc<WorldSnapshot>>,
    events: Vec<SimEvent>,
    superseded: u64,
}

struct Shared {
    clients: Mutex<Vec<Client>>,
    connected: AtomicUsize,
    outbox: Mutex<Outbox>,
    outbox_ready: Condvar,
    stop: AtomicBool,
    next_id: AtomicU64,
    published: AtomicU64,
    departed_drops: AtomicU64,
    hello: Bytes,
    queue_cap: usize,
}

impl Shared {
    fn register(&self, socket: &TcpStream) -> std::io::Result<(ClientId, Arc<ClientQueue>)> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let queue = Arc::new(ClientQueue::new(self.queue_cap));
        queue.push_other(Arc::clone(&self.hello));
        let client = Client { queue: Arc::clone(&queue), socket: socket.try_clone()? };
        let mut clients = self.clients.lock().expect("client list");
        clients.push(client);
        self.connected.store(clients.len(), Ordering::Relaxed);
        Ok((id, queue))
    }

    fn prune(&self, clients: &mut Vec<Client>) {
        clients.retain(|c| {
            let keep = !c.queue.is_closed();
            if !keep {
                self.departed_drops.fetch_add(c.queue.dropped(), Ordering::Relaxed);
            }
            keep
        });
        self.connected.store(clients.len(), Ordering::Relaxed);
    }

    fn publish_loop(&self) {
        loop {
            let (snapshot, events) = {
                let outbox = self.outbox.lock().expect("outbox");
                let mut outbox = self
                    .outbox_ready
                    .wait_while(outbox, |o| o.snapshot.is_none() && !self.stop.load(Ordering::SeqCst))
                    .expect("outbox");
                if self.stop.load(Ordering::SeqCst) {
                    return;
                }
                (outbox.snapshot.take().expect("woken with a snapshot"), std::mem::take(&mut outbox.events))
            };
            let Some(frame) = encode_snapshot_frame(&snapshot) else { continue };
            let events: Vec<Bytes> = events.iter().map(|e| Arc::from(Message::Event(e.clone()).encode())).collect();
            let mut clients = self.clients.lock().expect("client list");
            self.prune(&mut clients);
            for c in clients.iter() {
                for e in &events {
                    c.queue.push_other(Arc::clone(e));
                }
                c.queue.push_snapshot(Arc::clone(&frame));
            }
            self.published.fetch_add(1, Ordering::Relaxed);
        }
    }
}

fn encode_snapshot_frame(snapshot: &WorldSnapshot) -> Option<Bytes> {
    let mut buf = vec![0u8; 4];
    buf.push(MSG_SNAPSHOT);
    encode_world_payload(snapshot, &mut buf);
    let len = buf.len() - 4;
    if len > MAX_FRAME_LEN {
        log::error!("snapshot of {len} bytes exceeds the frame limit; not sent");
        return None;
    }
    buf[..4].copy_from_slice(&(len as u32).to_le_bytes());
    Some(Arc::from(buf))
}

/// Running endpoints. Dropping the hub stops every thread and disconnects clients.
pub struct Hub {
    shared: Arc<Shared>,
    inbound: Receiver<Inbound>,
    addrs: HubAddrs,
    threads: Vec<JoinHandle<()>>,
}

impl Hub {
    /// Binds every port and starts accepting. Fails if any port is taken.
    pub fn start(cfg: &HubConfig) -> std::io::Result<Hub> {
        let bind = |port: u16| -> std::io::Result<TcpListener> {
            let l = TcpListener::bind((cfg.bind.as_str(), port))?;
            l.set_nonblocking(true)?;
            Ok(l)
        };
        let algo = bind(cfg.algo_port)?;
        let viewer = bind(cfg.viewer_port)?;
        let ws = cfg.ws_port.map(bind).transpose()?;
        let addrs = HubAddrs {
            algo: algo.local_addr()?,
            viewer: viewer.local_addr()?,
            ws: ws.as_ref().map(TcpListener::local_addr).transpose()?,
        };

        let hello = Message::Control(ControlMsg::Hello { version: PROTOCOL_VERSION, dt: cfg.dt }).encode();
        let shared = Arc::new(Shared {
            clients: Mutex::new(Vec::new()),
            connected: AtomicUsize::new(0),
            outbox: Mutex::new(Outbox::default()),
            outbox_ready: Condvar::new(),
            stop: AtomicBool::new(false),
            next_id: AtomicU64::new(0),
            published: AtomicU64::new(0),
            departed_drops: AtomicU64::new(0),
            hello: Arc::from(hello),
            queue_cap: cfg.queue_cap.max(1),
        });
        let (tx, inbound) = mpsc::channel();
        let publisher = Arc::clone(&shared);
        let mut threads = vec![std::thread::Builder::new().name("publisher".into()).spawn(move || publisher.publish_loop())?];
        for (listener, kind) in [(Some(algo), Kind::Tcp(Role::Algo)), (Some(viewer), Kind::Tcp(Role::Viewer)), (ws, Kind::Ws)] {
            if let Some(listener) = listener {
                let (shared, tx) = (Arc::clone(&shared), tx.clone());
                threads.push(
                    std::thread::Builder::new()
                        .name(format!("accept-{kind:?}"))
                        .spawn(move || accept_loop(listener, kind, shared, tx))?,
                );
            }
        }
        Ok(Hub { shared, inbound, addrs, threads })
    }

    pub fn addrs(&self) -> HubAddrs {
        self.addrs
    }

    /// A sink to register with the world.
    pub fn sink(&self) -> HubSink {
        HubSink { shared: Arc::clone(&self.shared) }
    }

    /// Everything received since the last call.
    pub fn drain(&self) -> Vec<Inbound> {
        self.inbound.try_iter().collect()
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<Inbound> {
        self.inbound.recv_timeout(timeout).ok()
    }

    pub fn stats(&self) -> HubStats {
        let mut clients = self.shared.clients.lock().expect("client list");
        self.shared.prune(&mut clients);
        HubStats {
            clients: clients.len(),
            accepted: self.shared.next_id.load(Ordering::Relaxed),
            published: self.shared.published.load(Ordering::Relaxed),
            dropped: self.shared.departed_drops.load(Ordering::Relaxed)
                + clients.iter().map(|c| c.queue.dropped()).sum::<u64>(),
            superseded: self.shared.outbox.lock().expect("outbox").superseded,
        }
    }

    pub fn client_count(&self) -> usize {
        self.stats().clients
    }

    /// Stops accepting and disconnects every client.
    pub fn shutdown(mut self) {
        self.stop_all();
    }

    fn stop_all(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        {
            let _outbox = self.shared.outbox.lock().expect("outbox");
            self.shared.outbox_ready.notify_all();
        }
        for c in self.shared.clients.lock().expect("client list").drain(..) {
            c.queue.close();
            let _ = c.socket.shutdown(Shutdown::Both);
        }
        for h in self.threads.drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for Hub {
    fn drop(&mut self) {
        self.stop_all();
    }
}

/// Feeds published snapshots and events to every connected client.
#[derive(Clone)]
pub struct HubSink {
    shared: Arc<Shared>,
}

impl SnapshotSink for HubSink {
    fn publish(&mut self, snapshot: &Arc<WorldSnapshot>, events: &[SimEvent]) {
        if self.shared.connected.load(Ordering::Relaxed) == 0 {
            return;
        }
        let mut outbox = self.shared.outbox.lock().expect("outbox");
        if outbox.snapshot.replace(Arc::clone(snapshot)).is_some() {
            outbox.superseded += 1;
        }
        outbox.events.extend_from_slice(events);
        self.shared.outbox_ready.notify_one();
    }
}

/// Hands received inputs to the world and returns control messages for the caller.
///
/// Entries with the wrong value count and uninterpretable viewer inputs are
/// recorded as rejections.
pub fn apply_inbound(world: &mut World, items: impl IntoIterator<Item = Inbound>) -> Vec<ControlMsg> {
    let mut control = Vec::new();
    for item in items {
        match item {
            Inbound::Commands { msg, .. } => {
                let (ok, bad) = msg.into_commands();
                world.submit_commands(ok);
                if !bad.is_empty() {
                    world.reject_inputs(&bad);
                }
            }
            Inbound::Viewer { msg, .. } => {
                let influence = msg.to_influence();
                if influence.is_valid() {
                    world.submit_influence(influence);
                } else {
                    world.reject_inputs(&[]);
                }
            }
            Inbound::RejectedInput { .. } => world.reject_inputs(&[]),
            Inbound::Control { msg, .. } => control.push(msg),
        }
    }
    control
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Tcp(Role),
    Ws,
}

fn accept_loop(listener: TcpListener, kind: Kind, shared: Arc<Shared>, tx: Sender<Inbound>) {
    while !shared.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                log::info!("{kind:?} client connected from {peer}");
                let (shared, tx) = (Arc::clone(&shared), tx.clone());
                let started = match kind {
                    Kind::Tcp(role) => start_tcp(stream, role, shared, tx),
                    Kind::Ws => std::thread::Builder::new()
                        .name("ws-client".into())
                        .spawn(move || {
                            if let Err(e) = serve_ws(stream, shared, tx) {
                                log::warn!("websocket client from {peer}: {e}");
                            }
                        })
                        .map(drop),
                };
                if let Err(e) = started {
                    log::warn!("could not start client from {peer}: {e}");
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(POLL),
            Err(e) => {
                log::warn!("accept failed: {e}");
                std::thread::sleep(POLL);
            }
        }
    }
}

/// Routes one decoded frame. `Err` means the connection must close.
fn dispatch(frame_result: Result<Option<Message>, WireError>, id: ClientId, role: Role, tx: &Sender<Inbound>) -> Result<(), WireError> {
    let item = match frame_result {
        Ok(None) => return Ok(()),
        Ok(Some(Message::Command(msg))) if role == Role::Algo => Inbound::Commands { client: id, msg },
        Ok(Some(Message::ViewerInput(msg))) if role == Role::Viewer => Inbound::Viewer { client: id, msg },
        Ok(Some(Message::Control(msg))) => Inbound::Control { client: id, msg },
        Ok(Some(other)) => {
            log::debug!("client {id} ({role:?}) sent unexpected message type {:#04x}", other.msg_type());
            return Ok(());
        }
        Err(WireError::UnknownMode(m)) if role == Role::Viewer => {
            log::warn!("client {id}: viewer input with unknown mode {m}");
            Inbound::RejectedInput { client: id }
        }
        Err(e) => return Err(e),
    };
    // the receiver only goes away when the hub is shutting down
    let _ = tx.send(item);
    Ok(())
}

fn start_tcp(stream: TcpStream, role: Role, shared: Arc<Shared>, tx: Sender<Inbound>) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(READ_TIMEOUT))?;
    let (id, queue) = shared.register(&stream)?;
    let mut writer = stream.try_clone()?;
    let wq = Arc::clone(&queue);
    let wshared = Arc::clone(&shared);
    std::thread::Builder::new().name(format!("client-{id}-tx")).spawn(move || {
        while !wshared.stop.load(Ordering::SeqCst) {
            match wq.pop_timeout(Duration::from_millis(100)) {
                Some(bytes) => {
                    if let Err(e) = writer.write_all(&bytes) {
                        log::info!("client {id} write failed: {e}");
                        break;
                    }
                }
                None if wq.is_closed() => break,
                None => {}
            }
        }
        wq.close();
        let _ = writer.shutdown(Shutdown::Both);
    })?;
    std::thread::Builder::new().name(format!("client-{id}-rx")).spawn(move || {
        let mut reader = stream;
        let mut decoder = FrameDecoder::new();
        let mut buf = vec![0u8; 64 * 1024];
        'outer: while !shared.stop.load(Ordering::SeqCst) && !queue.is_closed() {
            match reader.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    decoder.push(&buf[..n]);
                    loop {
                        let frame = match decoder.next_frame() {
                            Ok(Some(f)) => f,
                            Ok(None) => break,
                            Err(e) => {
                                log::warn!("client {id}: protocol error, closing: {e}");
                                break 'outer;
                            }
                        };
                        if let Err(e) = dispatch(Message::from_frame(&frame), id, role, &tx) {
                            log::warn!("client {id}: protocol error, closing: {e}");
                            break 'outer;
                        }
                    }
                }
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {}
                Err(e) => {
                    log::info!("client {id} read failed: {e}");
                    break;
                }
            }
        }
        log::info!("client {id} disconnected");
        queue.close();
        let _ = reader.shutdown(Shutdown::Both);
    })?;
    Ok(())
}

fn serve_ws(stream: TcpStream, shared: Arc<Shared>, tx: Sender<Inbound>) -> Result<(), Box<dyn std::error::Error>> {
    use tungstenite::{Error as WsError, Message as WsMessage};

    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| e.to_string())?;
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(5)))?;
    let (id, queue) = shared.register(ws.get_ref())?;
    let result = (|| -> Result<(), Box<dyn std::error::Error>> {
        while !shared.stop.load(Ordering::SeqCst) && !queue.is_closed() {
            while let Some(bytes) = queue.try_pop() {
                ws.send(WsMessage::binary(bytes.to_vec()))?;
            }
            match ws.read() {
                Ok(WsMessage::Binary(data)) => {
                    // one complete frame per websocket message
                    let frame = match decode_frame(&data)? {
                        Decoded::Frame { frame, consumed } if consumed == data.len() => frame,
                        _ => return Err(WireError::Malformed("websocket message is not exactly one frame".into()).into()),
                    };
                    dispatch(Message::from_frame(&frame), id, Role::Viewer, &tx)?;
                }
                Ok(WsMessage::Close(_)) => break,
                Ok(_) => {}
                Err(WsError::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(WsError::ConnectionClosed | WsError::AlreadyClosed) => break,
                Err(e) => return Err(e.into()),
            }
        }
        Ok(())
    })();
    queue.close();
    let _ = ws.get_ref().shutdown(Shutdown::Both);
    log::info!("websocket client {id} disconnected");
    result
}
