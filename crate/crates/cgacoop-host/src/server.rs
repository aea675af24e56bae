//! Websocket teleop service.
//!
//! A single control thread owns the [`TeleopSession`]. Each client gets its own
//! thread that forwards parsed messages over a channel and writes whatever the
//! control thread sends back. The first client to connect commands; later
//! clients only view until the commander leaves.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use cgacoop::cooperative::CooperativeSystem;
use cgacoop::teleop::{Rejected, TeleopConfig, TeleopSession};
use tungstenite::{Message as WsMessage, WebSocket};

use crate::protocol::{ClockMode, ConfigMsg, ErrorCode, Message, Role, StateMsg};

#[derive(Clone, Debug)]
pub struct ServerOptions {
    pub bind: SocketAddr,
    pub teleop: TeleopConfig,
    pub mode: ClockMode,
    /// NDJSON file receiving every broadcast state.
    pub tee: Option<PathBuf>,
    /// Stop after this many ticks.
    pub max_ticks: Option<u64>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            bind: "127.0.0.1:8765".parse().unwrap(),
            teleop: TeleopConfig::default(),
            mode: ClockMode::Realtime,
            tee: None,
            max_ticks: None,
        }
    }
}

type ClientId = u64;

enum Inbound {
    Join { id: ClientId, tx: Sender<String> },
    Text { id: ClientId, text: String },
    Leave { id: ClientId },
}

struct Client {
    id: ClientId,
    tx: Sender<String>,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
    control: Option<JoinHandle<Result<u64>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.addr)
    }

    /// Ask every thread to finish and wait; returns the number of ticks run.
    pub fn stop(mut self) -> Result<u64> {
        self.stop.store(true, Ordering::SeqCst);
        self.join()
    }

    /// Wait until the control loop ends on its own (tick limit) or fails.
    pub fn wait(mut self) -> Result<u64> {
        self.join()
    }

    fn join(&mut self) -> Result<u64> {
        let ticks = match self.control.take() {
            Some(h) => h.join().map_err(|_| anyhow::anyhow!("control thread panicked"))?,
            None => Ok(0),
        };
        self.stop.store(true, Ordering::SeqCst);
        for h in self.threads.drain(..) {
            let _ = h.join();
        }
        ticks
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

/// Bind, spawn the accept and control threads and return immediately.
pub fn serve(system: CooperativeSystem, q0: Vec<f64>, opts: ServerOptions) -> Result<ServerHandle> {
    let session = TeleopSession::new(system, q0, opts.teleop)?;
    let listener = TcpListener::bind(opts.bind).with_context(|| format!("binding {}", opts.bind))?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let tee = match &opts.tee {
        Some(p) => Some(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => None,
    };
    let stop = Arc::new(AtomicBool::new(false));
    let (in_tx, in_rx) = mpsc::channel();

    let accept_stop = stop.clone();
    let accept = thread::spawn(move || accept_loop(listener, in_tx, accept_stop));
    let control_stop = stop.clone();
    let control = thread::spawn(move || {
        let r = control_loop(session, opts, in_rx, tee, &control_stop);
        control_stop.store(true, Ordering::SeqCst);
        r
    });
    Ok(ServerHandle { addr, stop, threads: vec![accept], control: Some(control) })
}

fn accept_loop(listener: TcpListener, inbound: Sender<Inbound>, stop: Arc<AtomicBool>) {
    let mut next_id = 0;
    let mut clients = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let id = next_id;
                next_id += 1;
                let inbound = inbound.clone();
                let stop = stop.clone();
                clients.push(thread::spawn(move || client_loop(id, stream, inbound, stop)));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(2)),
            Err(_) => thread::sleep(Duration::from_millis(2)),
        }
    }
    for c in clients {
        let _ = c.join();
    }
}

fn client_loop(id: ClientId, stream: TcpStream, inbound: Sender<Inbound>, stop: Arc<AtomicBool>) {
    if stream.set_nonblocking(false).is_err() {
        return;
    }
    let mut ws: WebSocket<TcpStream> = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(_) => return,
    };
    if ws.get_ref().set_read_timeout(Some(Duration::from_millis(2))).is_err() {
        return;
    }
    let (tx, rx) = mpsc::channel();
    if inbound.send(Inbound::Join { id, tx }).is_err() {
        return;
    }
    serve_client(id, &mut ws, &inbound, &rx, &stop);
    let _ = inbound.send(Inbound::Leave { id });
    let _ = ws.close(None);
    let _ = ws.flush();
}

fn serve_client(id: ClientId, ws: &mut WebSocket<TcpStream>, inbound: &Sender<Inbound>, rx: &Receiver<String>, stop: &AtomicBool) {
    loop {
        if stop.load(Ordering::SeqCst) {
            return;
        }
        loop {
            match rx.try_recv() {
                Ok(text) => {
                    if ws.write(WsMessage::text(text)).is_err() {
                        return;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return,
            }
        }
        if ws.flush().is_err() {
            return;
        }
        match ws.read() {
            Ok(WsMessage::Text(t)) => {
                if inbound.send(Inbound::Text { id, text: t.to_string() }).is_err() {
                    return;
                }
            }
            Ok(WsMessage::Close(_)) => return,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(_) => return,
        }
    }
}

struct Control {
    session: TeleopSession,
    mode: ClockMode,
    clients: Vec<Client>,
    commander: Option<ClientId>,
    tee: Option<BufWriter<File>>,
}

impl Control {
    fn send(&self, id: ClientId, msg: &Message) {
        if let Some(c) = self.clients.iter().find(|c| c.id == id) {
            let _ = c.tx.send(msg.encode());
        }
    }

    fn broadcast(&mut self, msg: &Message) -> Result<()> {
        let text = msg.encode();
        self.clients.retain(|c| c.tx.send(text.clone()).is_ok());
        if let Some(t) = self.tee.as_mut() {
            writeln!(t, "{text}")?;
        }
        Ok(())
    }

    fn join(&mut self, id: ClientId, tx: Sender<String>) {
        let role = if self.commander.is_none() {
            self.commander = Some(id);
            Role::Commander
        } else {
            Role::Viewer
        };
        self.clients.push(Client { id, tx });
        let cfg = Message::Config(ConfigMsg::new(role, &self.session.system, &self.session.config, self.mode));
        self.send(id, &cfg);
        let snap = Message::State(StateMsg::from(&self.session.snapshot()));
        self.send(id, &snap);
    }

    fn leave(&mut self, id: ClientId) {
        self.clients.retain(|c| c.id != id);
        if self.commander == Some(id) {
            self.commander = None;
        }
    }

    /// Handle a client text message. Returns a command timestamp to tick at in
    /// lockstep mode.
    fn text(&mut self, id: ClientId, text: &str, now_ms: u64) -> Option<u64> {
        let msg = match Message::decode(text) {
            Ok(m) => m,
            Err(e) => {
                self.send(id, &Message::error(ErrorCode::Malformed, e.to_string()));
                return None;
            }
        };
        let Message::Axes(axes) = msg else {
            self.send(id, &Message::error(ErrorCode::Unexpected, "clients may only send axes"));
            return None;
        };
        if self.commander != Some(id) {
            self.send(id, &Message::error(ErrorCode::ReadOnly, "another client is commanding"));
            return None;
        }
        let cmd = axes.command();
        let at = match self.mode {
            ClockMode::Realtime => now_ms,
            ClockMode::Lockstep => cmd.timestamp_ms,
        };
        match self.session.submit(cmd, at) {
            Ok(()) => Some(at),
            Err(Rejected::OutOfOrder { last, got }) => {
                self.send(id, &Message::error(ErrorCode::OutOfOrder, format!("seq {got} not above {last}")));
                None
            }
        }
    }

    fn tick(&mut self, now_ms: u64) -> Result<()> {
        let up = self.session.step(now_ms);
        self.broadcast(&Message::State(StateMsg::from(&up)))
    }
}

fn control_loop(session: TeleopSession, opts: ServerOptions, inbound: Receiver<Inbound>, tee: Option<BufWriter<File>>, stop: &AtomicBool) -> Result<u64> {
    let dt = Duration::from_secs_f64(opts.teleop.dt);
    let mut ctl = Control { session, mode: opts.mode, clients: Vec::new(), commander: None, tee };
    let start = Instant::now();
    let now_ms = |start: Instant| start.elapsed().as_millis() as u64;
    let mut next_tick = start + dt;
    let done = |ctl: &Control| opts.max_ticks.is_some_and(|m| ctl.session.ticks() >= m);
    while !stop.load(Ordering::SeqCst) && !done(&ctl) {
        let timeout = match opts.mode {
            ClockMode::Realtime => next_tick.saturating_duration_since(Instant::now()),
            ClockMode::Lockstep => Duration::from_millis(5),
        };
        match inbound.recv_timeout(timeout) {
            Ok(Inbound::Join { id, tx }) => ctl.join(id, tx),
            Ok(Inbound::Leave { id }) => ctl.leave(id),
            Ok(Inbound::Text { id, text }) => {
                if let Some(at) = ctl.text(id, &text, now_ms(start)) {
                    if opts.mode == ClockMode::Lockstep {
                        ctl.tick(at)?;
                    }
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
        if opts.mode == ClockMode::Realtime && Instant::now() >= next_tick {
            ctl.tick(now_ms(start))?;
            next_tick += dt;
            if next_tick < Instant::now() {
                next_tick = Instant::now() + dt;
            }
        }
    }
    if let Some(t) = ctl.tee.as_mut() {
        t.flush()?;
    }
    // Let client threads drain their queues before they see the stop flag.
    thread::sleep(Duration::from_millis(20));
    Ok(ctl.session.ticks())
}
