#![allow(dead_code)]

use std::net::TcpStream;
use std::time::{Duration, Instant};

use cgacoop::teleop::AxesCommand;
use cgacoop_host::protocol::{AxesMsg, ConfigMsg, Message, StateMsg};
use tungstenite::{Message as WsMessage, WebSocket};

pub struct Client {
    ws: WebSocket<TcpStream>,
}

impl Client {
    pub fn connect(url: &str) -> Client {
        let addr = url.trim_start_matches("ws://");
        let stream = TcpStream::connect(addr).unwrap();
        let (ws, _) = tungstenite::client(url, stream).unwrap();
        ws.get_ref().set_read_timeout(Some(Duration::from_millis(20))).unwrap();
        Client { ws }
    }

    /// Connect and consume the config and snapshot every join produces.
    pub fn join(url: &str) -> (Client, ConfigMsg, StateMsg) {
        let mut c = Client::connect(url);
        let Message::Config(cfg) = c.recv() else { panic!("expected config first") };
        let Message::State(snap) = c.recv() else { panic!("expected snapshot state") };
        (c, cfg, snap)
    }

    pub fn send_text(&mut self, text: &str) {
        self.ws.send(WsMessage::text(text)).unwrap();
    }

    pub fn send(&mut self, msg: &Message) {
        self.send_text(&msg.encode());
    }

    pub fn send_axes(&mut self, cmd: &AxesCommand) {
        self.send(&Message::Axes(AxesMsg::from(cmd)));
    }

    pub fn try_recv(&mut self, timeout: Duration) -> Option<Message> {
        let end = Instant::now() + timeout;
        while Instant::now() < end {
            match self.ws.read() {
                Ok(WsMessage::Text(t)) => return Some(Message::decode(t.as_str()).unwrap()),
                Ok(_) => {}
                Err(tungstenite::Error::Io(e)) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
                Err(e) => panic!("read failed: {e}"),
            }
        }
        None
    }

    pub fn recv(&mut self) -> Message {
        self.try_recv(Duration::from_secs(10)).expect("no message within 10 s")
    }

    pub fn recv_state(&mut self) -> StateMsg {
        match self.recv() {
            Message::State(s) => s,
            other => panic!("expected state, got {other:?}"),
        }
    }

    pub fn close(mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}

/// A deterministic log: dilation, translation, one long pause and a few
/// out-of-range axes.
pub fn command_log(count: u64) -> Vec<(AxesCommand, u64)> {
    let mut t = 0;
    (1..=count)
        .map(|seq| {
            t += if seq == count / 2 { 400 } else { 10 };
            let s = seq as f64;
            let axes = [0.3 * (0.1 * s).sin(), 0.0, 0.2, 0.4 * (0.07 * s).cos(), 0.0, 1.5, -0.8 + 0.01 * s];
            (AxesCommand { axes, timestamp_ms: t, seq }, t)
        })
        .collect()
}
