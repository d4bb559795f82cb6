//! Live WebSocket endpoint.
//!
//! Each connection gets its own session, owned by one thread that reads the
//! socket, stamps inputs with the server clock, steps the simulation to
//! wall-clock time and pushes every published snapshot. While a session is
//! running further clients are turned away. Nothing runs while nobody is
//! connected. A disconnect closes the session; any attempt left open is
//! counted as incomplete by the metrics.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};

use crate::session::{Session, SessionConfig, SessionTrace};
use crate::trace::write_lines;
use crate::wire::{Inbound, WireMessage};

const POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub session: SessionConfig,
    /// Where finished traces go, as `session-N.jsonl`.
    pub trace_dir: Option<PathBuf>,
    /// Stop after this many sessions; run forever when `None`.
    pub max_sessions: Option<usize>,
    /// Simulated seconds per wall-clock second.
    pub speed: f64,
}

impl LiveConfig {
    pub fn new(session: SessionConfig) -> Self {
        Self { session, trace_dir: None, max_sessions: None, speed: 1.0 }
    }
}

/// Serves sessions on `listener` and returns their traces once
/// `max_sessions` have finished.
pub fn serve(listener: TcpListener, cfg: LiveConfig) -> std::io::Result<Vec<SessionTrace>> {
    listener.set_nonblocking(true)?;
    let busy = Arc::new(AtomicBool::new(false));
    let (done_tx, done_rx) = mpsc::channel::<std::io::Result<SessionTrace>>();
    let mut traces = Vec::new();
    let mut started = 0usize;
    loop {
        while let Ok(result) = done_rx.try_recv() {
            traces.push(result?);
        }
        if cfg.max_sessions.is_some_and(|m| traces.len() >= m) {
            return Ok(traces);
        }
        let stream = match listener.accept() {
            Ok((s, _)) => s,
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                thread::sleep(POLL);
                continue;
            }
            Err(e) => return Err(e),
        };
        stream.set_nonblocking(false)?;
        let at_limit = cfg.max_sessions.is_some_and(|m| started >= m);
        if at_limit || busy.swap(true, Ordering::SeqCst) {
            thread::spawn(move || turn_away(stream));
            continue;
        }
        let index = started;
        started += 1;
        let (cfg, busy, done_tx) = (cfg.clone(), busy.clone(), done_tx.clone());
        thread::spawn(move || {
            let result = run_connection(stream, &cfg, index);
            busy.store(false, Ordering::SeqCst);
            let _ = done_tx.send(result);
        });
    }
}

fn turn_away(stream: TcpStream) {
    if let Ok(mut ws) = tungstenite::accept(stream) {
        let _ = ws.send(Message::text(WireMessage::error("a session is already in progress").to_json()));
        let _ = ws.close(None);
        let _ = ws.flush();
    }
}

fn push_outbox(ws: &mut WebSocket<TcpStream>, session: &mut Session) -> Result<(), tungstenite::Error> {
    for (t, snap) in session.take_outbox() {
        ws.send(Message::text(WireMessage::snapshot(t, snap).to_json()))?;
    }
    Ok(())
}

fn run_connection(stream: TcpStream, cfg: &LiveConfig, index: usize) -> std::io::Result<SessionTrace> {
    let mut ws = tungstenite::accept(stream).map_err(|e| std::io::Error::other(e.to_string()))?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let mut session = Session::new(&cfg.session).map_err(std::io::Error::other)?;
    session.enable_outbox();
    let start = Instant::now();
    let now = |session: &Session| {
        let wall = (start.elapsed().as_secs_f64() * cfg.speed * 1000.0).floor() / 1000.0;
        wall.max(session.clock())
    };
    let mut last_t = 0.0f64;
    let mut open = push_outbox(&mut ws, &mut session).is_ok();
    while open {
        match ws.read() {
            Ok(Message::Text(text)) => {
                let t = now(&session).max(last_t);
                last_t = t;
                let reply = match WireMessage::from_json(text.as_str()) {
                    Err(e) => Some(format!("malformed message: {e}")),
                    Ok(msg) => match msg.body.inbound() {
                        Err(e) => Some(e),
                        Ok(Inbound::Input(input)) => session.input(t, input, msg.client_t).err().map(|e| e.to_string()),
                        Ok(Inbound::Control(c)) => session.control(t, c).err().map(|e| e.to_string()),
                    },
                };
                if let Some(message) = reply {
                    open = ws.send(Message::text(WireMessage::error(message).to_json())).is_ok();
                }
            }
            Ok(Message::Close(_)) => open = false,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => open = false,
        }
        let t = now(&session);
        session.advance_to(t);
        if open {
            open = push_outbox(&mut ws, &mut session).is_ok();
        }
    }
    let end = now(&session).max(last_t);
    let trace = session.close(end).map_err(std::io::Error::other)?;
    if let (Some(dir), Some(lines)) = (&cfg.trace_dir, &trace.lines) {
        write_lines(&dir.join(format!("session-{index}.jsonl")), lines)?;
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    Ok(trace)
}
