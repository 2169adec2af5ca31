//! Detection server. One thread per connection, one session per opened
//! document. A single port speaks both raw TCP and WebSocket: a
//! connection whose first bytes are `GET` is upgraded, anything else is
//! read as newline-delimited JSON. Either way the server answers the
//! client's first message with a `ready` status before handling it.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use lexgaze_core::gaze::{GazeSample, Source};
use lexgaze_core::session::{Detector, Session, WindowResult};
use lexgaze_core::text::DocumentLayout;
use tungstenite::{Message, WebSocket};

use crate::dictionary::Dictionary;
use crate::protocol::{ClientMsg, DetectionEvent, ServerMsg, State, Status};

#[derive(Clone, Debug)]
pub struct ServerConfig {
    /// Device grade assumed for incoming samples (selects preprocessing).
    pub source: Source,
    /// How often an idle connection re-checks the wall clock for windows
    /// to close.
    pub tick: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            source: Source::Tracker,
            tick: Duration::from_millis(100),
        }
    }
}

/// Shared, immutable state of a running server.
pub struct Service {
    detector: Arc<Detector>,
    layouts: BTreeMap<String, Arc<DocumentLayout>>,
    dictionary: Dictionary,
    cfg: ServerConfig,
}

impl Service {
    pub fn new(detector: Detector, layouts: Vec<DocumentLayout>, dictionary: Dictionary, cfg: ServerConfig) -> Self {
        Self {
            detector: Arc::new(detector),
            layouts: layouts.into_iter().map(|l| (l.doc_id.clone(), Arc::new(l))).collect(),
            dictionary,
            cfg,
        }
    }

    pub fn docs(&self) -> Vec<String> {
        self.layouts.keys().cloned().collect()
    }

    /// Accepts connections until the listener fails.
    pub fn run(self: Arc<Self>, listener: TcpListener) -> io::Result<()> {
        for stream in listener.incoming() {
            let stream = stream?;
            let svc = self.clone();
            thread::spawn(move || {
                let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
                log::info!("{peer}: connected");
                match svc.connection(stream, &peer) {
                    Ok(()) => log::info!("{peer}: closed"),
                    Err(e) => log::warn!("{peer}: {e}"),
                }
            });
        }
        Ok(())
    }

    /// Serves on a background thread; returns the bound address.
    pub fn spawn(self: Arc<Self>, addr: &str) -> io::Result<std::net::SocketAddr> {
        let listener = TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        thread::spawn(move || self.run(listener));
        Ok(local)
    }

    fn connection(&self, stream: TcpStream, peer: &str) -> io::Result<()> {
        stream.set_nodelay(true)?;
        let mut head = [0u8; 3];
        let n = stream.peek(&mut head)?;
        let mut transport: Box<dyn Transport> = if n == 3 && &head == b"GET" {
            let ws = tungstenite::accept(stream).map_err(|e| io::Error::new(ErrorKind::InvalidData, e.to_string()))?;
            ws.get_ref().set_read_timeout(Some(self.cfg.tick))?;
            Box::new(WsTransport {
                ws,
                pending: VecDeque::new(),
            })
        } else {
            stream.set_read_timeout(Some(self.cfg.tick))?;
            Box::new(RawTransport {
                reader: BufReader::new(stream.try_clone()?),
                writer: stream,
                buf: Vec::new(),
            })
        };
        let mut h = Handler::new(self, peer);
        transport.send(&h.greeting().to_line())?;
        loop {
            let out = match transport.recv()? {
                Incoming::Line(l) => h.on_line(&l),
                Incoming::Idle => h.on_idle(),
                Incoming::Closed => return Ok(()),
            };
            for m in out {
                transport.send(&m.to_line())?;
            }
        }
    }
}

/// Per-connection protocol state, independent of the transport.
pub struct Handler<'a> {
    svc: &'a Service,
    peer: String,
    session: Option<Session>,
    opened: Instant,
}

impl<'a> Handler<'a> {
    pub fn new(svc: &'a Service, peer: &str) -> Self {
        Self {
            svc,
            peer: peer.to_string(),
            session: None,
            opened: Instant::now(),
        }
    }

    pub fn greeting(&self) -> ServerMsg {
        let mut s = Status::new(State::Ready);
        s.docs = Some(self.svc.docs());
        s.threshold = Some(self.svc.detector.model.threshold);
        ServerMsg::Status(s)
    }

    pub fn on_line(&mut self, line: &str) -> Vec<ServerMsg> {
        let line = line.trim();
        if line.is_empty() {
            return Vec::new();
        }
        let msg: ClientMsg = match serde_json::from_str(line) {
            Ok(m) => m,
            Err(e) => return vec![ServerMsg::Status(Status::error(format!("malformed message: {e}")))],
        };
        match msg {
            ClientMsg::OpenDoc { doc_id } => {
                let Some(layout) = self.svc.layouts.get(&doc_id) else {
                    return vec![ServerMsg::Status(Status::error(format!("unknown document {doc_id}")))];
                };
                self.session = Some(Session::new(
                    format!("{}/{doc_id}", self.peer),
                    layout.clone(),
                    self.svc.detector.clone(),
                ));
                self.opened = Instant::now();
                let mut s = Status::new(State::Opened);
                s.doc_id = Some(doc_id);
                s.layout = Some((**layout).clone());
                s.threshold = Some(self.svc.detector.model.threshold);
                vec![ServerMsg::Status(s)]
            }
            ClientMsg::Gaze { t_ms, x, y } => {
                let Some(session) = self.session.as_mut() else {
                    return vec![ServerMsg::Status(Status::error("no document open"))];
                };
                let r = session.push(GazeSample::new(t_ms, x, y, self.svc.cfg.source));
                self.events(r)
            }
            ClientMsg::Flush => {
                let Some(session) = self.session.as_mut() else {
                    return vec![ServerMsg::Status(Status::error("no document open"))];
                };
                let r = session.finish();
                let windows = session.next_window();
                let mut out = self.events(r);
                let mut s = Status::new(State::Flushed);
                s.windows = Some(windows);
                out.push(ServerMsg::Status(s));
                out
            }
        }
    }

    /// Closes windows that ended on the wall clock since the document was
    /// opened.
    pub fn on_idle(&mut self) -> Vec<ServerMsg> {
        let now_ms = self.opened.elapsed().as_secs_f64() * 1e3;
        match self.session.as_mut() {
            Some(s) => {
                let r = s.advance_to(now_ms);
                self.events(r)
            }
            None => Vec::new(),
        }
    }

    fn events(&self, r: lexgaze_core::Result<Vec<WindowResult>>) -> Vec<ServerMsg> {
        match r {
            Ok(results) => results
                .iter()
                .flat_map(|w| {
                    log::debug!("{}: window {} {:?} {:.2} ms", self.peer, w.window, w.status, w.compute_ms);
                    w.detections.iter()
                })
                .map(|d| ServerMsg::Detection(DetectionEvent::new(d, self.svc.dictionary.lookup(&d.word))))
                .collect(),
            Err(e) => vec![ServerMsg::Status(Status::error(e.to_string()))],
        }
    }
}

enum Incoming {
    Line(String),
    Idle,
    Closed,
}

trait Transport {
    fn recv(&mut self) -> io::Result<Incoming>;
    fn send(&mut self, line: &str) -> io::Result<()>;
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

struct RawTransport {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    /// Bytes of a line cut off by a read timeout.
    buf: Vec<u8>,
}

impl Transport for RawTransport {
    fn recv(&mut self) -> io::Result<Incoming> {
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) if self.buf.is_empty() => Ok(Incoming::Closed),
            Ok(_) => {
                let line = String::from_utf8_lossy(&self.buf).into_owned();
                self.buf.clear();
                Ok(Incoming::Line(line))
            }
            Err(e) if is_timeout(&e) => Ok(Incoming::Idle),
            Err(e) if e.kind() == ErrorKind::ConnectionReset => Ok(Incoming::Closed),
            Err(e) => Err(e),
        }
    }

    fn send(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")
    }
}

struct WsTransport {
    ws: WebSocket<TcpStream>,
    /// Lines of a multi-line text message not yet handed out.
    pending: VecDeque<String>,
}

impl Transport for WsTransport {
    fn recv(&mut self) -> io::Result<Incoming> {
        use tungstenite::Error;
        if let Some(l) = self.pending.pop_front() {
            return Ok(Incoming::Line(l));
        }
        let text = match self.ws.read() {
            Ok(Message::Text(t)) => t,
            Ok(Message::Binary(b)) => String::from_utf8_lossy(&b).into_owned(),
            Ok(Message::Close(_)) => return Ok(Incoming::Closed),
            Ok(_) => return Ok(Incoming::Idle),
            Err(Error::Io(e)) if is_timeout(&e) => return Ok(Incoming::Idle),
            Err(Error::ConnectionClosed | Error::AlreadyClosed) => return Ok(Incoming::Closed),
            Err(Error::Io(e)) if e.kind() == ErrorKind::ConnectionReset => return Ok(Incoming::Closed),
            Err(e) => return Err(io::Error::new(ErrorKind::InvalidData, e.to_string())),
        };
        self.pending.extend(text.lines().map(str::to_string));
        Ok(self.pending.pop_front().map_or(Incoming::Idle, Incoming::Line))
    }

    fn send(&mut self, line: &str) -> io::Result<()> {
        self.ws
            .send(Message::Text(line.to_string()))
            .map_err(|e| io::Error::new(ErrorKind::BrokenPipe, e.to_string()))
    }
}
