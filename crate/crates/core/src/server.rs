//! Networked frame store speaking newline-delimited JSON over TCP.
//!
//! Every connection is a session. Requests and responses are one JSON object
//! per line:
//!
//! ```text
//! {"op":"meta","video":"v1"}            -> {"ok":true,"frames":300}
//! {"op":"frame","video":"v1","index":5} -> {"ok":true,"index":5,"score":0.42}
//! {"op":"stats"}                        -> {"ok":true,"session":3,"requests":{"v1":1},"total":1}
//! {"op":"bye"}                          -> {"ok":true}
//! anything invalid                      -> {"ok":false,"error":"..."}
//! ```
//!
//! Only scores cross the wire. Each successful frame response increments the
//! session's counter for that video.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{load_labels, load_score_table};
use crate::episode::FrameSource;
use crate::error::{Error, Result};
use crate::hmm::Label;

const POLL_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Request {
    Meta { video: String },
    Frame { video: String, index: u64 },
    Stats,
    Bye,
}

impl Request {
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("requests always serialize")
    }

    pub fn decode(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }
}

#[derive(Debug, Clone)]
struct CatalogVideo {
    scores: Vec<f64>,
    // Held for local evaluation only; never written to a connection.
    #[allow(dead_code)]
    labels: Option<Vec<Label>>,
}

/// Read-only video store served to clients.
#[derive(Debug, Clone, Default)]
pub struct ServerCatalog {
    videos: BTreeMap<String, CatalogVideo>,
}

impl ServerCatalog {
    pub fn new(scores: BTreeMap<String, Vec<f64>>) -> Self {
        let videos = scores
            .into_iter()
            .map(|(id, scores)| {
                (
                    id,
                    CatalogVideo {
                        scores,
                        labels: None,
                    },
                )
            })
            .collect();
        ServerCatalog { videos }
    }

    pub fn from_scores_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(load_score_table(path)?))
    }

    /// Attaches ground-truth labels; unknown ids and length mismatches are errors.
    pub fn with_labels_file(mut self, path: impl AsRef<Path>) -> Result<Self> {
        for record in load_labels(path)? {
            let video = self
                .videos
                .get_mut(&record.video_id)
                .ok_or_else(|| Error::UnknownVideo(record.video_id.clone()))?;
            if video.scores.len() != record.labels.len() {
                return Err(Error::MisalignedSequences(format!(
                    "video {} has {} scores but {} labels",
                    record.video_id,
                    video.scores.len(),
                    record.labels.len()
                )));
            }
            video.labels = Some(record.labels);
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn frames(&self, video: &str) -> Option<usize> {
        self.videos.get(video).map(|v| v.scores.len())
    }
}

/// Per-session, per-video count of frames served.
pub type SessionCounters = BTreeMap<u64, BTreeMap<String, u64>>;

#[derive(Debug, Default)]
struct Shared {
    shutdown: AtomicBool,
    next_session: AtomicU64,
    counters: Mutex<SessionCounters>,
}

impl Shared {
    fn count(&self, session: u64, video: &str) {
        let mut counters = self.counters.lock().expect("counter lock poisoned");
        *counters
            .entry(session)
            .or_default()
            .entry(video.to_owned())
            .or_default() += 1;
    }

    fn session_counts(&self, session: u64) -> BTreeMap<String, u64> {
        let counters = self.counters.lock().expect("counter lock poisoned");
        counters.get(&session).cloned().unwrap_or_default()
    }
}

/// Stops a running server from any thread, e.g. a signal handler.
#[derive(Debug, Clone)]
pub struct ShutdownTrigger {
    shared: Arc<Shared>,
    addr: SocketAddr,
}

impl ShutdownTrigger {
    pub fn trigger(&self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
    }
}

/// A running server. Dropping the handle leaves the server running.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn counters(&self) -> SessionCounters {
        self.shared
            .counters
            .lock()
            .expect("counter lock poisoned")
            .clone()
    }

    pub fn shutdown_trigger(&self) -> ShutdownTrigger {
        ShutdownTrigger {
            shared: Arc::clone(&self.shared),
            addr: self.addr,
        }
    }

    /// Stops accepting, lets sessions finish their current response, and joins.
    pub fn shutdown(self) {
        self.shutdown_trigger().trigger();
        self.wait();
    }

    /// Blocks until some [`ShutdownTrigger`] fires and all sessions have ended.
    pub fn wait(self) {
        let _ = self.acceptor.join();
    }
}

/// Binds `addr` and serves `catalog` on background threads.
pub fn serve(catalog: ServerCatalog, addr: impl ToSocketAddrs) -> Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared::default());
    let catalog = Arc::new(catalog);
    let acceptor = {
        let shared = Arc::clone(&shared);
        std::thread::spawn(move || accept_loop(listener, catalog, shared))
    };
    Ok(ServerHandle {
        addr,
        shared,
        acceptor,
    })
}

fn accept_loop(listener: TcpListener, catalog: Arc<ServerCatalog>, shared: Arc<Shared>) {
    let mut sessions = Vec::new();
    for stream in listener.incoming() {
        if shared.shutdown.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let session = shared.next_session.fetch_add(1, Ordering::SeqCst);
        let catalog = Arc::clone(&catalog);
        let shared = Arc::clone(&shared);
        sessions.push(std::thread::spawn(move || {
            let _ = run_session(stream, session, &catalog, &shared);
        }));
        sessions.retain(|s: &JoinHandle<()>| !s.is_finished());
    }
    for s in sessions {
        let _ = s.join();
    }
}

fn run_session(
    stream: TcpStream,
    session: u64,
    catalog: &ServerCatalog,
    shared: &Shared,
) -> std::io::Result<()> {
    stream.set_read_timeout(Some(POLL_INTERVAL))?;
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    loop {
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => return Ok(()),
            Ok(_) if line.last() != Some(&b'\n') => return Ok(()),
            Ok(_) => {}
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if shared.shutdown.load(Ordering::SeqCst) {
                    return Ok(());
                }
                continue;
            }
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
        let (response, served, close) = respond(&line, session, catalog, shared);
        line.clear();
        writer.write_all(response.to_string().as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if let Some(video) = served {
            shared.count(session, &video);
        }
        if close {
            return Ok(());
        }
    }
}

fn error_response(message: impl std::fmt::Display) -> Value {
    json!({ "ok": false, "error": message.to_string() })
}

/// Response for one request line, the video to charge, and whether to close.
fn respond(
    line: &[u8],
    session: u64,
    catalog: &ServerCatalog,
    shared: &Shared,
) -> (Value, Option<String>, bool) {
    let request = std::str::from_utf8(line)
        .map_err(|e| e.to_string())
        .and_then(|text| serde_json::from_str::<Request>(text.trim()).map_err(|e| e.to_string()));
    let request = match request {
        Ok(r) => r,
        Err(e) => {
            return (
                error_response(format!("malformed request: {e}")),
                None,
                false,
            )
        }
    };
    match request {
        Request::Meta { video } => match catalog.videos.get(&video) {
            Some(v) => (json!({ "ok": true, "frames": v.scores.len() }), None, false),
            None => (error_response("no such video"), None, false),
        },
        Request::Frame { video, index } => {
            let Some(v) = catalog.videos.get(&video) else {
                return (error_response("no such video"), None, false);
            };
            match usize::try_from(index).ok().and_then(|i| v.scores.get(i)) {
                Some(&score) => (
                    json!({ "ok": true, "index": index, "score": score }),
                    Some(video),
                    false,
                ),
                None => (error_response("index out of bounds"), None, false),
            }
        }
        Request::Stats => {
            let requests = shared.session_counts(session);
            let total: u64 = requests.values().sum();
            (
                json!({ "ok": true, "session": session, "requests": requests, "total": total }),
                None,
                false,
            )
        }
        Request::Bye => (json!({ "ok": true }), None, true),
    }
}

/// Server-side view of this client's session.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SessionStats {
    pub session: u64,
    pub requests: BTreeMap<String, u64>,
    pub total: u64,
}

/// [`FrameSource`] backed by one video on a remote frame server.
#[derive(Debug)]
pub struct RemoteFrameSource {
    video: String,
    frames: usize,
    connection: Option<(BufReader<TcpStream>, TcpStream)>,
    requests: u64,
}

impl RemoteFrameSource {
    /// Opens a session and looks up the video's frame count.
    pub fn connect(addr: impl ToSocketAddrs, video: &str) -> Result<Self> {
        let stream = TcpStream::connect(addr).map_err(|e| Error::transport(e.to_string()))?;
        stream
            .set_nodelay(true)
            .map_err(|e| Error::transport(e.to_string()))?;
        let writer = stream
            .try_clone()
            .map_err(|e| Error::transport(e.to_string()))?;
        let mut source = RemoteFrameSource {
            video: video.to_owned(),
            frames: 0,
            connection: Some((BufReader::new(stream), writer)),
            requests: 0,
        };
        let response = source.call(&Request::Meta {
            video: video.to_owned(),
        })?;
        source.frames = response["frames"]
            .as_u64()
            .and_then(|n| usize::try_from(n).ok())
            .ok_or_else(|| Error::transport("meta response lacks a frame count"))?;
        Ok(source)
    }

    pub fn video(&self) -> &str {
        &self.video
    }

    pub fn stats(&mut self) -> Result<SessionStats> {
        let response = self.call(&Request::Stats)?;
        serde_json::from_value(response).map_err(|e| Error::transport(e.to_string()))
    }

    /// Ends the session politely. Later fetches fail with a transport error.
    pub fn close(&mut self) -> Result<()> {
        let result = self.call(&Request::Bye).map(drop);
        self.disconnect();
        result
    }

    /// Drops the connection without telling the server.
    pub fn disconnect(&mut self) {
        if let Some((_, writer)) = self.connection.take() {
            let _ = writer.shutdown(std::net::Shutdown::Both);
        }
    }

    fn call(&mut self, request: &Request) -> Result<Value> {
        let outcome = self.exchange(request);
        if outcome.is_err() {
            self.disconnect();
        }
        let response = outcome?;
        if response["ok"].as_bool() == Some(true) {
            return Ok(response);
        }
        let message = response["error"].as_str().unwrap_or("unknown error");
        Err(match message {
            "no such video" => Error::UnknownVideo(self.video.clone()),
            other => Error::Remote(other.to_owned()),
        })
    }

    fn exchange(&mut self, request: &Request) -> Result<Value> {
        let (reader, writer) = self
            .connection
            .as_mut()
            .ok_or_else(|| Error::transport("connection closed"))?;
        let transport = |e: std::io::Error| Error::transport(e.to_string());
        let mut line = request.encode();
        line.push('\n');
        writer.write_all(line.as_bytes()).map_err(transport)?;
        writer.flush().map_err(transport)?;
        let mut reply = String::new();
        if reader.read_line(&mut reply).map_err(transport)? == 0 {
            return Err(Error::transport("server closed the connection"));
        }
        serde_json::from_str(&reply).map_err(|e| Error::transport(format!("bad response: {e}")))
    }
}

impl FrameSource for RemoteFrameSource {
    fn frame_count(&self) -> usize {
        self.frames
    }

    fn fetch(&mut self, t: usize) -> Result<f64> {
        let response = self.call(&Request::Frame {
            video: self.video.clone(),
            index: t as u64,
        })?;
        if response["index"].as_u64() != Some(t as u64) {
            return Err(Error::transport(format!(
                "asked for frame {t}, got {}",
                response["index"]
            )));
        }
        let score = response["score"]
            .as_f64()
            .ok_or_else(|| Error::transport("frame response lacks a score"))?;
        self.requests += 1;
        Ok(score)
    }

    fn requests(&self) -> u64 {
        self.requests
    }
}

impl Drop for RemoteFrameSource {
    fn drop(&mut self) {
        if self.connection.is_some() {
            let _ = self.close();
        }
    }
}
