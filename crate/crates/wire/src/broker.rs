//! Pair broker: prepares pairs per session and answers measurement requests.
//!
//! The broker is the only holder of quantum state. Clients learn a bit only
//! by measuring a qubit they own, and each `(pair, label)` can be measured
//! once. Eve lives here too: she reads the public announcement that Alice
//! copies to the broker and, for the probe attack, reads her qubits after
//! Bob has measured his.

use std::collections::HashMap;
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use epr_core::batch::{BatchError, PairBatch, Party};
use epr_core::bits::BitString;
use epr_core::protocol::{eve_observe, pair_roles, MAX_PAIRS};
use epr_core::{AttackModel, EveRecord};
use log::{debug, info, warn};

use crate::error::WireError;
use crate::frame::{Frame, FrameType, FramedStream};
use crate::messages::{
    Announce, Hello, MeasureRequest, MeasureResponse, PairsAllocated, PairsRequest, Role,
};

/// Idle limit for a client connection.
const IDLE_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Default)]
struct SessionState {
    batch: Option<PairBatch>,
    message_pairs: Vec<usize>,
    announcement: Option<BitString>,
    eve: Option<EveRecord>,
    connections: usize,
}

impl SessionState {
    /// Eve reads her records once the announcement is public and Bob has
    /// measured every message pair.
    fn observe_if_ready(&mut self, session: &str) {
        let (Some(batch), Some(announcement)) = (self.batch.as_mut(), self.announcement.as_ref()) else {
            return;
        };
        if self.eve.is_some() || !batch.model().has_eve() || announcement.len() > self.message_pairs.len() {
            return;
        }
        let pairs = &self.message_pairs[..announcement.len()];
        let bob_done = pairs
            .iter()
            .all(|&p| batch.pair(p).is_some_and(|x| x.is_measured(Party::Bob.label())));
        if !bob_done {
            return;
        }
        match eve_observe(batch, pairs, announcement) {
            Ok(record) => {
                if let Some(r) = &record {
                    info!(
                        "session {session}: eve guess {}",
                        r.guess.as_ref().map(ToString::to_string).unwrap_or_default()
                    );
                }
                self.eve = record;
            }
            Err(e) => warn!("session {session}: eve observation failed: {e}"),
        }
    }
}

struct Shared {
    attack: AttackModel,
    seed: u64,
    next_session: AtomicU64,
    sessions: Mutex<HashMap<String, SessionState>>,
}

pub struct Broker {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl Broker {
    /// Binds the broker. `seed` is used for sessions whose PAIRS_READY carries
    /// no seed of its own.
    pub fn bind<A: ToSocketAddrs>(addr: A, attack: AttackModel, seed: u64) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            shared: Arc::new(Shared {
                attack,
                seed,
                next_session: AtomicU64::new(0),
                sessions: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until the process exits.
    pub fn serve(self) -> io::Result<()> {
        let stop = AtomicBool::new(false);
        accept_loop(&self.listener, &self.shared, &stop);
        Ok(())
    }

    pub fn spawn(self) -> io::Result<BrokerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let shared = Arc::clone(&self.shared);
        let flag = Arc::clone(&stop);
        let thread = thread::spawn(move || accept_loop(&self.listener, &self.shared, &flag));
        Ok(BrokerHandle {
            addr,
            stop,
            shared,
            thread: Some(thread),
        })
    }
}

/// A broker running on a background thread.
pub struct BrokerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    shared: Arc<Shared>,
    thread: Option<JoinHandle<()>>,
}

impl BrokerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Eve's record for a session, once she has observed it.
    pub fn eve_record(&self, session: &str) -> Option<EveRecord> {
        let sessions = self.shared.sessions.lock().unwrap();
        sessions.get(session).and_then(|s| s.eve.clone())
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept call.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for BrokerHandle {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

/// Binds `addr` and serves forever.
pub fn broker_serve<A: ToSocketAddrs>(addr: A, attack: AttackModel, seed: u64) -> io::Result<()> {
    let broker = Broker::bind(addr, attack, seed)?;
    info!("broker listening on {} ({attack})", broker.local_addr()?);
    broker.serve()
}

fn accept_loop(listener: &TcpListener, shared: &Arc<Shared>, stop: &AtomicBool) {
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        match stream {
            Ok(s) => {
                let shared = Arc::clone(shared);
                thread::spawn(move || serve_connection(s, &shared));
            }
            Err(e) => warn!("accept failed: {e}"),
        }
    }
}

/// Error reply; `close` ends the connection after sending it.
struct Reject {
    code: &'static str,
    message: String,
    close: bool,
}

impl Reject {
    fn keep(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            close: false,
        }
    }

    fn close(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            close: true,
        }
    }
}

impl From<WireError> for Reject {
    fn from(e: WireError) -> Self {
        Reject::close(e.code(), e.to_string())
    }
}

enum Flow {
    Continue,
    Close,
}

struct Connection {
    role: Role,
    session: String,
}

fn serve_connection(stream: TcpStream, shared: &Shared) {
    let peer = stream.peer_addr().ok();
    let mut conn = match FramedStream::new(stream, "", Some(IDLE_TIMEOUT)) {
        Ok(c) => c,
        Err(e) => {
            warn!("connection setup failed: {e}");
            return;
        }
    };
    let mut state: Option<Connection> = None;
    loop {
        let frame = match conn.recv() {
            Ok(f) => f,
            Err(WireError::Closed) => break,
            Err(e) => {
                debug!("{peer:?}: {e}");
                let _ = conn.send_error(e.code(), &e.to_string());
                break;
            }
        };
        match handle_frame(shared, &mut conn, &mut state, frame) {
            Ok(Flow::Continue) => {}
            Ok(Flow::Close) => break,
            Err(r) => {
                debug!("{peer:?}: {} {}", r.code, r.message);
                if conn.send_error(r.code, &r.message).is_err() || r.close {
                    break;
                }
            }
        }
    }
    conn.shutdown();
    if let Some(c) = state {
        let mut sessions = shared.sessions.lock().unwrap();
        if let Some(s) = sessions.get_mut(&c.session) {
            s.connections -= 1;
            if s.connections == 0 {
                // Quantum state is gone once both parties leave; Eve's record stays.
                s.batch = None;
            }
        }
    }
}

fn handle_frame(
    shared: &Shared,
    conn: &mut FramedStream,
    state: &mut Option<Connection>,
    frame: Frame,
) -> Result<Flow, Reject> {
    if frame.kind == FrameType::Hello {
        if state.is_some() {
            return Err(Reject::close("protocol-violation", "duplicate HELLO"));
        }
        let hello: Hello = frame.parse_body()?;
        if hello.role == Role::Broker {
            return Err(Reject::close("protocol-violation", "clients are alice or bob"));
        }
        conn.set_session(&frame.session);
        shared
            .sessions
            .lock()
            .unwrap()
            .entry(frame.session.clone())
            .or_default()
            .connections += 1;
        *state = Some(Connection {
            role: hello.role,
            session: frame.session,
        });
        conn.send(
            FrameType::Hello,
            &Hello {
                role: Role::Broker,
                attack: Some(shared.attack),
            },
        )?;
        return Ok(Flow::Continue);
    }
    let Some(c) = state.as_ref() else {
        return Err(Reject::close("protocol-violation", "HELLO required first"));
    };
    if frame.session != c.session {
        return Err(Reject::close(
            "protocol-violation",
            format!("frame for session {:?} on connection bound to {:?}", frame.session, c.session),
        ));
    }
    match frame.kind {
        FrameType::PairsReady => {
            if c.role != Role::Alice {
                return Err(Reject::keep("not-owner", "only alice prepares pairs"));
            }
            let req: PairsRequest = frame.parse_body()?;
            let allocated = allocate(shared, &c.session, &req)?;
            conn.send(FrameType::PairsReady, &allocated)?;
        }
        FrameType::MeasureReq => {
            let req: MeasureRequest = frame.parse_body()?;
            let owner = match c.role {
                Role::Alice => Party::Alice,
                _ => Party::Bob,
            };
            if req.label != owner.label() {
                return Err(Reject::keep(
                    "not-owner",
                    format!("{:?} does not hold qubit {}", c.role, req.label),
                ));
            }
            let bit = {
                let mut sessions = shared.sessions.lock().unwrap();
                let s = sessions.get_mut(&c.session).expect("registered at HELLO");
                let batch = s
                    .batch
                    .as_mut()
                    .ok_or_else(|| Reject::keep("no-pairs", "no pairs prepared for this session"))?;
                let bit = batch.measure(req.pair, req.label, req.basis).map_err(|e| match e {
                    BatchError::AlreadyMeasured { .. } => Reject::keep("already-measured", e.to_string()),
                    other => Reject::keep("bad-request", other.to_string()),
                })?;
                s.observe_if_ready(&c.session);
                bit
            };
            conn.send(
                FrameType::MeasureResp,
                &MeasureResponse {
                    pair: req.pair,
                    label: req.label,
                    bit,
                },
            )?;
        }
        FrameType::Announce => {
            if c.role != Role::Alice {
                return Err(Reject::keep("not-owner", "only alice announces"));
            }
            let a: Announce = frame.parse_body()?;
            let mut sessions = shared.sessions.lock().unwrap();
            let s = sessions.get_mut(&c.session).expect("registered at HELLO");
            s.announcement = Some(a.bits);
            s.observe_if_ready(&c.session);
        }
        FrameType::Bye => return Ok(Flow::Close),
        FrameType::Error => {
            debug!("client error frame on {}: {:?}", c.session, frame.body);
            return Ok(Flow::Close);
        }
        other => {
            return Err(Reject::keep(
                "unexpected-frame",
                format!("broker does not handle {other}"),
            ))
        }
    }
    Ok(Flow::Continue)
}

fn allocate(shared: &Shared, session: &str, req: &PairsRequest) -> Result<PairsAllocated, Reject> {
    if req.n_pairs > MAX_PAIRS {
        return Err(Reject::keep("bad-request", format!("{} pairs exceeds limit", req.n_pairs)));
    }
    let ordered = req.check_indices.windows(2).all(|w| w[0] < w[1]);
    if !ordered || req.check_indices.last().is_some_and(|&i| i >= req.n_pairs) {
        return Err(Reject::keep(
            "bad-request",
            "check indices must be ascending and within the batch",
        ));
    }
    let seed = req.seed.unwrap_or_else(|| {
        shared
            .seed
            .wrapping_add(shared.next_session.fetch_add(1, Ordering::SeqCst))
    });
    let roles = pair_roles(req.n_pairs, &req.check_indices);
    let batch = PairBatch::prepare(shared.attack, seed, &roles)
        .map_err(|e| Reject::keep("bad-request", e.to_string()))?;
    let mut sessions = shared.sessions.lock().unwrap();
    let s = sessions.get_mut(session).expect("registered at HELLO");
    if s.batch.is_some() {
        return Err(Reject::keep("pairs-exist", "pairs already prepared for this session"));
    }
    s.message_pairs = (0..req.n_pairs)
        .filter(|i| req.check_indices.binary_search(i).is_err())
        .collect();
    s.batch = Some(batch);
    info!("session {session}: {} pairs, seed {seed}", req.n_pairs);
    Ok(PairsAllocated {
        n_pairs: req.n_pairs,
        seed,
    })
}
