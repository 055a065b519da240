//! Alice and Bob as networked state machines.
//!
//! Phase order matches the in-process session:
//!
//! 1. Alice has the broker prepare pairs and measures her check qubits.
//! 2. Alice sends PAIRS_READY to Bob, who then measures his check qubits.
//! 3. Both publish CHECK_BASIS and CHECK_OUTCOME; Alice sends the VERDICT.
//! 4. On pass only: Alice measures her message qubits and sends ANNOUNCE to
//!    Bob and to the broker (the channel is public); Bob measures and decodes.
//!
//! Both sides draw from the same per-role streams as
//! [`epr_core::run_session`], so a wire run reproduces its transcript.

use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use epr_core::bits::BitString;
use epr_core::protocol::{alice_encode, bob_decode, choose_check_indices, SessionConfig};
use epr_core::quantum::{Basis, Label};
use epr_core::security::{compare_sides, draw_bases, CheckSide, TestVerdict};
use epr_core::{AttackModel, RandomStream, StreamId, Transcript, Verdict};
use log::debug;

use crate::error::WireError;
use crate::frame::{FrameType, FramedStream};
use crate::messages::{
    Announce, Bye, CheckBases, CheckOutcomes, Hello, MeasureRequest, MeasureResponse,
    PairsAllocated, PairsRequest, PeerPairsReady, Role, VerdictBody,
};

pub const DEFAULT_FRAME_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone)]
pub struct AliceConfig {
    pub message: BitString,
    pub session: SessionConfig,
    pub seed: u64,
    pub broker: String,
    pub peer: String,
    pub timeout: Duration,
    /// Session id sent in every frame; generated from the seed when `None`.
    pub session_id: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BobConfig {
    /// Expected session seed; `None` accepts the one Alice sends.
    pub seed: Option<u64>,
    pub broker: String,
    pub timeout: Duration,
}

/// Session id for a run: the seed plus a process-local nonce, so repeated
/// runs with one seed against a long-lived broker do not collide.
pub fn session_name(seed: u64) -> String {
    static NEXT: AtomicU64 = AtomicU64::new(0);
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.subsec_nanos())
        .unwrap_or(0);
    format!(
        "epr-{seed:016x}-{}-{}-{nanos:08x}",
        std::process::id(),
        NEXT.fetch_add(1, Ordering::Relaxed)
    )
}

fn connect(addr: &str, session: &str, timeout: Duration) -> Result<FramedStream, WireError> {
    let mut last = None;
    for a in addr.to_socket_addrs()? {
        match TcpStream::connect_timeout(&a, timeout) {
            Ok(s) => return FramedStream::new(s, session, Some(timeout)),
            Err(e) => last = Some(e),
        }
    }
    Err(last
        .unwrap_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "no address"))
        .into())
}

/// Broker handshake; returns the channel's attack model.
fn hello_broker(broker: &mut FramedStream, role: Role) -> Result<AttackModel, WireError> {
    broker.send(FrameType::Hello, &Hello { role, attack: None })?;
    let reply: Hello = broker.expect(FrameType::Hello)?;
    reply
        .attack
        .ok_or_else(|| WireError::ProtocolViolation("broker HELLO without attack".into()))
}

fn measure_all(
    broker: &mut FramedStream,
    pairs: &[usize],
    label: Label,
    bases: &[Basis],
) -> Result<BitString, WireError> {
    let mut out = BitString::new();
    for (&pair, &basis) in pairs.iter().zip(bases) {
        broker.send(FrameType::MeasureReq, &MeasureRequest { pair, label, basis })?;
        let resp: MeasureResponse = broker.expect(FrameType::MeasureResp)?;
        if resp.pair != pair || resp.label != label || resp.bit > 1 {
            return Err(WireError::ProtocolViolation(format!(
                "measurement reply {resp:?} does not answer pair {pair} label {label}"
            )));
        }
        out.push(resp.bit);
    }
    Ok(out)
}

fn message_pairs(n_pairs: usize, check_indices: &[usize], len: usize) -> Vec<usize> {
    (0..n_pairs)
        .filter(|i| check_indices.binary_search(i).is_err())
        .take(len)
        .collect()
}

/// Alice's side. Returns her view of the transcript: Bob's outcomes and the
/// decoded message are left empty.
pub fn run_alice(config: &AliceConfig) -> Result<Transcript, WireError> {
    let name = config
        .session_id
        .clone()
        .unwrap_or_else(|| session_name(config.seed));
    let n_check = config.session.n_check;
    let n_pairs = config.session.n_pairs(config.message.len())?;
    let mut alice = RandomStream::new(config.seed, StreamId::Alice);

    let mut broker = connect(&config.broker, &name, config.timeout)?;
    let attack = hello_broker(&mut broker, Role::Alice)?;

    let check_indices = choose_check_indices(n_pairs, n_check, &mut alice);
    broker.send(
        FrameType::PairsReady,
        &PairsRequest {
            n_pairs,
            seed: Some(config.seed),
            check_indices: check_indices.clone(),
        },
    )?;
    let allocated: PairsAllocated = broker.expect(FrameType::PairsReady)?;
    if allocated.n_pairs != n_pairs || allocated.seed != config.seed {
        return Err(WireError::ProtocolViolation(format!(
            "broker allocated {allocated:?}, requested {n_pairs} pairs with seed {}",
            config.seed
        )));
    }

    let bases_a = draw_bases(&mut alice, check_indices.len());
    let outcomes_a = measure_all(&mut broker, &check_indices, Label::A, &bases_a)?;
    let side_a = CheckSide {
        bases: bases_a,
        outcomes: outcomes_a,
    };

    let mut bob = connect(&config.peer, &name, config.timeout)?;
    bob.send(FrameType::Hello, &Hello { role: Role::Alice, attack: None })?;
    let hello: Hello = bob.expect(FrameType::Hello)?;
    if hello.role != Role::Bob {
        return Err(WireError::ProtocolViolation(format!("peer is {:?}, not bob", hello.role)));
    }
    bob.send(
        FrameType::PairsReady,
        &PeerPairsReady {
            seed: config.seed,
            n_pairs,
            n_check,
            check_indices: check_indices.clone(),
            message_len: config.message.len(),
        },
    )?;

    let bob_bases: CheckBases = bob.expect(FrameType::CheckBasis)?;
    let bob_outcomes: CheckOutcomes = bob.expect(FrameType::CheckOutcome)?;
    bob.send(FrameType::CheckBasis, &CheckBases { bases: side_a.bases.clone() })?;
    bob.send(
        FrameType::CheckOutcome,
        &CheckOutcomes {
            outcomes: side_a.outcomes.clone(),
        },
    )?;
    let side_b = CheckSide {
        bases: bob_bases.bases,
        outcomes: bob_outcomes.outcomes,
    };
    let test = compare_sides(&check_indices, &side_a, &side_b)?;
    bob.send(FrameType::Verdict, &verdict_body(&test))?;
    debug!("{name}: verdict {}", test.verdict);

    let mut transcript = Transcript {
        seed: config.seed,
        attack,
        n_check,
        check_indices: check_indices.clone(),
        test,
        message: config.message.clone(),
        outcomes_a: BitString::new(),
        outcomes_b: BitString::new(),
        announcement: BitString::new(),
        decoded: BitString::new(),
        classical_bits_sent: 0,
        eve: None,
    };

    if transcript.test.passed() {
        let pairs = message_pairs(n_pairs, &check_indices, config.message.len());
        let z = vec![Basis::Z; pairs.len()];
        let outcomes_a = measure_all(&mut broker, &pairs, Label::A, &z)?;
        let announcement = alice_encode(&config.message, &outcomes_a)?;
        let body = Announce {
            bits: announcement.clone(),
        };
        bob.send(FrameType::Announce, &body)?;
        broker.send(FrameType::Announce, &body)?;
        transcript.classical_bits_sent = announcement.len() as u64;
        transcript.outcomes_a = outcomes_a;
        transcript.announcement = announcement;
    }

    bob.expect::<Bye>(FrameType::Bye)?;
    bob.send(FrameType::Bye, &Bye {})?;
    broker.send(FrameType::Bye, &Bye {})?;
    Ok(transcript)
}

fn verdict_body(test: &TestVerdict) -> VerdictBody {
    VerdictBody {
        verdict: test.verdict,
        kept_count: test.kept_count,
        mismatch_count: test.mismatch_count,
    }
}

fn violation(peer: &mut FramedStream, msg: String) -> WireError {
    let _ = peer.send_error("protocol-violation", &msg);
    WireError::ProtocolViolation(msg)
}

/// Bob's side for one session accepted on `listener`. Returns his view of
/// the transcript: the message and Alice's outcomes are left empty.
pub fn run_bob(config: &BobConfig, listener: &TcpListener) -> Result<Transcript, WireError> {
    let (stream, _) = listener.accept()?;
    let mut alice = FramedStream::new(stream, "", Some(config.timeout))?;
    let first = alice.recv()?;
    if first.kind != FrameType::Hello {
        return Err(violation(&mut alice, format!("expected HELLO, got {}", first.kind)));
    }
    let hello: Hello = first.parse_body()?;
    if hello.role != Role::Alice {
        return Err(violation(&mut alice, format!("peer is {:?}, not alice", hello.role)));
    }
    let name = first.session.clone();
    alice.set_session(&name);
    alice.send(FrameType::Hello, &Hello { role: Role::Bob, attack: None })?;

    let mut broker = connect(&config.broker, &name, config.timeout)?;
    let attack = hello_broker(&mut broker, Role::Bob)?;

    let ready: PeerPairsReady = alice.expect(FrameType::PairsReady)?;
    if config.seed.is_some_and(|s| s != ready.seed) {
        return Err(violation(
            &mut alice,
            format!("seed {} does not match configured {:?}", ready.seed, config.seed),
        ));
    }
    let sorted = ready.check_indices.windows(2).all(|w| w[0] < w[1]);
    if !sorted
        || ready.check_indices.len() != ready.n_check
        || ready.n_check + ready.message_len != ready.n_pairs
    {
        return Err(violation(&mut alice, format!("inconsistent PAIRS_READY {ready:?}")));
    }

    let mut bob_rng = RandomStream::new(ready.seed, StreamId::Bob);
    let bases_b = draw_bases(&mut bob_rng, ready.check_indices.len());
    let outcomes_b = measure_all(&mut broker, &ready.check_indices, Label::B, &bases_b)?;
    let side_b = CheckSide {
        bases: bases_b,
        outcomes: outcomes_b,
    };
    alice.send(FrameType::CheckBasis, &CheckBases { bases: side_b.bases.clone() })?;
    alice.send(
        FrameType::CheckOutcome,
        &CheckOutcomes {
            outcomes: side_b.outcomes.clone(),
        },
    )?;
    let a_bases: CheckBases = alice.expect(FrameType::CheckBasis)?;
    let a_outcomes: CheckOutcomes = alice.expect(FrameType::CheckOutcome)?;
    let side_a = CheckSide {
        bases: a_bases.bases,
        outcomes: a_outcomes.outcomes,
    };
    let test = compare_sides(&ready.check_indices, &side_a, &side_b)?;

    let frame = alice.recv()?;
    match frame.kind {
        FrameType::Verdict => {}
        FrameType::Announce => {
            return Err(violation(&mut alice, "ANNOUNCE received before VERDICT".into()))
        }
        other => return Err(violation(&mut alice, format!("expected VERDICT, got {other}"))),
    }
    let claimed: VerdictBody = frame.parse_body()?;
    if claimed != verdict_body(&test) {
        return Err(violation(
            &mut alice,
            format!("alice claims {claimed:?}, bob computed {:?}", verdict_body(&test)),
        ));
    }

    let mut transcript = Transcript {
        seed: ready.seed,
        attack,
        n_check: ready.n_check,
        check_indices: ready.check_indices.clone(),
        test,
        message: BitString::new(),
        outcomes_a: BitString::new(),
        outcomes_b: BitString::new(),
        announcement: BitString::new(),
        decoded: BitString::new(),
        classical_bits_sent: 0,
        eve: None,
    };

    if transcript.verdict() == Verdict::Pass {
        let announce: Announce = alice.expect(FrameType::Announce)?;
        if announce.bits.len() != ready.message_len {
            return Err(violation(
                &mut alice,
                format!(
                    "announcement has {} bits, expected {}",
                    announce.bits.len(),
                    ready.message_len
                ),
            ));
        }
        let pairs = message_pairs(ready.n_pairs, &ready.check_indices, ready.message_len);
        let z = vec![Basis::Z; pairs.len()];
        let outcomes_b = measure_all(&mut broker, &pairs, Label::B, &z)?;
        transcript.decoded = bob_decode(&announce.bits, &outcomes_b)?;
        transcript.classical_bits_sent = announce.bits.len() as u64;
        transcript.outcomes_b = outcomes_b;
        transcript.announcement = announce.bits;
    }

    // The broker first: Alice may be hosting it and exit on our BYE.
    broker.send(FrameType::Bye, &Bye {})?;
    alice.send(FrameType::Bye, &Bye {})?;
    // Alice's closing BYE; a peer that simply hangs up is fine too.
    match alice.recv() {
        Ok(f) if f.kind == FrameType::Bye => {}
        Ok(f) if f.kind == FrameType::Announce => {
            return Err(violation(&mut alice, "ANNOUNCE after abort".into()))
        }
        Ok(f) => return Err(violation(&mut alice, format!("expected BYE, got {}", f.kind))),
        Err(WireError::Closed) => {}
        Err(e) => return Err(e),
    }
    Ok(transcript)
}

/// Joins Alice's and Bob's views of one session into a full transcript.
pub fn combine(alice: &Transcript, bob: &Transcript) -> Transcript {
    let mut t = alice.clone();
    t.outcomes_b = bob.outcomes_b.clone();
    t.decoded = bob.decoded.clone();
    t
}
