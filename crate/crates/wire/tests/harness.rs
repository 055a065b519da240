use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use epr_core::bits::BitString;
use epr_core::protocol::SessionConfig;
use epr_core::quantum::{Basis, Label};
use epr_core::{run_session, AttackModel, Verdict};
use epr_wire::messages::{
    Bye, CheckBases, CheckOutcomes, Hello, MeasureRequest, MeasureResponse, PairsRequest,
    PeerPairsReady, Role,
};
use epr_wire::{
    combine, read_frame, run_alice, run_bob, AliceConfig, BobConfig, Broker, BrokerHandle, Frame,
    FrameType, FramedStream, WireError,
};

const TIMEOUT: Duration = Duration::from_secs(10);

fn broker(attack: AttackModel) -> BrokerHandle {
    Broker::bind("127.0.0.1:0", attack, 0).unwrap().spawn().unwrap()
}

fn alice_config(broker: &BrokerHandle, peer: String, message: &str, n_check: usize, seed: u64) -> AliceConfig {
    AliceConfig {
        message: message.parse().unwrap(),
        session: SessionConfig { n_check },
        seed,
        broker: broker.addr().to_string(),
        peer,
        timeout: TIMEOUT,
        session_id: Some(format!("test-{seed}-{n_check}-{message}")),
    }
}

/// Runs Bob on a thread and Alice on this one.
fn run_pair(
    broker: &BrokerHandle,
    message: &str,
    n_check: usize,
    seed: u64,
) -> (Result<epr_core::Transcript, WireError>, Result<epr_core::Transcript, WireError>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let peer = listener.local_addr().unwrap().to_string();
    let bob_cfg = BobConfig {
        seed: Some(seed),
        broker: broker.addr().to_string(),
        timeout: TIMEOUT,
    };
    let bob = thread::spawn(move || run_bob(&bob_cfg, &listener));
    let alice = run_alice(&alice_config(broker, peer, message, n_check, seed));
    (alice, bob.join().unwrap())
}

#[test]
fn honest_session_over_the_wire_matches_in_process() {
    let b = broker(AttackModel::Honest);
    for seed in 0..10 {
        let (a, bob) = run_pair(&b, "0100100", 16, seed);
        let (a, bob) = (a.unwrap(), bob.unwrap());
        assert_eq!(bob.decoded.to_string(), "0100100");
        assert_eq!(a.classical_bits_sent, 7);
        assert_eq!(bob.classical_bits_sent, 7);
        let local = run_session(&"0100100".parse().unwrap(), AttackModel::Honest, SessionConfig { n_check: 16 }, seed).unwrap();
        let wire = combine(&a, &bob);
        assert_eq!(wire.announcement, local.announcement);
        assert_eq!(wire.verdict(), local.verdict());
        assert_eq!(wire.decoded, local.decoded);
        assert_eq!(wire.test, local.test);
        assert_eq!(wire.outcomes_a, local.outcomes_a);
        assert_eq!(wire.outcomes_b, local.outcomes_b);
        assert_eq!(wire.check_indices, local.check_indices);
    }
}

#[test]
fn ghz_probe_sessions_match_and_eve_reads_the_message() {
    let b = broker(AttackModel::GhzProbe);
    let message = "1100101011";
    let mut passes = 0;
    for seed in 0..40 {
        let (a, bob) = run_pair(&b, message, 2, seed);
        let (a, bob) = (a.unwrap(), bob.unwrap());
        let local = run_session(&message.parse().unwrap(), AttackModel::GhzProbe, SessionConfig { n_check: 2 }, seed).unwrap();
        let wire = combine(&a, &bob);
        assert_eq!(wire.attack, AttackModel::GhzProbe);
        assert_eq!(wire.verdict(), local.verdict());
        assert_eq!(wire.announcement, local.announcement);
        assert_eq!(wire.decoded, local.decoded);
        if wire.verdict() == Verdict::Pass {
            passes += 1;
            // Eve's observation is recorded by the broker once Bob is done.
            let session = format!("test-{seed}-2-{message}");
            let mut eve = None;
            for _ in 0..100 {
                eve = b.eve_record(&session);
                if eve.is_some() {
                    break;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let eve = eve.expect("eve record");
            assert_eq!(eve.guess.unwrap().to_string(), message);
            assert_eq!(Some(eve.outcomes), local.eve.map(|e| e.outcomes));
        } else {
            assert!(bob.announcement.is_empty());
        }
    }
    assert!(passes > 0);
}

#[test]
fn broker_down_means_transport_error_and_no_announcement() {
    let dead = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = dead.local_addr().unwrap().to_string();
    drop(dead);
    let bob_listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let cfg = AliceConfig {
        message: "0101".parse().unwrap(),
        session: SessionConfig { n_check: 4 },
        seed: 1,
        broker: addr,
        peer: bob_listener.local_addr().unwrap().to_string(),
        timeout: TIMEOUT,
        session_id: None,
    };
    let err = run_alice(&cfg).unwrap_err();
    assert!(matches!(err, WireError::Io(_)), "{err}");
    // Bob never heard from Alice.
    bob_listener.set_nonblocking(true).unwrap();
    assert!(bob_listener.accept().is_err());
}

fn raw_hello(addr: &str, session: &str, role: Role) -> FramedStream {
    let mut s = FramedStream::new(TcpStream::connect(addr).unwrap(), session, Some(TIMEOUT)).unwrap();
    s.send(FrameType::Hello, &Hello { role, attack: None }).unwrap();
    let reply: Hello = s.expect(FrameType::Hello).unwrap();
    assert_eq!(reply.role, Role::Broker);
    s
}

#[test]
fn double_measurement_is_refused() {
    let b = broker(AttackModel::Honest);
    let addr = b.addr().to_string();
    let mut alice = raw_hello(&addr, "dm", Role::Alice);
    alice
        .send(FrameType::PairsReady, &PairsRequest { n_pairs: 2, seed: Some(5), check_indices: vec![0] })
        .unwrap();
    alice.recv().unwrap();
    let req = MeasureRequest { pair: 0, label: Label::A, basis: Basis::Z };
    alice.send(FrameType::MeasureReq, &req).unwrap();
    let first: MeasureResponse = alice.expect(FrameType::MeasureResp).unwrap();
    assert!(first.bit <= 1);
    alice.send(FrameType::MeasureReq, &req).unwrap();
    match alice.expect::<MeasureResponse>(FrameType::MeasureResp) {
        Err(WireError::Remote { code, .. }) => assert_eq!(code, "already-measured"),
        other => panic!("{other:?}"),
    }
    // The session stays usable.
    alice
        .send(FrameType::MeasureReq, &MeasureRequest { pair: 1, label: Label::A, basis: Basis::X })
        .unwrap();
    alice.expect::<MeasureResponse>(FrameType::MeasureResp).unwrap();
}

#[test]
fn parties_measure_only_their_own_qubit() {
    let b = broker(AttackModel::GhzProbe);
    let addr = b.addr().to_string();
    let mut alice = raw_hello(&addr, "own", Role::Alice);
    alice
        .send(FrameType::PairsReady, &PairsRequest { n_pairs: 1, seed: None, check_indices: vec![] })
        .unwrap();
    alice.recv().unwrap();
    for label in [Label::B, Label::E] {
        alice
            .send(FrameType::MeasureReq, &MeasureRequest { pair: 0, label, basis: Basis::Z })
            .unwrap();
        match alice.expect::<MeasureResponse>(FrameType::MeasureResp) {
            Err(WireError::Remote { code, .. }) => assert_eq!(code, "not-owner"),
            other => panic!("{other:?}"),
        }
    }
    let mut bob = raw_hello(&addr, "own", Role::Bob);
    bob.send(FrameType::MeasureReq, &MeasureRequest { pair: 0, label: Label::B, basis: Basis::Z })
        .unwrap();
    bob.expect::<MeasureResponse>(FrameType::MeasureResp).unwrap();
}

#[test]
fn measuring_before_pairs_exist_is_refused() {
    let b = broker(AttackModel::Honest);
    let mut bob = raw_hello(&b.addr().to_string(), "early", Role::Bob);
    bob.send(FrameType::MeasureReq, &MeasureRequest { pair: 0, label: Label::B, basis: Basis::Z })
        .unwrap();
    match bob.expect::<MeasureResponse>(FrameType::MeasureResp) {
        Err(WireError::Remote { code, .. }) => assert_eq!(code, "no-pairs"),
        other => panic!("{other:?}"),
    }
}

/// Reads frames until EOF, returning them.
fn drain(stream: &mut TcpStream) -> Vec<Frame> {
    let mut out = Vec::new();
    while let Ok(f) = read_frame(stream) {
        out.push(f);
    }
    out
}

#[test]
fn short_payload_closes_with_error() {
    let b = broker(AttackModel::Honest);
    let mut s = TcpStream::connect(b.addr()).unwrap();
    s.set_read_timeout(Some(TIMEOUT)).unwrap();
    let payload = br#"{"type":"HELLO","session":"x","seq":0,"body":{"role":"alice"}}"#;
    s.write_all(&(payload.len() as u32 + 10).to_be_bytes()).unwrap();
    s.write_all(payload).unwrap();
    s.shutdown(std::net::Shutdown::Write).unwrap();
    let frames = drain(&mut s);
    assert_eq!(frames.len(), 1);
    assert_eq!(frames[0].kind, FrameType::Error);
    assert_eq!(frames[0].body["code"], "truncated-frame");
    // Connection is closed afterwards.
    let mut buf = [0u8; 1];
    assert_eq!(s.read(&mut buf).unwrap_or(0), 0);
}

#[test]
fn long_payload_closes_with_error() {
    let b = broker(AttackModel::Honest);
    let mut s = TcpStream::connect(b.addr()).unwrap();
    s.set_read_timeout(Some(TIMEOUT)).unwrap();
    let payload = br#"{"type":"HELLO","session":"x","seq":0,"body":{"role":"alice"}}"#;
    s.write_all(&(payload.len() as u32 - 5).to_be_bytes()).unwrap();
    s.write_all(payload).unwrap();
    let frames = drain(&mut s);
    assert_eq!(frames.len(), 1);
    assert_eq!(frames[0].kind, FrameType::Error);
    assert_eq!(frames[0].body["code"], "malformed-frame");
}

#[test]
fn malformed_body_closes_session() {
    let b = broker(AttackModel::Honest);
    let mut alice = raw_hello(&b.addr().to_string(), "mal", Role::Alice);
    alice
        .send(FrameType::PairsReady, &serde_json::json!({"n_pairs": "many"}))
        .unwrap();
    match alice.recv() {
        Ok(f) => {
            assert_eq!(f.kind, FrameType::Error);
            assert_eq!(f.body["code"], "malformed-frame");
        }
        Err(e) => panic!("{e}"),
    }
    assert!(matches!(alice.recv(), Err(WireError::Closed)));
}

#[test]
fn non_increasing_seq_is_rejected() {
    let b = broker(AttackModel::Honest);
    let mut s = TcpStream::connect(b.addr()).unwrap();
    s.set_read_timeout(Some(TIMEOUT)).unwrap();
    let hello = Frame::new(FrameType::Hello, "seq", 4, &Hello { role: Role::Alice, attack: None }).unwrap();
    s.write_all(&hello.encode()).unwrap();
    assert_eq!(read_frame(&mut s).unwrap().kind, FrameType::Hello);
    let bye = Frame::new(FrameType::Bye, "seq", 4, &Bye {}).unwrap();
    s.write_all(&bye.encode()).unwrap();
    let frames = drain(&mut s);
    assert_eq!(frames[0].kind, FrameType::Error);
    assert_eq!(frames[0].body["code"], "bad-seq");
}

/// Plays a dishonest Alice against a real Bob and broker.
#[test]
fn announce_before_verdict_is_a_violation() {
    let b = broker(AttackModel::Honest);
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let peer = listener.local_addr().unwrap();
    let bob_cfg = BobConfig {
        seed: None,
        broker: b.addr().to_string(),
        timeout: TIMEOUT,
    };
    let bob = thread::spawn(move || run_bob(&bob_cfg, &listener));

    let mut broker_conn = raw_hello(&b.addr().to_string(), "rogue", Role::Alice);
    broker_conn
        .send(FrameType::PairsReady, &PairsRequest { n_pairs: 2, seed: Some(3), check_indices: vec![0] })
        .unwrap();
    broker_conn.recv().unwrap();

    let mut to_bob = FramedStream::new(TcpStream::connect(peer).unwrap(), "rogue", Some(TIMEOUT)).unwrap();
    to_bob.send(FrameType::Hello, &Hello { role: Role::Alice, attack: None }).unwrap();
    to_bob.expect::<Hello>(FrameType::Hello).unwrap();
    to_bob
        .send(
            FrameType::PairsReady,
            &PeerPairsReady { seed: 3, n_pairs: 2, n_check: 1, check_indices: vec![0], message_len: 1 },
        )
        .unwrap();
    to_bob.expect::<CheckBases>(FrameType::CheckBasis).unwrap();
    to_bob.expect::<CheckOutcomes>(FrameType::CheckOutcome).unwrap();
    to_bob.send(FrameType::CheckBasis, &CheckBases { bases: vec![Basis::Z] }).unwrap();
    to_bob
        .send(FrameType::CheckOutcome, &CheckOutcomes { outcomes: BitString::from_bits([0]) })
        .unwrap();
    to_bob
        .send(FrameType::Announce, &epr_wire::messages::Announce { bits: BitString::from_bits([1]) })
        .unwrap();

    let err = bob.join().unwrap().unwrap_err();
    assert!(matches!(err, WireError::ProtocolViolation(_)), "{err}");
    assert!(err.is_protocol_violation());
    match to_bob.recv() {
        Ok(f) => {
            assert_eq!(f.kind, FrameType::Error);
            assert_eq!(f.body["code"], "protocol-violation");
        }
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn silent_peer_times_out() {
    let b = broker(AttackModel::Honest);
    // Bob accepts but never answers.
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let peer = listener.local_addr().unwrap().to_string();
    let hold = thread::spawn(move || {
        let (s, _) = listener.accept().unwrap();
        thread::sleep(Duration::from_millis(800));
        drop(s);
    });
    let mut cfg = alice_config(&b, peer, "01", 2, 9);
    cfg.timeout = Duration::from_millis(200);
    let err = run_alice(&cfg).unwrap_err();
    assert!(matches!(err, WireError::Timeout), "{err}");
    hold.join().unwrap();
}
