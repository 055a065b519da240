//! Simulation and analysis of direct communication over shared EPR pairs.
//!
//! Alice and Bob share `(|00⟩+|11⟩)/√2` pairs. After a channel test on a
//! random subset, Alice Z-measures each remaining pair and publicly announces
//! one bit per secret bit; Bob combines the announcement with his own Z
//! outcomes to recover the message.
//!
//! * [`quantum`]: few-qubit state vectors, H, CNOT and projective measurement.
//! * [`protocol`]: encode/decode rules and the session state machine.
//! * [`security`]: the random-basis channel test and detection estimates.
//! * [`adversary`]: channel sources with eavesdroppers and leakage figures.

pub mod adversary;
pub mod batch;
pub mod bits;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod protocol;
pub mod quantum;
pub mod rng;
pub mod security;
pub mod stats;
pub mod summary;

pub use adversary::{AttackModel, EveRecord, InterceptPolicy, LeakageStats};
pub use batch::{PairBatch, PairRole, Party};
pub use bits::BitString;
pub use protocol::{
    alice_encode, bob_decode, run_session, SessionConfig, Transcript, TranscriptRecord, Verdict,
};
pub use quantum::{make_bell_pair, make_ghz_probe, Basis, Label, StateVector};
pub use rng::{RandomStream, StreamId};
pub use security::{estimate_detection, run_channel_test, CheckCount, DetectionStats, TestVerdict};
