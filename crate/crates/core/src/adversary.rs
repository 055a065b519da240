//! Channel sources with optional eavesdroppers, and Eve's side of the ledger.
//!
//! Three sources are modeled:
//!
//! * `Honest` emits `(|00⟩+|11⟩)/√2` on `(A, B)`.
//! * `GhzProbe` couples a probe qubit `E` to `B` with a CNOT while the pair is
//!   prepared, which leaves the channel in `(|000⟩+|111⟩)/√2`. Eve keeps `E`
//!   and reads it in Z once the announcement is public.
//! * `InterceptResend` measures `B` in transit and forwards the collapsed
//!   eigenstate. Eve keeps her basis and outcome.
//!
//! Eve always sees the public channel. No claim is made that these are the
//! only attacks, or the strongest ones.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::batch::{source_counter, INTERCEPT_SLOT};
use crate::bits::{BitString, BitsError};
use crate::protocol::{TranscriptRecord, Verdict};
use crate::quantum::{make_bell_pair, Basis, Label, QuantumError, StateVector};
use crate::rng::{RandomStream, StreamId};
use crate::stats::JointCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterceptPolicy {
    RandomZX,
    FixedZ,
    FixedX,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackModel {
    Honest,
    GhzProbe,
    InterceptResend(InterceptPolicy),
}

impl AttackModel {
    pub fn has_eve(self) -> bool {
        !matches!(self, AttackModel::Honest)
    }
}

impl fmt::Display for AttackModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackModel::Honest => "honest",
            AttackModel::GhzProbe => "ghz-probe",
            AttackModel::InterceptResend(InterceptPolicy::RandomZX) => "intercept-resend:random",
            AttackModel::InterceptResend(InterceptPolicy::FixedZ) => "intercept-resend:z",
            AttackModel::InterceptResend(InterceptPolicy::FixedX) => "intercept-resend:x",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown attack {0:?}; expected honest, ghz-probe or intercept-resend[:z|x|random]")]
pub struct ParseAttackError(String);

impl FromStr for AttackModel {
    type Err = ParseAttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let model = match s.trim().to_ascii_lowercase().as_str() {
            "honest" => AttackModel::Honest,
            "ghz-probe" => AttackModel::GhzProbe,
            "intercept-resend" | "intercept-resend:random" => {
                AttackModel::InterceptResend(InterceptPolicy::RandomZX)
            }
            "intercept-resend:z" => AttackModel::InterceptResend(InterceptPolicy::FixedZ),
            "intercept-resend:x" => AttackModel::InterceptResend(InterceptPolicy::FixedX),
            _ => return Err(ParseAttackError(s.to_string())),
        };
        Ok(model)
    }
}

impl Serialize for AttackModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AttackModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// What Eve holds for one pair after distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveHandle {
    None,
    /// A qubit entangled into the pair state.
    Probe { label: Label },
    /// Classical record of an in-transit measurement of `B`.
    Intercepted { basis: Basis, outcome: u8 },
}

/// Emits pair `index` of a batch seeded with `seed`.
pub fn emit_pair(
    model: AttackModel,
    seed: u64,
    index: usize,
) -> Result<(StateVector, EveHandle), QuantumError> {
    match model {
        AttackModel::Honest => Ok((make_bell_pair(), EveHandle::None)),
        AttackModel::GhzProbe => {
            let probe = StateVector::basis_state(&[Label::E], 0)?;
            let state = make_bell_pair()
                .tensor(&probe)?
                .apply_cnot(Label::B, Label::E)?;
            Ok((state, EveHandle::Probe { label: Label::E }))
        }
        AttackModel::InterceptResend(policy) => {
            let basis = match policy {
                InterceptPolicy::FixedZ => Basis::Z,
                InterceptPolicy::FixedX => Basis::X,
                InterceptPolicy::RandomZX => {
                    Basis::random(&mut RandomStream::at(seed, StreamId::Eve, index as u64))
                }
            };
            let mut draw = RandomStream::at(
                seed,
                StreamId::Source,
                source_counter(index, INTERCEPT_SLOT),
            );
            let (outcome, state) = make_bell_pair().measure(Label::B, basis, &mut draw)?;
            Ok((state, EveHandle::Intercepted { basis, outcome }))
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EveError {
    #[error("no eavesdropper on an honest channel")]
    Absent,
    #[error("eve holds {records} records for an announcement of {announced} bits")]
    LengthMismatch { records: usize, announced: usize },
}

/// Eve's per-message-pair observations and her resulting guess.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EveRecord {
    pub bases: Vec<Basis>,
    pub outcomes: BitString,
    pub guess: Option<BitString>,
}

impl EveRecord {
    pub fn correct_fraction(&self, message: &BitString) -> Option<f64> {
        let guess = self.guess.as_ref()?;
        if guess.is_empty() || guess.len() != message.len() {
            return None;
        }
        let wrong = guess.hamming(message).ok()?;
        Some(1.0 - wrong as f64 / message.len() as f64)
    }
}

/// Eve's message guess `c_i XOR e_i` from the public announcement.
pub fn eve_decode(
    model: AttackModel,
    record: &EveRecord,
    announcement: &BitString,
) -> Result<BitString, EveError> {
    if !model.has_eve() {
        return Err(EveError::Absent);
    }
    announcement
        .xor(&record.outcomes)
        .map_err(|e| match e {
            BitsError::LengthMismatch { left, right } => EveError::LengthMismatch {
                records: right,
                announced: left,
            },
            BitsError::InvalidChar { .. } => unreachable!("xor never parses"),
        })
}

/// Leakage figures for the sessions sharing one verdict.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerdictLeakage {
    pub sessions: u64,
    pub message_bits: u64,
    /// Message bits Bob decoded (zero for aborted sessions).
    pub decoded_bits: u64,
    pub bob_errors: u64,
    pub bob_ber: Option<f64>,
    pub eve_bits: u64,
    pub eve_correct: u64,
    pub eve_correct_fraction: Option<f64>,
    /// Plug-in I(guess; message) per message bit; 0 when Eve has no guess.
    pub eve_mutual_information: f64,
    #[serde(skip)]
    joint: JointCounts,
}

impl VerdictLeakage {
    fn add(&mut self, r: &TranscriptRecord) {
        self.sessions += 1;
        self.message_bits += r.message.len() as u64;
        if r.decoded.len() == r.message.len() && !r.decoded.is_empty() {
            self.decoded_bits += r.decoded.len() as u64;
            self.bob_errors += r.decoded.hamming(&r.message).unwrap_or(0) as u64;
        }
        if let Some(guess) = &r.eve_guess {
            if guess.len() == r.message.len() {
                for (&g, &m) in guess.bits().iter().zip(r.message.bits()) {
                    self.joint.add(g, m);
                }
                self.eve_bits += guess.len() as u64;
                self.eve_correct += (guess.len() - guess.hamming(&r.message).unwrap_or(0)) as u64;
            }
        }
    }

    fn finish(&mut self) {
        self.bob_ber =
            (self.decoded_bits > 0).then(|| self.bob_errors as f64 / self.decoded_bits as f64);
        self.eve_correct_fraction =
            (self.eve_bits > 0).then(|| self.eve_correct as f64 / self.eve_bits as f64);
        self.eve_mutual_information = self.joint.mutual_information();
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LeakageStats {
    pub pass: VerdictLeakage,
    pub abort: VerdictLeakage,
}

/// Eve's success and Bob's error rate, split by verdict.
pub fn leakage_report<'a, I>(sessions: I) -> LeakageStats
where
    I: IntoIterator<Item = &'a TranscriptRecord>,
{
    let mut stats = LeakageStats::default();
    for r in sessions {
        match r.verdict {
            Verdict::Pass => stats.pass.add(r),
            Verdict::Abort => stats.abort.add(r),
        }
    }
    stats.pass.finish();
    stats.abort.finish();
    stats
}
