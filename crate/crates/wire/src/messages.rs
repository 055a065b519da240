//! Frame bodies.

use epr_core::bits::BitString;
use epr_core::quantum::{Basis, Label};
use epr_core::{AttackModel, Verdict};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Alice,
    Bob,
    Broker,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    pub role: Role,
    /// Set by the broker in its reply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackModel>,
}

/// Alice asks the broker to prepare pairs for a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairsRequest {
    pub n_pairs: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub check_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairsAllocated {
    pub n_pairs: usize,
    pub seed: u64,
}

/// Alice tells Bob which pairs are sacrificed, after measuring her halves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerPairsReady {
    pub seed: u64,
    pub n_pairs: usize,
    pub n_check: usize,
    pub check_indices: Vec<usize>,
    pub message_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureRequest {
    pub pair: usize,
    pub label: Label,
    pub basis: Basis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureResponse {
    pub pair: usize,
    pub label: Label,
    pub bit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckBases {
    pub bases: Vec<Basis>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcomes {
    pub outcomes: BitString,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictBody {
    pub verdict: Verdict,
    pub kept_count: usize,
    pub mismatch_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announce {
    pub bits: BitString,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bye {}
