//! Shared pair storage with per-qubit measurement bookkeeping.
//!
//! Every random draw a batch makes is addressed by pair index and qubit slot
//! on the source stream, so the outcome of measuring `(pair, label)` does not
//! depend on how measurements of other pairs were interleaved. Only the order
//! of measurements inside one pair matters, and the protocol fixes that order
//! (Alice, then Bob, then Eve).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{emit_pair, AttackModel, EveHandle};
use crate::quantum::{Basis, Label, QuantumError, StateVector};
use crate::rng::{RandomStream, StreamId};

/// Source-stream draws reserved per pair.
pub(crate) const SLOTS_PER_PAIR: u64 = 4;
pub(crate) const INTERCEPT_SLOT: u64 = 3;

pub(crate) fn label_slot(label: Label) -> Option<u64> {
    match label {
        Label::A => Some(0),
        Label::B => Some(1),
        Label::E => Some(2),
        _ => None,
    }
}

pub(crate) fn source_counter(pair: usize, slot: u64) -> u64 {
    pair as u64 * SLOTS_PER_PAIR + slot
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BatchError {
    #[error("pair {pair} out of range (batch holds {len})")]
    PairOutOfRange { pair: usize, len: usize },
    #[error("qubit {label} of pair {pair} already measured")]
    AlreadyMeasured { pair: usize, label: Label },
    #[error("pair {pair} has no qubit {label}")]
    NoSuchQubit { pair: usize, label: Label },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairRole {
    Check,
    Message,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
    Eve,
}

impl Party {
    /// The qubit each party holds in every pair.
    pub fn label(self) -> Label {
        match self {
            Party::Alice => Label::A,
            Party::Bob => Label::B,
            Party::Eve => Label::E,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PairInstance {
    pub state: StateVector,
    pub role: PairRole,
    pub eve: EveHandle,
    measured: Vec<Label>,
}

impl PairInstance {
    pub fn is_measured(&self, label: Label) -> bool {
        self.measured.contains(&label)
    }
}

#[derive(Debug, Clone)]
pub struct PairBatch {
    model: AttackModel,
    seed: u64,
    pairs: Vec<PairInstance>,
    source: RandomStream,
}

impl PairBatch {
    pub fn prepare(model: AttackModel, seed: u64, roles: &[PairRole]) -> Result<Self, BatchError> {
        let mut batch = Self {
            model,
            seed,
            pairs: Vec::with_capacity(roles.len()),
            source: RandomStream::new(seed, StreamId::Source),
        };
        for &role in roles {
            batch.push(role)?;
        }
        Ok(batch)
    }

    /// Emits one more pair through the channel and returns its index.
    pub fn push(&mut self, role: PairRole) -> Result<usize, BatchError> {
        let index = self.pairs.len();
        let (state, eve) = emit_pair(self.model, self.seed, index)?;
        self.pairs.push(PairInstance {
            state,
            role,
            eve,
            measured: Vec::new(),
        });
        Ok(index)
    }

    pub fn model(&self) -> AttackModel {
        self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, index: usize) -> Option<&PairInstance> {
        self.pairs.get(index)
    }

    pub fn indices_with_role(&self, role: PairRole) -> Vec<usize> {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    /// Measures one qubit of one pair; each `(pair, label)` can be measured once.
    pub fn measure(&mut self, pair: usize, label: Label, basis: Basis) -> Result<u8, BatchError> {
        let len = self.pairs.len();
        let slot = label_slot(label).ok_or(BatchError::NoSuchQubit { pair, label })?;
        let instance = self
            .pairs
            .get_mut(pair)
            .ok_or(BatchError::PairOutOfRange { pair, len })?;
        if !instance.state.has_label(label) {
            return Err(BatchError::NoSuchQubit { pair, label });
        }
        if instance.is_measured(label) {
            return Err(BatchError::AlreadyMeasured { pair, label });
        }
        self.source.jump(source_counter(pair, slot));
        let (bit, post) = instance.state.measure(label, basis, &mut self.source)?;
        instance.state = post;
        instance.measured.push(label);
        Ok(bit)
    }
}
