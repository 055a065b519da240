//! Few-qubit pure-state simulation.
//!
//! Amplitudes are indexed with the qubit at label position 0 as the most
//! significant bit, so for labels `(A, B, E)` index `0b110` is `|1⟩_A|1⟩_B|0⟩_E`.
//! Only what the protocol needs is here: Hadamard, CNOT and single-qubit
//! projective measurement in the Z or X basis.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RandomStream;

pub type Amplitude = Complex64;

pub const MAX_QUBITS: usize = 4;
/// Tolerance on Σ|amp|² when a state is accepted as input.
pub const NORM_TOLERANCE: f64 = 1e-9;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("unknown qubit label {0}")]
    UnknownLabel(Label),
    #[error("duplicate qubit label {0}")]
    DuplicateLabel(Label),
    #[error("control and target are both {0}")]
    SameQubit(Label),
    #[error("{0} qubits requested, at most {MAX_QUBITS} supported")]
    TooManyQubits(usize),
    #[error("state needs at least one qubit")]
    NoQubits,
    #[error("expected {expected} amplitudes, got {actual}")]
    AmplitudeCount { expected: usize, actual: usize },
    #[error("non-finite amplitude at index {0}")]
    NonFinite(usize),
    #[error("state norm² is {0}, outside tolerance of 1")]
    NotNormalized(f64),
}

/// Single-character qubit label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label(pub char);

impl Label {
    pub const A: Label = Label('A');
    pub const B: Label = Label('B');
    pub const E: Label = Label('E');
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_ascii_alphabetic() => Ok(Label(c.to_ascii_uppercase())),
            _ => Err(format!("invalid qubit label {s:?}")),
        }
    }
}

/// Measurement basis. Outcome 0 is `|0⟩` for Z and `(|0⟩+|1⟩)/√2` for X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub fn random(rng: &mut RandomStream) -> Self {
        if rng.next_bit() {
            Basis::X
        } else {
            Basis::Z
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

impl FromStr for Basis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Z" | "z" => Ok(Basis::Z),
            "X" | "x" => Ok(Basis::X),
            _ => Err(format!("unknown basis {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    labels: Vec<Label>,
    amps: Vec<Amplitude>,
}

impl StateVector {
    /// Computational basis state `|index⟩` over `labels`.
    pub fn basis_state(labels: &[Label], index: usize) -> Result<Self, QuantumError> {
        check_labels(labels)?;
        let dim = 1usize << labels.len();
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        let slot = amps.get_mut(index).ok_or(QuantumError::AmplitudeCount {
            expected: dim,
            actual: index + 1,
        })?;
        *slot = Complex64::new(1.0, 0.0);
        Ok(Self {
            labels: labels.to_vec(),
            amps,
        })
    }

    /// Validated state from raw amplitudes.
    pub fn from_amplitudes(labels: &[Label], amps: Vec<Amplitude>) -> Result<Self, QuantumError> {
        check_labels(labels)?;
        let expected = 1usize << labels.len();
        if amps.len() != expected {
            return Err(QuantumError::AmplitudeCount {
                expected,
                actual: amps.len(),
            });
        }
        if let Some(i) = amps.iter().position(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(QuantumError::NonFinite(i));
        }
        let state = Self {
            labels: labels.to_vec(),
            amps,
        };
        state.check_normalized()?;
        Ok(state)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn has_label(&self, label: Label) -> bool {
        self.labels.contains(&label)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn check_normalized(&self) -> Result<(), QuantumError> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(QuantumError::NotNormalized(n));
        }
        Ok(())
    }

    /// `self ⊗ other`; labels of `self` come first.
    pub fn tensor(&self, other: &StateVector) -> Result<Self, QuantumError> {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        check_labels(&labels)?;
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(Self { labels, amps })
    }

    /// Largest per-amplitude distance; `None` when the label orders differ.
    pub fn distance(&self, other: &StateVector) -> Option<f64> {
        if self.labels != other.labels {
            return None;
        }
        Some(
            self.amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
        )
    }

    pub fn approx_eq(&self, other: &StateVector, tol: f64) -> bool {
        self.distance(other).is_some_and(|d| d <= tol)
    }

    fn bit_mask(&self, label: Label) -> Result<usize, QuantumError> {
        let pos = self
            .labels
            .iter()
            .position(|&l| l == label)
            .ok_or(QuantumError::UnknownLabel(label))?;
        Ok(1 << (self.labels.len() - 1 - pos))
    }

    pub fn apply_hadamard(&self, qubit: Label) -> Result<Self, QuantumError> {
        let mask = self.bit_mask(qubit)?;
        let mut out = self.clone();
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | mask]);
                out.amps[i] = (a0 + a1) * FRAC_1_SQRT_2;
                out.amps[i | mask] = (a0 - a1) * FRAC_1_SQRT_2;
            }
        }
        Ok(out)
    }

    pub fn apply_cnot(&self, control: Label, target: Label) -> Result<Self, QuantumError> {
        if control == target {
            return Err(QuantumError::SameQubit(control));
        }
        let c = self.bit_mask(control)?;
        let t = self.bit_mask(target)?;
        let mut out = self.clone();
        for i in 0..self.amps.len() {
            if i & c != 0 {
                out.amps[i] = self.amps[i ^ t];
            }
        }
        Ok(out)
    }

    /// Probabilities of outcomes 0 and 1 when `qubit` is measured in `basis`.
    pub fn outcome_probabilities(&self, qubit: Label, basis: Basis) -> Result<[f64; 2], QuantumError> {
        let rotated = self.to_z_frame(qubit, basis)?;
        let mask = rotated.bit_mask(qubit)?;
        let mut p = [0.0; 2];
        for (i, a) in rotated.amps.iter().enumerate() {
            p[usize::from(i & mask != 0)] += a.norm_sqr();
        }
        Ok(p)
    }

    /// Projective measurement of one qubit, consuming exactly one draw.
    ///
    /// Returns the outcome and the renormalized post-measurement state.
    pub fn measure(
        &self,
        qubit: Label,
        basis: Basis,
        rng: &mut RandomStream,
    ) -> Result<(u8, StateVector), QuantumError> {
        self.check_normalized()?;
        let mut rotated = self.to_z_frame(qubit, basis)?;
        let mask = rotated.bit_mask(qubit)?;
        let p0: f64 = rotated
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let p1: f64 = rotated
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let mut bit = u8::from(rng.next_unit() >= p0);
        // Rounding in p0 must never select an outcome with zero weight.
        if bit == 1 && p1 == 0.0 {
            bit = 0;
        }
        let kept_norm = if bit == 0 { p0 } else { p1 }.sqrt();
        for (i, a) in rotated.amps.iter_mut().enumerate() {
            if u8::from(i & mask != 0) == bit {
                *a /= kept_norm;
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        // Renormalize once more against accumulated drift.
        let n = rotated.norm_sqr().sqrt();
        rotated.amps.iter_mut().for_each(|a| *a /= n);
        let post = match basis {
            Basis::Z => rotated,
            Basis::X => rotated.apply_hadamard(qubit)?,
        };
        Ok((bit, post))
    }

    fn to_z_frame(&self, qubit: Label, basis: Basis) -> Result<Self, QuantumError> {
        match basis {
            Basis::Z => {
                self.bit_mask(qubit)?;
                Ok(self.clone())
            }
            Basis::X => self.apply_hadamard(qubit),
        }
    }
}

fn check_labels(labels: &[Label]) -> Result<(), QuantumError> {
    if labels.is_empty() {
        return Err(QuantumError::NoQubits);
    }
    if labels.len() > MAX_QUBITS {
        return Err(QuantumError::TooManyQubits(labels.len()));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(QuantumError::DuplicateLabel(*l));
        }
    }
    Ok(())
}

/// `(|00⟩ + |11⟩)/√2` on `(A, B)`.
pub fn make_bell_pair() -> StateVector {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    StateVector {
        labels: vec![Label::A, Label::B],
        amps: vec![h, z, z, h],
    }
}

/// `(|000⟩ + |111⟩)/√2` on `(A, B, E)`: the channel after Eve couples a probe.
pub fn make_ghz_probe() -> StateVector {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); 8];
    amps[0] = h;
    amps[7] = h;
    StateVector {
        labels: vec![Label::A, Label::B, Label::E],
        amps,
    }
}
