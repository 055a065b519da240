//! Brute-force joint-outcome oracle for test suites.
//!
//! Works on plain real amplitude vectors and enumerates every outcome tuple
//! through explicit basis-vector products. It shares no code with the
//! simulator in `quantum`, so the two can check each other.

use crate::quantum::Basis;

const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Components of the basis vector for `outcome` in `basis`.
pub fn basis_vector(basis: Basis, outcome: u8) -> [f64; 2] {
    match (basis, outcome) {
        (Basis::Z, 0) => [1.0, 0.0],
        (Basis::Z, _) => [0.0, 1.0],
        (Basis::X, 0) => [S, S],
        (Basis::X, _) => [S, -S],
    }
}

pub fn bell_amplitudes() -> Vec<f64> {
    vec![S, 0.0, 0.0, S]
}

pub fn ghz_amplitudes() -> Vec<f64> {
    let mut a = vec![0.0; 8];
    a[0] = S;
    a[7] = S;
    a
}

fn bit(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

/// Probability of every outcome tuple when qubit `j` is measured in
/// `bases[j]`. Tuple index uses qubit 0 as the most significant bit.
pub fn joint_distribution(amps: &[f64], bases: &[Basis]) -> Vec<f64> {
    let n = bases.len();
    assert_eq!(amps.len(), 1 << n);
    (0..1usize << n)
        .map(|outcome| {
            let overlap: f64 = amps
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    a * (0..n)
                        .map(|j| basis_vector(bases[j], bit(outcome, j, n) as u8)[bit(k, j, n)])
                        .product::<f64>()
                })
                .sum();
            overlap * overlap
        })
        .collect()
}

/// Post-measurement state after `qubit` gave `outcome` in `basis`, with its
/// probability. The state is `None` for a zero-probability outcome.
pub fn project(amps: &[f64], n: usize, qubit: usize, basis: Basis, outcome: u8) -> (f64, Option<Vec<f64>>) {
    let v = basis_vector(basis, outcome);
    let mut out = vec![0.0; amps.len()];
    for (k, slot) in out.iter_mut().enumerate() {
        // ⟨v|_q contracted on qubit q, then re-expanded as |v⟩⟨v|.
        let target = bit(k, qubit, n);
        let mask = 1 << (n - 1 - qubit);
        let k0 = k & !mask;
        let inner = v[0] * amps[k0] + v[1] * amps[k0 | mask];
        *slot = v[target] * inner;
    }
    let p: f64 = out.iter().map(|a| a * a).sum();
    if p <= 1e-15 {
        return (0.0, None);
    }
    let norm = p.sqrt();
    out.iter_mut().for_each(|a| *a /= norm);
    (p, Some(out))
}

/// P(outcomes of qubits 0 and 1 differ); remaining qubits are summed over.
pub fn mismatch_probability(amps: &[f64], n: usize, basis_a: Basis, basis_b: Basis) -> f64 {
    let mut bases = vec![Basis::Z; n];
    bases[0] = basis_a;
    bases[1] = basis_b;
    joint_distribution(amps, &bases)
        .iter()
        .enumerate()
        .filter(|(o, _)| bit(*o, 0, n) != bit(*o, 1, n))
        .map(|(_, p)| p)
        .sum()
}

/// Channel as seen by the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleChannel {
    Honest,
    Ghz,
    /// Eve measures B in the given basis; `None` picks Z or X uniformly.
    Intercept(Option<Basis>),
}

/// Eve's basis mixture for an intercept policy.
fn eve_bases(policy: Option<Basis>) -> Vec<(f64, Basis)> {
    match policy {
        Some(b) => vec![(1.0, b)],
        None => vec![(0.5, Basis::Z), (0.5, Basis::X)],
    }
}

/// Ensemble of two-qubit A-B states after Eve's intercept on B.
fn intercepted_ensemble(policy: Option<Basis>) -> Vec<(f64, Basis, u8, Vec<f64>)> {
    let mut out = Vec::new();
    for (w, basis) in eve_bases(policy) {
        for e in 0..2u8 {
            let (p, post) = project(&bell_amplitudes(), 2, 1, basis, e);
            if let Some(post) = post {
                out.push((w * p, basis, e, post));
            }
        }
    }
    out
}

/// P(A and B disagree) when measured in the given bases.
pub fn channel_mismatch(channel: OracleChannel, basis_a: Basis, basis_b: Basis) -> f64 {
    match channel {
        OracleChannel::Honest => mismatch_probability(&bell_amplitudes(), 2, basis_a, basis_b),
        OracleChannel::Ghz => mismatch_probability(&ghz_amplitudes(), 3, basis_a, basis_b),
        OracleChannel::Intercept(policy) => intercepted_ensemble(policy)
            .iter()
            .map(|(w, _, _, s)| w * mismatch_probability(s, 2, basis_a, basis_b))
            .sum(),
    }
}

/// P(mismatch | round kept); both same-basis combinations are equally likely.
pub fn per_kept_round_mismatch(channel: OracleChannel) -> f64 {
    0.5 * channel_mismatch(channel, Basis::Z, Basis::Z) + 0.5 * channel_mismatch(channel, Basis::X, Basis::X)
}

/// Bob's message bit-error rate: both parties measure Z.
pub fn message_bit_error_rate(channel: OracleChannel) -> f64 {
    channel_mismatch(channel, Basis::Z, Basis::Z)
}

/// P(Eve's guess bit equals the message bit), i.e. P(e = a) with A in Z.
pub fn eve_correct_probability(channel: OracleChannel) -> Option<f64> {
    match channel {
        OracleChannel::Honest => None,
        OracleChannel::Ghz => {
            let d = joint_distribution(&ghz_amplitudes(), &[Basis::Z; 3]);
            Some(
                d.iter()
                    .enumerate()
                    .filter(|(o, _)| bit(*o, 0, 3) == bit(*o, 2, 3))
                    .map(|(_, p)| p)
                    .sum(),
            )
        }
        OracleChannel::Intercept(policy) => Some(
            intercepted_ensemble(policy)
                .iter()
                .map(|(w, _, e, s)| {
                    let d = joint_distribution(s, &[Basis::Z, Basis::Z]);
                    let agree: f64 = d
                        .iter()
                        .enumerate()
                        .filter(|(o, _)| bit(*o, 0, 2) as u8 == *e)
                        .map(|(_, p)| p)
                        .sum();
                    w * agree
                })
                .sum(),
        ),
    }
}

/// Probability of passing `n` kept rounds.
pub fn survival(per_round: f64, n: u32) -> f64 {
    (1.0 - per_round).powi(n as i32)
}
