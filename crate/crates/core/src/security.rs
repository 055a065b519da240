//! Channel verification on sacrificed pairs.
//!
//! Alice and Bob each pick Z or X uniformly for every check pair, measure
//! their own qubit, and publish basis and outcome once both have measured.
//! Rounds with unequal bases are logged as discarded; a single mismatch in
//! a kept round aborts the session.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AttackModel;
use crate::batch::{BatchError, PairBatch, PairRole};
use crate::bits::BitString;
use crate::protocol::Verdict;
use crate::quantum::{Basis, Label};
use crate::rng::{session_seed, RandomStream, StreamId};
use crate::stats::{wilson_interval, Z_95};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecurityError {
    #[error("test needs {needed} check pairs, batch has {available}")]
    InsufficientCheckPairs { needed: usize, available: usize },
    #[error("check sides disagree on round count: alice {alice}, bob {bob}, pairs {pairs}")]
    RoundCountMismatch { alice: usize, bob: usize, pairs: usize },
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Batch(#[from] BatchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRound {
    pub pair_index: usize,
    pub basis_a: Basis,
    pub basis_b: Basis,
    pub outcome_a: u8,
    pub outcome_b: u8,
    pub kept: bool,
    pub mismatch: bool,
}

impl CheckRound {
    pub fn new(pair_index: usize, basis_a: Basis, outcome_a: u8, basis_b: Basis, outcome_b: u8) -> Self {
        let kept = basis_a == basis_b;
        Self {
            pair_index,
            basis_a,
            basis_b,
            outcome_a,
            outcome_b,
            kept,
            mismatch: kept && outcome_a != outcome_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub verdict: Verdict,
    pub rounds: Vec<CheckRound>,
    pub kept_count: usize,
    pub mismatch_count: usize,
}

impl TestVerdict {
    pub fn from_rounds(rounds: Vec<CheckRound>) -> Self {
        let kept_count = rounds.iter().filter(|r| r.kept).count();
        let mismatch_count = rounds.iter().filter(|r| r.mismatch).count();
        let verdict = if mismatch_count == 0 {
            Verdict::Pass
        } else {
            Verdict::Abort
        };
        Self {
            verdict,
            rounds,
            kept_count,
            mismatch_count,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// One party's published check data, in pair order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CheckSide {
    pub bases: Vec<Basis>,
    pub outcomes: BitString,
}

/// Draws `n` uniform bases from a party's stream.
pub fn draw_bases(rng: &mut RandomStream, n: usize) -> Vec<Basis> {
    (0..n).map(|_| Basis::random(rng)).collect()
}

/// Measures `label` of each listed pair in the given bases.
pub fn measure_side(
    batch: &mut PairBatch,
    pairs: &[usize],
    label: Label,
    bases: &[Basis],
) -> Result<CheckSide, BatchError> {
    let outcomes = pairs
        .iter()
        .zip(bases)
        .map(|(&p, &b)| batch.measure(p, label, b))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CheckSide {
        bases: bases.to_vec(),
        outcomes: BitString::from_bits(outcomes),
    })
}

/// Public comparison of both committed sides.
pub fn compare_sides(
    pairs: &[usize],
    alice: &CheckSide,
    bob: &CheckSide,
) -> Result<TestVerdict, SecurityError> {
    let lens = [
        alice.bases.len(),
        alice.outcomes.len(),
        bob.bases.len(),
        bob.outcomes.len(),
    ];
    if lens.iter().any(|&l| l != pairs.len()) {
        return Err(SecurityError::RoundCountMismatch {
            alice: alice.outcomes.len().min(alice.bases.len()),
            bob: bob.outcomes.len().min(bob.bases.len()),
            pairs: pairs.len(),
        });
    }
    let rounds = pairs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            CheckRound::new(
                p,
                alice.bases[i],
                alice.outcomes.bits()[i],
                bob.bases[i],
                bob.outcomes.bits()[i],
            )
        })
        .collect();
    Ok(TestVerdict::from_rounds(rounds))
}

/// Tests the first `n_check` check-role pairs of `batch`.
///
/// Alice measures all of her check qubits before Bob measures his.
pub fn run_channel_test(
    batch: &mut PairBatch,
    n_check: usize,
    alice: &mut RandomStream,
    bob: &mut RandomStream,
) -> Result<TestVerdict, SecurityError> {
    let checks = batch.indices_with_role(PairRole::Check);
    if checks.len() < n_check {
        return Err(SecurityError::InsufficientCheckPairs {
            needed: n_check,
            available: checks.len(),
        });
    }
    let pairs = &checks[..n_check];
    let bases_a = draw_bases(alice, n_check);
    let side_a = measure_side(batch, pairs, Label::A, &bases_a)?;
    let bases_b = draw_bases(bob, n_check);
    let side_b = measure_side(batch, pairs, Label::B, &bases_b)?;
    compare_sides(pairs, &side_a, &side_b)
}

/// Keeps testing fresh pairs until `kept_target` same-basis rounds exist.
pub fn run_until_kept(
    model: AttackModel,
    seed: u64,
    kept_target: usize,
) -> Result<TestVerdict, SecurityError> {
    let mut alice = RandomStream::new(seed, StreamId::Alice);
    let mut bob = RandomStream::new(seed, StreamId::Bob);
    let mut batch = PairBatch::prepare(model, seed, &[])?;
    let mut rounds = Vec::new();
    let mut kept = 0;
    while kept < kept_target {
        let p = batch.push(PairRole::Check)?;
        let basis_a = Basis::random(&mut alice);
        let basis_b = Basis::random(&mut bob);
        let a = batch.measure(p, Label::A, basis_a)?;
        let b = batch.measure(p, Label::B, basis_b)?;
        let round = CheckRound::new(p, basis_a, a, basis_b, b);
        kept += usize::from(round.kept);
        rounds.push(round);
    }
    Ok(TestVerdict::from_rounds(rounds))
}

/// How `n_check` is counted in a detection estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckCount {
    /// `n_check` sacrificed pairs, about half of them kept.
    #[default]
    Pairs,
    /// Pairs are drawn until exactly `n_check` rounds are kept.
    Kept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub attack: AttackModel,
    pub mode: CheckCount,
    pub n_check: usize,
    pub trials: u64,
    pub detected: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub per_round_rate: f64,
    pub kept_rounds: u64,
    pub mismatched_rounds: u64,
    pub check_pairs: u64,
    /// Kept rounds in which both parties used X.
    pub kept_x_rounds: u64,
}

impl DetectionStats {
    pub fn survival(&self) -> f64 {
        1.0 - self.rate
    }

    /// 95% interval on the survival probability.
    pub fn survival_interval(&self) -> (f64, f64) {
        (1.0 - self.ci_high, 1.0 - self.ci_low)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    detected: u64,
    kept: u64,
    mismatched: u64,
    pairs: u64,
    kept_x: u64,
}

impl Tally {
    fn of(v: &TestVerdict) -> Self {
        Self {
            detected: u64::from(!v.passed()),
            kept: v.kept_count as u64,
            mismatched: v.mismatch_count as u64,
            pairs: v.rounds.len() as u64,
            kept_x: v
                .rounds
                .iter()
                .filter(|r| r.kept && r.basis_a == Basis::X)
                .count() as u64,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            detected: self.detected + o.detected,
            kept: self.kept + o.kept,
            mismatched: self.mismatched + o.mismatched,
            pairs: self.pairs + o.pairs,
            kept_x: self.kept_x + o.kept_x,
        }
    }
}

/// Monte-Carlo detection probability of `attack` against a test of size
/// `n_check`. Trial `i` runs with seed `session_seed(seed, i)`; the result
/// does not depend on the worker count.
pub fn estimate_detection(
    attack: AttackModel,
    n_check: usize,
    mode: CheckCount,
    trials: u64,
    seed: u64,
) -> Result<DetectionStats, SecurityError> {
    if trials == 0 {
        return Err(SecurityError::NoTrials);
    }
    let tally = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = session_seed(seed, i);
            let verdict = match mode {
                CheckCount::Pairs => {
                    let mut batch = PairBatch::prepare(attack, s, &vec![PairRole::Check; n_check])?;
                    let mut alice = RandomStream::new(s, StreamId::Alice);
                    let mut bob = RandomStream::new(s, StreamId::Bob);
                    run_channel_test(&mut batch, n_check, &mut alice, &mut bob)?
                }
                CheckCount::Kept => run_until_kept(attack, s, n_check)?,
            };
            Ok::<_, SecurityError>(Tally::of(&verdict))
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
    let rate = tally.detected as f64 / trials as f64;
    let (ci_low, ci_high) = wilson_interval(tally.detected, trials, Z_95);
    let per_round_rate = if tally.kept == 0 {
        0.0
    } else {
        tally.mismatched as f64 / tally.kept as f64
    };
    Ok(DetectionStats {
        attack,
        mode,
        n_check,
        trials,
        detected: tally.detected,
        rate,
        ci_low,
        ci_high,
        per_round_rate,
        kept_rounds: tally.kept,
        mismatched_rounds: tally.mismatched,
        check_pairs: tally.pairs,
        kept_x_rounds: tally.kept_x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::InterceptPolicy;

    fn streams(seed: u64) -> (RandomStream, RandomStream) {
        (
            RandomStream::new(seed, StreamId::Alice),
            RandomStream::new(seed, StreamId::Bob),
        )
    }

    #[test]
    fn honest_channel_always_passes() {
        for seed in 0..200 {
            let mut batch =
                PairBatch::prepare(AttackModel::Honest, seed, &[PairRole::Check; 100]).unwrap();
            let (mut a, mut b) = streams(seed);
            let v = run_channel_test(&mut batch, 100, &mut a, &mut b).unwrap();
            assert!(v.passed());
            assert_eq!(v.mismatch_count, 0);
            assert_eq!(v.rounds.len(), 100);
        }
    }

    #[test]
    fn empty_test_passes_vacuously() {
        let mut batch = PairBatch::prepare(AttackModel::GhzProbe, 1, &[]).unwrap();
        let (mut a, mut b) = streams(1);
        let v = run_channel_test(&mut batch, 0, &mut a, &mut b).unwrap();
        assert!(v.passed());
        assert_eq!(v.kept_count, 0);
    }

    #[test]
    fn insufficient_check_pairs() {
        let mut batch =
            PairBatch::prepare(AttackModel::Honest, 1, &[PairRole::Check, PairRole::Message]).unwrap();
        let (mut a, mut b) = streams(1);
        assert_eq!(
            run_channel_test(&mut batch, 2, &mut a, &mut b).unwrap_err(),
            SecurityError::InsufficientCheckPairs {
                needed: 2,
                available: 1
            }
        );
    }

    #[test]
    fn round_invariants_hold() {
        let mut batch =
            PairBatch::prepare(AttackModel::GhzProbe, 5, &vec![PairRole::Check; 400]).unwrap();
        let (mut a, mut b) = streams(5);
        let v = run_channel_test(&mut batch, 400, &mut a, &mut b).unwrap();
        for r in &v.rounds {
            assert_eq!(r.kept, r.basis_a == r.basis_b);
            assert!(!r.mismatch || r.kept);
        }
        assert_eq!(v.verdict == Verdict::Abort, v.mismatch_count >= 1);
    }

    #[test]
    fn compare_rejects_ragged_sides() {
        let side = CheckSide {
            bases: vec![Basis::Z],
            outcomes: "0".parse().unwrap(),
        };
        assert!(matches!(
            compare_sides(&[0, 1], &side, &side),
            Err(SecurityError::RoundCountMismatch { .. })
        ));
    }

    #[test]
    fn kept_mode_hits_target_exactly() {
        for seed in 0..50 {
            let v = run_until_kept(AttackModel::Honest, seed, 7).unwrap();
            assert_eq!(v.kept_count, 7);
            assert!(v.rounds.last().unwrap().kept);
        }
    }

    #[test]
    fn honest_detection_is_zero() {
        for n in [1, 8, 32] {
            let s = estimate_detection(AttackModel::Honest, n, CheckCount::Pairs, 500, 3).unwrap();
            assert_eq!(s.detected, 0);
            assert_eq!(s.rate, 0.0);
            assert_eq!(s.ci_low, 0.0);
        }
    }

    #[test]
    fn zero_trials_rejected() {
        assert_eq!(
            estimate_detection(AttackModel::Honest, 1, CheckCount::Pairs, 0, 3).unwrap_err(),
            SecurityError::NoTrials
        );
    }

    #[test]
    fn estimate_is_reproducible() {
        let m = AttackModel::InterceptResend(InterceptPolicy::RandomZX);
        let a = estimate_detection(m, 8, CheckCount::Pairs, 300, 11).unwrap();
        let b = estimate_detection(m, 8, CheckCount::Pairs, 300, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stats_serialize_with_documented_fields() {
        let s = estimate_detection(AttackModel::GhzProbe, 4, CheckCount::Pairs, 10, 1).unwrap();
        let v = serde_json::to_value(&s).unwrap();
        for key in [
            "attack",
            "n_check",
            "trials",
            "detected",
            "rate",
            "ci_low",
            "ci_high",
            "per_round_rate",
            "kept_rounds",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["attack"], "ghz-probe");
    }
}
