//! Seeded Monte-Carlo checks of the channel test. Tolerances are 3σ of the
//! binomial estimate unless the property is exact.

use epr_core::batch::{PairBatch, PairRole};
use epr_core::quantum::{make_bell_pair, make_ghz_probe, Basis, Label};
use epr_core::security::run_channel_test;
use epr_core::stats::binomial_sigma;
use epr_core::{AttackModel, InterceptPolicy, RandomStream, StreamId, TestVerdict};

fn pooled(model: AttackModel, sessions: u64, n_check: usize) -> Vec<TestVerdict> {
    (0..sessions)
        .map(|s| {
            let mut batch = PairBatch::prepare(model, s, &vec![PairRole::Check; n_check]).unwrap();
            let mut a = RandomStream::new(s, StreamId::Alice);
            let mut b = RandomStream::new(s, StreamId::Bob);
            run_channel_test(&mut batch, n_check, &mut a, &mut b).unwrap()
        })
        .collect()
}

fn within_3_sigma(observed: u64, n: u64, p: f64) -> bool {
    let rate = observed as f64 / n as f64;
    (rate - p).abs() <= 3.0 * binomial_sigma(p, n)
}

#[test]
fn keep_rate_and_basis_split() {
    let vs = pooled(AttackModel::Honest, 1000, 100);
    let rounds: Vec<_> = vs.iter().flat_map(|v| &v.rounds).collect();
    let kept: Vec<_> = rounds.iter().filter(|r| r.kept).collect();
    let x = kept.iter().filter(|r| r.basis_a == Basis::X).count() as u64;
    assert!(within_3_sigma(kept.len() as u64, rounds.len() as u64, 0.5));
    assert!(within_3_sigma(x, kept.len() as u64, 0.5));
    // Discarded rounds stay in the log.
    assert_eq!(rounds.len(), 100_000);
    assert!(vs.iter().all(|v| v.mismatch_count == 0));
}

#[test]
fn ghz_probe_breaks_only_x_correlation() {
    let vs = pooled(AttackModel::GhzProbe, 2000, 100);
    let kept: Vec<_> = vs.iter().flat_map(|v| &v.rounds).filter(|r| r.kept).collect();
    let zz = kept.iter().filter(|r| r.basis_a == Basis::Z);
    assert_eq!(zz.filter(|r| r.mismatch).count(), 0);
    let xx: Vec<_> = kept.iter().filter(|r| r.basis_a == Basis::X).collect();
    let bad = xx.iter().filter(|r| r.mismatch).count() as u64;
    assert!(within_3_sigma(bad, xx.len() as u64, 0.5));
    let all = kept.iter().filter(|r| r.mismatch).count() as u64;
    assert!(within_3_sigma(all, kept.len() as u64, 0.25));
}

#[test]
fn fixed_z_intercept_is_invisible_in_z() {
    let vs = pooled(AttackModel::InterceptResend(InterceptPolicy::FixedZ), 1000, 100);
    let kept: Vec<_> = vs.iter().flat_map(|v| &v.rounds).filter(|r| r.kept).collect();
    assert_eq!(
        kept.iter().filter(|r| r.basis_a == Basis::Z && r.mismatch).count(),
        0
    );
    let xx: Vec<_> = kept.iter().filter(|r| r.basis_a == Basis::X).collect();
    let bad = xx.iter().filter(|r| r.mismatch).count() as u64;
    assert!(within_3_sigma(bad, xx.len() as u64, 0.5));
}

#[test]
fn fixed_x_intercept_is_invisible_in_x() {
    let vs = pooled(AttackModel::InterceptResend(InterceptPolicy::FixedX), 1000, 100);
    let kept: Vec<_> = vs.iter().flat_map(|v| &v.rounds).filter(|r| r.kept).collect();
    assert_eq!(
        kept.iter().filter(|r| r.basis_a == Basis::X && r.mismatch).count(),
        0
    );
    let zz: Vec<_> = kept.iter().filter(|r| r.basis_a == Basis::Z).collect();
    let bad = zz.iter().filter(|r| r.mismatch).count() as u64;
    assert!(within_3_sigma(bad, zz.len() as u64, 0.5));
}

#[test]
fn ghz_state_x_mismatch_frequency() {
    let n = 100_000u64;
    let mut rng = RandomStream::new(31, StreamId::Source);
    let mut bad = 0;
    for _ in 0..n {
        let (a, s) = make_ghz_probe().measure(Label::A, Basis::X, &mut rng).unwrap();
        let (b, _) = s.measure(Label::B, Basis::X, &mut rng).unwrap();
        bad += u64::from(a != b);
    }
    assert!(within_3_sigma(bad, n, 0.5));
}

#[test]
fn bell_pair_same_basis_never_mismatches() {
    let mut rng = RandomStream::new(17, StreamId::Source);
    for i in 0..10_000 {
        let basis = if i % 2 == 0 { Basis::Z } else { Basis::X };
        let (a, s) = make_bell_pair().measure(Label::A, basis, &mut rng).unwrap();
        let (b, _) = s.measure(Label::B, basis, &mut rng).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn survival_follows_per_round_detection() {
    use epr_core::security::estimate_detection;
    use epr_core::CheckCount;
    for attack in [AttackModel::GhzProbe, AttackModel::InterceptResend(InterceptPolicy::RandomZX)] {
        for n in [1usize, 2, 4, 8] {
            let s = estimate_detection(attack, n, CheckCount::Kept, 10_000, 0xC0FFEE + n as u64).unwrap();
            let (lo, hi) = s.survival_interval();
            let predicted = 0.75f64.powi(n as i32);
            assert!(lo <= predicted && predicted <= hi, "{attack} n={n}: {} not in [{lo}, {hi}]", predicted);
            assert_eq!(s.kept_rounds, 10_000 * n as u64);
        }
    }
}
