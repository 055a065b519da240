//! Aggregates over transcript records. Every figure here is computed from the
//! JSONL fields alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adversary::{leakage_report, AttackModel, LeakageStats};
use crate::protocol::{TranscriptRecord, Verdict, TELEPORTATION_BITS_PER_SECRET_BIT};
use crate::stats::{wilson_interval, Z_95};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub sessions: u64,
    pub detected: u64,
    pub detection_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Message-phase classical bits over secret bits delivered; `None` when no
    /// secret bit was sent.
    pub classical_bits_per_secret_bit: Option<f64>,
    pub teleportation_bits_per_secret_bit: f64,
    pub leakage: LeakageStats,
}

pub fn summarize(records: &[TranscriptRecord]) -> SessionSummary {
    let sessions = records.len() as u64;
    let detected = records.iter().filter(|r| r.verdict == Verdict::Abort).count() as u64;
    let (ci_low, ci_high) = wilson_interval(detected, sessions, Z_95);
    let sent: u64 = records
        .iter()
        .filter(|r| r.verdict == Verdict::Pass)
        .map(|r| r.message.len() as u64)
        .sum();
    let classical: u64 = records
        .iter()
        .filter(|r| r.verdict == Verdict::Pass)
        .map(|r| r.classical_bits)
        .sum();
    SessionSummary {
        sessions,
        detected,
        detection_rate: if sessions == 0 {
            0.0
        } else {
            detected as f64 / sessions as f64
        },
        ci_low,
        ci_high,
        classical_bits_per_secret_bit: (sent > 0).then(|| classical as f64 / sent as f64),
        teleportation_bits_per_secret_bit: TELEPORTATION_BITS_PER_SECRET_BIT,
        leakage: leakage_report(records),
    }
}

/// Key for grouping: attack name, then check size.
pub type GroupKey = (String, usize);

pub fn summarize_by_config(records: &[TranscriptRecord]) -> BTreeMap<GroupKey, SessionSummary> {
    let mut groups: BTreeMap<GroupKey, Vec<TranscriptRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((attack_key(r.attack), r.n_check))
            .or_default()
            .push(r.clone());
    }
    groups
        .into_iter()
        .map(|(k, rs)| (k, summarize(&rs)))
        .collect()
}

fn attack_key(a: AttackModel) -> String {
    a.to_string()
}
