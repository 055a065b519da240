use std::io::Write;

use anyhow::Result;
use epr_core::protocol::SessionConfig;
use epr_core::rng::session_seed;
use epr_core::summary::{summarize, SessionSummary};
use epr_core::{run_session, BitString, RandomStream, StreamId, TranscriptRecord};
use rayon::prelude::*;

use crate::output::{self, opt};
use crate::{resolve_seed, MessageSource, SimulateArgs};

/// Message for the session run with `seed`.
pub fn message_for(source: &MessageSource, seed: u64) -> BitString {
    match (&source.message, source.random_bits) {
        (Some(m), _) => m.clone(),
        (None, Some(n)) => BitString::random(n, &mut RandomStream::new(seed, StreamId::Message)),
        (None, None) => BitString::default(),
    }
}

pub fn config_for(n_check: Option<usize>, message_len: usize) -> SessionConfig {
    n_check.map_or_else(|| SessionConfig::for_message(message_len), |n| SessionConfig { n_check: n })
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let master = resolve_seed(args.seed);
    let records: Vec<TranscriptRecord> = (0..args.trials)
        .into_par_iter()
        .map(|i| {
            let seed = session_seed(master, i);
            let message = message_for(&args.source, seed);
            let config = config_for(args.n_check, message.len());
            run_session(&message, args.attack, config, seed).map(|t| t.record())
        })
        .collect::<Result<_, _>>()?;
    output::write_lines(&args.output, records.iter().map(TranscriptRecord::to_json_line))?;

    let mut sink = output::summary_sink(Some(&args.output));
    writeln!(sink, "seed: {master}")?;
    if let [only] = records.as_slice() {
        writeln!(sink, "verdict: {}", only.verdict)?;
        writeln!(sink, "decoded: {}", only.decoded)?;
    }
    print_summary(&mut sink, &summarize(&records))?;
    Ok(())
}

pub fn print_summary(sink: &mut dyn Write, s: &SessionSummary) -> std::io::Result<()> {
    let pass = &s.leakage.pass;
    let pass_rate = if s.sessions == 0 {
        0.0
    } else {
        (s.sessions - s.detected) as f64 / s.sessions as f64
    };
    writeln!(sink, "sessions: {}", s.sessions)?;
    writeln!(
        sink,
        "pass rate: {pass_rate:.4} (aborted {} of {}, detection CI [{:.4}, {:.4}])",
        s.detected, s.sessions, s.ci_low, s.ci_high
    )?;
    writeln!(sink, "message bits delivered: {}", pass.decoded_bits)?;
    writeln!(sink, "bob bit error rate: {}", opt(pass.bob_ber))?;
    writeln!(sink, "eve correct fraction: {}", opt(pass.eve_correct_fraction))?;
    writeln!(sink, "eve mutual information: {:.4} bit/bit", pass.eve_mutual_information)?;
    writeln!(
        sink,
        "classical bits per secret bit: {}",
        s.classical_bits_per_secret_bit
            .map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
    )?;
    writeln!(
        sink,
        "teleportation classical bits per secret bit: {:.1}",
        s.teleportation_bits_per_secret_bit
    )
}
