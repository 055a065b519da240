use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};

use anyhow::{Context, Result};
use epr_core::summary::summarize_by_config;
use epr_core::{CheckCount, DetectionStats, TranscriptRecord};
use serde_json::Value;

use crate::output::{self, opt};
use crate::sweep::{predicted_per_round, print_table};
use crate::StatsArgs;

#[derive(Debug, Default)]
pub struct Parsed {
    pub transcripts: Vec<TranscriptRecord>,
    pub sweeps: Vec<DetectionStats>,
    /// (line number, reason)
    pub rejected: Vec<(usize, String)>,
}

pub fn parse<R: BufRead>(input: R) -> io::Result<Parsed> {
    let mut parsed = Parsed::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                parsed.rejected.push((line_no, e.to_string()));
                continue;
            }
        };
        // Sweep rows carry a trial count; transcripts do not.
        let result = if value.get("trials").is_some() {
            serde_json::from_value(value).map(|s| parsed.sweeps.push(s))
        } else {
            serde_json::from_value(value).map(|t| parsed.transcripts.push(t))
        };
        if let Err(e) = result {
            parsed.rejected.push((line_no, e.to_string()));
        }
    }
    Ok(parsed)
}

pub fn run(args: StatsArgs) -> Result<()> {
    let parsed = if output::is_stdout(&args.input) {
        parse(io::stdin().lock())?
    } else {
        let f = File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
        parse(BufReader::new(f))?
    };
    for (line, reason) in &parsed.rejected {
        eprintln!("line {line}: skipped malformed record: {reason}");
    }
    let mut out = io::stdout().lock();
    print_transcripts(&mut out, &parsed.transcripts)?;
    if !parsed.sweeps.is_empty() {
        writeln!(out)?;
        print_sweeps(&mut out, &parsed.sweeps)?;
    }
    Ok(())
}

pub fn print_transcripts(out: &mut dyn Write, records: &[TranscriptRecord]) -> io::Result<()> {
    writeln!(
        out,
        "{:<24} {:>7} {:>8} {:>8} {:>9} {:>21} {:>8} {:>8} {:>8} {:>10}",
        "attack",
        "n_check",
        "sessions",
        "detected",
        "det.rate",
        "95% CI",
        "bob BER",
        "eve ok",
        "eve MI",
        "bits/bit"
    )?;
    for ((attack, n_check), s) in summarize_by_config(records) {
        let pass = &s.leakage.pass;
        writeln!(
            out,
            "{:<24} {:>7} {:>8} {:>8} {:>9.4} {:>21} {:>8} {:>8} {:>8.4} {:>10}",
            attack,
            n_check,
            s.sessions,
            s.detected,
            s.detection_rate,
            format!("[{:.4}, {:.4}]", s.ci_low, s.ci_high),
            opt(pass.bob_ber),
            opt(pass.eve_correct_fraction),
            pass.eve_mutual_information,
            opt(s.classical_bits_per_secret_bit),
        )?;
    }
    writeln!(out, "teleportation comparison: 2.0 classical bits per secret bit")
}

fn print_sweeps(out: &mut dyn Write, rows: &[DetectionStats]) -> io::Result<()> {
    let mut groups: BTreeMap<(String, bool), Vec<DetectionStats>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.attack.to_string(), r.mode == CheckCount::Kept))
            .or_default()
            .push(r.clone());
    }
    for ((attack, kept), rows) in groups {
        let mode = if kept { CheckCount::Kept } else { CheckCount::Pairs };
        let p = predicted_per_round(rows[0].attack, mode);
        writeln!(out, "attack: {attack}  rounds: {}", if kept { "kept" } else { "pairs" })?;
        print_table(out, &rows, p)?;
    }
    Ok(())
}
