use std::io::Write;

use anyhow::{Context, Result};
use epr_core::oracle::{per_kept_round_mismatch, survival, OracleChannel};
use epr_core::{estimate_detection, AttackModel, Basis, CheckCount, DetectionStats, InterceptPolicy};

use crate::output;
use crate::{resolve_seed, SweepArgs};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sizes(pub Vec<usize>);

pub fn parse_sizes(s: &str) -> Result<Sizes, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let sizes = if let Some((a, b)) = s.split_once("..") {
        let (lo, hi) = (num(a)?, num(b.trim_start_matches('='))?);
        if lo > hi {
            return Err(format!("empty range {s}"));
        }
        (lo..=hi).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if sizes.is_empty() {
        return Err("no sizes given".into());
    }
    Ok(Sizes(sizes))
}

/// Oracle detection probability for one comparable round of the given mode.
pub fn predicted_per_round(attack: AttackModel, mode: CheckCount) -> f64 {
    let channel = match attack {
        AttackModel::Honest => OracleChannel::Honest,
        AttackModel::GhzProbe => OracleChannel::Ghz,
        AttackModel::InterceptResend(p) => OracleChannel::Intercept(match p {
            InterceptPolicy::RandomZX => None,
            InterceptPolicy::FixedZ => Some(Basis::Z),
            InterceptPolicy::FixedX => Some(Basis::X),
        }),
    };
    let p = per_kept_round_mismatch(channel);
    match mode {
        CheckCount::Kept => p,
        // Half of the sacrificed pairs are measured in matching bases.
        CheckCount::Pairs => p / 2.0,
    }
}

/// Seed for size `n`, kept apart from the other sizes' trial ranges.
pub fn size_seed(master: u64, n: usize) -> u64 {
    master.wrapping_add((n as u64) << 32)
}

pub fn run(args: SweepArgs) -> Result<()> {
    let master = resolve_seed(args.seed);
    let mode = CheckCount::from(args.rounds);
    let p = predicted_per_round(args.attack, mode);
    let mut rows = Vec::with_capacity(args.n_check.0.len());
    for &n in &args.n_check.0 {
        let stats = estimate_detection(args.attack, n, mode, args.trials, size_seed(master, n))
            .with_context(|| format!("n = {n}"))?;
        rows.push(stats);
    }
    if let Some(path) = &args.output {
        output::write_lines(
            path,
            rows.iter().map(|r| serde_json::to_string(r).expect("stats serialize")),
        )?;
    }
    let mut sink = output::summary_sink(args.output.as_deref());
    writeln!(sink, "seed: {master}")?;
    writeln!(
        sink,
        "attack: {}  rounds: {}  per-round detection (oracle): {p:.4}",
        args.attack,
        match mode {
            CheckCount::Kept => "kept",
            CheckCount::Pairs => "pairs",
        }
    )?;
    print_table(&mut sink, &rows, p)?;
    Ok(())
}

pub fn print_table(sink: &mut dyn Write, rows: &[DetectionStats], p: f64) -> std::io::Result<()> {
    writeln!(
        sink,
        "{:>4} {:>8} {:>8} {:>9} {:>21} {:>9} {:>9} {:>6}",
        "n", "trials", "detected", "survival", "95% CI", "predicted", "per-round", "in-CI"
    )?;
    for r in rows {
        let (lo, hi) = r.survival_interval();
        let predicted = survival(p, r.n_check as u32);
        let inside = lo <= predicted && predicted <= hi;
        writeln!(
            sink,
            "{:>4} {:>8} {:>8} {:>9.5} {:>21} {:>9.5} {:>9.4} {:>6}",
            r.n_check,
            r.trials,
            r.detected,
            r.survival(),
            format!("[{lo:.5}, {hi:.5}]"),
            predicted,
            r.per_round_rate,
            if inside { "yes" } else { "no" }
        )?;
    }
    Ok(())
}
