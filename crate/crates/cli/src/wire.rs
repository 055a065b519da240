use std::io::Write;
use std::net::TcpListener;
use std::time::Duration;

use anyhow::{Context, Result};
use epr_core::Transcript;
use epr_wire::{AliceConfig, BobConfig, Broker};

use crate::output;
use crate::simulate::{config_for, message_for};
use crate::{resolve_seed, AliceArgs, BobArgs, BrokerArgs};

fn timeout(secs: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(secs).context("invalid --timeout")
}

pub fn serve_broker(args: BrokerArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let broker = Broker::bind(&args.listen, args.attack, seed)
        .with_context(|| format!("binding {}", args.listen))?;
    eprintln!("broker listening on {} (attack {}, seed {seed})", broker.local_addr()?, args.attack);
    broker.serve()?;
    Ok(())
}

fn report(t: &Transcript, output: Option<&std::path::Path>) -> Result<()> {
    if let Some(path) = output {
        output::write_lines(path, [t.record().to_json_line()])?;
    }
    let mut sink = output::summary_sink(output);
    writeln!(sink, "seed: {}", t.seed)?;
    writeln!(
        sink,
        "verdict: {} (kept {}, mismatched {})",
        t.verdict(),
        t.test.kept_count,
        t.test.mismatch_count
    )?;
    writeln!(sink, "announcement: {}", t.announcement)?;
    if !t.decoded.is_empty() || t.message.is_empty() {
        writeln!(sink, "decoded: {}", t.decoded)?;
    }
    writeln!(sink, "classical bits: {}", t.classical_bits_sent)?;
    Ok(())
}

pub fn run_alice(args: AliceArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let message = message_for(&args.source, seed);
    // Keeps a hosted broker alive until the session ends.
    let hosted = match &args.host_broker {
        Some(addr) => {
            let broker = Broker::bind(addr, args.attack, seed)
                .with_context(|| format!("binding {addr}"))?
                .spawn()?;
            eprintln!("broker listening on {} (attack {})", broker.addr(), args.attack);
            Some(broker)
        }
        None => None,
    };
    let config = AliceConfig {
        session: config_for(args.n_check, message.len()),
        message,
        seed,
        broker: hosted.as_ref().map_or(args.broker, |b| b.addr().to_string()),
        peer: args.peer,
        timeout: timeout(args.timeout)?,
        session_id: None,
    };
    let t = epr_wire::run_alice(&config);
    drop(hosted);
    report(&t?, args.output.as_deref())
}

pub fn run_bob(args: BobArgs) -> Result<()> {
    let listener = TcpListener::bind(&args.listen).with_context(|| format!("binding {}", args.listen))?;
    eprintln!("bob listening on {}", listener.local_addr()?);
    let config = BobConfig {
        seed: args.seed,
        broker: args.broker,
        timeout: timeout(args.timeout)?,
    };
    let t = epr_wire::run_bob(&config, &listener)?;
    report(&t, args.output.as_deref())
}
