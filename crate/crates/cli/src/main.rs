mod output;
mod report;
mod simulate;
mod sweep;
mod wire;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use epr_core::{AttackModel, BitString, CheckCount};
use epr_wire::WireError;

#[derive(Debug, Parser)]
#[command(name = "epr-direct", version, about = "Direct secret communication over shared EPR pairs")]
struct Cli {
    /// Worker threads for Monte-Carlo trials (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run full sessions in-process and write one JSON transcript per line.
    Simulate(SimulateArgs),
    /// Estimate how often an attack survives the channel test.
    AttackSweep(SweepArgs),
    /// Serve the pair broker.
    ServeBroker(BrokerArgs),
    /// Send a message as Alice through a broker to a listening Bob.
    RunAlice(AliceArgs),
    /// Wait for Alice and receive a message as Bob.
    RunBob(BobArgs),
    /// Summarize a JSONL file produced by simulate or attack-sweep.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct MessageSource {
    /// Message as a string of 0s and 1s (may be empty).
    #[arg(long)]
    message: Option<BitString>,
    /// Draw a fresh random message of this many bits per session.
    #[arg(long)]
    random_bits: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: MessageSource,
    #[arg(long, default_value = "honest")]
    attack: AttackModel,
    /// Check pairs per session [default: max(16, message length)].
    #[arg(long)]
    n_check: Option<usize>,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, env = "EPR_SEED")]
    seed: Option<u64>,
    /// JSONL destination; `-` for standard output.
    #[arg(long, default_value = "-")]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RoundMode {
    /// n counts kept (same-basis) rounds.
    Kept,
    /// n counts sacrificed pairs.
    Pairs,
}

impl From<RoundMode> for CheckCount {
    fn from(m: RoundMode) -> Self {
        match m {
            RoundMode::Kept => CheckCount::Kept,
            RoundMode::Pairs => CheckCount::Pairs,
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value = "ghz-probe")]
    attack: AttackModel,
    /// Sizes to test: `a..b` (inclusive), `a..=b`, or a comma list.
    #[arg(long, default_value = "1..32", value_parser = sweep::parse_sizes)]
    n_check: sweep::Sizes,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, env = "EPR_SEED")]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = RoundMode::Kept)]
    rounds: RoundMode,
    /// JSONL destination; `-` for standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BrokerArgs {
    #[arg(long, default_value = "127.0.0.1:7400")]
    listen: String,
    #[arg(long, default_value = "honest")]
    attack: AttackModel,
    /// Seed for sessions that do not bring their own.
    #[arg(long, env = "EPR_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct AliceArgs {
    #[arg(long, default_value = "127.0.0.1:7400")]
    broker: String,
    /// Bob's address.
    #[arg(long, default_value = "127.0.0.1:7401")]
    peer: String,
    #[command(flatten)]
    source: MessageSource,
    #[arg(long)]
    n_check: Option<usize>,
    #[arg(long, env = "EPR_SEED")]
    seed: Option<u64>,
    /// Seconds to wait for any single frame.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Prepare the pairs locally: serve a broker at this address instead of
    /// using `--broker`. Bob's `--broker` must point here.
    #[arg(long, conflicts_with = "broker")]
    host_broker: Option<String>,
    /// Channel attack for a hosted broker.
    #[arg(long, default_value = "honest", requires = "host_broker")]
    attack: AttackModel,
}

#[derive(Debug, Args)]
struct BobArgs {
    #[arg(long, default_value = "127.0.0.1:7400")]
    broker: String,
    #[arg(long, default_value = "127.0.0.1:7401")]
    listen: String,
    /// Expected session seed; rejected if Alice announces another.
    #[arg(long, env = "EPR_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// JSONL input; `-` for standard input.
    input: PathBuf,
}

/// Uses the given seed or draws one and reports it.
fn resolve_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s = rand::random::<u64>();
            eprintln!("seed: {s} (pass --seed {s} to reproduce)");
            s
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()?;
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::AttackSweep(a) => sweep::run(a),
        Command::ServeBroker(a) => wire::serve_broker(a),
        Command::RunAlice(a) => wire::run_alice(a),
        Command::RunBob(a) => wire::run_bob(a),
        Command::Stats(a) => report::run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let violation = e
                .downcast_ref::<WireError>()
                .is_some_and(WireError::is_protocol_violation);
            ExitCode::from(if violation { 3 } else { 1 })
        }
    }
}
