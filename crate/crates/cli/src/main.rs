use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use dynflow_core::event::{EventReader, StreamConfig};
use dynflow_core::metrics::{write_report, OutputFormat};
use dynflow_core::{run_session, EngineConfig, GrConfig, SessionConfig, SessionError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Jsonl,
}

/// Streams a timestamped edge log through the max-flow engine and reports
/// one record per query.
#[derive(Debug, Parser)]
#[command(name = "dynflow", version)]
struct Args {
    /// Event log, one `[a|d] <ts> <src> <dst> [<weight>]` per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    source: u64,
    #[arg(long)]
    sink: u64,
    /// Dataset time between queries.
    #[arg(long)]
    query_interval: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Retract every addition this much dataset time after it happened.
    #[arg(long)]
    window: Option<u64>,
    /// Offered events per second.
    #[arg(long)]
    rate: Option<f64>,
    /// Check every query against the reference solver.
    #[arg(long)]
    oracle_check: bool,
    /// Run single-threaded with a seeded interleaving of the workers.
    #[arg(long, value_name = "SEED")]
    deterministic: Option<u64>,
    #[arg(long, default_value_t = 1.1)]
    alpha: f64,
    #[arg(long)]
    gr_lift_threshold: Option<u64>,
    #[arg(long, default_value_t = 10.0)]
    gr_time_factor: f64,
    /// Milliseconds.
    #[arg(long, default_value_t = 50)]
    gr_min_interval: u64,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    /// Answer each query from scratch on the current graph.
    #[arg(long)]
    static_baseline: bool,
    #[arg(long, hide = true, default_value_t = 0, allow_negative_numbers = true)]
    debug_corrupt_flow: i64,
}

fn session_config(args: &Args) -> SessionConfig {
    let mut engine = EngineConfig::new(args.source, args.sink).with_workers(args.workers);
    engine.alpha = args.alpha;
    engine.gr = GrConfig {
        lift_threshold: args.gr_lift_threshold,
        time_factor: args.gr_time_factor,
        min_interval: Duration::from_millis(args.gr_min_interval),
    };
    if let Some(seed) = args.deterministic {
        engine = engine.deterministic(seed);
    }
    engine.debug_flow_offset = args.debug_corrupt_flow;
    let mut config = SessionConfig::new(engine, args.query_interval);
    config.window = args.window;
    config.rate = args.rate;
    config.oracle_check = args.oracle_check;
    config.static_baseline = args.static_baseline;
    config
}

fn run(args: &Args) -> Result<(), (i32, String)> {
    let config = session_config(args);
    config.validate().map_err(|e| (e.exit_code(), e.to_string()))?;
    let file = File::open(&args.input)
        .map_err(|e| (1, format!("cannot open {}: {e}", args.input.display())))?;
    let events = EventReader::new(BufReader::new(file), StreamConfig::default());
    let report = run_session(events, &config).map_err(|e: SessionError| (e.exit_code(), e.to_string()))?;
    let format = match args.format {
        Format::Tsv => OutputFormat::Tsv,
        Format::Jsonl => OutputFormat::JsonLines,
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    write_report(&mut out, format, &report.records, &report.summary)
        .and_then(|_| out.flush())
        .map_err(|e| (1, format!("cannot write report: {e}")))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("dynflow: {msg}");
            ExitCode::from(code as u8)
        }
    }
}
