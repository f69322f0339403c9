//! Command-line frontend: decode captures, compare tracer logs, run the
//! buffer-loss simulator, and inspect signature tables.
//!
//! Exit codes: 0 = ran to completion (per-record errors are reported inline,
//! not fatal), 1 = an input could not be read or processed, 2 = bad
//! arguments.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use parceltrace::capture::{CaptureRecord, ReplayStats};
use parceltrace::compare::{
    compute_offset, match_events, normalize_log, uer, CompareConfig, NormalizeOptions, Source,
};
use parceltrace::sigtable::SignatureTable;
use parceltrace::sim::{simulate_buffers, SimConfig};
use parceltrace::syscalls::Arch;
use parceltrace::DecodeOptions;

#[derive(Parser)]
#[command(
    name = "parceltrace",
    version,
    about = "Decode Binder ioctl captures and evaluate syscall-trace completeness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a capture file into audit records.
    Decode(DecodeArgs),
    /// Compare two tracer logs and report unique event ratios.
    Compare(CompareArgs),
    /// Simulate event loss under a buffering configuration.
    Simulate(SimulateArgs),
    /// Validate, list, or emit method signature tables.
    Table(TableArgs),
}

#[derive(Args)]
struct DecodeArgs {
    /// Capture JSONL file.
    #[arg(long)]
    input: PathBuf,
    /// Signature table JSONL file.
    #[arg(long)]
    table: PathBuf,
    /// Decode parcels without the 4-byte stability word after binder
    /// objects (pre-Android-11 captures).
    #[arg(long)]
    no_stability_footer: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    /// Human-readable blocks, one per record, plus a summary line.
    Text,
    /// One JSON record per line.
    Records,
}

#[derive(Args)]
struct CompareArgs {
    /// Log A (audit JSONL or ftrace text; format auto-detected).
    #[arg(long)]
    a: PathBuf,
    /// Log B.
    #[arg(long)]
    b: PathBuf,
    /// Clock offset ts_a - ts_b in nanoseconds; computed from the
    /// execve/mmap anchor when omitted.
    #[arg(long)]
    offset: Option<i64>,
    /// Append a row to this CSV (columns: #, app, FT, WD).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// App label for the report and CSV row.
    #[arg(long, default_value = "app")]
    app: String,
    #[arg(long, default_value = "arm64")]
    arch: Arch,
    /// Drop events from this pid before matching (tracer self-noise);
    /// repeatable.
    #[arg(long = "exclude-pid")]
    exclude_pids: Vec<u32>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation scenario JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sweep one parameter, e.g. --sweep ring_capacity=64,256,1024; emits
    /// CSV.
    #[arg(long, value_parser = parse_sweep)]
    sweep: Option<Sweep>,
}

#[derive(Clone)]
struct Sweep {
    ring_capacities: Vec<usize>,
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let values = s
        .strip_prefix("ring_capacity=")
        .ok_or_else(|| "expected ring_capacity=<comma-separated sizes>".to_string())?;
    let ring_capacities = values
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if ring_capacities.is_empty() {
        return Err("empty sweep list".into());
    }
    Ok(Sweep { ring_capacities })
}

#[derive(Args)]
struct TableArgs {
    #[command(subcommand)]
    action: TableAction,
}

#[derive(Subcommand)]
enum TableAction {
    /// Check a table for decoding blind spots and report diagnostics.
    Validate {
        /// Table file; the built-in sample table when omitted.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// List table entries.
    Show {
        #[arg(long)]
        file: Option<PathBuf>,
        /// Only interfaces whose token contains this substring.
        #[arg(long)]
        iface: Option<String>,
    },
    /// Write the built-in sample table.
    Sample {
        /// Destination; stdout when omitted.
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decode(args) => cmd_decode(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Table(args) => cmd_table(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_decode(args: &DecodeArgs) -> Result<()> {
    let text = read_file(&args.input)?;
    let table = SignatureTable::load(&args.table)
        .with_context(|| format!("loading table {}", args.table.display()))?;
    let opts = DecodeOptions {
        stability_footer: !args.no_stability_footer,
    };

    // Process line by line so every input record yields output in order:
    // decoded records, or an error entry, never an abort.
    let mut stats = ReplayStats::default();
    let mut decoded = 0usize;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let record: Result<CaptureRecord, _> = serde_json::from_str(trimmed);
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                stats.errors += 1;
                match args.format {
                    OutputFormat::Text => writeln!(out, "error: line {lineno}: {e}")?,
                    OutputFormat::Records => writeln!(
                        out,
                        "{}",
                        serde_json::json!({"line": lineno, "error": e.to_string()})
                    )?,
                }
                continue;
            }
        };
        let replay = parceltrace::capture::replay_capture(
            std::slice::from_ref(&record),
            &table,
            &opts,
        );
        for issue in &replay.issues {
            match args.format {
                OutputFormat::Text => writeln!(out, "error: line {lineno}: {}", issue.msg)?,
                OutputFormat::Records => writeln!(
                    out,
                    "{}",
                    serde_json::json!({"line": lineno, "error": issue.msg})
                )?,
            }
        }
        for rec in &replay.records {
            decoded += 1;
            match args.format {
                OutputFormat::Text => writeln!(out, "{}", rec.render_text())?,
                OutputFormat::Records => writeln!(out, "{}", rec.to_json())?,
            }
        }
        stats.transactions += replay.stats.transactions;
        stats.replies += replay.stats.replies;
        stats.other_commands += replay.stats.other_commands;
        stats.errors += replay.stats.errors;
    }
    if args.format == OutputFormat::Text {
        writeln!(
            out,
            "summary: {decoded} records, {} transactions, {} replies, {} other commands, {} errors",
            stats.transactions, stats.replies, stats.other_commands, stats.errors
        )?;
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let opts = NormalizeOptions {
        exclude_pids: args.exclude_pids.clone(),
    };
    let load = |path: &Path| -> Result<_> {
        let text = read_file(path)?;
        let source = Source::detect(&text);
        normalize_log(&text, source, &opts)
            .with_context(|| format!("normalizing {}", path.display()))
    };
    let log_a = load(&args.a)?;
    let log_b = load(&args.b)?;
    let offset = match args.offset {
        Some(off) => off,
        None => compute_offset(&log_a, &log_b, args.arch)
            .context("aligning clocks (pass --offset to skip the anchor search)")?,
    };
    let result = match_events(&log_a, &log_b, offset, &CompareConfig::new(args.arch))?;
    let (uer_a, uer_b) = uer(&result)?;
    let uer_a_pct = uer_a * 100.0;
    let uer_b_pct = uer_b * 100.0;

    let report = serde_json::json!({
        "app_id": args.app,
        "matched": result.matched,
        "unique_a": result.unique_a,
        "unique_b": result.unique_b,
        "uer_a_pct": uer_a_pct,
        "uer_b_pct": uer_b_pct,
    });
    println!("{report}");
    println!("UER A {uer_a_pct:.2}% / B {uer_b_pct:.2}%");

    if let Some(csv) = &args.csv {
        append_csv_row(csv, &args.app, uer_a_pct, uer_b_pct)?;
    }
    Ok(())
}

/// Append one row to the aggregate CSV (`#,app,FT,WD`), creating it with a
/// header when needed. FT is log B's UER, WD log A's.
fn append_csv_row(path: &Path, app: &str, uer_a_pct: f64, uer_b_pct: f64) -> Result<()> {
    let existing = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    let mut content = existing.clone();
    if content.trim().is_empty() {
        content = "#,app,FT,WD\n".to_string();
    }
    let rows = content.trim_end().lines().count(); // header + data rows
    content.push_str(&format!("{rows},{app},{uer_b_pct:.2},{uer_a_pct:.2}\n"));
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let text = read_file(&args.config)?;
    let config: SimConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    match &args.sweep {
        None => {
            let report = simulate_buffers(&config, args.seed)?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Some(sweep) => {
            println!(
                "ring_capacity,produced,delivered,lost_overwritten,lost_dropped,lost_total,max_ring_occupancy"
            );
            for &capacity in &sweep.ring_capacities {
                let mut config = config.clone();
                config.buffer.ring_capacity = capacity;
                let r = simulate_buffers(&config, args.seed)?;
                println!(
                    "{capacity},{},{},{},{},{},{}",
                    r.produced,
                    r.delivered,
                    r.lost_overwritten,
                    r.lost_dropped,
                    r.lost_total(),
                    r.max_ring_occupancy
                );
            }
        }
    }
    Ok(())
}

fn load_table(file: &Option<PathBuf>) -> Result<SignatureTable> {
    match file {
        Some(path) => {
            SignatureTable::load(path).with_context(|| format!("loading {}", path.display()))
        }
        None => Ok(SignatureTable::from_jsonl(SignatureTable::sample_jsonl())
            .expect("built-in sample table")),
    }
}

fn cmd_table(args: &TableArgs) -> Result<()> {
    match &args.action {
        TableAction::Validate { file } => {
            let table = load_table(file)?;
            let diagnostics = table.validate();
            for d in &diagnostics {
                println!("{d}");
            }
            println!(
                "{} entries, {} diagnostics",
                table.len(),
                diagnostics.len()
            );
        }
        TableAction::Show { file, iface } => {
            let table = load_table(file)?;
            for sig in table.iter() {
                if let Some(filter) = iface {
                    if !sig.interface_token.contains(filter.as_str()) {
                        continue;
                    }
                }
                let params: Vec<String> = sig
                    .params
                    .iter()
                    .map(|p| format!("{} {}", p.type_name, p.name))
                    .collect();
                println!(
                    "{} {} {}({})",
                    sig.interface_token,
                    sig.code,
                    sig.method_name,
                    params.join(", ")
                );
            }
        }
        TableAction::Sample { file } => {
            let sample = SignatureTable::sample_jsonl();
            match file {
                Some(path) => fs::write(path, sample)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{sample}"),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parser_accepts_lists_and_rejects_junk() {
        let s = parse_sweep("ring_capacity=64, 128,1024").unwrap();
        assert_eq!(s.ring_capacities, vec![64, 128, 1024]);
        assert!(parse_sweep("cache=4").is_err());
        assert!(parse_sweep("ring_capacity=").is_err());
        assert!(parse_sweep("ring_capacity=a,b").is_err());
    }

    #[test]
    fn cli_args_parse() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
