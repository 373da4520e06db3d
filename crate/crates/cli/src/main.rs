//! Scenario runner and trace tooling.
//!
//! Subcommands:
//! * `run` — execute a scenario file and write its trace. Exit 0 on clean
//!   completion, 1 on configuration errors, 2 when the tick budget runs out
//!   (the partial trace is still written), 3 when the trace contains any
//!   FAULT record.
//! * `verify-trace` — replay a trace against the plant safety rules. Exit 0
//!   when every check passes, 1 on a malformed trace, 2 on failed checks.
//! * `compare-traces` — compare the filtered record streams of two traces.
//!   Exit 0 when identical, 1 on malformed input, 2 on divergence.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use siloplc_core::check::{compare_traces, verify_trace, Comparison};
use siloplc_core::scenario::{run_scenario, Mode, RunOutcome, ScenarioConfig, Strategy};
use siloplc_core::components::resource::ResourceVariant;
use siloplc_core::trace::{RecordKind, Trace};

#[derive(Parser)]
#[command(name = "siloplc", version, about = "Soft-PLC runtime and batch plant simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its trace file.
    Run(RunArgs),
    /// Check a trace file against the plant safety rules.
    VerifyTrace { trace: PathBuf },
    /// Compare two trace files record by record.
    CompareTraces {
        a: PathBuf,
        b: PathBuf,
        /// Comma-separated record kinds to compare (e.g. ACT,STATE,RES);
        /// default is every kind.
        #[arg(long)]
        filter: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (flat `key = value` lines, `#` comments).
    #[arg(long)]
    scenario: PathBuf,
    /// Where to write the trace.
    #[arg(long)]
    out: PathBuf,
    /// Override max_ticks.
    #[arg(long)]
    ticks: Option<u64>,
    /// Override mode: local | distributed.
    #[arg(long)]
    mode: Option<String>,
    /// Override bus latency in scans (distributed mode).
    #[arg(long)]
    latency: Option<u64>,
    /// Override strategy: cp | ofb.
    #[arg(long)]
    strategy: Option<String>,
    /// Override resource variant: check | monitor.
    #[arg(long)]
    resource: Option<String>,
    /// Override batch cycles per recipe.
    #[arg(long)]
    cycles: Option<u64>,
}

fn apply_overrides(cfg: &mut ScenarioConfig, args: &RunArgs) -> Result<(), String> {
    if let Some(t) = args.ticks {
        cfg.max_ticks = t;
    }
    if let Some(mode) = &args.mode {
        cfg.mode = match mode.as_str() {
            "local" => Mode::Local,
            "distributed" => Mode::Distributed,
            other => return Err(format!("unknown mode `{other}`")),
        };
    }
    if let Some(l) = args.latency {
        cfg.latency = l;
    }
    if let Some(s) = &args.strategy {
        cfg.strategy = match s.as_str() {
            "cp" => Strategy::CpController,
            "ofb" => Strategy::Ofb,
            other => return Err(format!("unknown strategy `{other}`")),
        };
    }
    if let Some(r) = &args.resource {
        cfg.resource_variant = match r.as_str() {
            "check" => ResourceVariant::Check,
            "monitor" => ResourceVariant::Monitor,
            other => return Err(format!("unknown resource variant `{other}`")),
        };
    }
    if let Some(c) = args.cycles {
        cfg.cycles = c;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let text = match fs::read_to_string(&args.scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.scenario.display());
            return ExitCode::from(1);
        }
    };
    let mut cfg = match ScenarioConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = apply_overrides(&mut cfg, args) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    let run = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = fs::write(&args.out, run.trace.to_file_string()) {
        eprintln!("error: cannot write {}: {e}", args.out.display());
        return ExitCode::from(1);
    }

    let faults = run
        .trace
        .records
        .iter()
        .filter(|r| r.kind == RecordKind::Fault)
        .count();
    match run.outcome {
        RunOutcome::Completed => println!("completed in {} ticks, {} faults", run.ticks, faults),
        RunOutcome::TickLimit => println!(
            "tick limit of {} reached, {} faults (partial trace written)",
            run.ticks, faults
        ),
    }
    if faults > 0 {
        ExitCode::from(3)
    } else if run.outcome == RunOutcome::TickLimit {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn read_trace(path: &PathBuf) -> Result<Trace, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })?;
    Trace::parse(&text).map_err(|e| {
        eprintln!("error: malformed trace {}: {e}", path.display());
        ExitCode::from(1)
    })
}

fn cmd_verify(path: &PathBuf) -> ExitCode {
    let trace = match read_trace(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let report = match verify_trace(&trace) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: malformed trace {}: {e}", path.display());
            return ExitCode::from(1);
        }
    };
    for c in &report.checks {
        match (&c.passed, &c.detail) {
            (true, _) => println!("{}: PASS", c.name),
            (false, Some(d)) => println!("{}: FAIL ({d})", c.name),
            (false, None) => println!("{}: FAIL", c.name),
        }
    }
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn parse_filter(filter: &Option<String>) -> Result<Vec<RecordKind>, String> {
    match filter {
        None => Ok(RecordKind::ALL.to_vec()),
        Some(list) => list
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<RecordKind>()
                    .map_err(|_| format!("unknown record kind `{part}`"))
            })
            .collect(),
    }
}

fn cmd_compare(a: &PathBuf, b: &PathBuf, filter: &Option<String>) -> ExitCode {
    let kinds = match parse_filter(filter) {
        Ok(k) => k,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let (ta, tb) = match (read_trace(a), read_trace(b)) {
        (Ok(ta), Ok(tb)) => (ta, tb),
        (Err(code), _) | (_, Err(code)) => return code,
    };
    match compare_traces(&ta, &tb, &kinds) {
        Comparison::Identical { compared } => {
            println!("identical ({compared} records compared)");
            ExitCode::SUCCESS
        }
        Comparison::Divergence { index, left, right } => {
            println!("divergence at filtered record {index}");
            match left {
                Some(r) => println!("  {}: {r}", a.display()),
                None => println!("  {}: <end of records>", a.display()),
            }
            match right {
                Some(r) => println!("  {}: {r}", b.display()),
                None => println!("  {}: <end of records>", b.display()),
            }
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::VerifyTrace { trace } => cmd_verify(trace),
        Cmd::CompareTraces { a, b, filter } => cmd_compare(a, b, filter),
    }
}
