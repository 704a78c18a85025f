use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use fastbft::checker::{check, Check};
use fastbft::fuzz::random_scenario;
use fastbft::quorum::{minimum_n, Mode, QuorumConfig};
use fastbft::scenario::{NetworkSpec, Scenario, Script};
use fastbft::sim::RunStatus;
use fastbft::time::{format_time, parse_time};
use fastbft::trace::{LatencyModel, Trace};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_HORIZON: u8 = 3;

#[derive(Parser)]
#[command(name = "fastbft", version, about = "Simulate and check fast Byzantine consensus runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and check the resulting trace.
    Run(RunArgs),
    /// Sweep (n, f, t) cells over randomized seeds.
    Matrix(MatrixArgs),
    /// Re-check a stored trace.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Write the key=value report here instead of stdout.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixArgs {
    /// Values of n: `4`, `4-12`, `4,7,9` or `min` for the smallest valid n of each (f, t).
    #[arg(long, default_value = "min")]
    n_range: String,
    #[arg(long, default_value = "1-2")]
    f_range: String,
    /// Values of t; `f` means t = f.
    #[arg(long, default_value = "f")]
    t_range: String,
    /// Seeds per cell.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Run without faults, GST at 0 and fixed Δ latency.
    #[arg(long)]
    fault_free: bool,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReplayArgs {
    trace: PathBuf,
    /// Checks to run (comma separated or repeated); `decision_at=T` takes a time in Δ.
    #[arg(long = "check", value_delimiter = ',')]
    checks: Vec<String>,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(a) => run(&a),
        Command::Matrix(a) => matrix(&a),
        Command::Replay(a) => replay(&a),
    };
    ExitCode::from(code)
}

fn read(path: &Path) -> Result<String, u8> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_PARSE
    })
}

fn write(path: &Path, text: &str) -> Result<(), u8> {
    fs::write(path, text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_PARSE
    })
}

fn emit_report(records: &str, out: Option<&Path>) -> Result<(), u8> {
    match out {
        Some(p) => write(p, records),
        None => {
            print!("{records}");
            Ok(())
        }
    }
}

fn run(a: &RunArgs) -> u8 {
    match try_run(a) {
        Ok(c) | Err(c) => c,
    }
}

fn try_run(a: &RunArgs) -> Result<u8, u8> {
    let text = read(&a.scenario)?;
    let scenario = Scenario::parse(&text).map_err(|e| {
        eprintln!("error: {}: {e}", a.scenario.display());
        EXIT_PARSE
    })?;
    let out = scenario.run().map_err(|e| {
        eprintln!("error: {}: {e}", a.scenario.display());
        EXIT_PARSE
    })?;
    if let Some(p) = &a.trace_out {
        write(p, &out.trace.to_text())?;
    }
    let report = check(&out.trace, &scenario.checks);
    eprintln!("{scenario}");
    eprint!("{}", report.summary());
    emit_report(&report.to_records(), a.report_out.as_deref())?;
    if out.status == RunStatus::HorizonExceeded {
        eprintln!("horizon {}Δ exceeded", format_time(scenario.sim.horizon, scenario.sim.delta));
        return Ok(EXIT_HORIZON);
    }
    Ok(if report.passed() { 0 } else { EXIT_CHECK_FAILED })
}

fn replay(a: &ReplayArgs) -> u8 {
    match try_replay(a) {
        Ok(c) | Err(c) => c,
    }
}

fn try_replay(a: &ReplayArgs) -> Result<u8, u8> {
    let text = read(&a.trace)?;
    let trace = Trace::parse(&text).map_err(|e| {
        eprintln!("error: {}: {e}", a.trace.display());
        EXIT_PARSE
    })?;
    let checks = if a.checks.is_empty() {
        Check::DEFAULT.to_vec()
    } else {
        a.checks.iter().map(|s| parse_check(s, trace.header.delta)).collect::<Result<Vec<_>, _>>()?
    };
    let report = check(&trace, &checks);
    eprint!("{}", report.summary());
    emit_report(&report.to_records(), a.report_out.as_deref())?;
    Ok(if report.passed() { 0 } else { EXIT_CHECK_FAILED })
}

fn parse_check(s: &str, delta: u64) -> Result<Check, u8> {
    let s = s.trim();
    let parsed = match s.split_once('=') {
        Some(("decision_at", t)) => parse_time(t, delta).map(Check::DecisionAt),
        Some(_) => None,
        None => Check::parse(s),
    };
    parsed.ok_or_else(|| {
        eprintln!("error: unknown check `{s}`");
        EXIT_PARSE
    })
}

enum Axis {
    Values(Vec<u32>),
    Symbolic,
}

fn parse_axis(s: &str, symbol: &str) -> Result<Axis, String> {
    if s.trim() == symbol {
        return Ok(Axis::Symbolic);
    }
    let mut values = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let num = |x: &str| x.trim().parse::<u32>().map_err(|_| format!("bad range `{s}`"));
        match part.split_once('-') {
            Some((lo, hi)) => values.extend(num(lo)?..=num(hi)?),
            None => values.push(num(part)?),
        }
    }
    values.sort_unstable();
    values.dedup();
    Ok(Axis::Values(values))
}

enum Cell {
    Skipped { n: u32, f: u32, t: u32, reason: String },
    Live(QuorumConfig),
}

#[derive(Default, Clone)]
struct Tally {
    runs: u64,
    passed: u64,
    decisions: u64,
    latency_sum: u64,
    first_failure: Option<(u64, String)>,
}

fn cells(a: &MatrixArgs) -> Result<Vec<Cell>, String> {
    let Axis::Values(fs) = parse_axis(&a.f_range, "")? else { unreachable!() };
    let ns = parse_axis(&a.n_range, "min")?;
    let ts = parse_axis(&a.t_range, "f")?;
    let mut out = Vec::new();
    for &f in &fs {
        let tvals = match &ts {
            Axis::Symbolic => vec![f],
            Axis::Values(v) => v.clone(),
        };
        for t in tvals {
            if t < 1 || t > f || f < 1 {
                out.push(Cell::Skipped { n: 0, f, t, reason: "invalid (need 1 ≤ t ≤ f)".into() });
                continue;
            }
            let min = minimum_n(f, t);
            let nvals = match &ns {
                Axis::Symbolic => vec![min],
                Axis::Values(v) => v.clone(),
            };
            for n in nvals {
                if n < min {
                    let rule = if t == f { "5f−1" } else { "3f+2t−1" };
                    out.push(Cell::Skipped { n, f, t, reason: format!("infeasible (n < {rule})") });
                    continue;
                }
                let mode = if t == f { Mode::Vanilla } else { Mode::Generalized };
                let cfg = QuorumConfig::new(n, f, t, mode).map_err(|e| e.to_string())?;
                out.push(Cell::Live(cfg));
            }
        }
    }
    Ok(out)
}

fn run_seed(cfg: &QuorumConfig, seed: u64, fault_free: bool) -> Tally {
    let mut s = random_scenario(cfg, seed);
    if fault_free {
        s.byzantine.clear();
        s.script = Script::None;
        s.network = NetworkSpec::Default;
        s.sim.gst = 0;
        s.sim.latency = LatencyModel::Fixed(s.sim.delta);
    }
    let mut tally = Tally { runs: 1, ..Default::default() };
    match s.run() {
        Ok(out) => {
            let report = check(&out.trace, &s.checks);
            tally.decisions = report.latencies.len() as u64;
            tally.latency_sum = report.latencies.iter().map(|r| r.time).sum();
            if report.passed() {
                tally.passed = 1;
            } else {
                let why = report.failures().map(|(c, _)| c.name()).collect::<Vec<_>>().join(",");
                tally.first_failure = Some((seed, why));
            }
        }
        Err(e) => tally.first_failure = Some((seed, e.to_string())),
    }
    tally
}

fn matrix(a: &MatrixArgs) -> u8 {
    let cells = match cells(a) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_PARSE;
        }
    };
    let live: Vec<QuorumConfig> = cells
        .iter()
        .filter_map(|c| match c {
            Cell::Live(cfg) => Some(*cfg),
            Cell::Skipped { .. } => None,
        })
        .collect();
    let jobs: Vec<(usize, u64)> =
        (0..live.len()).flat_map(|i| (a.base_seed..a.base_seed + a.seeds).map(move |s| (i, s))).collect();
    let threads = a.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let tallies = Mutex::new(vec![Tally::default(); live.len()]);
    std::thread::scope(|scope| {
        for w in 0..threads {
            let (jobs, live, tallies) = (&jobs, &live, &tallies);
            scope.spawn(move || {
                for &(i, seed) in jobs.iter().skip(w).step_by(threads) {
                    let t = run_seed(&live[i], seed, a.fault_free);
                    let mut all = tallies.lock().expect("worker panicked");
                    let cell = &mut all[i];
                    cell.runs += t.runs;
                    cell.passed += t.passed;
                    cell.decisions += t.decisions;
                    cell.latency_sum += t.latency_sum;
                    if let Some(f) = t.first_failure {
                        if cell.first_failure.as_ref().is_none_or(|g| f.0 < g.0) {
                            cell.first_failure = Some(f);
                        }
                    }
                }
            });
        }
    });
    let tallies = tallies.into_inner().expect("worker panicked");

    let mut table = String::new();
    let _ = writeln!(table, "{:>4} {:>3} {:>3}  {:<12} {:>11}  mean latency", "n", "f", "t", "mode", "pass");
    let mut failed = false;
    let mut next = 0;
    for c in &cells {
        match c {
            Cell::Skipped { n, f, t, reason } => {
                let n = if *n == 0 { "-".to_string() } else { n.to_string() };
                let _ = writeln!(table, "{n:>4} {f:>3} {t:>3}  {reason}");
            }
            Cell::Live(cfg) => {
                let tl = &tallies[next];
                next += 1;
                let latency = if tl.decisions == 0 {
                    "-".to_string()
                } else {
                    let mean = tl.latency_sum as f64 / tl.decisions as f64 / DELTA as f64;
                    format!("{mean:.2}Δ")
                };
                let pass = format!("{}/{}", tl.passed, tl.runs);
                let _ = write!(
                    table,
                    "{:>4} {:>3} {:>3}  {:<12} {pass:>11}  {latency}",
                    cfg.n(),
                    cfg.f(),
                    cfg.t(),
                    cfg.mode().as_str()
                );
                if let Some((seed, why)) = &tl.first_failure {
                    failed = true;
                    let _ = write!(table, "  first failure: seed {seed} ({why})");
                }
                table.push('\n');
            }
        }
    }
    print!("{table}");
    if failed {
        EXIT_CHECK_FAILED
    } else {
        0
    }
}

const DELTA: u64 = fastbft::time::DEFAULT_DELTA;
