//! `leakscope`: collect event-count traces, analyze them for input-dependent
//! leakage, and render reports.
//!
//! Exit codes: 0 no leakage, 1 operational error, 2 leakage alarm.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use leakscope::collector::{collect, open_session, TargetSpec};
use leakscope::evaluator::{evaluate_with, EvaluateOptions, DEFAULT_BINS};
use leakscope::store::{read_trace_with, write_trace_string};
use leakscope::{
    render_report, run_scripted_workload, Catalog, Correction, Error, LeakageReport, ReportFormat, WorkloadProfile,
    DEFAULT_ALPHA, DEFAULT_MAX_PARALLEL_EVENTS,
};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_ALARM: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "leakscope", version)]
#[command(about = "Detect input-dependent leakage in hardware performance counter footprints")]
struct Cli {
    /// Extra event definitions, one `name,kind,description` per line.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Measure event counts per category and write a trace.
    Collect(CollectArgs),
    /// Write a deterministic synthetic trace from a workload profile.
    Simulate(SimulateArgs),
    /// Run pairwise t-tests on a trace and write a JSON report.
    Analyze(AnalyzeArgs),
    /// Render a JSON report as text, markdown or canonical JSON.
    Report(ReportArgs),
    /// Busy loop shaped by a profile category (a measurable spawn target).
    #[command(hide = true)]
    Workload(WorkloadArgs),
}

#[derive(Debug, Args)]
struct CollectArgs {
    /// Comma-separated event names (defaults to the profile's or trace's events).
    #[arg(long, value_delimiter = ',')]
    events: Vec<String>,

    /// spawn, attach, synthetic or replay.
    #[arg(long)]
    mode: String,

    /// Samples per category (default 1000; replay defaults to every recorded sample).
    #[arg(long)]
    runs: Option<usize>,

    /// Category label; repeat for several. `{label}` in the command is replaced by it.
    #[arg(long = "label")]
    labels: Vec<String>,

    /// Process to attach to.
    #[arg(long)]
    pid: Option<u32>,

    /// Attach-mode measurement window in milliseconds.
    #[arg(long, default_value_t = 1000)]
    window_ms: u64,

    /// Workload profile (synthetic mode).
    #[arg(long)]
    profile: Option<PathBuf>,

    /// Recorded trace (replay mode).
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Overrides the profile seed (synthetic mode).
    #[arg(long)]
    seed: Option<u64>,

    /// Maximum number of events counted in parallel.
    #[arg(long, default_value_t = DEFAULT_MAX_PARALLEL_EVENTS)]
    max_parallel: usize,

    /// Output trace path, `-` for standard output.
    #[arg(long, default_value = "-")]
    out: String,

    /// Target command (spawn mode), after `--`.
    #[arg(last = true)]
    command: Vec<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    profile: PathBuf,

    /// Samples per category.
    #[arg(long, default_value_t = 1000)]
    runs: usize,

    /// Overrides the profile seed.
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Trace path, `-` for standard input.
    #[arg(long)]
    trace: String,

    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,

    /// none or bonferroni.
    #[arg(long, default_value = "none")]
    correction: String,

    /// Histogram bins per (category, event).
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,

    /// JSON report path, `-` for standard output.
    #[arg(long, default_value = "-")]
    out: String,

    /// Do not print the human-readable summary on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// JSON report path, `-` for standard input.
    #[arg(long)]
    report: String,

    /// text, json or markdown.
    #[arg(long, default_value = "text")]
    format: String,

    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Debug, Args)]
struct WorkloadArgs {
    #[arg(long)]
    profile: PathBuf,

    #[arg(long)]
    category: String,
}

fn read_input(path: &str) -> Result<Vec<u8>> {
    if path == "-" {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf).context("reading standard input")?;
        Ok(buf)
    } else {
        std::fs::read(path).with_context(|| format!("reading {path}"))
    }
}

fn write_output(path: &str, bytes: &[u8]) -> Result<()> {
    if path == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        out.flush()?;
        Ok(())
    } else {
        std::fs::write(path, bytes).with_context(|| format!("writing {path}"))
    }
}

fn load_catalog(path: Option<&Path>) -> Result<Catalog> {
    let mut catalog = Catalog::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading catalog {}", p.display()))?;
        catalog.extend_from_str(&text)?;
    }
    Ok(catalog)
}

fn load_profile(path: &Path, catalog: &Catalog, seed: Option<u64>) -> Result<WorkloadProfile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading profile {}", path.display()))?;
    let mut profile = WorkloadProfile::from_json_with(&text, catalog)
        .with_context(|| format!("loading profile {}", path.display()))?;
    if let Some(s) = seed {
        profile.seed = s;
    }
    Ok(profile)
}

fn cmd_collect(args: CollectArgs, catalog: &Catalog) -> Result<u8> {
    if args.max_parallel == 0 {
        bail!("--max-parallel must be at least 1");
    }
    if args.runs == Some(0) {
        bail!("--runs must be at least 1");
    }
    let requested = |fallback: Vec<String>| if args.events.is_empty() { fallback } else { args.events.clone() };

    let (target, event_names, default_labels, recorded_runs) = match args.mode.as_str() {
        "spawn" => {
            if args.command.is_empty() {
                bail!("spawn mode needs a target command after `--`");
            }
            (TargetSpec::Spawn { command: args.command.clone() }, args.events.clone(), vec![], None)
        }
        "attach" => {
            let pid = args.pid.context("attach mode needs --pid")?;
            (TargetSpec::Attach { pid, window_ms: args.window_ms }, args.events.clone(), vec![], None)
        }
        "synthetic" => {
            let path = args.profile.as_deref().context("synthetic mode needs --profile")?;
            let profile = load_profile(path, catalog, args.seed)?;
            let labels = profile.categories.iter().map(|c| c.category.clone()).collect();
            let names = requested(profile.event_names());
            (TargetSpec::Synthetic { profile }, names, labels, None)
        }
        "replay" => {
            let path = args.trace.clone().context("replay mode needs --trace")?;
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let ms = read_trace_with(&text, catalog)?;
            let names = requested(ms.events().names().map(str::to_owned).collect());
            let recorded: Vec<(String, usize)> = ms
                .categories()
                .into_iter()
                .map(|c| {
                    let n = ms.samples().iter().filter(|s| s.category == c).count();
                    (c, n)
                })
                .collect();
            let labels = recorded.iter().map(|(c, _)| c.clone()).collect();
            (TargetSpec::Replay { trace: path }, names, labels, Some(recorded))
        }
        other => bail!("unknown mode `{other}` (valid modes: spawn, attach, synthetic, replay)"),
    };
    if event_names.is_empty() {
        bail!("--events is required in {} mode", args.mode);
    }
    let events = catalog.build_event_set(&event_names, args.max_parallel)?;

    let labels = if args.labels.is_empty() { default_labels } else { args.labels.clone() };
    if labels.is_empty() {
        bail!("at least one --label is required in {} mode", args.mode);
    }
    let plan: Vec<(String, usize)> = labels
        .iter()
        .map(|l| {
            let runs = match (&recorded_runs, args.runs) {
                (_, Some(n)) => n,
                (Some(rec), None) => rec.iter().find(|(c, _)| c == l).map_or(0, |(_, n)| *n),
                (None, None) => 1000,
            };
            (l.clone(), runs)
        })
        .collect();

    let mut session = open_session(&target, &events)?;
    let ms = collect(&mut session, &plan)?;
    write_output(&args.out, write_trace_string(&ms).as_bytes())?;
    Ok(EXIT_OK)
}

fn cmd_simulate(args: SimulateArgs, catalog: &Catalog) -> Result<u8> {
    if args.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let profile = load_profile(&args.profile, catalog, args.seed)?;
    let names = profile.event_names();
    let events = catalog.build_event_set(&names, names.len())?;
    let plan: Vec<(String, usize)> = profile.categories.iter().map(|c| (c.category.clone(), args.runs)).collect();
    let mut session = open_session(&TargetSpec::Synthetic { profile }, &events)?;
    let ms = collect(&mut session, &plan)?;
    write_output(&args.out, write_trace_string(&ms).as_bytes())?;
    Ok(EXIT_OK)
}

fn cmd_analyze(args: AnalyzeArgs, catalog: &Catalog) -> Result<u8> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        bail!(Error::InvalidAlpha(args.alpha));
    }
    if args.bins == 0 {
        bail!("--bins must be at least 1");
    }
    let correction: Correction = args.correction.parse()?;
    let bytes = read_input(&args.trace)?;
    let text = String::from_utf8(bytes).context("trace is not valid UTF-8")?;
    let ms = read_trace_with(&text, catalog).with_context(|| format!("reading trace {}", args.trace))?;
    let mut report = evaluate_with(
        &ms,
        &EvaluateOptions {
            alpha: args.alpha,
            correction,
            bins: args.bins,
        },
    )?;
    report.set_source(if args.trace == "-" { "stdin" } else { &args.trace }, text.as_bytes());

    write_output(&args.out, report.to_json().as_bytes())?;
    if !args.quiet {
        let summary = render_report(&report, ReportFormat::Text);
        std::io::stderr().write_all(&summary)?;
    }
    Ok(if report.alarm { EXIT_ALARM } else { EXIT_OK })
}

fn cmd_report(args: ReportArgs) -> Result<u8> {
    let format: ReportFormat = args.format.parse()?;
    let bytes = read_input(&args.report)?;
    let text = String::from_utf8(bytes).context("report is not valid UTF-8")?;
    let report = LeakageReport::from_json(&text).with_context(|| format!("reading report {}", args.report))?;
    write_output(&args.out, &render_report(&report, format))?;
    Ok(EXIT_OK)
}

fn cmd_workload(args: WorkloadArgs, catalog: &Catalog) -> Result<u8> {
    let profile = load_profile(&args.profile, catalog, None)?;
    run_scripted_workload(&profile, &args.category)?;
    Ok(EXIT_OK)
}

fn run(cli: Cli) -> Result<u8> {
    let catalog = load_catalog(cli.catalog.as_deref())?;
    match cli.command {
        Command::Collect(a) => cmd_collect(a, &catalog),
        Command::Simulate(a) => cmd_simulate(a, &catalog),
        Command::Analyze(a) => cmd_analyze(a, &catalog),
        Command::Report(a) => cmd_report(a),
        Command::Workload(a) => cmd_workload(a, &catalog),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are operational errors, not alarms
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
