//! Backend driving the system `perf stat` tool.
//!
//! Each sample is one `perf stat -x , -o <file> -e <events> ...` run; the
//! field-separated report is parsed from the output file so that the
//! target's own stderr never mixes with counter lines.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use super::{Backend, Sample, SessionOptions, LABEL_PLACEHOLDER};
use crate::error::{Error, Result};
use crate::events::EventSet;

/// Overrides the location of the `perf` binary.
pub const PERF_PATH_ENV: &str = "LEAKSCOPE_PERF_PATH";

const PRIVILEGE_HINT: &str = "reading hardware counters requires administrative privilege; \
     re-run as root or lower /proc/sys/kernel/perf_event_paranoid";

enum Mode {
    Spawn(Vec<String>),
    Attach { pid: u32, window_ms: u64 },
}

pub(super) struct PerfBackend {
    perf: PathBuf,
    mode: Mode,
}

fn locate_perf(options: &SessionOptions) -> Result<PathBuf> {
    let explicit = options
        .perf_path
        .clone()
        .or_else(|| std::env::var_os(PERF_PATH_ENV).map(PathBuf::from));
    if let Some(path) = explicit {
        return if path.is_file() {
            Ok(path)
        } else {
            Err(Error::BackendUnavailable(format!("perf binary {} not found", path.display())))
        };
    }
    std::env::var_os("PATH")
        .into_iter()
        .flat_map(|p| std::env::split_paths(&p).collect::<Vec<_>>())
        .map(|dir| dir.join("perf"))
        .find(|p| p.is_file())
        .ok_or_else(|| {
            Error::BackendUnavailable(format!("`perf` not found on PATH (set {PERF_PATH_ENV} to override)"))
        })
}

fn process_exists(pid: u32) -> bool {
    pid != 0 && Path::new(&format!("/proc/{pid}")).exists()
}

impl PerfBackend {
    pub(super) fn spawn(command: &[String], events: &EventSet, options: &SessionOptions) -> Result<Self> {
        if command.is_empty() || command[0].is_empty() {
            return Err(Error::InvalidTarget("spawn mode needs a command".into()));
        }
        let backend = Self {
            perf: locate_perf(options)?,
            mode: Mode::Spawn(command.to_vec()),
        };
        if !options.skip_probe {
            backend.probe(events)?;
        }
        Ok(backend)
    }

    pub(super) fn attach(pid: u32, window_ms: u64, events: &EventSet, options: &SessionOptions) -> Result<Self> {
        if window_ms == 0 {
            return Err(Error::InvalidTarget("attach window must be longer than 0 ms".into()));
        }
        if !process_exists(pid) {
            return Err(Error::InvalidTarget(format!("no process with pid {pid}")));
        }
        let backend = Self {
            perf: locate_perf(options)?,
            mode: Mode::Attach { pid, window_ms },
        };
        if !options.skip_probe {
            backend.probe(events)?;
        }
        Ok(backend)
    }

    /// Counts a trivial command to surface privilege and support problems
    /// before any real measurement.
    fn probe(&self, events: &EventSet) -> Result<()> {
        match self.run(events, &[], &["true".to_owned()]) {
            Ok(_) => Ok(()),
            Err(e @ Error::PermissionDenied(_)) => Err(e),
            Err(e) => Err(Error::BackendUnavailable(format!("perf probe failed: {e}"))),
        }
    }

    fn run(&self, events: &EventSet, extra: &[String], command: &[String]) -> Result<BTreeMap<String, u64>> {
        let out = tempfile::NamedTempFile::new()?;
        let output = Command::new(&self.perf)
            .arg("stat")
            .args(["-x", ","])
            .arg("-o")
            .arg(out.path())
            .arg("-e")
            .arg(events.joined())
            .args(extra)
            .arg("--")
            .args(command)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .output()
            .map_err(|e| Error::BackendUnavailable(format!("cannot run {}: {e}", self.perf.display())))?;
        let report = std::fs::read_to_string(out.path()).unwrap_or_default();
        let stderr = String::from_utf8_lossy(&output.stderr);

        let is_permission = |text: &str| {
            text.contains("perf_event_paranoid")
                || text.contains("Permission denied")
                || text.contains("Access to performance monitoring")
                || text.contains("No permission")
        };
        if is_permission(&stderr) || is_permission(&report) {
            return Err(Error::PermissionDenied(PRIVILEGE_HINT.into()));
        }
        if stderr.contains("Workload failed") {
            return Err(Error::TargetFailed(last_line(&stderr)));
        }
        let counts = parse_perf_csv(&report, events);
        if !output.status.success() {
            // perf exits with the workload's status once counting succeeded
            return match counts {
                Ok(_) => Err(Error::TargetFailed(format!(
                    "`{}` exited with {}",
                    command.join(" "),
                    output.status
                ))),
                Err(_) => Err(Error::CounterReadError(format!(
                    "perf stat failed ({}): {}",
                    output.status,
                    last_line(&stderr)
                ))),
            };
        }
        counts
    }
}

fn last_line(text: &str) -> String {
    text.lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("")
        .trim()
        .to_owned()
}

impl Backend for PerfBackend {
    fn id(&self) -> &'static str {
        match self.mode {
            Mode::Spawn(_) => "perf-spawn",
            Mode::Attach { .. } => "perf-attach",
        }
    }

    fn measure(&mut self, category: &str, run_index: u64, events: &EventSet) -> Result<Sample> {
        let counts = match &self.mode {
            Mode::Spawn(command) => {
                let argv: Vec<String> = command.iter().map(|a| a.replace(LABEL_PLACEHOLDER, category)).collect();
                self.run(events, &[], &argv)?
            }
            Mode::Attach { pid, window_ms } => {
                if !process_exists(*pid) {
                    return Err(Error::TargetFailed(format!("process {pid} is gone")));
                }
                let secs = format!("{}.{:03}", window_ms / 1000, window_ms % 1000);
                self.run(events, &["-p".into(), pid.to_string()], &["sleep".into(), secs])?
            }
        };
        Ok(Sample {
            category: category.to_owned(),
            run_index,
            counts,
        })
    }

    fn is_live(&self) -> bool {
        true
    }
}

/// `cpu_core/cache-misses/u` and `cache-misses:u` both name `cache-misses`.
fn normalize_event_field(field: &str) -> &str {
    let field = field.trim();
    let inner = match field.split_once('/') {
        Some((_, rest)) => rest.split('/').next().unwrap_or(rest),
        None => field,
    };
    inner.split(':').next().unwrap_or(inner)
}

/// Parses `perf stat -x ,` output into one count per event of `events`.
///
/// Hybrid CPUs report an event once per core type; those rows are summed.
/// `<not counted>` and `<not supported>` are errors rather than zeros.
pub fn parse_perf_csv(text: &str, events: &EventSet) -> Result<BTreeMap<String, u64>> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            continue;
        }
        let name = normalize_event_field(fields[2]);
        if !events.contains(name) {
            continue;
        }
        let raw = fields[0].trim();
        if raw.starts_with('<') {
            return Err(Error::CounterReadError(format!("event `{name}`: {raw}")));
        }
        let value: u64 = raw
            .parse()
            .map_err(|_| Error::CounterReadError(format!("event `{name}`: unparsable count {raw:?}")))?;
        *counts.entry(name.to_owned()).or_default() += value;
    }
    if let Some(missing) = events.names().find(|n| !counts.contains_key(*n)) {
        return Err(Error::CounterReadError(format!("perf reported no count for `{missing}`")));
    }
    Ok(counts)
}
