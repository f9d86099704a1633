//! Per-classification event counts from a target process.
//!
//! A [`Session`] wraps one backend:
//!
//! * `spawn` runs a command once per sample under `perf stat` and attributes
//!   the whole process lifetime to that classification;
//! * `attach` counts an existing process for a fixed wall-clock window
//!   (approximate: the window is not aligned to any classification);
//! * `synthetic` draws counts from a [`WorkloadProfile`];
//! * `replay` hands back previously recorded samples.

mod perf;
mod replay;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventSet;
use crate::workload::WorkloadProfile;

pub use perf::{parse_perf_csv, PERF_PATH_ENV};

/// Placeholder in spawn-mode arguments replaced by the category label.
pub const LABEL_PLACEHOLDER: &str = "{label}";

/// Category labels end up as CSV fields, so they must not contain
/// separators or line breaks.
pub fn validate_category(label: &str) -> Result<()> {
    let bad = label.is_empty()
        || label.trim() != label
        || label.chars().any(|c| c == ',' || c == '"' || c.is_control());
    if bad {
        Err(Error::InvalidCategory(label.to_owned()))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// Run `command` once per sample; `{label}` in any argument is replaced
    /// by the category being measured.
    Spawn { command: Vec<String> },
    /// Count process `pid` for `window_ms` milliseconds per sample.
    Attach { pid: u32, window_ms: u64 },
    Synthetic { profile: WorkloadProfile },
    Replay { trace: PathBuf },
}

impl TargetSpec {
    pub fn mode(&self) -> &'static str {
        match self {
            TargetSpec::Spawn { .. } => "spawn",
            TargetSpec::Attach { .. } => "attach",
            TargetSpec::Synthetic { .. } => "synthetic",
            TargetSpec::Replay { .. } => "replay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub category: String,
    pub run_index: u64,
    pub counts: BTreeMap<String, u64>,
}

impl Sample {
    /// Checks that `counts` has exactly one entry per event of `events`.
    pub fn new(category: &str, run_index: u64, counts: BTreeMap<String, u64>, events: &EventSet) -> Result<Self> {
        validate_category(category)?;
        let sample = Sample {
            category: category.to_owned(),
            run_index,
            counts,
        };
        sample.check_events(events)?;
        Ok(sample)
    }

    fn check_events(&self, events: &EventSet) -> Result<()> {
        let same = self.counts.len() == events.len() && events.names().all(|n| self.counts.contains_key(n));
        if same {
            Ok(())
        } else {
            Err(Error::InvalidMeasurementSet(format!(
                "sample ({}, {}) has counts for {:?}, expected {:?}",
                self.category,
                self.run_index,
                self.counts.keys().collect::<Vec<_>>(),
                events.names().collect::<Vec<_>>()
            )))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub backend: String,
    /// Seconds since the Unix epoch; only set for live measurements.
    pub timestamp: Option<u64>,
    pub seed: Option<u64>,
    pub host: Option<String>,
}

/// All samples of one collection, grouped by category.
///
/// Equality ignores metadata, event ordering and sample ordering: two sets
/// are equal when they hold the same events and the same
/// (category, run, counts) samples.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    events: EventSet,
    samples: Vec<Sample>,
    pub metadata: Metadata,
}

impl MeasurementSet {
    pub fn new(events: EventSet, samples: Vec<Sample>, metadata: Metadata) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidMeasurementSet("no samples".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &samples {
            validate_category(&s.category)?;
            s.check_events(&events)?;
            if !seen.insert((s.category.as_str(), s.run_index)) {
                return Err(Error::InvalidMeasurementSet(format!(
                    "duplicate sample for category `{}`, run {}",
                    s.category, s.run_index
                )));
            }
        }
        Ok(Self {
            events,
            samples,
            metadata,
        })
    }

    pub fn events(&self) -> &EventSet {
        &self.events
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Distinct category labels in lexicographic order.
    pub fn categories(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.samples.iter().map(|s| s.category.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Counts of `event` for `category`, ordered by run index.
    pub fn counts(&self, category: &str, event: &str) -> Vec<u64> {
        let mut rows: Vec<(u64, u64)> = self
            .samples
            .iter()
            .filter(|s| s.category == category)
            .filter_map(|s| s.counts.get(event).map(|&c| (s.run_index, c)))
            .collect();
        rows.sort_unstable();
        rows.into_iter().map(|(_, c)| c).collect()
    }

    /// Samples sorted by (category, run index).
    pub fn sorted_samples(&self) -> Vec<&Sample> {
        let mut v: Vec<&Sample> = self.samples.iter().collect();
        v.sort_by(|a, b| (&a.category, a.run_index).cmp(&(&b.category, b.run_index)));
        v
    }

    /// Largest run index per category.
    pub fn max_runs(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for s in &self.samples {
            let e = out.entry(s.category.clone()).or_insert(s.run_index);
            *e = (*e).max(s.run_index);
        }
        out
    }

    /// Drops events not in `keep`, preserving everything else.
    pub fn restrict_events(&self, keep: &EventSet) -> Result<Self> {
        for name in keep.names() {
            if !self.events.contains(name) {
                return Err(Error::UnknownEvent(name.to_owned()));
            }
        }
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                category: s.category.clone(),
                run_index: s.run_index,
                counts: s
                    .counts
                    .iter()
                    .filter(|(k, _)| keep.contains(k))
                    .map(|(k, v)| (k.clone(), *v))
                    .collect(),
            })
            .collect();
        Self::new(keep.clone(), samples, self.metadata.clone())
    }

    pub fn into_parts(self) -> (EventSet, Vec<Sample>, Metadata) {
        (self.events, self.samples, self.metadata)
    }
}

impl PartialEq for MeasurementSet {
    fn eq(&self, other: &Self) -> bool {
        let names = |ms: &MeasurementSet| ms.events.names().map(str::to_owned).collect::<BTreeSet<_>>();
        names(self) == names(other) && self.sorted_samples() == other.sorted_samples()
    }
}

trait Backend {
    fn id(&self) -> &'static str;

    fn measure(&mut self, category: &str, run_index: u64, events: &EventSet) -> Result<Sample>;

    fn seed(&self) -> Option<u64> {
        None
    }

    fn is_live(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    /// `perf` binary to use; falls back to `$LEAKSCOPE_PERF_PATH`, then `perf` on `PATH`.
    pub perf_path: Option<PathBuf>,
    /// Skip the trial `perf stat` run performed when opening a live session.
    pub skip_probe: bool,
}

/// A single-threaded measurement handle. Hardware counters are a shared
/// resource, so samples are taken one at a time.
pub struct Session {
    events: EventSet,
    backend: Box<dyn Backend>,
    next_run: BTreeMap<String, u64>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("backend", &self.backend.id())
            .field("events", &self.events.joined())
            .finish()
    }
}

pub fn open_session(target: &TargetSpec, events: &EventSet) -> Result<Session> {
    open_session_with(target, events, &SessionOptions::default())
}

pub fn open_session_with(target: &TargetSpec, events: &EventSet, options: &SessionOptions) -> Result<Session> {
    if events.is_empty() {
        return Err(Error::EmptyEventSet);
    }
    let backend: Box<dyn Backend> = match target {
        TargetSpec::Spawn { command } => Box::new(perf::PerfBackend::spawn(command, events, options)?),
        TargetSpec::Attach { pid, window_ms } => {
            Box::new(perf::PerfBackend::attach(*pid, *window_ms, events, options)?)
        }
        TargetSpec::Synthetic { profile } => Box::new(synthetic::SyntheticBackend::new(profile, events)?),
        TargetSpec::Replay { trace } => Box::new(replay::ReplayBackend::from_path(trace, events)?),
    };
    Ok(Session {
        events: events.clone(),
        backend,
        next_run: BTreeMap::new(),
    })
}

/// Replays an in-memory measurement set.
pub fn open_replay(ms: &MeasurementSet, events: &EventSet) -> Result<Session> {
    Ok(Session {
        events: events.clone(),
        backend: Box::new(replay::ReplayBackend::new(ms, events)?),
        next_run: BTreeMap::new(),
    })
}

impl Session {
    pub fn events(&self) -> &EventSet {
        &self.events
    }

    pub fn backend_id(&self) -> &'static str {
        self.backend.id()
    }

    /// Takes one sample for `category`.
    pub fn measure_once(&mut self, category: &str) -> Result<Sample> {
        validate_category(category)?;
        let run_index = self.next_run.get(category).copied().unwrap_or(0);
        let sample = self.backend.measure(category, run_index, &self.events)?;
        sample.check_events(&self.events)?;
        self.next_run.insert(category.to_owned(), sample.run_index + 1);
        Ok(sample)
    }

    fn metadata(&self) -> Metadata {
        let live = self.backend.is_live();
        Metadata {
            backend: self.backend.id().to_owned(),
            timestamp: live
                .then(|| {
                    std::time::SystemTime::now()
                        .duration_since(std::time::UNIX_EPOCH)
                        .ok()
                        .map(|d| d.as_secs())
                })
                .flatten(),
            seed: self.backend.seed(),
            host: live.then(host_description),
        }
    }
}

pub fn measure_once(session: &mut Session, category: &str) -> Result<Sample> {
    session.measure_once(category)
}

/// Measures each planned category `run_count` times, category by category
/// in plan order.
pub fn collect<S: AsRef<str>>(session: &mut Session, plan: &[(S, usize)]) -> Result<MeasurementSet> {
    if plan.is_empty() {
        return Err(Error::InvalidPlan("plan is empty".into()));
    }
    for (i, (cat, runs)) in plan.iter().enumerate() {
        let cat = cat.as_ref();
        validate_category(cat)?;
        if *runs == 0 {
            return Err(Error::InvalidPlan(format!("run count for category `{cat}` must be at least 1")));
        }
        if plan[..i].iter().any(|(c, _)| c.as_ref() == cat) {
            return Err(Error::InvalidPlan(format!("category `{cat}` appears twice")));
        }
    }
    let total: usize = plan.iter().map(|(_, n)| n).sum();
    let mut samples = Vec::with_capacity(total);
    for (cat, runs) in plan {
        let cat = cat.as_ref();
        for _ in 0..*runs {
            let next = session.next_run.get(cat).copied().unwrap_or(0);
            let sample = session.measure_once(cat).map_err(|e| Error::Measurement {
                category: cat.to_owned(),
                run_index: next,
                source: Box::new(e),
            })?;
            samples.push(sample);
        }
    }
    MeasurementSet::new(session.events.clone(), samples, session.metadata())
}

fn host_description() -> String {
    let hostname = std::fs::read_to_string("/proc/sys/kernel/hostname")
        .map(|s| s.trim().to_owned())
        .unwrap_or_else(|_| "unknown".into());
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|info| {
            info.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_owned())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_owned());
    format!("{hostname} ({}, {cpu})", std::env::consts::OS)
}
