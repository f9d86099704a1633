//! Black-box input-leakage evaluation from hardware performance counters.
//!
//! A target (typically a classifier) is run repeatedly on inputs of known
//! categories while event counters such as `cache-misses` and `branches`
//! are recorded. For every event and every pair of categories a Welch
//! t-test decides whether the two count distributions are distinguishable;
//! any distinguishable pair raises the leakage alarm.
//!
//! The pipeline is: [`collector`] produces a [`MeasurementSet`],
//! [`store`] persists it as a trace, and [`evaluator`] turns it into a
//! [`LeakageReport`].

pub mod collector;
pub mod error;
pub mod evaluator;
pub mod events;
pub mod stats;
pub mod store;
pub mod workload;

pub use collector::{collect, open_session, MeasurementSet, Metadata, Sample, Session, TargetSpec};
pub use error::{Error, Result};
pub use evaluator::{
    decision_pattern, evaluate, histogram, render_report, Correction, HistogramData, LeakageReport, PairResult,
    ReportFormat,
};
pub use events::{build_event_set, resolve_event, Catalog, EventKind, EventSet, EventSpec, DEFAULT_MAX_PARALLEL_EVENTS};
pub use stats::{p_two_tailed, summarize, t_test, welch_t, SummaryStats, TTestResult, DEFAULT_ALPHA};
pub use store::{merge_traces, read_trace, read_trace_str, write_trace, write_trace_string};
pub use workload::{run_scripted_workload, simulate_counts, CategoryProfile, EventModel, WorkloadProfile};

/// Version string recorded in report metadata.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
