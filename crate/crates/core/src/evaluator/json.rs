//! Canonical JSON form of a [`LeakageReport`]. Key order is fixed by the
//! field order of the wire structs below.

use serde::{Deserialize, Serialize};

use super::{CategoryHistogram, CategorySummary, Correction, HistogramData, LeakageReport, PairResult, ReportMetadata};
use crate::error::{Error, Result};
use crate::stats::{SummaryStats, TTestResult};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportJson {
    alpha: f64,
    correction: Correction,
    events: Vec<String>,
    categories: Vec<String>,
    summaries: Vec<SummaryJson>,
    pairs: Vec<PairJson>,
    distinguishable: Vec<PairKeyJson>,
    alarm: bool,
    event_alarms: Vec<EventAlarmJson>,
    histograms: Vec<HistogramJson>,
    metadata: ReportMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryJson {
    category: String,
    event: String,
    n: usize,
    mean: f64,
    variance: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairJson {
    event: String,
    a: String,
    b: String,
    #[serde(with = "signed_float")]
    t: f64,
    df: Option<f64>,
    p: f64,
    reject: bool,
}

#[derive(Serialize, Deserialize, PartialEq, Eq, Debug)]
#[serde(deny_unknown_fields)]
struct PairKeyJson {
    event: String,
    a: String,
    b: String,
}

#[derive(Serialize, Deserialize, PartialEq, Eq, Debug)]
#[serde(deny_unknown_fields)]
struct EventAlarmJson {
    event: String,
    alarm: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramJson {
    category: String,
    event: String,
    bin_edges: Vec<f64>,
    frequencies: Vec<u64>,
}

/// Finite values as JSON numbers, infinities as `"+inf"` / `"-inf"`.
mod signed_float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("+inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "+inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(de::Error::custom(format!("expected a number, \"+inf\" or \"-inf\", got {s:?}"))),
        }
    }
}

fn key(p: &PairResult) -> PairKeyJson {
    PairKeyJson {
        event: p.event.clone(),
        a: p.category_a.clone(),
        b: p.category_b.clone(),
    }
}

pub(super) fn to_json(report: &LeakageReport) -> String {
    let wire = ReportJson {
        alpha: report.alpha,
        correction: report.correction,
        events: report.events.clone(),
        categories: report.categories.clone(),
        summaries: report
            .summaries
            .iter()
            .map(|s| SummaryJson {
                category: s.category.clone(),
                event: s.event.clone(),
                n: s.stats.n,
                mean: s.stats.mean,
                variance: s.stats.variance,
            })
            .collect(),
        pairs: report
            .pairs
            .iter()
            .map(|p| PairJson {
                event: p.event.clone(),
                a: p.category_a.clone(),
                b: p.category_b.clone(),
                t: p.result.t,
                df: p.result.df,
                p: p.result.p,
                reject: p.result.reject,
            })
            .collect(),
        distinguishable: report.distinguishable().map(key).collect(),
        alarm: report.alarm,
        event_alarms: report
            .event_alarms()
            .into_iter()
            .map(|(event, alarm)| EventAlarmJson { event, alarm })
            .collect(),
        histograms: report
            .histograms
            .iter()
            .map(|h| HistogramJson {
                category: h.category.clone(),
                event: h.event.clone(),
                bin_edges: h.histogram.bin_edges.clone(),
                frequencies: h.histogram.frequencies.clone(),
            })
            .collect(),
        metadata: report.metadata.clone(),
    };
    let mut out = serde_json::to_string_pretty(&wire).expect("report serializes");
    out.push('\n');
    out
}

pub(super) fn from_json(text: &str) -> Result<LeakageReport> {
    let wire: ReportJson = serde_json::from_str(text).map_err(|e| Error::MalformedReport(e.to_string()))?;
    if !(wire.alpha > 0.0 && wire.alpha < 1.0) {
        return Err(Error::MalformedReport(format!("alpha {} outside (0, 1)", wire.alpha)));
    }
    let effective = wire.correction.effective_alpha(wire.alpha, wire.categories.len());
    let report = LeakageReport {
        alpha: wire.alpha,
        correction: wire.correction,
        events: wire.events,
        categories: wire.categories,
        summaries: wire
            .summaries
            .into_iter()
            .map(|s| CategorySummary {
                category: s.category,
                event: s.event,
                stats: SummaryStats::new(s.n, s.mean, s.variance),
            })
            .collect(),
        pairs: wire
            .pairs
            .into_iter()
            .map(|p| PairResult {
                event: p.event,
                category_a: p.a,
                category_b: p.b,
                result: TTestResult {
                    t: p.t,
                    df: p.df,
                    p: p.p,
                    alpha: effective,
                    reject: p.reject,
                },
            })
            .collect(),
        alarm: wire.alarm,
        histograms: wire
            .histograms
            .into_iter()
            .map(|h| CategoryHistogram {
                category: h.category,
                event: h.event,
                histogram: HistogramData {
                    bin_edges: h.bin_edges,
                    frequencies: h.frequencies,
                },
            })
            .collect(),
        metadata: wire.metadata,
    };
    report.validate()?;

    let expected: Vec<PairKeyJson> = report.distinguishable().map(key).collect();
    if expected != wire.distinguishable {
        return Err(Error::MalformedReport(
            "`distinguishable` does not match the rejected pairs".into(),
        ));
    }
    let alarms: Vec<EventAlarmJson> = report
        .event_alarms()
        .into_iter()
        .map(|(event, alarm)| EventAlarmJson { event, alarm })
        .collect();
    if alarms != wire.event_alarms {
        return Err(Error::MalformedReport("`event_alarms` does not match the pairs".into()));
    }
    for h in &report.histograms {
        let edges = &h.histogram.bin_edges;
        if edges.len() != h.histogram.frequencies.len() + 1 || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedReport(format!(
                "histogram for ({}, {}) has inconsistent bin edges",
                h.category, h.event
            )));
        }
        if let Some(s) = report.summary(&h.category, &h.event) {
            if h.histogram.total() != s.n as u64 {
                return Err(Error::MalformedReport(format!(
                    "histogram for ({}, {}) holds {} samples, summary says {}",
                    h.category,
                    h.event,
                    h.histogram.total(),
                    s.n
                )));
            }
        }
    }
    Ok(report)
}
