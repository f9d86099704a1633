//! Trace files: one `category,event,run,count` row per (sample, event).
//!
//! Writing is byte-deterministic: rows are sorted by (category, event, run),
//! separated by `\n`, with no trailing whitespace. Reading reports the line
//! number of the first problem it finds.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use crate::collector::{validate_category, MeasurementSet, Metadata, Sample};
use crate::error::{Error, Result};
use crate::events::Catalog;

pub const TRACE_HEADER: &str = "category,event,run,count";

pub fn write_trace_string(ms: &MeasurementSet) -> String {
    let mut rows: Vec<(&str, &str, u64, u64)> = ms
        .samples()
        .iter()
        .flat_map(|s| {
            s.counts
                .iter()
                .map(move |(e, &c)| (s.category.as_str(), e.as_str(), s.run_index, c))
        })
        .collect();
    rows.sort_unstable();
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (cat, event, run, count) in rows {
        out.push_str(&format!("{cat},{event},{run},{count}\n"));
    }
    out
}

pub fn write_trace_to<W: Write>(ms: &MeasurementSet, mut writer: W) -> Result<()> {
    writer.write_all(write_trace_string(ms).as_bytes())?;
    writer.flush()?;
    Ok(())
}

pub fn write_trace(ms: &MeasurementSet, path: &Path) -> Result<()> {
    std::fs::write(path, write_trace_string(ms)).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<MeasurementSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_trace_str(&text)
}

pub fn read_trace_from<R: Read>(mut reader: R) -> Result<MeasurementSet> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::malformed(0, format!("unreadable input: {e}")))?;
    read_trace_str(&text)
}

pub fn read_trace_str(text: &str) -> Result<MeasurementSet> {
    read_trace_with(text, Catalog::builtin())
}

fn parse_uint(field: &str, what: &str, line: usize) -> Result<u64> {
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::malformed(
            line,
            format!("{what} {field:?} is not a nonnegative base-10 integer"),
        ));
    }
    field
        .parse()
        .map_err(|_| Error::malformed(line, format!("{what} {field:?} is out of range")))
}

pub fn read_trace_with(text: &str, catalog: &Catalog) -> Result<MeasurementSet> {
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, TRACE_HEADER)) => {}
        Some((_, other)) if !other.is_empty() => {
            return Err(Error::malformed(1, format!("expected header `{TRACE_HEADER}`, found {other:?}")));
        }
        _ => return Err(Error::malformed(1, "missing header")),
    }

    let mut event_order: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    // (category, run) -> (first line, counts)
    let mut samples: BTreeMap<(String, u64), (usize, BTreeMap<String, u64>)> = BTreeMap::new();
    let mut sample_order: Vec<(String, u64)> = Vec::new();
    let mut resolved: HashMap<String, String> = HashMap::new();
    let mut blank_at: Option<usize> = None;

    for (line_no, line) in lines {
        if line.is_empty() {
            blank_at.get_or_insert(line_no);
            continue;
        }
        if let Some(blank) = blank_at {
            return Err(Error::malformed(blank, "blank line inside trace"));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::malformed(line_no, format!("expected 4 fields, found {}", fields.len())));
        }
        let (category, event, run, count) = (fields[0], fields[1], fields[2], fields[3]);
        validate_category(category).map_err(|e| Error::malformed(line_no, e.to_string()))?;
        let event = match resolved.get(event) {
            Some(e) => e.clone(),
            None => {
                let spec = catalog.resolve(event)?;
                if spec.name != event {
                    return Err(Error::malformed(
                        line_no,
                        format!("event {event:?} is not in canonical form `{}`", spec.name),
                    ));
                }
                resolved.insert(event.to_owned(), spec.name.clone());
                spec.name
            }
        };
        let run = parse_uint(run, "run", line_no)?;
        let count = parse_uint(count, "count", line_no)?;

        if !seen.insert((category.to_owned(), event.clone(), run)) {
            return Err(Error::malformed(
                line_no,
                format!("duplicate row for ({category}, {event}, {run})"),
            ));
        }
        if !event_order.contains(&event) {
            event_order.push(event.clone());
        }
        let key = (category.to_owned(), run);
        let entry = samples.entry(key.clone()).or_insert_with(|| {
            sample_order.push(key);
            (line_no, BTreeMap::new())
        });
        entry.1.insert(event, count);
    }

    if samples.is_empty() {
        return Err(Error::malformed(1, "no samples"));
    }
    let events = catalog.build_event_set(&event_order, event_order.len())?;
    let mut out = Vec::with_capacity(samples.len());
    for key in sample_order {
        let (line, counts) = samples.remove(&key).expect("sample recorded");
        if let Some(missing) = events.names().find(|e| !counts.contains_key(*e)) {
            return Err(Error::malformed(
                line,
                format!("ragged trace: category `{}`, run {} has no `{missing}` row", key.0, key.1),
            ));
        }
        out.push(Sample {
            category: key.0,
            run_index: key.1,
            counts,
        });
    }
    MeasurementSet::new(
        events,
        out,
        Metadata {
            backend: "trace".into(),
            ..Metadata::default()
        },
    )
}

/// Union of two measurement sets over the same events; `b`'s run indices
/// are shifted past `a`'s largest run index for every category both share.
pub fn merge_traces(a: &MeasurementSet, b: &MeasurementSet) -> Result<MeasurementSet> {
    let names = |ms: &MeasurementSet| ms.events().names().map(str::to_owned).collect::<BTreeSet<_>>();
    if names(a) != names(b) {
        return Err(Error::EventSetMismatch {
            left: a.events().names().map(str::to_owned).collect(),
            right: b.events().names().map(str::to_owned).collect(),
        });
    }
    let offsets = a.max_runs();
    let mut samples = a.samples().to_vec();
    samples.extend(b.samples().iter().map(|s| Sample {
        run_index: offsets.get(&s.category).map_or(s.run_index, |m| s.run_index + m + 1),
        ..s.clone()
    }));
    MeasurementSet::new(a.events().clone(), samples, a.metadata.clone())
}
