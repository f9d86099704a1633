//! Vocabulary of countable hardware events and validation of requested event sets.
//!
//! The embedded catalog covers the portable subset of events that the Linux
//! `perf` tool exposes on essentially every processor. A catalog can be
//! extended from a small text file with one `name,kind,description` entry
//! per line.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the number of counters most PMUs can program at once.
pub const DEFAULT_MAX_PARALLEL_EVENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Hardware,
    Software,
    Cache,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Hardware => "hardware",
            EventKind::Software => "software",
            EventKind::Cache => "cache",
        })
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hardware" => Ok(EventKind::Hardware),
            "software" => Ok(EventKind::Software),
            "cache" => Ok(EventKind::Cache),
            other => Err(Error::InvalidEventSpec(format!("unknown event kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventSpec {
    pub name: String,
    pub kind: EventKind,
    pub description: String,
}

impl EventSpec {
    pub fn new(name: &str, kind: EventKind, description: &str) -> Result<Self> {
        if !is_canonical_name(name) {
            return Err(Error::InvalidEventSpec(format!(
                "event name {name:?} must be non-empty and match [a-z0-9-]+"
            )));
        }
        Ok(Self {
            name: name.to_owned(),
            kind,
            description: description.to_owned(),
        })
    }
}

fn is_canonical_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

/// An ordered, duplicate-free selection of events counted together in one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSet {
    events: Vec<EventSpec>,
}

impl EventSet {
    pub fn events(&self) -> &[EventSpec] {
        &self.events
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.events.iter().any(|e| e.name == name)
    }

    /// Comma-joined names, the form `perf stat -e` expects.
    pub fn joined(&self) -> String {
        self.names().collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    entries: Vec<EventSpec>,
}

impl Default for Catalog {
    fn default() -> Self {
        use EventKind::*;
        let builtin = [
            ("cache-misses", Cache, "Memory accesses that missed the last-level cache"),
            ("cache-references", Cache, "Memory accesses that reached the last-level cache"),
            ("branches", Hardware, "Retired branch instructions"),
            ("branch-misses", Hardware, "Mispredicted branch instructions"),
            ("instructions", Hardware, "Retired instructions"),
            ("cpu-cycles", Hardware, "Core clock cycles"),
            ("page-faults", Software, "Page faults taken by the process"),
            ("context-switches", Software, "Context switches of the process"),
        ];
        Self {
            entries: builtin
                .iter()
                .map(|(name, kind, desc)| EventSpec::new(name, *kind, desc).expect("builtin event"))
                .collect(),
        }
    }
}

impl Catalog {
    /// Shared instance of the embedded catalog.
    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(Catalog::default)
    }

    pub fn entries(&self) -> &[EventSpec] {
        &self.entries
    }

    pub fn add(&mut self, spec: EventSpec) -> Result<()> {
        if self.entries.iter().any(|e| e.name == spec.name) {
            return Err(Error::DuplicateEvent(spec.name));
        }
        self.entries.push(spec);
        Ok(())
    }

    /// Adds entries from `name,kind,description` lines. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn extend_from_str(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.splitn(3, ',');
            let (Some(name), Some(kind)) = (fields.next(), fields.next()) else {
                return Err(Error::InvalidEventSpec(format!(
                    "line {}: expected `name,kind,description`",
                    idx + 1
                )));
            };
            let description = fields.next().unwrap_or("").trim();
            let spec = EventSpec::new(name.trim(), kind.parse()?, description)
                .map_err(|e| Error::InvalidEventSpec(format!("line {}: {e}", idx + 1)))?;
            self.add(spec)?;
        }
        Ok(())
    }

    /// Looks up an event after trimming and lowercasing the requested name.
    pub fn resolve(&self, name: &str) -> Result<EventSpec> {
        let wanted = name.trim().to_lowercase();
        self.entries
            .iter()
            .find(|e| e.name == wanted)
            .cloned()
            .ok_or_else(|| Error::UnknownEvent(name.trim().to_owned()))
    }

    pub fn build_event_set<S: AsRef<str>>(&self, names: &[S], max_parallel: usize) -> Result<EventSet> {
        if max_parallel == 0 {
            return Err(Error::InvalidArgument("max_parallel must be at least 1".into()));
        }
        if names.is_empty() {
            return Err(Error::EmptyEventSet);
        }
        if names.len() > max_parallel {
            return Err(Error::TooManyEvents {
                requested: names.len(),
                max: max_parallel,
            });
        }
        let mut events: Vec<EventSpec> = Vec::with_capacity(names.len());
        for name in names {
            let spec = self.resolve(name.as_ref())?;
            if events.iter().any(|e| e.name == spec.name) {
                return Err(Error::DuplicateEvent(spec.name));
            }
            events.push(spec);
        }
        Ok(EventSet { events })
    }
}

/// Resolves `name` against the embedded catalog.
pub fn resolve_event(name: &str) -> Result<EventSpec> {
    Catalog::builtin().resolve(name)
}

/// Builds an event set against the embedded catalog.
pub fn build_event_set<S: AsRef<str>>(names: &[S], max_parallel: usize) -> Result<EventSet> {
    Catalog::builtin().build_event_set(names, max_parallel)
}
