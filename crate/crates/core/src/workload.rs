//! Synthetic targets with category-dependent event footprints.
//!
//! Two flavours exist. [`simulate_counts`] draws counts directly from a
//! per-(category, event) normal model and needs no hardware at all.
//! [`run_scripted_workload`] executes a real busy loop whose memory and
//! branch behaviour scales with the profile, so a perf-backed collector
//! has something genuine to measure.

use std::collections::BTreeMap;
use std::hint::black_box;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collector::validate_category;
use crate::error::{Error, Result};
use crate::events::Catalog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventModel {
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryProfile {
    pub category: String,
    pub events: BTreeMap<String, EventModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadProfile {
    pub seed: u64,
    pub categories: Vec<CategoryProfile>,
}

impl WorkloadProfile {
    pub fn from_json(text: &str) -> Result<Self> {
        let profile: WorkloadProfile =
            serde_json::from_str(text).map_err(|e| Error::InvalidProfile(e.to_string()))?;
        profile.validate(Catalog::builtin())?;
        Ok(profile)
    }

    pub fn from_json_with(text: &str, catalog: &Catalog) -> Result<Self> {
        let profile: WorkloadProfile =
            serde_json::from_str(text).map_err(|e| Error::InvalidProfile(e.to_string()))?;
        profile.validate(catalog)?;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("profile serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        let Some(first) = self.categories.first() else {
            return Err(Error::InvalidProfile("profile has no categories".into()));
        };
        if first.events.is_empty() {
            return Err(Error::InvalidProfile("profile has no events".into()));
        }
        for (i, cat) in self.categories.iter().enumerate() {
            validate_category(&cat.category)?;
            if self.categories[..i].iter().any(|c| c.category == cat.category) {
                return Err(Error::InvalidProfile(format!("duplicate category `{}`", cat.category)));
            }
            if !cat.events.keys().eq(first.events.keys()) {
                return Err(Error::InvalidProfile(format!(
                    "category `{}` covers a different event set than `{}`",
                    cat.category, first.category
                )));
            }
            for (name, model) in &cat.events {
                let spec = catalog.resolve(name)?;
                if spec.name != *name {
                    return Err(Error::InvalidProfile(format!(
                        "event `{name}` must be spelled canonically as `{}`",
                        spec.name
                    )));
                }
                let ok = |v: f64| v.is_finite() && v >= 0.0;
                if !ok(model.mean) || !ok(model.stddev) {
                    return Err(Error::InvalidProfile(format!(
                        "category `{}`, event `{name}`: mean and stddev must be finite and nonnegative",
                        cat.category
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn category(&self, label: &str) -> Result<&CategoryProfile> {
        self.categories
            .iter()
            .find(|c| c.category == label)
            .ok_or_else(|| Error::UnknownCategory(label.to_owned()))
    }

    pub fn event_names(&self) -> Vec<String> {
        self.categories
            .first()
            .map(|c| c.events.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn model(&self, category: &str, event: &str) -> Result<EventModel> {
        self.category(category)?
            .events
            .get(event)
            .copied()
            .ok_or_else(|| Error::UnknownEvent(event.to_owned()))
    }
}

/// Deterministic stream of synthetic counts for one (category, event).
#[derive(Debug, Clone)]
pub struct CountStream {
    rng: ChaCha8Rng,
    dist: Normal<f64>,
}

impl CountStream {
    pub fn new(seed: u64, category: &str, event: &str, model: EventModel) -> Result<Self> {
        let dist = Normal::new(model.mean, model.stddev)
            .map_err(|e| Error::InvalidProfile(format!("{category}/{event}: {e}")))?;
        Ok(Self {
            rng: ChaCha8Rng::from_seed(substream_seed(seed, category, event)),
            dist,
        })
    }

    pub fn next_count(&mut self) -> u64 {
        let x = self.dist.sample(&mut self.rng).round();
        // `as` saturates, and clamps NaN to 0
        x.max(0.0) as u64
    }
}

/// Hashes (seed, category, event) into an independent generator seed, so a
/// category's draws never depend on which other categories exist.
fn substream_seed(seed: u64, category: &str, event: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"leakscope-substream-v1");
    h.update(seed.to_le_bytes());
    h.update((category.len() as u64).to_le_bytes());
    h.update(category.as_bytes());
    h.update((event.len() as u64).to_le_bytes());
    h.update(event.as_bytes());
    h.finalize().into()
}

/// The first `n` counts of the (category, event) substream.
pub fn simulate_counts(profile: &WorkloadProfile, category: &str, event: &str, n: usize) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let model = profile.model(category, event)?;
    let mut stream = CountStream::new(profile.seed, category, event, model)?;
    Ok((0..n).map(|_| stream.next_count()).collect())
}

/// Work actually performed by one scripted run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkloadRun {
    pub memory_accesses: u64,
    pub branch_iterations: u64,
    pub checksum: u64,
}

const WALK_BUFFER_BYTES: usize = 64 << 20;
const CACHE_LINE: usize = 64;
// odd stride in cache lines; coprime with the power-of-two line count
const WALK_STRIDE_LINES: usize = 4099;

/// Runs a busy loop shaped by `category`'s profile.
///
/// The cache-miss mean sets the number of strided reads over a 64 MiB
/// buffer (one new cache line per read); the branch mean sets the number of
/// iterations of a data-dependent branch. The mapping is monotone, not
/// calibrated to exact counts.
pub fn run_scripted_workload(profile: &WorkloadProfile, category: &str) -> Result<WorkloadRun> {
    let cat = profile.category(category)?;
    let mean_of = |names: &[&str]| {
        names
            .iter()
            .find_map(|n| cat.events.get(*n))
            .map(|m| m.mean.round().max(0.0) as u64)
            .unwrap_or(0)
    };
    let accesses = mean_of(&["cache-misses", "cache-references"]);
    let branches = mean_of(&["branches", "branch-misses"]);

    let mut checksum = 0u64;
    if accesses > 0 {
        let lines = WALK_BUFFER_BYTES / CACHE_LINE;
        let mut buf = vec![0u8; WALK_BUFFER_BYTES];
        // touch every page so reads do not all hit the shared zero page
        for (i, line) in buf.chunks_mut(CACHE_LINE).enumerate() {
            line[0] = i as u8;
        }
        let mut line = 0usize;
        for _ in 0..accesses {
            checksum = checksum.wrapping_add(black_box(buf[line * CACHE_LINE]) as u64);
            line = (line + WALK_STRIDE_LINES) % lines;
        }
        black_box(&buf);
    }

    let mut state = 0x9e37_79b9_7f4a_7c15u64 ^ profile.seed;
    for _ in 0..branches {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        if black_box(state) & 1 == 0 {
            checksum = checksum.wrapping_add(1);
        } else {
            checksum ^= state;
        }
    }

    Ok(WorkloadRun {
        memory_accesses: accesses,
        branch_iterations: branches,
        checksum: black_box(checksum),
    })
}
