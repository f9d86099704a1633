use std::collections::BTreeMap;

use super::{Backend, Sample};
use crate::error::{Error, Result};
use crate::events::EventSet;
use crate::workload::{CountStream, WorkloadProfile};

/// Draws counts from per-(category, event) substreams; run `k` of a
/// category receives the `k`-th draw of each of its event streams.
pub(super) struct SyntheticBackend {
    profile: WorkloadProfile,
    streams: BTreeMap<(String, String), CountStream>,
}

impl SyntheticBackend {
    pub(super) fn new(profile: &WorkloadProfile, events: &EventSet) -> Result<Self> {
        profile.validate(crate::events::Catalog::builtin())?;
        let available = profile.event_names();
        if let Some(missing) = events.names().find(|n| !available.iter().any(|a| a == n)) {
            return Err(Error::InvalidTarget(format!(
                "synthetic profile has no model for event `{missing}`"
            )));
        }
        Ok(Self {
            profile: profile.clone(),
            streams: BTreeMap::new(),
        })
    }
}

impl Backend for SyntheticBackend {
    fn id(&self) -> &'static str {
        "synthetic"
    }

    fn measure(&mut self, category: &str, run_index: u64, events: &EventSet) -> Result<Sample> {
        self.profile.category(category)?;
        let mut counts = BTreeMap::new();
        for event in events.names() {
            let key = (category.to_owned(), event.to_owned());
            let stream = match self.streams.get_mut(&key) {
                Some(s) => s,
                None => {
                    let model = self.profile.model(category, event)?;
                    let s = CountStream::new(self.profile.seed, category, event, model)?;
                    self.streams.entry(key).or_insert(s)
                }
            };
            counts.insert(event.to_owned(), stream.next_count());
        }
        Ok(Sample {
            category: category.to_owned(),
            run_index,
            counts,
        })
    }

    fn seed(&self) -> Option<u64> {
        Some(self.profile.seed)
    }
}
