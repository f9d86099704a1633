use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use super::{Backend, MeasurementSet, Sample};
use crate::error::{Error, Result};
use crate::events::EventSet;

/// Serves recorded samples per category in run-index order.
pub(super) struct ReplayBackend {
    queues: BTreeMap<String, VecDeque<Sample>>,
}

impl ReplayBackend {
    pub(super) fn from_path(path: &Path, events: &EventSet) -> Result<Self> {
        let ms = crate::store::read_trace(path)?;
        Self::new(&ms, events)
    }

    pub(super) fn new(ms: &MeasurementSet, events: &EventSet) -> Result<Self> {
        if let Some(missing) = events.names().find(|n| !ms.events().contains(n)) {
            return Err(Error::InvalidTarget(format!("trace has no counts for event `{missing}`")));
        }
        let mut queues: BTreeMap<String, VecDeque<Sample>> = BTreeMap::new();
        for s in ms.sorted_samples() {
            let counts = s
                .counts
                .iter()
                .filter(|(k, _)| events.contains(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect();
            queues.entry(s.category.clone()).or_default().push_back(Sample {
                category: s.category.clone(),
                run_index: s.run_index,
                counts,
            });
        }
        Ok(Self { queues })
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> &'static str {
        "replay"
    }

    fn measure(&mut self, category: &str, _run_index: u64, _events: &EventSet) -> Result<Sample> {
        let queue = self
            .queues
            .get_mut(category)
            .ok_or_else(|| Error::UnknownCategory(category.to_owned()))?;
        queue
            .pop_front()
            .ok_or_else(|| Error::ReplayExhausted(category.to_owned()))
    }
}
