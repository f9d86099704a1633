use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramData {
    /// `frequencies.len() + 1` strictly increasing edges.
    pub bin_edges: Vec<f64>,
    pub frequencies: Vec<u64>,
}

impl HistogramData {
    pub fn total(&self) -> u64 {
        self.frequencies.iter().sum()
    }
}

/// Equal-width histogram over `[min, max]`; the last bin includes `max`.
///
/// A sample whose values are all equal gets a single bin of width 1
/// centred on that value, whatever `bins` says.
pub fn histogram(counts: &[u64], bins: usize) -> Result<HistogramData> {
    if counts.is_empty() {
        return Err(Error::EmptySample);
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let min = *counts.iter().min().expect("non-empty");
    let max = *counts.iter().max().expect("non-empty");
    if min == max {
        let v = min as f64;
        return Ok(HistogramData {
            bin_edges: vec![v - 0.5, v + 0.5],
            frequencies: vec![counts.len() as u64],
        });
    }
    let lo = min as f64;
    let span = (max - min) as f64;
    let bin_edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { max as f64 } else { lo + span * i as f64 / bins as f64 })
        .collect();
    let mut frequencies = vec![0u64; bins];
    for &c in counts {
        // integer offset keeps the index exact for large counts
        let offset = (c - min) as u128;
        let idx = ((offset * bins as u128) / (max - min) as u128) as usize;
        frequencies[idx.min(bins - 1)] += 1;
    }
    Ok(HistogramData { bin_edges, frequencies })
}
