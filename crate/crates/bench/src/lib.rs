//! Shared inputs for the criterion benchmarks.

use leakscope::{CategoryProfile, EventModel, WorkloadProfile};

/// `categories` categories over cache-misses and branches with slowly
/// increasing means.
pub fn bench_profile(categories: usize, seed: u64) -> WorkloadProfile {
    WorkloadProfile {
        seed,
        categories: (0..categories)
            .map(|i| CategoryProfile {
                category: format!("c{i:02}"),
                events: [
                    ("cache-misses".to_string(), EventModel { mean: 70_000.0 + 250.0 * i as f64, stddev: 1_500.0 }),
                    ("branches".to_string(), EventModel { mean: 1.0e6, stddev: 4_000.0 }),
                ]
                .into_iter()
                .collect(),
            })
            .collect(),
    }
}
