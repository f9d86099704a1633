//! Pairwise leakage evaluation over a measurement set.
//!
//! For every event and every unordered pair of categories the two count
//! distributions are compared with a Welch t-test. The report records the
//! full pairwise matrix, per-category summaries and histograms, and raises
//! the alarm as soon as a single pair is distinguishable.

mod histogram;
mod json;
mod render;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::collector::MeasurementSet;
use crate::error::{Error, Result};
use crate::stats::{self, check_alpha, SummaryStats, TTestResult};

pub use histogram::{histogram, HistogramData, DEFAULT_BINS};
pub use render::{format_p, format_t, render_report, ReportFormat};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    #[default]
    None,
    /// Divides alpha by the number of category pairs tested per event.
    Bonferroni,
}

impl Correction {
    pub fn effective_alpha(self, alpha: f64, categories: usize) -> f64 {
        match self {
            Correction::None => alpha,
            Correction::Bonferroni => {
                let pairs = categories * categories.saturating_sub(1) / 2;
                alpha / pairs.max(1) as f64
            }
        }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correction::None => "none",
            Correction::Bonferroni => "bonferroni",
        })
    }
}

impl FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Correction::None),
            "bonferroni" => Ok(Correction::Bonferroni),
            other => Err(Error::InvalidArgument(format!(
                "unknown correction `{other}` (expected none or bonferroni)"
            ))),
        }
    }
}

/// One test between two categories; `t` is signed as mean(a) − mean(b).
#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub event: String,
    pub category_a: String,
    pub category_b: String,
    pub result: TTestResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategorySummary {
    pub category: String,
    pub event: String,
    pub stats: SummaryStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryHistogram {
    pub category: String,
    pub event: String,
    pub histogram: HistogramData,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub backend: Option<String>,
    pub seed: Option<u64>,
    pub source: Option<String>,
    pub trace_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageReport {
    pub alpha: f64,
    pub correction: Correction,
    pub events: Vec<String>,
    pub categories: Vec<String>,
    pub summaries: Vec<CategorySummary>,
    pub pairs: Vec<PairResult>,
    pub alarm: bool,
    pub histograms: Vec<CategoryHistogram>,
    pub metadata: ReportMetadata,
}

impl LeakageReport {
    /// Pairs whose null hypothesis was rejected, in report order.
    pub fn distinguishable(&self) -> impl Iterator<Item = &PairResult> {
        self.pairs.iter().filter(|p| p.result.reject)
    }

    pub fn distinguishable_count(&self) -> usize {
        self.distinguishable().count()
    }

    /// Per-event alarms, in event order.
    pub fn event_alarms(&self) -> Vec<(String, bool)> {
        self.events
            .iter()
            .map(|e| (e.clone(), self.pairs.iter().any(|p| &p.event == e && p.result.reject)))
            .collect()
    }

    pub fn summary(&self, category: &str, event: &str) -> Option<&SummaryStats> {
        self.summaries
            .iter()
            .find(|s| s.category == category && s.event == event)
            .map(|s| &s.stats)
    }

    pub fn pair(&self, event: &str, a: &str, b: &str) -> Option<&PairResult> {
        self.pairs
            .iter()
            .find(|p| p.event == event && p.category_a == a && p.category_b == b)
    }

    /// Builds a report from externally reported `(event, a, b, t, p)` values,
    /// e.g. a results table from elsewhere. Summaries and histograms stay empty.
    pub fn from_reported<S: AsRef<str>>(
        alpha: f64,
        correction: Correction,
        entries: &[(S, S, S, f64, f64)],
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let mut events: Vec<String> = Vec::new();
        let mut categories: Vec<String> = Vec::new();
        for (e, a, b, _, _) in entries {
            if !events.iter().any(|x| x == e.as_ref()) {
                events.push(e.as_ref().to_owned());
            }
            for c in [a.as_ref(), b.as_ref()] {
                if !categories.iter().any(|x| x == c) {
                    categories.push(c.to_owned());
                }
            }
        }
        categories.sort();
        let effective = correction.effective_alpha(alpha, categories.len());
        let mut pairs = Vec::with_capacity(entries.len());
        for (e, a, b, t, p) in entries {
            let (a, b, t) = canonical_pair(a.as_ref(), b.as_ref(), *t)?;
            pairs.push(PairResult {
                event: e.as_ref().to_owned(),
                category_a: a,
                category_b: b,
                result: TTestResult::from_reported(t, None, *p, effective)?,
            });
        }
        let alarm = pairs.iter().any(|p| p.result.reject);
        Ok(Self {
            alpha,
            correction,
            events,
            categories,
            summaries: vec![],
            pairs,
            alarm,
            histograms: vec![],
            metadata: ReportMetadata {
                tool_version: crate::TOOL_VERSION.to_owned(),
                backend: Some("reported".into()),
                ..ReportMetadata::default()
            },
        })
    }

    /// Records where the analysed trace came from and its SHA-256.
    pub fn set_source(&mut self, name: &str, trace_bytes: &[u8]) {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(trace_bytes);
        self.metadata.source = Some(name.to_owned());
        self.metadata.trace_sha256 = Some(digest.iter().map(|b| format!("{b:02x}")).collect());
    }

    pub fn to_json(&self) -> String {
        json::to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        json::from_json(text)
    }

    /// Checks the structural invariants tying pairs, alarm and categories together.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedReport(m));
        check_alpha(self.alpha).map_err(|e| Error::MalformedReport(e.to_string()))?;
        let k = self.categories.len();
        let expected = self.events.len() * k * k.saturating_sub(1) / 2;
        if self.pairs.len() != expected {
            return bad(format!(
                "expected {expected} pairs for {} events and {k} categories, found {}",
                self.events.len(),
                self.pairs.len()
            ));
        }
        for p in &self.pairs {
            if p.category_a >= p.category_b {
                return bad(format!("pair ({}, {}) is not in canonical order", p.category_a, p.category_b));
            }
            if !self.events.contains(&p.event) {
                return bad(format!("pair refers to unknown event `{}`", p.event));
            }
            if !(0.0..=1.0).contains(&p.result.p) {
                return bad(format!("p-value {} outside [0, 1]", p.result.p));
            }
            if p.result.reject != (p.result.p < p.result.alpha) {
                return bad(format!(
                    "pair ({}, {}, {}) has reject={} but p={} and alpha={}",
                    p.event, p.category_a, p.category_b, p.result.reject, p.result.p, p.result.alpha
                ));
            }
        }
        if self.alarm != self.pairs.iter().any(|p| p.result.reject) {
            return bad("alarm flag disagrees with the pairwise decisions".into());
        }
        Ok(())
    }
}

fn canonical_pair(a: &str, b: &str, t: f64) -> Result<(String, String, f64)> {
    match a.cmp(b) {
        std::cmp::Ordering::Less => Ok((a.to_owned(), b.to_owned(), t)),
        std::cmp::Ordering::Greater => Ok((b.to_owned(), a.to_owned(), -t)),
        std::cmp::Ordering::Equal => Err(Error::InvalidArgument(format!("pair compares `{a}` with itself"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluateOptions {
    pub alpha: f64,
    pub correction: Correction,
    pub bins: usize,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            alpha: stats::DEFAULT_ALPHA,
            correction: Correction::None,
            bins: DEFAULT_BINS,
        }
    }
}

pub fn evaluate(ms: &MeasurementSet, alpha: f64, correction: Correction) -> Result<LeakageReport> {
    evaluate_with(
        ms,
        &EvaluateOptions {
            alpha,
            correction,
            ..EvaluateOptions::default()
        },
    )
}

pub fn evaluate_with(ms: &MeasurementSet, options: &EvaluateOptions) -> Result<LeakageReport> {
    check_alpha(options.alpha)?;
    if options.bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let categories = ms.categories();
    if categories.len() < 2 {
        return Err(Error::InsufficientCategories(categories.len()));
    }
    let events: Vec<String> = ms.events().names().map(str::to_owned).collect();

    let mut counts: BTreeMap<(&str, &str), Vec<u64>> = BTreeMap::new();
    for c in &categories {
        for e in &events {
            let xs = ms.counts(c, e);
            if xs.len() < 2 {
                return Err(Error::InsufficientSamples(format!(
                    "category `{c}`, event `{e}` has {} sample(s); at least 2 are needed",
                    xs.len()
                )));
            }
            counts.insert((c.as_str(), e.as_str()), xs);
        }
    }

    let mut summaries = Vec::with_capacity(counts.len());
    let mut histograms = Vec::with_capacity(counts.len());
    for c in &categories {
        for e in &events {
            let xs = &counts[&(c.as_str(), e.as_str())];
            summaries.push(CategorySummary {
                category: c.clone(),
                event: e.clone(),
                stats: stats::summarize(xs)?,
            });
            histograms.push(CategoryHistogram {
                category: c.clone(),
                event: e.clone(),
                histogram: histogram(xs, options.bins)?,
            });
        }
    }

    let effective = options.correction.effective_alpha(options.alpha, categories.len());
    let mut pairs = Vec::new();
    for e in &events {
        for (i, a) in categories.iter().enumerate() {
            for b in &categories[i + 1..] {
                let sa = summary_of(&summaries, a, e);
                let sb = summary_of(&summaries, b, e);
                pairs.push(PairResult {
                    event: e.clone(),
                    category_a: a.clone(),
                    category_b: b.clone(),
                    result: stats::t_test_from_summaries(sa, sb, effective)?,
                });
            }
        }
    }
    let alarm = pairs.iter().any(|p| p.result.reject);

    Ok(LeakageReport {
        alpha: options.alpha,
        correction: options.correction,
        events,
        categories,
        summaries,
        pairs,
        alarm,
        histograms,
        metadata: ReportMetadata {
            tool_version: crate::TOOL_VERSION.to_owned(),
            backend: Some(ms.metadata.backend.clone()).filter(|b| !b.is_empty()),
            seed: ms.metadata.seed,
            source: None,
            trace_sha256: None,
        },
    })
}

fn summary_of<'a>(summaries: &'a [CategorySummary], category: &str, event: &str) -> &'a SummaryStats {
    &summaries
        .iter()
        .find(|s| s.category == category && s.event == event)
        .expect("summary computed for every (category, event)")
        .stats
}

/// Reject flags keyed by `(event, category_a, category_b)`.
pub fn decision_pattern(report: &LeakageReport) -> BTreeMap<(String, String, String), bool> {
    report
        .pairs
        .iter()
        .map(|p| {
            (
                (p.event.clone(), p.category_a.clone(), p.category_b.clone()),
                p.result.reject,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collector::{collect, open_session, Metadata, Sample, TargetSpec};
    use crate::events::build_event_set;
    use crate::workload::{CategoryProfile, EventModel, WorkloadProfile};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn profile(seed: u64, means: &[(&str, f64, f64)], stddev: f64) -> WorkloadProfile {
        WorkloadProfile {
            seed,
            categories: means
                .iter()
                .map(|(label, cm, br)| CategoryProfile {
                    category: label.to_string(),
                    events: [
                        ("cache-misses".to_string(), EventModel { mean: *cm, stddev }),
                        ("branches".to_string(), EventModel { mean: *br, stddev }),
                    ]
                    .into_iter()
                    .collect(),
                })
                .collect(),
        }
    }

    fn simulate(p: &WorkloadProfile, runs: usize) -> MeasurementSet {
        let ev = build_event_set(&["cache-misses", "branches"], 8).unwrap();
        let mut s = open_session(&TargetSpec::Synthetic { profile: p.clone() }, &ev).unwrap();
        let plan: Vec<(String, usize)> = p.categories.iter().map(|c| (c.category.clone(), runs)).collect();
        collect(&mut s, &plan).unwrap()
    }

    #[test]
    fn four_categories_two_events_give_twelve_pairs() {
        let p = profile(
            1,
            &[("1", 70e3, 1e6), ("2", 71e3, 1e6), ("3", 72e3, 1e6), ("4", 73e3, 1e6)],
            1500.0,
        );
        let r = evaluate(&simulate(&p, 20), 0.05, Correction::None).unwrap();
        assert_eq!(r.pairs.len(), 12);
        assert_eq!(r.summaries.len(), 8);
        assert_eq!(r.histograms.len(), 8);
        r.validate().unwrap();
        for h in &r.histograms {
            assert_eq!(h.histogram.total(), 20);
            assert_eq!(h.histogram.frequencies.len(), DEFAULT_BINS);
        }
    }

    #[test]
    fn identical_profiles_fixed_seed_no_alarm() {
        // seed 3 checked to give p >= 0.05 on both events
        let p = profile(3, &[("a", 70e3, 1e6), ("b", 70e3, 1e6)], 1500.0);
        let r = evaluate(&simulate(&p, 100), 0.05, Correction::None).unwrap();
        assert!(r.pairs.iter().all(|x| x.result.p >= 0.05), "{:?}", r.pairs);
        assert!(!r.alarm);
        assert_eq!(r.distinguishable_count(), 0);
    }

    #[test]
    fn separated_means_raise_alarm() {
        let p = profile(3, &[("a", 70e3, 1e6), ("b", 76e3, 1e6)], 1500.0);
        let r = evaluate(&simulate(&p, 100), 0.05, Correction::None).unwrap();
        let cm = r.pair("cache-misses", "a", "b").unwrap();
        // expected |t| = 6000 / (1500 * sqrt(2/100)) ~ 28.3
        assert!(cm.result.reject);
        assert!(cm.result.t < -20.0 && cm.result.t > -37.0, "t = {}", cm.result.t);
        assert!(r.alarm);
        let alarms = r.event_alarms();
        assert_eq!(alarms[0], ("cache-misses".to_string(), true));
    }

    #[test]
    fn sign_follows_category_a_first() {
        let p = profile(3, &[("b", 70e3, 1e6), ("a", 76e3, 1e6)], 10.0);
        let r = evaluate(&simulate(&p, 10), 0.05, Correction::None).unwrap();
        assert!(r.pair("cache-misses", "a", "b").unwrap().result.t > 0.0);
    }

    #[test]
    fn preconditions() {
        let p = profile(1, &[("a", 1e3, 1e3)], 10.0);
        assert!(matches!(
            evaluate(&simulate(&p, 5), 0.05, Correction::None),
            Err(Error::InsufficientCategories(1))
        ));
        let p = profile(1, &[("a", 1e3, 1e3), ("b", 1e3, 1e3)], 10.0);
        let err = evaluate(&simulate(&p, 1), 0.05, Correction::None).unwrap_err();
        assert!(matches!(&err, Error::InsufficientSamples(m) if m.contains("category `a`")));
        assert!(matches!(
            evaluate(&simulate(&p, 5), 1.5, Correction::None),
            Err(Error::InvalidAlpha(_))
        ));
    }

    #[test]
    fn bonferroni_divides_alpha_per_event() {
        let p = profile(1, &[("1", 1e3, 1e3), ("2", 1e3, 1e3), ("3", 1e3, 1e3), ("4", 1e3, 1e3)], 10.0);
        let r = evaluate(&simulate(&p, 5), 0.06, Correction::Bonferroni).unwrap();
        for pair in &r.pairs {
            assert_abs_diff_eq!(pair.result.alpha, 0.01, epsilon = 1e-15);
        }
        assert_eq!(r.alpha, 0.06);
    }

    #[test]
    fn degenerate_constant_categories() {
        let ev = build_event_set(&["page-faults"], 8).unwrap();
        let mk = |c: &str, r: u64, v: u64| {
            Sample::new(c, r, [("page-faults".to_string(), v)].into(), &ev).unwrap()
        };
        let ms = MeasurementSet::new(
            ev.clone(),
            vec![mk("a", 0, 7), mk("a", 1, 7), mk("b", 0, 9), mk("b", 1, 9), mk("c", 0, 7), mk("c", 1, 7)],
            Metadata::default(),
        )
        .unwrap();
        let r = evaluate(&ms, 0.05, Correction::None).unwrap();
        assert!(r.pair("page-faults", "a", "b").unwrap().result.reject);
        assert!(!r.pair("page-faults", "a", "c").unwrap().result.reject);
        assert_eq!(r.distinguishable_count(), 2);
        r.validate().unwrap();
    }

    fn table1() -> Vec<(&'static str, &'static str, &'static str, f64, f64)> {
        // cache-misses "≈0" entries entered as 0
        vec![
            ("cache-misses", "1", "2", -21.8166, 0.0),
            ("cache-misses", "1", "3", -25.7566, 0.0),
            ("cache-misses", "1", "4", 2.5334, 0.0113),
            ("cache-misses", "2", "3", 40.5268, 0.0),
            ("cache-misses", "2", "4", 22.6505, 0.0),
            ("cache-misses", "3", "4", -20.9758, 0.0),
            ("branches", "1", "2", 0.4303, 0.6669),
            ("branches", "1", "3", 1.6565, 0.0977),
            ("branches", "1", "4", 0.9537, 0.3403),
            ("branches", "2", "3", -2.0064, 0.0449),
            ("branches", "2", "4", 0.4941, 0.6212),
            ("branches", "3", "4", 2.5435, 0.0110),
        ]
    }

    #[test]
    fn decision_pattern_of_reported_table() {
        let r = LeakageReport::from_reported(0.05, Correction::None, &table1()).unwrap();
        r.validate().unwrap();
        let pattern = decision_pattern(&r);
        assert_eq!(pattern.len(), 12);
        let rejected: Vec<_> = pattern.iter().filter(|(_, &v)| v).map(|(k, _)| k.clone()).collect();
        assert_eq!(rejected.len(), 8);
        assert!(pattern[&("branches".into(), "2".into(), "3".into())]);
        assert!(pattern[&("branches".into(), "3".into(), "4".into())]);
        assert!(!pattern[&("branches".into(), "1".into(), "3".into())]);
    }

    #[test]
    fn empty_distinguishable_gives_all_false() {
        let entries = [("branches", "a", "b", 0.1, 0.9), ("branches", "a", "c", -0.2, 0.8), ("branches", "b", "c", 0.0, 1.0)];
        let r = LeakageReport::from_reported(0.05, Correction::None, &entries).unwrap();
        assert!(decision_pattern(&r).values().all(|v| !v));
        assert!(!r.alarm);
    }

    #[test]
    fn reported_pairs_are_canonicalized() {
        let r = LeakageReport::from_reported(0.05, Correction::None, &[("branches", "b", "a", 2.0, 0.04)]).unwrap();
        let p = &r.pairs[0];
        assert_eq!((p.category_a.as_str(), p.category_b.as_str(), p.result.t), ("a", "b", -2.0));
        assert!(LeakageReport::from_reported(0.05, Correction::None, &[("branches", "a", "a", 2.0, 0.04)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn bonferroni_rejections_subset_of_raw(seed in any::<u64>(), shift in 0.0f64..3000.0, alpha in 0.001f64..0.3) {
            let p = profile(seed, &[("a", 70e3, 1e6), ("b", 70e3 + shift, 1e6 + shift), ("c", 70e3, 1e6 - shift)], 1500.0);
            let ms = simulate(&p, 12);
            let raw = evaluate(&ms, alpha, Correction::None).unwrap();
            let bon = evaluate(&ms, alpha, Correction::Bonferroni).unwrap();
            for (r, b) in raw.pairs.iter().zip(&bon.pairs) {
                prop_assert!(!b.result.reject || r.result.reject);
            }
        }

        #[test]
        fn alarm_monotone_in_alpha(seed in any::<u64>(), shift in 0.0f64..2000.0, a1 in 0.001f64..0.5, a2 in 0.001f64..0.5) {
            let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
            let p = profile(seed, &[("a", 70e3, 1e6), ("b", 70e3 + shift, 1e6)], 1500.0);
            let ms = simulate(&p, 10);
            let at_hi = evaluate(&ms, hi, Correction::None).unwrap();
            let at_lo = evaluate(&ms, lo, Correction::None).unwrap();
            prop_assert!(at_hi.alarm || !at_lo.alarm);
        }

        #[test]
        fn relabeling_preserves_statistics(seed in any::<u64>(), shift in 0.0f64..3000.0) {
            let p = profile(seed, &[("a", 70e3, 1e6), ("b", 70e3 + shift, 1e6), ("c", 70e3 - shift, 1e6 + shift)], 900.0);
            let ms = simulate(&p, 8);
            let rename = |c: &str| match c { "a" => "z", "b" => "m", other => other }.to_string();
            let (ev, samples, meta) = ms.clone().into_parts();
            let renamed: Vec<Sample> = samples.into_iter().map(|s| Sample { category: rename(&s.category), ..s }).collect();
            let ms2 = MeasurementSet::new(ev, renamed, meta).unwrap();
            let r1 = evaluate(&ms, 0.05, Correction::None).unwrap();
            let r2 = evaluate(&ms2, 0.05, Correction::None).unwrap();
            prop_assert_eq!(r1.alarm, r2.alarm);
            for p1 in &r1.pairs {
                let (a, b) = (rename(&p1.category_a), rename(&p1.category_b));
                let (p2, flipped) = match r2.pair(&p1.event, &a, &b) {
                    Some(p) => (p, false),
                    None => (r2.pair(&p1.event, &b, &a).unwrap(), true),
                };
                let t2 = if flipped { -p2.result.t } else { p2.result.t };
                prop_assert_eq!(p1.result.t, t2);
                prop_assert_eq!(p1.result.df, p2.result.df);
                prop_assert_eq!(p1.result.p, p2.result.p);
                prop_assert_eq!(p1.result.reject, p2.result.reject);
            }
        }

        #[test]
        fn dropping_an_event_keeps_other_decisions(seed in any::<u64>(), shift in 0.0f64..3000.0) {
            let p = profile(seed, &[("a", 70e3, 1e6), ("b", 70e3 + shift, 1e6 + shift)], 1500.0);
            let ms = simulate(&p, 10);
            let full = evaluate(&ms, 0.05, Correction::None).unwrap();
            let only = ms.restrict_events(&build_event_set(&["branches"], 8).unwrap()).unwrap();
            let part = evaluate(&only, 0.05, Correction::None).unwrap();
            prop_assert_eq!(part.pairs.len(), 1);
            prop_assert!(part.pairs.iter().all(|p| p.event == "branches"));
            let before: Vec<_> = full.pairs.iter().filter(|p| p.event == "branches").cloned().collect();
            prop_assert_eq!(before, part.pairs);
        }
    }
}
