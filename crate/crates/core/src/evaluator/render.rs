//! Human-readable renderings of a report: a plain-text table per event and
//! a markdown table with one row per category pair and one column group per
//! event. Rejected pairs are starred (text) or bold (markdown).

use std::fmt::Write as _;
use std::str::FromStr;

use super::LeakageReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Markdown,
}

impl ReportFormat {
    pub const VALID: &'static str = "text, json, markdown";
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidArgument(format!(
                "unknown report format `{other}` (valid formats: {})",
                Self::VALID
            ))),
        }
    }
}

/// p-values below table precision print as `≈0`.
pub fn format_p(p: f64) -> String {
    if p < 5e-5 {
        "≈0".to_owned()
    } else {
        format!("{p:.4}")
    }
}

pub fn format_t(t: f64) -> String {
    if t == f64::INFINITY {
        "+inf".to_owned()
    } else if t == f64::NEG_INFINITY {
        "-inf".to_owned()
    } else {
        format!("{t:.4}")
    }
}

fn alarm_line(report: &LeakageReport) -> String {
    if report.alarm {
        format!(
            "ALARM: input-dependent leakage detected ({} distinguishable pairs)",
            report.distinguishable_count()
        )
    } else {
        "OK: no input-dependent leakage detected".to_owned()
    }
}

fn pair_label(a: &str, b: &str) -> String {
    format!("t({a},{b})")
}

pub fn render_report(report: &LeakageReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => report.to_json().into_bytes(),
        ReportFormat::Text => render_text(report).into_bytes(),
        ReportFormat::Markdown => render_markdown(report).into_bytes(),
    }
}

fn render_text(report: &LeakageReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "leakage report");
    let _ = writeln!(out, "alpha: {} (correction: {})", report.alpha, report.correction);
    let _ = writeln!(out, "categories: {}", report.categories.join(", "));
    let _ = writeln!(out, "events: {}", report.events.join(", "));

    if !report.summaries.is_empty() {
        let _ = writeln!(out, "\nper-category means");
        let width = report.categories.iter().map(String::len).max().unwrap_or(0).max(8);
        let mut header = format!("  {:<width$}", "category");
        for e in &report.events {
            let _ = write!(header, "  {:>16}", e);
        }
        let _ = writeln!(out, "{header}");
        for c in &report.categories {
            let mut row = format!("  {c:<width$}");
            for e in &report.events {
                let cell = report.summary(c, e).map_or("-".to_owned(), |s| format!("{:.2}", s.mean));
                let _ = write!(row, "  {cell:>16}");
            }
            let _ = writeln!(out, "{row}");
        }
    }

    for (event, alarm) in report.event_alarms() {
        let pairs: Vec<_> = report.pairs.iter().filter(|p| p.event == event).collect();
        let hits = pairs.iter().filter(|p| p.result.reject).count();
        let _ = writeln!(
            out,
            "\n{event}: {hits} of {} pairs distinguishable{}",
            pairs.len(),
            if alarm { " [leak]" } else { "" }
        );
        let width = pairs
            .iter()
            .map(|p| pair_label(&p.category_a, &p.category_b).len())
            .max()
            .unwrap_or(0)
            .max(4);
        let _ = writeln!(out, "  {:<width$}  {:>12}  {:>10}  {:>8}", "pair", "t", "df", "p");
        for p in pairs {
            let df = p.result.df.map_or("-".to_owned(), |d| format!("{d:.2}"));
            let _ = writeln!(
                out,
                "  {:<width$}  {:>12}  {:>10}  {:>8}{}",
                pair_label(&p.category_a, &p.category_b),
                format_t(p.result.t),
                df,
                format_p(p.result.p),
                if p.result.reject { "  *" } else { "" }
            );
        }
    }
    let _ = writeln!(out, "\n* distinguishable at the effective significance level");
    let _ = writeln!(out, "{}", alarm_line(report));
    out
}

fn render_markdown(report: &LeakageReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "## Leakage report\n");
    let _ = writeln!(
        out,
        "alpha = {}, correction = {}, categories = {}\n",
        report.alpha,
        report.correction,
        report.categories.join(", ")
    );

    let mut header = String::from("| pair |");
    let mut rule = String::from("|---|");
    for e in &report.events {
        let _ = write!(header, " {e} t | {e} p |");
        rule.push_str("---:|---:|");
    }
    let _ = writeln!(out, "{header}\n{rule}");

    // rows in first-appearance order of the pair, across events
    let mut rows: Vec<(&str, &str)> = Vec::new();
    for p in &report.pairs {
        let key = (p.category_a.as_str(), p.category_b.as_str());
        if !rows.contains(&key) {
            rows.push(key);
        }
    }
    for (a, b) in rows {
        let mut line = format!("| {} |", pair_label(a, b));
        for e in &report.events {
            match report.pair(e, a, b) {
                Some(p) => {
                    let (t, pv) = (format_t(p.result.t), format_p(p.result.p));
                    if p.result.reject {
                        let _ = write!(line, " **{t}** | **{pv}** |");
                    } else {
                        let _ = write!(line, " {t} | {pv} |");
                    }
                }
                None => line.push_str(" - | - |"),
            }
        }
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "\nBold: the two categories are distinguishable.");

    if !report.summaries.is_empty() {
        let _ = writeln!(out, "\n### Per-category means\n");
        let mut header = String::from("| category |");
        let mut rule = String::from("|---|");
        for e in &report.events {
            let _ = write!(header, " {e} |");
            rule.push_str("---:|");
        }
        let _ = writeln!(out, "{header}\n{rule}");
        for c in &report.categories {
            let mut line = format!("| {c} |");
            for e in &report.events {
                let cell = report.summary(c, e).map_or("-".to_owned(), |s| format!("{:.2}", s.mean));
                let _ = write!(line, " {cell} |");
            }
            let _ = writeln!(out, "{line}");
        }
    }
    let _ = writeln!(out, "\n**{}**", alarm_line(report));
    out
}
