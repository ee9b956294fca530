//! Report files: CSV/JSON tables and plot-ready TSVs. Everything is sorted
//! by (topic_id, period) and written through the atomic-write helper so two
//! runs over identical inputs produce byte-identical trees.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use darkspan_core::lifecycle::{CohortSummary, LifecycleMetrics};
use darkspan_core::timeline::PrevalenceTable;

use crate::stages::atomic_write;
use crate::CliError;

/// One merged topic as it appears in `topics.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicReport {
    pub merged_id: usize,
    pub label: String,
    pub label_source: String,
    pub category: String,
    pub raw_ids: Vec<usize>,
    pub top_terms: Vec<(String, f64)>,
}

/// Quote a CSV field when it contains a comma, quote, or newline.
pub fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') || value.contains('\n') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

pub fn write_prevalence_csv(
    path: &Path,
    table: &PrevalenceTable,
    labels: &[String],
) -> Result<(), CliError> {
    let mut out = String::from("topic_id,label,period,mass,share\n");
    #[allow(clippy::needless_range_loop)] // indexes three parallel tables
    for topic in 0..table.n_topics {
        for period in 0..table.n_periods {
            let _ = writeln!(
                out,
                "{topic},{},{period},{},{}",
                csv_field(&labels[topic]),
                table.mass[topic][period],
                table.share[topic][period],
            );
        }
    }
    atomic_write(path, out.as_bytes()).map_err(|e| CliError::stage("timeline", e))
}

pub fn write_categories_csv(path: &Path, rollup: &[(String, f64)]) -> Result<(), CliError> {
    let mut out = String::from("category,share\n");
    for (category, share) in rollup {
        let _ = writeln!(out, "{},{}", csv_field(category), share);
    }
    atomic_write(path, out.as_bytes()).map_err(|e| CliError::stage("timeline", e))
}

pub fn write_lifecycle_csv(
    path: &Path,
    metrics: &[LifecycleMetrics],
    labels: &[String],
) -> Result<(), CliError> {
    let mut out = String::from(
        "topic_id,label,first_active,peak,last_active,lifespan_periods,lifespan_months,\
         recurrence,growth_slope,decay_slope,peak_to_last_months,class\n",
    );
    for m in metrics {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            m.topic_id,
            csv_field(&labels[m.topic_id]),
            m.first_active,
            m.peak,
            m.last_active,
            m.lifespan_periods,
            m.lifespan_months,
            m.recurrence,
            m.growth_slope,
            m.decay_slope,
            m.peak_to_last_months,
            m.class,
        );
    }
    atomic_write(path, out.as_bytes()).map_err(|e| CliError::stage("lifecycle", e))
}

#[derive(Debug, Serialize)]
struct LifecycleSummaryFile<'a> {
    n_topics: usize,
    n_inactive_topics: usize,
    total_periods: usize,
    #[serde(flatten)]
    cohort: &'a CohortSummary,
}

pub fn write_lifecycle_summary(
    path: &Path,
    cohort: &CohortSummary,
    n_topics: usize,
    n_inactive: usize,
    total_periods: usize,
) -> Result<(), CliError> {
    let file = LifecycleSummaryFile {
        n_topics,
        n_inactive_topics: n_inactive,
        total_periods,
        cohort,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("summary serializes");
    text.push('\n');
    atomic_write(path, text.as_bytes()).map_err(|e| CliError::stage("lifecycle", e))
}

/// Plot-ready TSVs mirroring the analysis figures: per-period stacked
/// shares, the lifespan histogram, growth-vs-decay scatter rows, and
/// recurrence-vs-lifespan rows.
pub fn write_plotdata(
    dir: &Path,
    table: &PrevalenceTable,
    labels: &[String],
    metrics: &[LifecycleMetrics],
) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::stage("lifecycle", e);
    std::fs::create_dir_all(dir).map_err(fail)?;

    let mut stacked = String::from("topic_id\tlabel\tperiod\tshare\n");
    #[allow(clippy::needless_range_loop)] // indexes labels and shares together
    for topic in 0..table.n_topics {
        for period in 0..table.n_periods {
            let _ = writeln!(
                stacked,
                "{topic}\t{}\t{period}\t{}",
                labels[topic], table.share[topic][period]
            );
        }
    }
    atomic_write(&dir.join("stacked_shares.tsv"), stacked.as_bytes()).map_err(fail)?;

    let mut histogram: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for m in metrics {
        *histogram.entry(m.lifespan_months).or_insert(0) += 1;
    }
    let mut hist = String::from("lifespan_months\ttopic_count\n");
    for (months, count) in histogram {
        let _ = writeln!(hist, "{months}\t{count}");
    }
    atomic_write(&dir.join("lifespan_histogram.tsv"), hist.as_bytes()).map_err(fail)?;

    let mut scatter = String::from("topic_id\tlabel\tgrowth_slope\tdecay_slope\n");
    for m in metrics {
        let _ = writeln!(
            scatter,
            "{}\t{}\t{}\t{}",
            m.topic_id, labels[m.topic_id], m.growth_slope, m.decay_slope
        );
    }
    atomic_write(&dir.join("growth_decay.tsv"), scatter.as_bytes()).map_err(fail)?;

    let mut recurrence = String::from("topic_id\tlabel\trecurrence\tlifespan_periods\tclass\n");
    for m in metrics {
        let _ = writeln!(
            recurrence,
            "{}\t{}\t{}\t{}\t{}",
            m.topic_id, labels[m.topic_id], m.recurrence, m.lifespan_periods, m.class
        );
    }
    atomic_write(&dir.join("recurrence_lifespan.tsv"), recurrence.as_bytes()).map_err(fail)
}
