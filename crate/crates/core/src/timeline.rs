//! Quarterly bucketing and topic-prevalence aggregation, plus concentration
//! indicators and category rollups.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A calendar quarter counted from the configured epoch (default 2020-Q1).
/// One period is one quarter, i.e. three months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Period(pub usize);

pub const MONTHS_PER_PERIOD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Epoch {
    pub year: i32,
    /// 1-based quarter within the year.
    pub quarter: u32,
}

impl Default for Epoch {
    fn default() -> Self {
        Epoch {
            year: 2020,
            quarter: 1,
        }
    }
}

impl Epoch {
    /// Parse "2020-Q1" style epoch strings.
    pub fn parse(text: &str) -> Option<Epoch> {
        let (year, quarter) = text.trim().split_once("-Q")?;
        let year: i32 = year.parse().ok()?;
        let quarter: u32 = quarter.parse().ok()?;
        (1..=4).contains(&quarter).then_some(Epoch { year, quarter })
    }
}

impl std::fmt::Display for Epoch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-Q{}", self.year, self.quarter)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("timestamp {timestamp} predates the configured epoch {epoch}")]
pub struct PreEpochTimestamp {
    pub timestamp: DateTime<Utc>,
    pub epoch: Epoch,
}

/// Quarterly period index of a UTC timestamp relative to the epoch.
pub fn bucket(timestamp: DateTime<Utc>, epoch: Epoch) -> Result<Period, PreEpochTimestamp> {
    let quarter_abs = i64::from(timestamp.year()) * 4 + i64::from((timestamp.month() - 1) / 3);
    let epoch_abs = i64::from(epoch.year) * 4 + i64::from(epoch.quarter - 1);
    let index = quarter_abs - epoch_abs;
    if index < 0 {
        Err(PreEpochTimestamp { timestamp, epoch })
    } else {
        Ok(Period(index as usize))
    }
}

impl Period {
    /// Calendar (year, quarter) of this period under `epoch`.
    pub fn calendar(self, epoch: Epoch) -> (i32, u32) {
        let abs = i64::from(epoch.year) * 4 + i64::from(epoch.quarter - 1) + self.0 as i64;
        (
            (abs.div_euclid(4)) as i32,
            (abs.rem_euclid(4) + 1) as u32,
        )
    }
}

/// One document's merged topic distribution plus outlier mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocDistribution {
    pub snapshot_id: String,
    /// topic id → probability; omitted topics have zero mass.
    pub probabilities: BTreeMap<usize, f64>,
    pub outlier_mass: f64,
}

impl DocDistribution {
    pub fn total_mass(&self) -> f64 {
        self.probabilities.values().sum::<f64>() + self.outlier_mass
    }
}

/// Per-(topic, period) probability mass with per-period and global shares.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrevalenceTable {
    pub n_topics: usize,
    pub n_periods: usize,
    /// mass[topic][period]
    pub mass: Vec<Vec<f64>>,
    /// Per-period column-normalized mass over topics (outliers excluded from
    /// the denominator); all-zero columns stay zero and are flagged empty.
    pub share: Vec<Vec<f64>>,
    pub outlier_mass: Vec<f64>,
    /// Per-topic total mass over the grand total (outliers included in the
    /// denominator), so the topic values sum to ≤ 1.
    pub global_share: Vec<f64>,
    pub empty_periods: Vec<usize>,
}

impl PrevalenceTable {
    pub fn grand_total(&self) -> f64 {
        let topic_mass: f64 = self.mass.iter().flatten().sum();
        topic_mass + self.outlier_mass.iter().sum::<f64>()
    }

    /// Per-period share series for one topic (lifecycle input).
    pub fn topic_series(&self, topic: usize) -> &[f64] {
        &self.share[topic]
    }
}

/// Aggregate merged distributions into per-(topic, period) mass. All
/// snapshots of a website within a period contribute; `n_periods` spans
/// period 0 through the latest observed period.
pub fn aggregate_prevalence(
    docs: &[(DocDistribution, Period)],
    n_topics: usize,
    include_outliers_in_denominator: bool,
) -> PrevalenceTable {
    let n_periods = docs.iter().map(|(_, p)| p.0 + 1).max().unwrap_or(0);
    let mut mass = vec![vec![0.0f64; n_periods]; n_topics];
    let mut outlier_mass = vec![0.0f64; n_periods];
    for (doc, period) in docs {
        for (&topic, &p) in &doc.probabilities {
            mass[topic][period.0] += p;
        }
        outlier_mass[period.0] += doc.outlier_mass;
    }

    let mut share = vec![vec![0.0f64; n_periods]; n_topics];
    let mut empty_periods = Vec::new();
    for p in 0..n_periods {
        let topic_total: f64 = (0..n_topics).map(|t| mass[t][p]).sum();
        let denom = if include_outliers_in_denominator {
            topic_total + outlier_mass[p]
        } else {
            topic_total
        };
        if denom > 0.0 {
            for t in 0..n_topics {
                share[t][p] = mass[t][p] / denom;
            }
        } else {
            empty_periods.push(p);
        }
    }

    let grand_total: f64 = mass.iter().flatten().sum::<f64>() + outlier_mass.iter().sum::<f64>();
    let global_share = (0..n_topics)
        .map(|t| {
            if grand_total > 0.0 {
                mass[t].iter().sum::<f64>() / grand_total
            } else {
                0.0
            }
        })
        .collect();

    PrevalenceTable {
        n_topics,
        n_periods,
        mass,
        share,
        outlier_mass,
        global_share,
        empty_periods,
    }
}

/// Concentration indicators over global shares renormalized to exclude the
/// outlier bucket. Topics are ranked by share descending, ties by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub top_5_share: f64,
    pub top_10_share: f64,
    pub top_20_share: f64,
    pub min_topics_for_50: usize,
    pub min_topics_for_75: usize,
}

pub fn concentration(global_share: &[f64]) -> Concentration {
    let total: f64 = global_share.iter().sum();
    let mut ranked: Vec<(usize, f64)> = global_share
        .iter()
        .enumerate()
        .map(|(id, &s)| (id, if total > 0.0 { s / total } else { 0.0 }))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let top_k = |k: usize| ranked.iter().take(k).map(|(_, s)| s).sum::<f64>();
    let min_topics_for = |fraction: f64| {
        let mut cumulative = 0.0;
        for (count, (_, s)) in ranked.iter().enumerate() {
            cumulative += s;
            if cumulative >= fraction {
                return count + 1;
            }
        }
        ranked.len()
    };

    Concentration {
        top_5_share: top_k(5),
        top_10_share: top_k(10),
        top_20_share: top_k(20),
        min_topics_for_50: min_topics_for(0.5),
        min_topics_for_75: min_topics_for(0.75),
    }
}

/// The four fixed categories plus the fallback for unmapped topics.
pub const CATEGORY_ORDER: &[&str] = &[
    "Transactional",
    "Products",
    "Infrastructure",
    "Community",
    "Uncategorized",
];

/// Sum member-topic shares per category. `category_of` maps a topic's label
/// to its category; topics without a mapping land in "Uncategorized".
/// Categories come back in fixed order with zero-share categories included.
pub fn category_rollup(
    global_share: &[f64],
    labels: &[String],
    category_of: &BTreeMap<String, String>,
) -> Vec<(String, f64)> {
    let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
    for (topic, &share) in global_share.iter().enumerate() {
        let label = labels.get(topic).map(String::as_str).unwrap_or("");
        let category = category_of
            .get(label)
            .map(String::as_str)
            .filter(|c| CATEGORY_ORDER.contains(c))
            .unwrap_or("Uncategorized");
        *totals.entry(category).or_insert(0.0) += share;
    }
    CATEGORY_ORDER
        .iter()
        .map(|&c| (c.to_string(), totals.get(c).copied().unwrap_or(0.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    #[test]
    fn bucket_convention() {
        let epoch = Epoch::default();
        assert_eq!(bucket(ts("2020-02-15T00:00:00Z"), epoch), Ok(Period(0)));
        assert_eq!(bucket(ts("2020-03-31T23:59:59Z"), epoch), Ok(Period(0)));
        assert_eq!(bucket(ts("2020-04-01T00:00:00Z"), epoch), Ok(Period(1)));
        // 2026-01-30 is the 25th period (index 24).
        assert_eq!(bucket(ts("2026-01-30T19:13:34Z"), epoch), Ok(Period(24)));
    }

    #[test]
    fn pre_epoch_rejected() {
        let err = bucket(ts("2019-12-31T23:59:59Z"), Epoch::default()).unwrap_err();
        assert_eq!(err.epoch, Epoch::default());
    }

    #[test]
    fn bucket_is_monotone() {
        let epoch = Epoch::default();
        let times = [
            "2020-01-01T00:00:00Z",
            "2020-06-30T00:00:00Z",
            "2021-01-01T00:00:00Z",
            "2024-12-31T00:00:00Z",
            "2026-01-30T00:00:00Z",
        ];
        let periods: Vec<_> = times
            .iter()
            .map(|t| bucket(ts(t), epoch).unwrap().0)
            .collect();
        let mut sorted = periods.clone();
        sorted.sort();
        assert_eq!(periods, sorted);
    }

    #[test]
    fn non_q1_epoch_offsets_index() {
        let epoch = Epoch { year: 2020, quarter: 3 };
        assert_eq!(bucket(ts("2020-07-01T00:00:00Z"), epoch), Ok(Period(0)));
        assert_eq!(bucket(ts("2021-01-01T00:00:00Z"), epoch), Ok(Period(2)));
        assert!(bucket(ts("2020-06-30T00:00:00Z"), epoch).is_err());
        assert_eq!(Period(2).calendar(epoch), (2021, 1));
    }

    #[test]
    fn epoch_parse_round_trips() {
        let e = Epoch::parse("2020-Q1").unwrap();
        assert_eq!(e, Epoch::default());
        assert_eq!(e.to_string(), "2020-Q1");
        assert!(Epoch::parse("2020-Q5").is_none());
        assert!(Epoch::parse("nope").is_none());
    }

    fn doc(id: &str, probs: &[(usize, f64)], outlier: f64) -> DocDistribution {
        DocDistribution {
            snapshot_id: id.into(),
            probabilities: probs.iter().copied().collect(),
            outlier_mass: outlier,
        }
    }

    #[test]
    fn aggregate_example() {
        let docs = vec![
            (doc("a", &[(0, 0.6), (1, 0.4)], 0.0), Period(0)),
            (doc("b", &[(0, 0.2), (1, 0.8)], 0.0), Period(0)),
        ];
        let table = aggregate_prevalence(&docs, 2, false);
        assert!((table.mass[0][0] - 0.8).abs() < 1e-12);
        assert!((table.mass[1][0] - 1.2).abs() < 1e-12);
        assert!((table.share[0][0] - 0.4).abs() < 1e-12);
        assert!((table.share[1][0] - 0.6).abs() < 1e-12);
        assert!((table.grand_total() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn same_period_snapshots_all_counted() {
        let docs = vec![
            (doc("a", &[(0, 1.0)], 0.0), Period(3)),
            (doc("b", &[(0, 1.0)], 0.0), Period(3)),
            (doc("c", &[(0, 1.0)], 0.0), Period(3)),
        ];
        let table = aggregate_prevalence(&docs, 1, false);
        assert!((table.mass[0][3] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_period_flagged() {
        let docs = vec![
            (doc("a", &[(0, 1.0)], 0.0), Period(0)),
            (doc("b", &[(0, 1.0)], 0.0), Period(2)),
        ];
        let table = aggregate_prevalence(&docs, 1, false);
        assert_eq!(table.empty_periods, vec![1]);
        assert_eq!(table.share[0][1], 0.0);
    }

    #[test]
    fn shares_sum_to_one_per_nonempty_period() {
        let docs = vec![
            (doc("a", &[(0, 0.3), (1, 0.5)], 0.2), Period(0)),
            (doc("b", &[(0, 0.1), (2, 0.7)], 0.2), Period(0)),
            (doc("c", &[(2, 0.9)], 0.1), Period(1)),
        ];
        let table = aggregate_prevalence(&docs, 3, false);
        for p in 0..table.n_periods {
            let total: f64 = (0..3).map(|t| table.share[t][p]).sum();
            assert!((total - 1.0).abs() < 1e-9, "period {p}: {total}");
        }
        // Global shares plus outlier fraction account for everything.
        let global: f64 = table.global_share.iter().sum();
        let outlier_fraction: f64 = table.outlier_mass.iter().sum::<f64>() / table.grand_total();
        assert!((global + outlier_fraction - 1.0).abs() < 1e-9);
        assert!(global <= 1.0);
    }

    #[test]
    fn concentration_examples() {
        let c = concentration(&[0.4, 0.3, 0.2, 0.1]);
        assert!((c.top_5_share - 1.0).abs() < 1e-12);
        assert_eq!(c.min_topics_for_50, 2);
        // top-2 share, via the cumulative rule.
        let two: f64 = 0.4 + 0.3;
        assert!(two >= 0.5);

        let equal = vec![0.1; 10];
        let c = concentration(&equal);
        assert!((c.top_5_share - 0.5).abs() < 1e-12);
        assert!((c.top_10_share - 1.0).abs() < 1e-12);
        assert_eq!(c.min_topics_for_50, 5);
        assert_eq!(c.min_topics_for_75, 8);
    }

    #[test]
    fn concentration_renormalizes_over_topic_mass() {
        // Global shares summing to 0.5 (other half outliers): indicators are
        // computed on the renormalized distribution.
        let c = concentration(&[0.2, 0.2, 0.1]);
        assert!((c.top_5_share - 1.0).abs() < 1e-12);
        assert_eq!(c.min_topics_for_50, 2);
    }

    #[test]
    fn concentration_cumulative_curve_monotone() {
        let shares = [0.05, 0.3, 0.01, 0.24, 0.4];
        let c = concentration(&shares);
        assert!(c.top_5_share <= 1.0 + 1e-12);
        assert!(c.min_topics_for_50 <= c.min_topics_for_75);
    }

    #[test]
    fn rollup_examples() {
        let labels = vec!["A".to_string(), "B".to_string(), "C".to_string()];
        let mut cats = BTreeMap::new();
        cats.insert("A".to_string(), "Transactional".to_string());
        cats.insert("B".to_string(), "Transactional".to_string());
        let rollup = category_rollup(&[0.1, 0.2, 0.3], &labels, &cats);
        assert_eq!(rollup[0], ("Transactional".to_string(), 0.1 + 0.2));
        // Unmapped topic lands in Uncategorized; totals conserved.
        assert_eq!(rollup[4].0, "Uncategorized");
        assert!((rollup[4].1 - 0.3).abs() < 1e-12);
        let total: f64 = rollup.iter().map(|(_, s)| s).sum();
        assert!((total - 0.6).abs() < 1e-12);
        // Fixed emission order.
        let names: Vec<_> = rollup.iter().map(|(c, _)| c.as_str()).collect();
        assert_eq!(
            names,
            vec!["Transactional", "Products", "Infrastructure", "Community", "Uncategorized"]
        );
    }
}
