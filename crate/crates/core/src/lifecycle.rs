//! Per-topic lifecycle metrics: lifespan, recurrence, peak, growth/decay
//! slopes, peak-to-last lag, and the continuous/recurring/episodic class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeline::MONTHS_PER_PERIOD;

/// Default activity threshold: effectively "any mass", so float dust from
/// soft assignment does not create activity on its own.
pub const DEFAULT_ACTIVITY_THRESHOLD: f64 = 1e-6;

/// Episodic rule boundaries: lifespan < 10 periods and recurrence < 10.
pub const DEFAULT_EPISODIC_MAX_LIFESPAN: usize = 10;
pub const DEFAULT_EPISODIC_MAX_RECURRENCE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopicClass {
    Continuous,
    Recurring,
    Episodic,
}

impl std::fmt::Display for TopicClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            TopicClass::Continuous => "Continuous",
            TopicClass::Recurring => "Recurring",
            TopicClass::Episodic => "Episodic",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifecycleMetrics {
    pub topic_id: usize,
    pub first_active: usize,
    pub peak: usize,
    pub last_active: usize,
    pub lifespan_periods: usize,
    pub lifespan_months: usize,
    pub recurrence: usize,
    pub growth_slope: f64,
    pub decay_slope: f64,
    pub peak_to_last_months: usize,
    pub class: TopicClass,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("topic {topic_id} has no activity above the threshold")]
pub struct NoActivity {
    pub topic_id: usize,
}

/// Least-squares slope of `values` against 0..n; zero for fewer than two
/// points.
fn least_squares_slope(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mean_x = (nf - 1.0) / 2.0;
    let mean_y = values.iter().sum::<f64>() / nf;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &y) in values.iter().enumerate() {
        let dx = i as f64 - mean_x;
        num += dx * (y - mean_y);
        den += dx * dx;
    }
    num / den
}

/// Lifecycle metrics for one topic's per-period share series.
///
/// Activity is `share ≥ threshold`. The peak is the maximum share among
/// active periods (earliest on ties). Slopes are least-squares fits over the
/// inclusive windows [first_active, peak] and [peak, last_active]; interior
/// sub-threshold periods count as their (near-zero) share values. The class
/// is filled in by [`classify`] against the run's total period count.
pub fn lifecycle_metrics(
    topic_id: usize,
    values: &[f64],
    threshold: f64,
    total_periods: usize,
) -> Result<LifecycleMetrics, NoActivity> {
    let active: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= threshold)
        .map(|(i, _)| i)
        .collect();
    let (&first_active, &last_active) = match (active.first(), active.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(NoActivity { topic_id }),
    };
    let peak = active
        .iter()
        .copied()
        .max_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .unwrap()
                .then(b.cmp(&a)) // earliest period wins ties
        })
        .expect("active is non-empty");

    let growth_slope = least_squares_slope(&values[first_active..=peak]);
    let decay_slope = least_squares_slope(&values[peak..=last_active]);
    let lifespan_periods = last_active - first_active + 1;

    let mut metrics = LifecycleMetrics {
        topic_id,
        first_active,
        peak,
        last_active,
        lifespan_periods,
        lifespan_months: MONTHS_PER_PERIOD * lifespan_periods,
        recurrence: active.len(),
        growth_slope,
        decay_slope,
        peak_to_last_months: MONTHS_PER_PERIOD * (last_active - peak),
        class: TopicClass::Recurring,
    };
    metrics.class = classify(&metrics, total_periods, ClassifyRule::default());
    Ok(metrics)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifyRule {
    pub episodic_max_lifespan: usize,
    pub episodic_max_recurrence: usize,
}

impl Default for ClassifyRule {
    fn default() -> Self {
        ClassifyRule {
            episodic_max_lifespan: DEFAULT_EPISODIC_MAX_LIFESPAN,
            episodic_max_recurrence: DEFAULT_EPISODIC_MAX_RECURRENCE,
        }
    }
}

/// Continuous when active in every period; episodic under the (<10, <10)
/// rule; recurring otherwise. Total over all inputs.
pub fn classify(metrics: &LifecycleMetrics, total_periods: usize, rule: ClassifyRule) -> TopicClass {
    if metrics.recurrence == total_periods {
        TopicClass::Continuous
    } else if metrics.lifespan_periods < rule.episodic_max_lifespan
        && metrics.recurrence < rule.episodic_max_recurrence
    {
        TopicClass::Episodic
    } else {
        TopicClass::Recurring
    }
}

/// Cohort-level summary across all topics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub median_lifespan_periods: f64,
    pub median_lifespan_months: f64,
    pub mean_lifespan_periods: f64,
    pub mean_lifespan_months: f64,
    /// Mean peak-to-last lag in months among topics whose last activity
    /// precedes the final observed period; absent when no topic disappears.
    pub mean_peak_to_last_months_disappearing: Option<f64>,
    pub max_growth_slope: f64,
    pub min_decay_slope: f64,
    pub class_counts: ClassCounts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub continuous: usize,
    pub recurring: usize,
    pub episodic: usize,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn cohort_summary(all: &[LifecycleMetrics], total_periods: usize) -> Option<CohortSummary> {
    if all.is_empty() {
        return None;
    }
    let mut lifespans: Vec<f64> = all.iter().map(|m| m.lifespan_periods as f64).collect();
    lifespans.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean_periods = lifespans.iter().sum::<f64>() / lifespans.len() as f64;

    let final_period = total_periods.saturating_sub(1);
    let disappearing: Vec<&LifecycleMetrics> =
        all.iter().filter(|m| m.last_active < final_period).collect();
    let mean_lag = if disappearing.is_empty() {
        None
    } else {
        Some(
            disappearing
                .iter()
                .map(|m| m.peak_to_last_months as f64)
                .sum::<f64>()
                / disappearing.len() as f64,
        )
    };

    let mut counts = ClassCounts::default();
    for m in all {
        match m.class {
            TopicClass::Continuous => counts.continuous += 1,
            TopicClass::Recurring => counts.recurring += 1,
            TopicClass::Episodic => counts.episodic += 1,
        }
    }

    Some(CohortSummary {
        median_lifespan_periods: median(&lifespans),
        median_lifespan_months: MONTHS_PER_PERIOD as f64 * median(&lifespans),
        mean_lifespan_periods: mean_periods,
        mean_lifespan_months: MONTHS_PER_PERIOD as f64 * mean_periods,
        mean_peak_to_last_months_disappearing: mean_lag,
        max_growth_slope: all
            .iter()
            .map(|m| m.growth_slope)
            .fold(f64::NEG_INFINITY, f64::max),
        min_decay_slope: all
            .iter()
            .map(|m| m.decay_slope)
            .fold(f64::INFINITY, f64::min),
        class_counts: counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn metrics(values: &[f64], threshold: f64, total: usize) -> LifecycleMetrics {
        lifecycle_metrics(0, values, threshold, total).unwrap()
    }

    #[test]
    fn active_window_lifespan() {
        // Active periods 2..6 → lifespan 5 periods = 15 months.
        let mut values = vec![0.0; 10];
        for v in values.iter_mut().take(7).skip(2) {
            *v = 0.5;
        }
        let m = metrics(&values, 0.1, 10);
        assert_eq!((m.first_active, m.last_active), (2, 6));
        assert_eq!(m.lifespan_periods, 5);
        assert_eq!(m.lifespan_months, 15);
        assert_eq!(m.recurrence, 5);
    }

    #[test]
    fn triangle_slopes() {
        let values = [0.0, 1.0, 2.0, 3.0, 2.0, 1.0, 0.0];
        let m = metrics(&values, 0.5, 7);
        assert_eq!(m.peak, 3);
        assert!((m.growth_slope - 1.0).abs() < 1e-12);
        assert!((m.decay_slope - (-1.0)).abs() < 1e-12);
        assert_eq!(m.peak_to_last_months, 2 * 3);
        assert_eq!((m.first_active, m.last_active), (1, 5));
    }

    #[test]
    fn gap_counts_for_lifespan_not_recurrence() {
        let a = 0.9;
        let values = [a, 0.0, a];
        let m = metrics(&values, 0.5, 3);
        assert_eq!(m.recurrence, 2);
        assert_eq!(m.lifespan_periods, 3);
    }

    #[test]
    fn single_active_period_has_zero_slopes() {
        let values = [0.0, 0.8, 0.0];
        let m = metrics(&values, 0.5, 3);
        assert_eq!(m.growth_slope, 0.0);
        assert_eq!(m.decay_slope, 0.0);
        assert_eq!(m.peak, 1);
        assert_eq!(m.peak_to_last_months, 0);
    }

    #[test]
    fn peak_tie_takes_earliest() {
        let values = [0.2, 0.9, 0.3, 0.9, 0.2];
        let m = metrics(&values, 0.1, 5);
        assert_eq!(m.peak, 1);
    }

    #[test]
    fn no_activity_is_an_error() {
        assert_eq!(
            lifecycle_metrics(7, &[0.0, 0.0], 0.5, 2),
            Err(NoActivity { topic_id: 7 })
        );
    }

    #[test]
    fn classify_rules() {
        let mk = |lifespan: usize, recurrence: usize| LifecycleMetrics {
            topic_id: 0,
            first_active: 0,
            peak: 0,
            last_active: lifespan - 1,
            lifespan_periods: lifespan,
            lifespan_months: 3 * lifespan,
            recurrence,
            growth_slope: 0.0,
            decay_slope: 0.0,
            peak_to_last_months: 0,
            class: TopicClass::Recurring,
        };
        let rule = ClassifyRule::default();
        assert_eq!(classify(&mk(25, 25), 25, rule), TopicClass::Continuous);
        assert_eq!(classify(&mk(8, 5), 25, rule), TopicClass::Episodic);
        assert_eq!(classify(&mk(20, 12), 25, rule), TopicClass::Recurring);
        // Boundary: lifespan 10 is not "low" under the strict rule.
        assert_eq!(classify(&mk(10, 5), 25, rule), TopicClass::Recurring);
        assert_eq!(classify(&mk(9, 9), 25, rule), TopicClass::Episodic);
    }

    #[test]
    fn cohort_medians() {
        let mk = |lifespan: usize, peak: usize, last: usize| LifecycleMetrics {
            topic_id: 0,
            first_active: 0,
            peak,
            last_active: last,
            lifespan_periods: lifespan,
            lifespan_months: 3 * lifespan,
            recurrence: lifespan,
            growth_slope: 0.1,
            decay_slope: -0.2,
            peak_to_last_months: 3 * (last - peak),
            class: TopicClass::Recurring,
        };
        let all = vec![mk(5, 1, 4), mk(25, 3, 24), mk(25, 5, 24)];
        let s = cohort_summary(&all, 25).unwrap();
        assert_eq!(s.median_lifespan_periods, 25.0);
        assert_eq!(s.median_lifespan_months, 75.0);

        // Single topic peaking at 3, last active 10, final period 24:
        // disappearing cohort lag = (10 − 3) × 3 = 21 months.
        let one = vec![mk(11, 3, 10)];
        let s = cohort_summary(&one, 25).unwrap();
        assert_eq!(s.mean_peak_to_last_months_disappearing, Some(21.0));

        // Nothing disappears → lag absent, not zero.
        let stays = vec![mk(25, 3, 24)];
        let s = cohort_summary(&stays, 25).unwrap();
        assert_eq!(s.mean_peak_to_last_months_disappearing, None);
    }

    #[test]
    fn even_count_median_is_midpoint() {
        let mk = |lifespan: usize| LifecycleMetrics {
            topic_id: 0,
            first_active: 0,
            peak: 0,
            last_active: lifespan - 1,
            lifespan_periods: lifespan,
            lifespan_months: 3 * lifespan,
            recurrence: lifespan,
            growth_slope: 0.0,
            decay_slope: 0.0,
            peak_to_last_months: 0,
            class: TopicClass::Recurring,
        };
        let s = cohort_summary(&[mk(4), mk(10)], 25).unwrap();
        assert_eq!(s.median_lifespan_periods, 7.0);
    }

    proptest! {
        /// Ordering invariants, slope signs on monotone windows, and the
        /// class partition.
        #[test]
        fn structural_invariants(values in proptest::collection::vec(0.0f64..1.0, 1..30)) {
            let threshold = 0.2;
            let total = values.len();
            match lifecycle_metrics(0, &values, threshold, total) {
                Ok(m) => {
                    prop_assert!(m.first_active <= m.peak);
                    prop_assert!(m.peak <= m.last_active);
                    prop_assert!(m.recurrence <= m.lifespan_periods);
                    prop_assert_eq!(m.lifespan_months, 3 * m.lifespan_periods);
                    let window = &values[m.first_active..=m.peak];
                    if window.windows(2).all(|w| w[0] <= w[1]) {
                        prop_assert!(m.growth_slope >= -1e-12);
                    }
                    let down = &values[m.peak..=m.last_active];
                    if down.windows(2).all(|w| w[0] >= w[1]) {
                        prop_assert!(m.decay_slope <= 1e-12);
                    }
                    // classify is total: one of the three classes came back.
                    let _ = m.class;
                }
                Err(_) => {
                    prop_assert!(values.iter().all(|&v| v < threshold));
                }
            }
        }

        /// Scaling series and threshold by λ > 0 scales slopes by λ and
        /// leaves the rest unchanged. λ is a power of two so the scaling is
        /// exact and threshold comparisons cannot flip by rounding.
        #[test]
        fn scale_equivariance(
            values in proptest::collection::vec(0.0f64..1.0, 2..20),
            lambda in proptest::sample::select(vec![0.25f64, 0.5, 2.0, 4.0]),
        ) {
            let threshold = 0.3;
            let base = lifecycle_metrics(0, &values, threshold, values.len());
            let scaled_values: Vec<f64> = values.iter().map(|v| v * lambda).collect();
            let scaled = lifecycle_metrics(0, &scaled_values, threshold * lambda, values.len());
            match (base, scaled) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a.peak, b.peak);
                    prop_assert_eq!(a.lifespan_periods, b.lifespan_periods);
                    prop_assert_eq!(a.recurrence, b.recurrence);
                    prop_assert_eq!(a.class, b.class);
                    prop_assert!((a.growth_slope * lambda - b.growth_slope).abs() < 1e-9);
                    prop_assert!((a.decay_slope * lambda - b.decay_slope).abs() < 1e-9);
                }
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "activity disagreement: {a:?} vs {b:?}"),
            }
        }
    }
}
