//! Longitudinal website histories: group accepted snapshots by identity key,
//! order them chronologically, deduplicate within time buckets, and enforce
//! the minimum-depth exclusion rule.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Minimum snapshots per retained history; groups of four or fewer are
/// removed for lack of temporal depth.
pub const MIN_SNAPSHOTS: usize = 5;

/// Stable webpage identity: URL path plus page title.
///
/// The canonical form joins the outer-trimmed parts with U+001F so distinct
/// (path, title) pairs can never collide; equality is exact string equality
/// of that form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WebsiteKey {
    canonical: String,
}

impl WebsiteKey {
    pub fn new(path: &str, title: &str) -> Self {
        WebsiteKey {
            canonical: format!("{}\u{1f}{}", path.trim(), title.trim()),
        }
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    pub fn path(&self) -> &str {
        self.canonical.split('\u{1f}').next().unwrap_or("")
    }

    pub fn title(&self) -> &str {
        self.canonical.split_once('\u{1f}').map_or("", |(_, t)| t)
    }
}

pub fn website_key(path: &str, title: &str) -> WebsiteKey {
    WebsiteKey::new(path, title)
}

/// One accepted snapshot's membership data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotRef {
    pub snapshot_id: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct WebsiteHistory {
    pub website_id: usize,
    pub key: WebsiteKey,
    /// Non-decreasing by timestamp; ties broken by snapshot_id ascending.
    pub snapshots: Vec<SnapshotRef>,
}

/// Serialized shape for `websites.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WebsiteRecord {
    pub website_id: usize,
    pub path: String,
    pub title: String,
    pub snapshot_ids: Vec<String>,
}

impl WebsiteHistory {
    pub fn to_record(&self) -> WebsiteRecord {
        WebsiteRecord {
            website_id: self.website_id,
            path: self.key.path().to_string(),
            title: self.key.title().to_string(),
            snapshot_ids: self.snapshots.iter().map(|s| s.snapshot_id.clone()).collect(),
        }
    }
}

/// Bookkeeping for the conservation invariant: every accepted snapshot is
/// either retained, in a dropped shallow group, or removed by dedup.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub accepted: usize,
    pub retained: usize,
    pub dropped_shallow_group: usize,
    pub removed_duplicates: usize,
}

impl CorpusCounts {
    pub fn conserved(&self) -> bool {
        self.retained + self.dropped_shallow_group + self.removed_duplicates == self.accepted
    }
}

/// Group accepted snapshots by website key, sort chronologically, drop
/// groups with four or fewer snapshots, and assign dense website ids in
/// lexicographic order of the canonical key.
///
/// Returns the retained histories plus the number of snapshots lost to the
/// shallow-group rule.
pub fn build_websites(
    accepted: impl IntoIterator<Item = (WebsiteKey, SnapshotRef)>,
) -> (Vec<WebsiteHistory>, usize) {
    let mut groups: BTreeMap<WebsiteKey, Vec<SnapshotRef>> = BTreeMap::new();
    for (key, snap) in accepted {
        groups.entry(key).or_default().push(snap);
    }
    let mut histories = Vec::new();
    let mut dropped = 0usize;
    for (key, mut snaps) in groups {
        snaps.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.snapshot_id.cmp(&b.snapshot_id))
        });
        if snaps.len() >= MIN_SNAPSHOTS {
            histories.push(WebsiteHistory {
                website_id: histories.len(),
                key,
                snapshots: snaps,
            });
        } else {
            dropped += snaps.len();
        }
    }
    (histories, dropped)
}

/// Collapse same-bucket snapshots whose normalized token sequences are
/// identical, keeping the earliest. Returns the removed snapshot ids;
/// call sites must re-apply the minimum-depth rule afterwards.
pub fn dedup_history(
    history: &mut WebsiteHistory,
    tokens_of: impl Fn(&str) -> Option<Vec<String>>,
    bucket_of: impl Fn(&DateTime<Utc>) -> i64,
) -> Vec<String> {
    let mut seen: BTreeMap<(i64, Vec<String>), ()> = BTreeMap::new();
    let mut removed = Vec::new();
    let mut kept = Vec::with_capacity(history.snapshots.len());
    for snap in history.snapshots.drain(..) {
        let bucket = bucket_of(&snap.timestamp);
        match tokens_of(&snap.snapshot_id) {
            Some(tokens) => {
                if seen.insert((bucket, tokens), ()).is_none() {
                    kept.push(snap);
                } else {
                    removed.push(snap.snapshot_id);
                }
            }
            // No normalization available (should not happen for accepted
            // snapshots); keep it rather than silently dropping data.
            None => kept.push(snap),
        }
    }
    history.snapshots = kept;
    removed
}

/// Full corpus construction: group, sort, dedup within buckets, re-apply the
/// minimum-depth rule, and renumber website ids densely.
pub fn build_corpus(
    accepted: Vec<(WebsiteKey, SnapshotRef)>,
    tokens_of: impl Fn(&str) -> Option<Vec<String>>,
    bucket_of: impl Fn(&DateTime<Utc>) -> i64,
) -> (Vec<WebsiteHistory>, CorpusCounts) {
    let total = accepted.len();
    let (mut histories, dropped_shallow) = build_websites(accepted);
    let mut counts = CorpusCounts {
        accepted: total,
        retained: 0,
        dropped_shallow_group: dropped_shallow,
        removed_duplicates: 0,
    };
    let mut surviving = Vec::new();
    for mut history in histories.drain(..) {
        counts.removed_duplicates += dedup_history(&mut history, &tokens_of, &bucket_of).len();
        if history.snapshots.len() >= MIN_SNAPSHOTS {
            surviving.push(history);
        } else {
            // Dedup took the history below the threshold; the remaining
            // snapshots count as shallow-group losses.
            counts.dropped_shallow_group += history.snapshots.len();
        }
    }
    for (id, history) in surviving.iter_mut().enumerate() {
        history.website_id = id;
    }
    counts.retained = surviving.iter().map(|h| h.snapshots.len()).sum();
    debug_assert!(counts.conserved());
    (surviving, counts)
}
