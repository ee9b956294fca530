//! Synthetic longitudinal corpora with planted topics, vocabularies, and
//! lifecycle shapes, plus ground-truth files for end-to-end validation.
//!
//! Generation is single-threaded over one seeded stream so a (plan, seed)
//! pair always produces byte-identical output trees.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Duration, Months, SecondsFormat, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::ManifestEntry;

pub const MIN_VOCABULARY: usize = 30;
pub const MAX_VOCABULARY_OVERLAP: f64 = 0.10;
pub const MIN_SNAPSHOTS_PER_WEBSITE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Bursting,
    Stable,
    Emerging,
    Declining,
    Episodic,
}

impl Shape {
    pub fn parse(text: &str) -> Option<Shape> {
        match text.trim().to_lowercase().as_str() {
            "bursting" => Some(Shape::Bursting),
            "stable" => Some(Shape::Stable),
            "emerging" => Some(Shape::Emerging),
            "declining" => Some(Shape::Declining),
            "episodic" => Some(Shape::Episodic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTopic {
    pub name: String,
    pub vocabulary: Vec<String>,
    pub shape: Shape,
    pub base_docs_per_period: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimPlan {
    pub topics: Vec<SimTopic>,
    pub n_websites: usize,
    pub periods: usize,
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("periods must be at least 4, got {0}")]
    TooFewPeriods(usize),
    #[error("plan invalid: {0}")]
    InvalidPlan(String),
    #[error("plan infeasible: {total} docs cannot give {n_websites} websites ≥ {min} snapshots")]
    Infeasible {
        total: usize,
        n_websites: usize,
        min: usize,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

/// Per-snapshot planted topic and per-topic per-period planted counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub planted_topic: BTreeMap<String, usize>,
    /// counts[topic][period]
    pub counts: Vec<Vec<usize>>,
    pub topic_names: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GroundTruthLine {
    snapshot_id: String,
    topic_id: usize,
    topic: String,
}

fn round(x: f64) -> usize {
    x.round() as usize
}

/// Per-period planted document counts for one lifecycle shape.
///
/// Episodic places `base` documents in 3 seeded-random periods confined to a
/// nine-period window, keeping the planted lifespan in the episodic regime.
pub fn shape_envelope(
    shape: Shape,
    periods: usize,
    base: usize,
    seed: u64,
) -> Result<Vec<usize>, SimError> {
    if periods < 4 {
        return Err(SimError::TooFewPeriods(periods));
    }
    let b = base as f64;
    let counts = match shape {
        Shape::Stable => vec![base; periods],
        Shape::Bursting => {
            let p1 = periods / 3;
            let p2 = 2 * periods / 3;
            (0..periods)
                .map(|t| {
                    if t <= p1 {
                        round(4.0 * b * t as f64 / p1 as f64)
                    } else if t < p2 {
                        round(4.0 * b * (p2 - t) as f64 / (p2 - p1) as f64)
                    } else {
                        0
                    }
                })
                .collect()
        }
        Shape::Emerging => (0..periods)
            .map(|t| round(3.0 * b * t as f64 / (periods - 1) as f64))
            .collect(),
        Shape::Declining => (0..periods)
            .map(|t| round(3.0 * b * (periods - 1 - t) as f64 / (periods - 1) as f64))
            .collect(),
        Shape::Episodic => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let window = periods.min(9);
            let start = rng.random_range(0..=periods - window);
            let mut slots: Vec<usize> = (start..start + window).collect();
            // Partial Fisher-Yates: pick 3 distinct periods in the window.
            for i in 0..3 {
                let j = rng.random_range(i..slots.len());
                slots.swap(i, j);
            }
            let mut counts = vec![0; periods];
            for &slot in slots.iter().take(3) {
                counts[slot] = base;
            }
            counts
        }
    };
    Ok(counts)
}

/// Deterministic topic vocabulary built from consonant-vowel syllables whose
/// endings no suffix rule touches; topic prefixes keep vocabularies disjoint
/// for up to 12 topics. The syllables stick to letters rare in natural
/// text so planted words cannot sway the trigram language scores.
pub fn synthetic_vocabulary(topic_idx: usize, size: usize) -> Vec<String> {
    const SYLLABLES: [&str; 24] = [
        "zok", "zuv", "zix", "xop", "xuk", "xiv", "qow", "quj", "qiz", "vok", "vux", "viw",
        "wop", "wuk", "wiz", "koj", "kuv", "kix", "jop", "juv", "jiz", "yok", "yuv", "yix",
    ];
    let prefix = format!(
        "{}{}",
        SYLLABLES[(2 * topic_idx) % 24],
        SYLLABLES[(2 * topic_idx + 1) % 24]
    );
    (0..size)
        .map(|i| {
            let mut word = format!("{prefix}{}", SYLLABLES[i % 24]);
            if i >= 24 {
                word.push_str(SYLLABLES[(i / 24) % 24]);
            }
            word
        })
        .collect()
}

/// Shared background tokens: common English function words, so generated
/// pages read as English to the language filter while the stopword pass
/// keeps them out of topic vocabularies.
pub const BACKGROUND_VOCABULARY: [&str; 40] = [
    "the", "and", "that", "with", "this", "from", "they", "have", "will", "would", "there",
    "their", "about", "which", "when", "make", "time", "just", "know", "people", "year", "good",
    "some", "them", "other", "than", "then", "look", "only", "come", "over", "think", "also",
    "back", "after", "work", "first", "well", "even", "want",
];

fn validate_plan(plan: &SimPlan) -> Result<(), SimError> {
    if plan.topics.is_empty() {
        return Err(SimError::InvalidPlan("no topics".into()));
    }
    for topic in &plan.topics {
        let unique: std::collections::BTreeSet<&String> = topic.vocabulary.iter().collect();
        if unique.len() < MIN_VOCABULARY {
            return Err(SimError::InvalidPlan(format!(
                "topic {} has {} unique vocabulary tokens, need ≥ {MIN_VOCABULARY}",
                topic.name,
                unique.len()
            )));
        }
        if topic.base_docs_per_period < 1 {
            return Err(SimError::InvalidPlan(format!(
                "topic {} has base_docs_per_period 0",
                topic.name
            )));
        }
    }
    for a in 0..plan.topics.len() {
        for b in (a + 1)..plan.topics.len() {
            let va: std::collections::BTreeSet<&String> =
                plan.topics[a].vocabulary.iter().collect();
            let vb: std::collections::BTreeSet<&String> =
                plan.topics[b].vocabulary.iter().collect();
            let shared = va.intersection(&vb).count();
            let cap = (va.len().min(vb.len()) as f64 * MAX_VOCABULARY_OVERLAP) as usize;
            if shared > cap {
                return Err(SimError::InvalidPlan(format!(
                    "topics {} and {} share {shared} tokens (cap {cap})",
                    plan.topics[a].name, plan.topics[b].name
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub manifest_path: PathBuf,
    pub ground_truth_path: PathBuf,
    pub plan_path: PathBuf,
    pub ground_truth: GroundTruth,
    pub total_docs: usize,
}

/// Generate HTML snapshots, the manifest, the ground truth, and a plan echo
/// under `out_dir`. Timestamps fall uniformly inside each document's period
/// (quarters from 2020-Q1); website keys are assigned round-robin so every
/// website receives at least five snapshots.
pub fn generate_corpus(plan: &SimPlan, out_dir: &Path) -> Result<GeneratedCorpus, SimError> {
    validate_plan(plan)?;
    let envelopes: Vec<Vec<usize>> = plan
        .topics
        .iter()
        .enumerate()
        .map(|(idx, t)| {
            shape_envelope(
                t.shape,
                plan.periods,
                t.base_docs_per_period,
                plan.seed.wrapping_add(idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            )
        })
        .collect::<Result<_, _>>()?;
    let total: usize = envelopes.iter().flatten().sum();
    if total < MIN_SNAPSHOTS_PER_WEBSITE * plan.n_websites {
        return Err(SimError::Infeasible {
            total,
            n_websites: plan.n_websites,
            min: MIN_SNAPSHOTS_PER_WEBSITE,
        });
    }

    let html_dir = out_dir.join("html");
    fs::create_dir_all(&html_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let epoch = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();

    let mut manifest = fs::File::create(out_dir.join("manifest.jsonl"))?;
    let mut truth_file = fs::File::create(out_dir.join("ground_truth.jsonl"))?;
    let mut planted: BTreeMap<String, usize> = BTreeMap::new();

    let mut serial = 0usize;
    for (topic_idx, topic) in plan.topics.iter().enumerate() {
        for (period, &count) in envelopes[topic_idx].iter().enumerate() {
            let start = epoch + Months::new(3 * period as u32);
            let end = epoch + Months::new(3 * (period + 1) as u32);
            let span = (end - start).num_seconds();
            for _ in 0..count {
                let snapshot_id = format!("snap{serial:06}");
                let website = serial % plan.n_websites;
                let timestamp = start + Duration::seconds(rng.random_range(0..span));

                // 90% topic vocabulary, 10% shared background, as an exact
                // per-document proportion so every page carries some
                // in-profile text for the language filter.
                let n_tokens = rng.random_range(40..=80);
                let n_background = (n_tokens + 5) / 10;
                let mut words = Vec::with_capacity(n_tokens);
                for _ in 0..n_tokens - n_background {
                    words.push(
                        topic.vocabulary[rng.random_range(0..topic.vocabulary.len())].as_str(),
                    );
                }
                for _ in 0..n_background {
                    words.push(
                        BACKGROUND_VOCABULARY[rng.random_range(0..BACKGROUND_VOCABULARY.len())],
                    );
                }
                for i in (1..words.len()).rev() {
                    words.swap(i, rng.random_range(0..=i));
                }
                let body = words.join(" ");
                let html = format!(
                    "<html><head><title>Site {website:03}</title></head><body>\
                     <nav><a href=\"/\">home</a> <a href=\"/new\">new</a> \
                     <a href=\"/top\">top</a></nav>\
                     <p>{body}</p>\
                     <footer>generated page</footer></body></html>"
                );
                let rel_path = format!("html/{snapshot_id}.html");
                fs::write(out_dir.join(&rel_path), html)?;

                let entry = ManifestEntry {
                    snapshot_id: snapshot_id.clone(),
                    website_path: format!("/site/{website:03}"),
                    page_title: format!("Site {website:03}"),
                    timestamp: timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
                    html_path: rel_path,
                };
                writeln!(manifest, "{}", serde_json::to_string(&entry).unwrap())?;
                let line = GroundTruthLine {
                    snapshot_id: snapshot_id.clone(),
                    topic_id: topic_idx,
                    topic: topic.name.clone(),
                };
                writeln!(truth_file, "{}", serde_json::to_string(&line).unwrap())?;
                planted.insert(snapshot_id, topic_idx);
                serial += 1;
            }
        }
    }

    let plan_path = out_dir.join("plan.json");
    fs::write(&plan_path, serde_json::to_string_pretty(plan).unwrap())?;

    let ground_truth = GroundTruth {
        planted_topic: planted,
        counts: envelopes,
        topic_names: plan.topics.iter().map(|t| t.name.clone()).collect(),
    };
    Ok(GeneratedCorpus {
        manifest_path: out_dir.join("manifest.jsonl"),
        ground_truth_path: out_dir.join("ground_truth.jsonl"),
        plan_path,
        ground_truth,
        total_docs: serial,
    })
}

/// Read a ground-truth file back into snapshot → topic-id form.
pub fn load_ground_truth(path: &Path) -> Result<BTreeMap<String, usize>, SimError> {
    let text = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: GroundTruthLine = serde_json::from_str(line)
            .map_err(|e| SimError::Io(format!("bad ground truth line: {e}")))?;
        map.insert(parsed.snapshot_id, parsed.topic_id);
    }
    Ok(map)
}
