//! Staged pipeline execution over filesystem artifacts.
//!
//! Every stage reads the artifacts of its upstream stages and writes its
//! own; `all` chains them in dependency order. A stage is skipped when a
//! stamp file shows the digest of (stage config, upstream artifacts) is
//! unchanged and its outputs still exist — cache keys are content digests,
//! never timestamps. All writes go through write-temp-then-rename.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use darkspan_core::cluster::{hdbscan, membership_vector, CondensedNode};
use darkspan_core::corpus::{build_corpus, website_key, SnapshotRef};
use darkspan_core::embed::{embed_hashing, load_vectors, ProviderKind};
use darkspan_core::ingest::{
    load_manifest, process_snapshot, RejectionReason, SnapshotMeta, Validated,
};
use darkspan_core::lifecycle::{classify, cohort_summary, lifecycle_metrics, LifecycleMetrics};
use darkspan_core::reduce::{reduce, trustworthiness};
use darkspan_core::textnorm::{detect_language, is_retained, Normalizer};
use darkspan_core::timeline::{aggregate_prevalence, bucket, category_rollup, concentration, DocDistribution, Period, PrevalenceTable};
use darkspan_core::topics::{
    apply_label_overrides, apply_merge_map, ctfidf, label_prompt, label_with_template,
    merge_registry, parse_label_file, truncate_label, LabelSource, MergeMap,
};
use darkspan_core::vectors::VectorSet;

use crate::config::{LabelMode, RunConfig};
use crate::reports::{
    write_categories_csv, write_lifecycle_csv, write_lifecycle_summary, write_plotdata,
    write_prevalence_csv, TopicReport,
};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Normalize,
    Corpus,
    Embed,
    Reduce,
    Cluster,
    Topics,
    Timeline,
    Lifecycle,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Normalize,
        Stage::Corpus,
        Stage::Embed,
        Stage::Reduce,
        Stage::Cluster,
        Stage::Topics,
        Stage::Timeline,
        Stage::Lifecycle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Normalize => "normalize",
            Stage::Corpus => "corpus",
            Stage::Embed => "embed",
            Stage::Reduce => "reduce",
            Stage::Cluster => "cluster",
            Stage::Topics => "topics",
            Stage::Timeline => "timeline",
            Stage::Lifecycle => "lifecycle",
        }
    }

    pub fn parse(name: &str) -> Option<Stage> {
        Stage::ALL.iter().copied().find(|s| s.name() == name)
    }
}

// ---------------------------------------------------------------------------
// Artifact line formats
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ExtractedLine {
    snapshot_id: String,
    text: String,
    char_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RejectionLine {
    snapshot_id: String,
    reason: RejectionReason,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TokensLine {
    pub snapshot_id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LanguageLine {
    snapshot_id: String,
    lang: String,
    confidence: f64,
    retained: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CondensedTreeFile {
    n_clusters: usize,
    nodes: Vec<CondensedNode>,
    exemplars: Vec<Vec<usize>>,
    stabilities: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Small filesystem helpers
// ---------------------------------------------------------------------------

/// Write via a temp file in the same directory, then rename into place.
/// Temp names carry the pid and a counter so concurrent writers to the same
/// target cannot steal each other's temp file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    static COUNTER: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.{}.{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact"),
        std::process::id(),
        COUNTER.fetch_add(1, std::sync::atomic::Ordering::Relaxed),
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path, stage: &str) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::stage(stage, format!("cannot read {}: {e}", path.display()))
    })?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| {
            CliError::stage(stage, format!("{}:{}: {e}", path.display(), idx + 1))
        })?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T], stage: &str) -> Result<(), CliError> {
    let mut out = String::new();
    for row in rows {
        let _ = writeln!(out, "{}", serde_json::to_string(row).expect("row serializes"));
    }
    atomic_write(path, out.as_bytes()).map_err(|e| CliError::stage(stage, e))
}

fn sha_hex(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut acc, byte| {
            let _ = write!(acc, "{byte:02x}");
            acc
        })
}

fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(sha_hex(&[&fs::read(path)?]))
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

pub struct Pipeline {
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

impl Pipeline {
    pub fn new(config: RunConfig, out_dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::stage("setup", format!("cannot create out dir: {e}")))?;
        let pipeline = Pipeline { config, out_dir };
        // Echo the effective configuration into the run directory.
        atomic_write(
            &pipeline.artifact("config_used.txt"),
            pipeline.config.canonical().as_bytes(),
        )
        .map_err(|e| CliError::stage("setup", e))?;
        Ok(pipeline)
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn manifest_path(&self) -> Result<PathBuf, CliError> {
        self.config.manifest.clone().ok_or(CliError::Config {
            key: "manifest".into(),
            message: "no manifest configured (set `manifest` or pass --manifest)".into(),
        })
    }

    fn upstream_digest(&self, stage: Stage, config_slice: &str, inputs: &[PathBuf]) -> Result<String, CliError> {
        let mut parts: Vec<String> = vec![config_slice.to_string()];
        for input in inputs {
            parts.push(file_digest(input).map_err(|e| {
                CliError::stage(
                    stage.name(),
                    format!("missing upstream artifact {}: {e}", input.display()),
                )
            })?);
        }
        let joined = parts.join("\n");
        Ok(sha_hex(&[joined.as_bytes()]))
    }

    fn stamp_path(&self, stage: Stage) -> PathBuf {
        self.out_dir.join(format!(".{}.stamp", stage.name()))
    }

    fn is_cached(&self, stage: Stage, digest: &str, outputs: &[PathBuf]) -> bool {
        let stamp_ok = fs::read_to_string(self.stamp_path(stage))
            .map(|s| s.trim() == digest)
            .unwrap_or(false);
        stamp_ok && outputs.iter().all(|p| p.exists())
    }

    fn store_stamp(&self, stage: Stage, digest: &str) -> Result<(), CliError> {
        atomic_write(&self.stamp_path(stage), digest.as_bytes())
            .map_err(|e| CliError::stage(stage.name(), e))
    }

    pub fn run_all(&self) -> Result<(), CliError> {
        for stage in Stage::ALL {
            self.run(stage)?;
        }
        Ok(())
    }

    /// Run one stage, reusing cached outputs when nothing upstream changed.
    pub fn run(&self, stage: Stage) -> Result<(), CliError> {
        let (digest, outputs) = self.cache_key(stage)?;
        if self.is_cached(stage, &digest, &outputs) {
            eprintln!("darkspan: reusing cached {} outputs", stage.name());
            return Ok(());
        }
        match stage {
            Stage::Ingest => self.run_ingest()?,
            Stage::Normalize => self.run_normalize()?,
            Stage::Corpus => self.run_corpus()?,
            Stage::Embed => self.run_embed()?,
            Stage::Reduce => self.run_reduce()?,
            Stage::Cluster => self.run_cluster()?,
            Stage::Topics => self.run_topics()?,
            Stage::Timeline => self.run_timeline()?,
            Stage::Lifecycle => self.run_lifecycle()?,
        }
        self.store_stamp(stage, &digest)
    }

    /// Cache key: digest over the stage's config slice plus the digests of
    /// every upstream artifact it reads.
    fn cache_key(&self, stage: Stage) -> Result<(String, Vec<PathBuf>), CliError> {
        let cfg = &self.config;
        let optional = |p: &Option<PathBuf>| -> Vec<PathBuf> {
            p.iter().filter(|p| p.exists()).cloned().collect()
        };
        let (slice, mut inputs, outputs): (String, Vec<PathBuf>, Vec<&str>) = match stage {
            Stage::Ingest => {
                let manifest = self.manifest_path()?;
                // Page payloads count as inputs: hash every referenced file.
                let mut inputs = vec![manifest.clone()];
                if let Ok(entries) = load_manifest(&manifest) {
                    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
                    for entry in &entries {
                        let meta = SnapshotMeta::from_entry(entry, base);
                        if meta.html_ref.exists() {
                            inputs.push(meta.html_ref);
                        }
                    }
                }
                (
                    format!("phrases={}", cfg.error_phrases.join(",")),
                    inputs,
                    vec!["extracted.jsonl", "rejections.jsonl"],
                )
            }
            Stage::Normalize => (
                String::new(),
                {
                    let mut v = vec![self.artifact("extracted.jsonl")];
                    v.extend(optional(&cfg.stopwords));
                    v.extend(optional(&cfg.lemma_table));
                    v
                },
                vec!["tokens.jsonl", "language.jsonl", "normalize_rejections.jsonl"],
            ),
            Stage::Corpus => (
                String::new(),
                vec![self.artifact("tokens.jsonl"), self.manifest_path()?],
                vec!["websites.jsonl", "corpus_stats.json"],
            ),
            Stage::Embed => (
                format!(
                    "kind={:?} dim={} seed={}",
                    cfg.embed_kind, cfg.embed_dim, cfg.seed
                ),
                {
                    let mut v = vec![self.artifact("websites.jsonl"), self.artifact("tokens.jsonl")];
                    v.extend(optional(&cfg.embed_vectors));
                    v
                },
                vec!["vectors.tsv"],
            ),
            Stage::Reduce => (
                format!("{:?} seed={}", cfg.reduce_config(), cfg.seed),
                vec![self.artifact("vectors.tsv")],
                vec!["reduced.tsv", "reduce_quality.json"],
            ),
            Stage::Cluster => (
                format!("{:?}", cfg.cluster_config()),
                vec![self.artifact("reduced.tsv")],
                vec!["assignments.tsv", "condensed_tree.json"],
            ),
            Stage::Topics => (
                format!("top_k={} mode={:?}", cfg.topics_top_k, cfg.topics_label_mode),
                {
                    let mut v = vec![self.artifact("assignments.tsv"), self.artifact("tokens.jsonl")];
                    v.extend(optional(&cfg.topics_overrides));
                    v.extend(optional(&cfg.topics_responses));
                    v.extend(optional(&cfg.topics_merge_map));
                    v
                },
                vec!["topics.json", "merged.tsv"],
            ),
            Stage::Timeline => (
                format!(
                    "epoch={} outliers={}",
                    cfg.epoch, cfg.include_outliers_in_denominator
                ),
                {
                    let mut v = vec![
                        self.artifact("merged.tsv"),
                        self.artifact("topics.json"),
                        self.manifest_path()?,
                    ];
                    v.extend(optional(&cfg.topics_categories));
                    v
                },
                vec!["prevalence.csv", "concentration.json", "categories.csv"],
            ),
            Stage::Lifecycle => (
                format!(
                    "tau={} episodic={}x{}",
                    cfg.lifecycle_tau,
                    cfg.lifecycle_episodic_max_lifespan,
                    cfg.lifecycle_episodic_max_recurrence
                ),
                vec![self.artifact("prevalence.csv"), self.artifact("topics.json")],
                vec![
                    "lifecycle.csv",
                    "lifecycle_summary.json",
                    "plotdata/stacked_shares.tsv",
                    "plotdata/lifespan_histogram.tsv",
                    "plotdata/growth_decay.tsv",
                    "plotdata/recurrence_lifespan.tsv",
                ],
            ),
        };
        inputs.sort();
        let digest = self.upstream_digest(stage, &slice, &inputs)?;
        Ok((digest, outputs.iter().map(|o| self.artifact(o)).collect()))
    }

    // -----------------------------------------------------------------------
    // Stage bodies
    // -----------------------------------------------------------------------

    fn run_ingest(&self) -> Result<(), CliError> {
        let manifest_path = self.manifest_path()?;
        let entries = load_manifest(&manifest_path)
            .map_err(|e| CliError::stage("ingest", e))?;
        let base = manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        let phrases = self.config.error_phrases.clone();

        let results: Vec<Validated> = entries
            .par_iter()
            .map(|entry| process_snapshot(&SnapshotMeta::from_entry(entry, &base), &phrases))
            .collect();

        let mut extracted = Vec::new();
        let mut rejections = Vec::new();
        for outcome in results {
            match outcome {
                Validated::Accepted(doc) => extracted.push(ExtractedLine {
                    snapshot_id: doc.snapshot_id,
                    text: doc.text,
                    char_count: doc.char_count,
                }),
                Validated::Rejected(r) => rejections.push(RejectionLine {
                    snapshot_id: r.snapshot_id,
                    reason: r.reason,
                }),
            }
        }
        write_jsonl(&self.artifact("extracted.jsonl"), &extracted, "ingest")?;
        write_jsonl(&self.artifact("rejections.jsonl"), &rejections, "ingest")
    }

    fn run_normalize(&self) -> Result<(), CliError> {
        let extracted: Vec<ExtractedLine> =
            read_jsonl(&self.artifact("extracted.jsonl"), "normalize")?;
        let mut normalizer = Normalizer::default();
        if let Some(path) = &self.config.stopwords {
            normalizer = normalizer
                .with_stopwords_file(path)
                .map_err(|e| CliError::Config {
                    key: "stopwords".into(),
                    message: e.to_string(),
                })?;
        }
        if let Some(path) = &self.config.lemma_table {
            normalizer = normalizer
                .with_lemma_file(path)
                .map_err(|e| CliError::Config {
                    key: "lemma_table".into(),
                    message: e.to_string(),
                })?;
        }

        struct DocOutcome {
            language: LanguageLine,
            tokens: Option<TokensLine>,
            rejection: Option<RejectionLine>,
        }
        let outcomes: Vec<DocOutcome> = extracted
            .par_iter()
            .map(|doc| {
                let verdict = detect_language(&doc.text);
                if !is_retained(&verdict) {
                    return DocOutcome {
                        language: LanguageLine {
                            snapshot_id: doc.snapshot_id.clone(),
                            lang: verdict.lang.code().to_string(),
                            confidence: verdict.confidence,
                            retained: false,
                            reason: Some("non_english".into()),
                        },
                        tokens: None,
                        rejection: None,
                    };
                }
                let tokens = normalizer.normalize_text(&doc.text);
                if tokens.is_empty() {
                    DocOutcome {
                        language: LanguageLine {
                            snapshot_id: doc.snapshot_id.clone(),
                            lang: verdict.lang.code().to_string(),
                            confidence: verdict.confidence,
                            retained: false,
                            reason: Some("non_informational".into()),
                        },
                        tokens: None,
                        rejection: Some(RejectionLine {
                            snapshot_id: doc.snapshot_id.clone(),
                            reason: RejectionReason::NonInformational,
                        }),
                    }
                } else {
                    DocOutcome {
                        language: LanguageLine {
                            snapshot_id: doc.snapshot_id.clone(),
                            lang: verdict.lang.code().to_string(),
                            confidence: verdict.confidence,
                            retained: true,
                            reason: None,
                        },
                        tokens: Some(TokensLine {
                            snapshot_id: doc.snapshot_id.clone(),
                            tokens,
                        }),
                        rejection: None,
                    }
                }
            })
            .collect();

        let language: Vec<&LanguageLine> = outcomes.iter().map(|o| &o.language).collect();
        let tokens: Vec<&TokensLine> = outcomes.iter().filter_map(|o| o.tokens.as_ref()).collect();
        let rejections: Vec<&RejectionLine> =
            outcomes.iter().filter_map(|o| o.rejection.as_ref()).collect();
        write_jsonl(&self.artifact("language.jsonl"), &language, "normalize")?;
        write_jsonl(&self.artifact("tokens.jsonl"), &tokens, "normalize")?;
        write_jsonl(
            &self.artifact("normalize_rejections.jsonl"),
            &rejections,
            "normalize",
        )
    }

    fn run_corpus(&self) -> Result<(), CliError> {
        let tokens: Vec<TokensLine> = read_jsonl(&self.artifact("tokens.jsonl"), "corpus")?;
        let token_map: BTreeMap<String, Vec<String>> = tokens
            .into_iter()
            .map(|t| (t.snapshot_id, t.tokens))
            .collect();
        let manifest_path = self.manifest_path()?;
        let entries = load_manifest(&manifest_path).map_err(|e| CliError::stage("corpus", e))?;

        let mut accepted = Vec::new();
        for entry in &entries {
            if !token_map.contains_key(&entry.snapshot_id) {
                continue;
            }
            let timestamp = DateTime::parse_from_rfc3339(entry.timestamp.trim())
                .map_err(|e| {
                    CliError::stage("corpus", format!("snapshot {}: {e}", entry.snapshot_id))
                })?
                .with_timezone(&Utc);
            accepted.push((
                website_key(&entry.website_path, &entry.page_title),
                SnapshotRef {
                    snapshot_id: entry.snapshot_id.clone(),
                    timestamp,
                },
            ));
        }

        // Dedup buckets are absolute calendar quarters, independent of the
        // analysis epoch.
        let abs_quarter = |t: &DateTime<Utc>| {
            use chrono::Datelike;
            i64::from(t.year()) * 4 + i64::from((t.month() - 1) / 3)
        };
        let (histories, counts) = build_corpus(
            accepted,
            |id| token_map.get(id).cloned(),
            abs_quarter,
        );

        let records: Vec<_> = histories.iter().map(|h| h.to_record()).collect();
        write_jsonl(&self.artifact("websites.jsonl"), &records, "corpus")?;
        let stats = serde_json::to_string_pretty(&counts).expect("counts serialize");
        atomic_write(&self.artifact("corpus_stats.json"), stats.as_bytes())
            .map_err(|e| CliError::stage("corpus", e))
    }

    /// Snapshot ids retained by the corpus stage, in canonical (ascending)
    /// document order shared by vectors.tsv / reduced.tsv / assignments.tsv.
    fn retained_ids(&self, stage: &str) -> Result<Vec<String>, CliError> {
        let records: Vec<darkspan_core::corpus::WebsiteRecord> =
            read_jsonl(&self.artifact("websites.jsonl"), stage)?;
        let mut ids: Vec<String> = records
            .into_iter()
            .flat_map(|r| r.snapshot_ids)
            .collect();
        ids.sort();
        Ok(ids)
    }

    fn run_embed(&self) -> Result<(), CliError> {
        let ids = self.retained_ids("embed")?;
        let dim = self.config.embed_dim;
        let mut set = VectorSet::new(dim);
        match self.config.embed_kind {
            ProviderKind::Hashing => {
                let tokens: Vec<TokensLine> = read_jsonl(&self.artifact("tokens.jsonl"), "embed")?;
                let token_map: BTreeMap<String, Vec<String>> = tokens
                    .into_iter()
                    .map(|t| (t.snapshot_id, t.tokens))
                    .collect();
                let seed = self.config.seed;
                let rows: Vec<Vec<f64>> = ids
                    .par_iter()
                    .map(|id| {
                        let empty = Vec::new();
                        let toks = token_map.get(id).unwrap_or(&empty);
                        embed_hashing(toks, dim, seed)
                    })
                    .collect();
                for (id, row) in ids.iter().zip(rows) {
                    set.push(id.clone(), row);
                }
            }
            ProviderKind::ExternalFile => {
                let path = self.config.embed_vectors.as_ref().ok_or(CliError::Config {
                    key: "embed.vectors".into(),
                    message: "external embedding provider needs a vectors path".into(),
                })?;
                let external = load_vectors(path).map_err(|e| CliError::stage("embed", e))?;
                if external.dim != dim {
                    return Err(CliError::Config {
                        key: "embed.dim".into(),
                        message: format!(
                            "configured dim {} but vectors file declares {}",
                            dim, external.dim
                        ),
                    });
                }
                let index = external.index();
                set = VectorSet::new(external.dim);
                for id in &ids {
                    let row = index.get(id.as_str()).ok_or_else(|| {
                        CliError::stage("embed", format!("vectors file missing snapshot {id}"))
                    })?;
                    set.push(id.clone(), external.rows[*row].clone());
                }
            }
        }
        set.save(&self.artifact("vectors.tsv"))
            .map_err(|e| CliError::stage("embed", e))
    }

    fn run_reduce(&self) -> Result<(), CliError> {
        let vectors =
            VectorSet::load(&self.artifact("vectors.tsv")).map_err(|e| CliError::stage("reduce", e))?;
        let cfg = self.config.reduce_config();
        let reduced = reduce(&vectors.rows, &cfg).map_err(|e| CliError::stage("reduce", e))?;

        let mut out = VectorSet::new(cfg.n_components);
        for (id, row) in vectors.ids.iter().zip(&reduced) {
            out.push(id.clone(), row.clone());
        }
        out.save(&self.artifact("reduced.tsv"))
            .map_err(|e| CliError::stage("reduce", e))?;

        // Embedding-quality diagnostic on a deterministic stride subsample.
        let n = vectors.rows.len();
        let k = 10usize;
        let stride = n.div_ceil(300).max(1);
        let sample: Vec<usize> = (0..n).step_by(stride).collect();
        let quality = if sample.len() > 2 * k + 1 {
            let orig: Vec<Vec<f64>> = sample.iter().map(|&i| vectors.rows[i].clone()).collect();
            let red: Vec<Vec<f64>> = sample.iter().map(|&i| reduced[i].clone()).collect();
            let t = trustworthiness(&orig, &red, k, cfg.metric)
                .map_err(|e| CliError::stage("reduce", e))?;
            serde_json::json!({"trustworthiness_k10": t, "sample_size": sample.len()})
        } else {
            serde_json::json!({"trustworthiness_k10": null, "sample_size": sample.len()})
        };
        atomic_write(
            &self.artifact("reduce_quality.json"),
            format!("{quality:#}\n").as_bytes(),
        )
        .map_err(|e| CliError::stage("reduce", e))
    }

    fn run_cluster(&self) -> Result<(), CliError> {
        let reduced = VectorSet::load(&self.artifact("reduced.tsv"))
            .map_err(|e| CliError::stage("cluster", e))?;
        let cfg = self.config.cluster_config();
        let result = hdbscan(&reduced.rows, &cfg);

        let memberships: Vec<darkspan_core::cluster::MembershipVector> = (0..reduced.rows.len())
            .into_par_iter()
            .map(|i| membership_vector(i, &result, &reduced.rows, cfg.noise_outlier_mass))
            .collect();

        let mut out = String::new();
        for (i, id) in reduced.ids.iter().enumerate() {
            let mv = &memberships[i];
            let mut pairs: Vec<String> = mv
                .probabilities
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(topic, p)| format!("{topic}:{p}"))
                .collect();
            if mv.outlier_mass > 0.0 {
                pairs.push(format!("outlier:{}", mv.outlier_mass));
            }
            let _ = writeln!(out, "{id}\t{}\t{}", result.labels[i], pairs.join(" "));
        }
        atomic_write(&self.artifact("assignments.tsv"), out.as_bytes())
            .map_err(|e| CliError::stage("cluster", e))?;

        let tree = CondensedTreeFile {
            n_clusters: result.n_clusters,
            nodes: result.condensed_tree.clone(),
            exemplars: result.exemplars.clone(),
            stabilities: result.stabilities.clone(),
        };
        let mut text = serde_json::to_string_pretty(&tree).expect("tree serializes");
        text.push('\n');
        atomic_write(&self.artifact("condensed_tree.json"), text.as_bytes())
            .map_err(|e| CliError::stage("cluster", e))
    }

    fn run_topics(&self) -> Result<(), CliError> {
        let assignments = self.read_assignments("topics")?;
        let tokens: Vec<TokensLine> = read_jsonl(&self.artifact("tokens.jsonl"), "topics")?;
        let token_map: BTreeMap<String, Vec<String>> = tokens
            .into_iter()
            .map(|t| (t.snapshot_id, t.tokens))
            .collect();

        // Class token multisets from hard labels; noise (−1) excluded.
        let mut classes: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for row in &assignments {
            if row.label >= 0 {
                if let Some(toks) = token_map.get(&row.snapshot_id) {
                    classes
                        .entry(row.label as usize)
                        .or_default()
                        .extend(toks.iter().cloned());
                }
            }
        }

        let mut raw_reps = ctfidf(&classes, self.config.topics_top_k)
            .map_err(|e| CliError::stage("topics", e))?;
        label_with_template(&mut raw_reps);
        match self.config.topics_label_mode {
            LabelMode::Template => {}
            LabelMode::Override => {
                let path = self.config.topics_overrides.as_ref().ok_or(CliError::Config {
                    key: "topics.overrides".into(),
                    message: "override label mode needs an overrides file".into(),
                })?;
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::stage("topics", format!("{}: {e}", path.display())))?;
                let overrides = parse_label_file(&text).map_err(|e| CliError::stage("topics", e))?;
                apply_label_overrides(&mut raw_reps, &overrides, LabelSource::Override)
                    .map_err(|e| CliError::stage("topics", e))?;
            }
            LabelMode::External => {
                // Emit the exact prompt per topic; apply responses when the
                // file is present (two-phase workflow).
                let prompts: Vec<serde_json::Value> = raw_reps
                    .values()
                    .map(|rep| {
                        serde_json::json!({
                            "topic_id": rep.topic_id,
                            "prompt": label_prompt(rep),
                        })
                    })
                    .collect();
                let mut text = String::new();
                for p in &prompts {
                    let _ = writeln!(text, "{p}");
                }
                atomic_write(&self.artifact("label_prompts.jsonl"), text.as_bytes())
                    .map_err(|e| CliError::stage("topics", e))?;
                match &self.config.topics_responses {
                    Some(path) if path.exists() => {
                        let text = fs::read_to_string(path).map_err(|e| {
                            CliError::stage("topics", format!("{}: {e}", path.display()))
                        })?;
                        let responses: Vec<(usize, String)> = parse_label_file(&text)
                            .map_err(|e| CliError::stage("topics", e))?
                            .into_iter()
                            .map(|(id, label)| (id, truncate_label(&label)))
                            .collect();
                        apply_label_overrides(&mut raw_reps, &responses, LabelSource::External)
                            .map_err(|e| CliError::stage("topics", e))?;
                    }
                    _ => eprintln!(
                        "darkspan: label prompts written; configure topics.responses to apply external labels"
                    ),
                }
            }
        }

        let merge_map = match &self.config.topics_merge_map {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::stage("topics", format!("{}: {e}", path.display())))?;
                MergeMap::parse(&text).map_err(|e| CliError::stage("topics", e))?
            }
            None => MergeMap::default(),
        };
        let raw_labels: BTreeMap<usize, String> = raw_reps
            .iter()
            .map(|(&id, rep)| (id, rep.label.clone()))
            .collect();
        let (merged, raw_to_merged) =
            merge_registry(&raw_labels, &merge_map).map_err(|e| CliError::stage("topics", e))?;

        // Keywords for merged topics: c-TF-IDF over merged classes.
        let mut merged_classes: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for (raw_id, class_tokens) in &classes {
            merged_classes
                .entry(raw_to_merged[raw_id])
                .or_default()
                .extend(class_tokens.iter().cloned());
        }
        let merged_reps = if merged_classes.is_empty() {
            BTreeMap::new()
        } else {
            ctfidf(&merged_classes, self.config.topics_top_k)
                .map_err(|e| CliError::stage("topics", e))?
        };

        let categories: BTreeMap<String, String> = match &self.config.topics_categories {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::stage("topics", format!("{}: {e}", path.display())))?;
                parse_label_file_str(&text).map_err(|e| CliError::stage("topics", e))?
            }
            None => BTreeMap::new(),
        };

        let reports: Vec<TopicReport> = merged
            .iter()
            .map(|m| {
                let source = if merge_map.entries.keys().any(|k| m.raw_ids.contains(k)) {
                    "override".to_string()
                } else {
                    match raw_reps[&m.raw_ids[0]].label_source {
                        LabelSource::Template => "template".into(),
                        LabelSource::Override => "override".into(),
                        LabelSource::External => "external".into(),
                    }
                };
                TopicReport {
                    merged_id: m.merged_id,
                    label: m.label.clone(),
                    label_source: source,
                    category: categories
                        .get(&m.label)
                        .cloned()
                        .unwrap_or_else(|| "Uncategorized".to_string()),
                    raw_ids: m.raw_ids.clone(),
                    top_terms: merged_reps
                        .get(&m.merged_id)
                        .map(|r| r.top_terms.clone())
                        .unwrap_or_default(),
                }
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&reports).expect("topics serialize");
        text.push('\n');
        atomic_write(&self.artifact("topics.json"), text.as_bytes())
            .map_err(|e| CliError::stage("topics", e))?;

        // Merged per-document distributions.
        let mut out = String::new();
        for row in &assignments {
            let merged_probs = apply_merge_map(&row.probabilities, &raw_to_merged)
                .map_err(|e| CliError::stage("topics", e))?;
            let mut pairs: Vec<String> = merged_probs
                .iter()
                .filter(|(_, p)| **p > 0.0)
                .map(|(topic, p)| format!("{topic}:{p}"))
                .collect();
            if row.outlier_mass > 0.0 {
                pairs.push(format!("outlier:{}", row.outlier_mass));
            }
            let merged_label = row
                .label
                .try_into()
                .ok()
                .and_then(|l: usize| raw_to_merged.get(&l).copied())
                .map(|m| m as i64)
                .unwrap_or(-1);
            let _ = writeln!(out, "{}\t{}\t{}", row.snapshot_id, merged_label, pairs.join(" "));
        }
        atomic_write(&self.artifact("merged.tsv"), out.as_bytes())
            .map_err(|e| CliError::stage("topics", e))
    }

    fn run_timeline(&self) -> Result<(), CliError> {
        let merged = self.read_distributions("merged.tsv", "timeline")?;
        let topic_reports = self.read_topics("timeline")?;
        let n_topics = topic_reports.len();
        let labels: Vec<String> = topic_reports.iter().map(|t| t.label.clone()).collect();

        let manifest_path = self.manifest_path()?;
        let entries = load_manifest(&manifest_path).map_err(|e| CliError::stage("timeline", e))?;
        let times: BTreeMap<&str, &str> = entries
            .iter()
            .map(|e| (e.snapshot_id.as_str(), e.timestamp.as_str()))
            .collect();

        let mut docs: Vec<(DocDistribution, Period)> = Vec::with_capacity(merged.len());
        for row in merged {
            let raw_time = times.get(row.snapshot_id.as_str()).ok_or_else(|| {
                CliError::stage("timeline", format!("snapshot {} not in manifest", row.snapshot_id))
            })?;
            let timestamp = DateTime::parse_from_rfc3339(raw_time.trim())
                .map_err(|e| CliError::stage("timeline", format!("{}: {e}", row.snapshot_id)))?
                .with_timezone(&Utc);
            let period = bucket(timestamp, self.config.epoch).map_err(|e| CliError::Config {
                key: "epoch".into(),
                message: format!("{e}; configure an earlier `epoch`"),
            })?;
            docs.push((
                DocDistribution {
                    snapshot_id: row.snapshot_id,
                    probabilities: row.probabilities,
                    outlier_mass: row.outlier_mass,
                },
                period,
            ));
        }

        let table = aggregate_prevalence(&docs, n_topics, self.config.include_outliers_in_denominator);
        write_prevalence_csv(&self.artifact("prevalence.csv"), &table, &labels)?;

        let conc = concentration(&table.global_share);
        let mut text = serde_json::to_string_pretty(&conc).expect("concentration serializes");
        text.push('\n');
        atomic_write(&self.artifact("concentration.json"), text.as_bytes())
            .map_err(|e| CliError::stage("timeline", e))?;

        let category_map: BTreeMap<String, String> = topic_reports
            .iter()
            .map(|t| (t.label.clone(), t.category.clone()))
            .collect();
        let rollup = category_rollup(&table.global_share, &labels, &category_map);
        write_categories_csv(&self.artifact("categories.csv"), &rollup)
    }

    fn run_lifecycle(&self) -> Result<(), CliError> {
        let (table, labels) = self.read_prevalence("lifecycle")?;
        let rule = self.config.classify_rule();
        let mut metrics: Vec<LifecycleMetrics> = Vec::new();
        let mut inactive = 0usize;
        for topic in 0..table.n_topics {
            match lifecycle_metrics(
                topic,
                table.topic_series(topic),
                self.config.lifecycle_tau,
                table.n_periods,
            ) {
                Ok(mut m) => {
                    m.class = classify(&m, table.n_periods, rule);
                    metrics.push(m);
                }
                Err(_) => inactive += 1,
            }
        }

        write_lifecycle_csv(&self.artifact("lifecycle.csv"), &metrics, &labels)?;
        if let Some(cohort) = cohort_summary(&metrics, table.n_periods) {
            write_lifecycle_summary(
                &self.artifact("lifecycle_summary.json"),
                &cohort,
                metrics.len(),
                inactive,
                table.n_periods,
            )?;
        } else {
            atomic_write(
                &self.artifact("lifecycle_summary.json"),
                b"{\n  \"n_topics\": 0\n}\n",
            )
            .map_err(|e| CliError::stage("lifecycle", e))?;
        }
        write_plotdata(&self.artifact("plotdata"), &table, &labels, &metrics)
    }

    // -----------------------------------------------------------------------
    // Artifact readers
    // -----------------------------------------------------------------------

    pub fn read_topics(&self, stage: &str) -> Result<Vec<TopicReport>, CliError> {
        let path = self.artifact("topics.json");
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::stage(stage, format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::stage(stage, format!("{}: {e}", path.display())))
    }

    pub fn read_assignments(&self, stage: &str) -> Result<Vec<AssignmentRow>, CliError> {
        self.read_distributions("assignments.tsv", stage)
    }

    pub fn read_distributions(
        &self,
        name: &str,
        stage: &str,
    ) -> Result<Vec<AssignmentRow>, CliError> {
        let path = self.artifact(name);
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::stage(stage, format!("cannot read {}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let (id, label, pairs) = (parts.next(), parts.next(), parts.next());
            let (id, label) = match (id, label) {
                (Some(id), Some(label)) => (id, label),
                _ => {
                    return Err(CliError::stage(
                        stage,
                        format!("{}:{}: malformed row", path.display(), idx + 1),
                    ))
                }
            };
            let label: i64 = label.parse().map_err(|_| {
                CliError::stage(stage, format!("{}:{}: bad label", path.display(), idx + 1))
            })?;
            let mut probabilities = BTreeMap::new();
            let mut outlier_mass = 0.0;
            for pair in pairs.unwrap_or("").split(' ').filter(|p| !p.is_empty()) {
                let (topic, p) = pair.split_once(':').ok_or_else(|| {
                    CliError::stage(stage, format!("{}:{}: bad pair {pair:?}", path.display(), idx + 1))
                })?;
                let p: f64 = p.parse().map_err(|_| {
                    CliError::stage(stage, format!("{}:{}: bad probability", path.display(), idx + 1))
                })?;
                if topic == "outlier" {
                    outlier_mass = p;
                } else {
                    let topic: usize = topic.parse().map_err(|_| {
                        CliError::stage(stage, format!("{}:{}: bad topic id", path.display(), idx + 1))
                    })?;
                    probabilities.insert(topic, p);
                }
            }
            rows.push(AssignmentRow {
                snapshot_id: id.to_string(),
                label,
                probabilities,
                outlier_mass,
            });
        }
        Ok(rows)
    }

    /// Rebuild the prevalence table from prevalence.csv.
    pub fn read_prevalence(&self, stage: &str) -> Result<(PrevalenceTable, Vec<String>), CliError> {
        let path = self.artifact("prevalence.csv");
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::stage(stage, format!("cannot read {}: {e}", path.display())))?;
        let mut mass: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
        let mut share: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
        let mut labels: BTreeMap<usize, String> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let fields = parse_csv_row(line);
            if fields.len() != 5 {
                return Err(CliError::stage(
                    stage,
                    format!("{}:{}: expected 5 fields", path.display(), idx + 1),
                ));
            }
            let topic: usize = fields[0].parse().map_err(|_| {
                CliError::stage(stage, format!("{}:{}: bad topic id", path.display(), idx + 1))
            })?;
            let period: usize = fields[2].parse().map_err(|_| {
                CliError::stage(stage, format!("{}:{}: bad period", path.display(), idx + 1))
            })?;
            let m: f64 = fields[3].parse().map_err(|_| {
                CliError::stage(stage, format!("{}:{}: bad mass", path.display(), idx + 1))
            })?;
            let s: f64 = fields[4].parse().map_err(|_| {
                CliError::stage(stage, format!("{}:{}: bad share", path.display(), idx + 1))
            })?;
            labels.insert(topic, fields[1].clone());
            mass.entry(topic).or_default().insert(period, m);
            share.entry(topic).or_default().insert(period, s);
        }
        let n_topics = mass.len();
        let n_periods = mass
            .values()
            .flat_map(|m| m.keys().copied())
            .max()
            .map_or(0, |p| p + 1);
        let to_matrix = |src: &BTreeMap<usize, BTreeMap<usize, f64>>| -> Vec<Vec<f64>> {
            (0..n_topics)
                .map(|t| {
                    (0..n_periods)
                        .map(|p| src.get(&t).and_then(|m| m.get(&p)).copied().unwrap_or(0.0))
                        .collect()
                })
                .collect()
        };
        let mass_m = to_matrix(&mass);
        let share_m = to_matrix(&share);
        let grand: f64 = mass_m.iter().flatten().sum();
        let global_share: Vec<f64> = (0..n_topics)
            .map(|t| {
                if grand > 0.0 {
                    mass_m[t].iter().sum::<f64>() / grand
                } else {
                    0.0
                }
            })
            .collect();
        let empty_periods: Vec<usize> = (0..n_periods)
            .filter(|&p| (0..n_topics).all(|t| mass_m[t][p] == 0.0))
            .collect();
        let table = PrevalenceTable {
            n_topics,
            n_periods,
            mass: mass_m,
            share: share_m,
            outlier_mass: vec![0.0; n_periods],
            global_share,
            empty_periods,
        };
        let labels = (0..n_topics)
            .map(|t| labels.get(&t).cloned().unwrap_or_default())
            .collect();
        Ok((table, labels))
    }
}

/// Per-document assignment/distribution row.
#[derive(Debug, Clone)]
pub struct AssignmentRow {
    pub snapshot_id: String,
    pub label: i64,
    pub probabilities: BTreeMap<usize, f64>,
    pub outlier_mass: f64,
}

/// `final_label<TAB>category` lines.
fn parse_label_file_str(
    text: &str,
) -> Result<BTreeMap<String, String>, darkspan_core::topics::TopicsError> {
    let mut map = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, category) =
            line.split_once('\t')
                .ok_or(darkspan_core::topics::TopicsError::MalformedLine {
                    line: idx + 1,
                    text: line.to_string(),
                })?;
        map.insert(label.trim().to_string(), category.trim().to_string());
    }
    Ok(map)
}

/// Minimal CSV row parser for our own quoted output.
fn parse_csv_row(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut field = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        match c {
            '"' if field.is_empty() && !quoted => quoted = true,
            '"' if quoted => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    field.push('"');
                } else {
                    quoted = false;
                }
            }
            ',' if !quoted => {
                fields.push(std::mem::take(&mut field));
            }
            c => field.push(c),
        }
    }
    fields.push(field);
    fields
}

/// Build a simulation plan from the run configuration.
pub fn sim_plan_from_config(config: &RunConfig) -> Result<darkspan_core::simulate::SimPlan, CliError> {
    if config.sim_topics.is_empty() {
        return Err(CliError::Config {
            key: "sim.topics".into(),
            message: "simulate needs at least one shape:base entry".into(),
        });
    }
    let topics = config
        .sim_topics
        .iter()
        .enumerate()
        .map(|(i, spec)| darkspan_core::simulate::SimTopic {
            name: format!("topic{i:02}"),
            vocabulary: darkspan_core::simulate::synthetic_vocabulary(i, config.sim_vocab_size),
            shape: spec.shape,
            base_docs_per_period: spec.base,
        })
        .collect();
    Ok(darkspan_core::simulate::SimPlan {
        topics,
        n_websites: config.sim_n_websites,
        periods: config.sim_periods,
        seed: config.seed,
    })
}

/// Directory tree comparison for determinism checks: relative path → digest.
pub fn tree_digests(root: &Path) -> std::io::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap_or(&path)
                    .to_string_lossy()
                    .to_string();
                out.insert(rel, file_digest(&path)?);
            }
        }
    }
    Ok(out)
}

