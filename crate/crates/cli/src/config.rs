//! Flat `key = value` run configuration with `#` comments.
//!
//! Unknown keys are rejected by name; the canonical serialization of the
//! effective configuration (after CLI overrides) is stored with every run's
//! outputs and feeds the stage cache digests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use darkspan_core::cluster::ClusterConfig;
use darkspan_core::embed::{EmbeddingProviderConfig, ProviderKind};
use darkspan_core::lifecycle::{ClassifyRule, DEFAULT_ACTIVITY_THRESHOLD};
use darkspan_core::reduce::{Metric, ReduceConfig};
use darkspan_core::simulate::Shape;
use darkspan_core::timeline::Epoch;
use darkspan_core::topics::DEFAULT_TOP_K;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    Template,
    Override,
    External,
}

/// One planted topic request for the simulator: shape plus per-period base.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimTopicSpec {
    pub shape: Shape,
    pub base: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub epoch: Epoch,
    pub seed: u64,
    pub error_phrases: Vec<String>,
    pub stopwords: Option<PathBuf>,
    pub lemma_table: Option<PathBuf>,

    pub embed_kind: ProviderKind,
    pub embed_dim: usize,
    pub embed_vectors: Option<PathBuf>,

    pub reduce_n_components: usize,
    pub reduce_metric: Metric,
    pub reduce_n_neighbors: usize,
    pub reduce_n_epochs: usize,
    pub reduce_min_dist: f64,

    pub cluster_min_cluster_size: usize,
    pub cluster_min_samples: usize,
    pub cluster_noise_outlier_mass: f64,

    pub topics_top_k: usize,
    pub topics_label_mode: LabelMode,
    pub topics_overrides: Option<PathBuf>,
    pub topics_responses: Option<PathBuf>,
    pub topics_merge_map: Option<PathBuf>,
    pub topics_categories: Option<PathBuf>,

    pub include_outliers_in_denominator: bool,
    pub lifecycle_tau: f64,
    pub lifecycle_episodic_max_lifespan: usize,
    pub lifecycle_episodic_max_recurrence: usize,

    pub sim_topics: Vec<SimTopicSpec>,
    pub sim_n_websites: usize,
    pub sim_periods: usize,
    pub sim_vocab_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            epoch: Epoch::default(),
            seed: 0,
            error_phrases: darkspan_core::ingest::default_error_phrases(),
            stopwords: None,
            lemma_table: None,
            embed_kind: ProviderKind::Hashing,
            embed_dim: 256,
            embed_vectors: None,
            reduce_n_components: 5,
            reduce_metric: Metric::Cosine,
            reduce_n_neighbors: 15,
            reduce_n_epochs: 200,
            reduce_min_dist: 0.1,
            cluster_min_cluster_size: 80,
            cluster_min_samples: 90,
            cluster_noise_outlier_mass: 0.5,
            topics_top_k: DEFAULT_TOP_K,
            topics_label_mode: LabelMode::Template,
            topics_overrides: None,
            topics_responses: None,
            topics_merge_map: None,
            topics_categories: None,
            include_outliers_in_denominator: false,
            lifecycle_tau: DEFAULT_ACTIVITY_THRESHOLD,
            lifecycle_episodic_max_lifespan: 10,
            lifecycle_episodic_max_recurrence: 10,
            sim_topics: Vec::new(),
            sim_n_websites: 10,
            sim_periods: 25,
            sim_vocab_size: 40,
        }
    }
}

fn bad_key(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| bad_key(key, format!("cannot parse value {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(bad_key(key, format!("expected true/false, got {other:?}"))),
    }
}

impl RunConfig {
    /// Parse config text; every assignment must name a known key.
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Config {
                key: format!("line {}", idx + 1),
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            key: "config".into(),
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        RunConfig::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "epoch" => {
                self.epoch = Epoch::parse(value)
                    .ok_or_else(|| bad_key("epoch", format!("expected YYYY-Qn, got {value:?}")))?;
            }
            "seed" => self.seed = parse_num(key, value)?,
            "error_phrases" => {
                self.error_phrases = value
                    .split(',')
                    .map(|p| p.trim().to_lowercase())
                    .filter(|p| !p.is_empty())
                    .collect();
            }
            "stopwords" => self.stopwords = Some(PathBuf::from(value)),
            "lemma_table" => self.lemma_table = Some(PathBuf::from(value)),
            "embed.kind" => {
                self.embed_kind = match value {
                    "hashing" => ProviderKind::Hashing,
                    "external" => ProviderKind::ExternalFile,
                    other => {
                        return Err(bad_key(key, format!("expected hashing|external, got {other:?}")))
                    }
                };
            }
            "embed.dim" => {
                self.embed_dim = parse_num(key, value)?;
                if self.embed_dim < 8 {
                    return Err(bad_key(key, "embedding dimension must be at least 8"));
                }
            }
            "embed.vectors" => self.embed_vectors = Some(PathBuf::from(value)),
            "reduce.n_components" => self.reduce_n_components = parse_num(key, value)?,
            "reduce.metric" => {
                self.reduce_metric = match value {
                    "cosine" => Metric::Cosine,
                    "euclidean" => Metric::Euclidean,
                    other => {
                        return Err(bad_key(key, format!("expected cosine|euclidean, got {other:?}")))
                    }
                };
            }
            "reduce.n_neighbors" => self.reduce_n_neighbors = parse_num(key, value)?,
            "reduce.n_epochs" => self.reduce_n_epochs = parse_num(key, value)?,
            "reduce.min_dist" => self.reduce_min_dist = parse_num(key, value)?,
            "cluster.min_cluster_size" => self.cluster_min_cluster_size = parse_num(key, value)?,
            "cluster.min_samples" => self.cluster_min_samples = parse_num(key, value)?,
            "cluster.noise_outlier_mass" => {
                self.cluster_noise_outlier_mass = parse_num(key, value)?;
                if !(0.0..=1.0).contains(&self.cluster_noise_outlier_mass) {
                    return Err(bad_key(key, "must be within [0, 1]"));
                }
            }
            "topics.top_k" => self.topics_top_k = parse_num(key, value)?,
            "topics.label_mode" => {
                self.topics_label_mode = match value {
                    "template" => LabelMode::Template,
                    "override" => LabelMode::Override,
                    "external" => LabelMode::External,
                    other => {
                        return Err(bad_key(
                            key,
                            format!("expected template|override|external, got {other:?}"),
                        ))
                    }
                };
            }
            "topics.overrides" => self.topics_overrides = Some(PathBuf::from(value)),
            "topics.responses" => self.topics_responses = Some(PathBuf::from(value)),
            "topics.merge_map" => self.topics_merge_map = Some(PathBuf::from(value)),
            "topics.categories" => self.topics_categories = Some(PathBuf::from(value)),
            "timeline.include_outliers_in_denominator" => {
                self.include_outliers_in_denominator = parse_bool(key, value)?;
            }
            "lifecycle.tau" => self.lifecycle_tau = parse_num(key, value)?,
            "lifecycle.episodic_max_lifespan" => {
                self.lifecycle_episodic_max_lifespan = parse_num(key, value)?;
            }
            "lifecycle.episodic_max_recurrence" => {
                self.lifecycle_episodic_max_recurrence = parse_num(key, value)?;
            }
            "sim.topics" => {
                let mut topics = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    let (shape, base) = part.split_once(':').ok_or_else(|| {
                        bad_key(key, format!("expected shape:base, got {part:?}"))
                    })?;
                    let shape = Shape::parse(shape)
                        .ok_or_else(|| bad_key(key, format!("unknown shape {shape:?}")))?;
                    topics.push(SimTopicSpec {
                        shape,
                        base: parse_num(key, base)?,
                    });
                }
                self.sim_topics = topics;
            }
            "sim.n_websites" => self.sim_n_websites = parse_num(key, value)?,
            "sim.periods" => self.sim_periods = parse_num(key, value)?,
            "sim.vocab_size" => self.sim_vocab_size = parse_num(key, value)?,
            unknown => {
                return Err(CliError::Config {
                    key: unknown.to_string(),
                    message: "unknown configuration key".into(),
                })
            }
        }
        Ok(())
    }

    pub fn reduce_config(&self) -> ReduceConfig {
        ReduceConfig {
            n_components: self.reduce_n_components,
            metric: self.reduce_metric,
            n_neighbors: self.reduce_n_neighbors,
            n_epochs: self.reduce_n_epochs,
            min_dist: self.reduce_min_dist,
            seed: self.seed,
        }
    }

    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            min_cluster_size: self.cluster_min_cluster_size,
            min_samples: self.cluster_min_samples,
            noise_outlier_mass: self.cluster_noise_outlier_mass,
        }
    }

    pub fn embed_config(&self) -> EmbeddingProviderConfig {
        EmbeddingProviderConfig {
            kind: self.embed_kind,
            dim: self.embed_dim,
            seed: self.seed,
        }
    }

    pub fn classify_rule(&self) -> ClassifyRule {
        ClassifyRule {
            episodic_max_lifespan: self.lifecycle_episodic_max_lifespan,
            episodic_max_recurrence: self.lifecycle_episodic_max_recurrence,
        }
    }

    /// Canonical `key = value` rendering of the effective configuration.
    pub fn canonical(&self) -> String {
        let mut entries: BTreeMap<&str, String> = BTreeMap::new();
        if let Some(m) = &self.manifest {
            entries.insert("manifest", m.display().to_string());
        }
        entries.insert("epoch", self.epoch.to_string());
        entries.insert("seed", self.seed.to_string());
        entries.insert("error_phrases", self.error_phrases.join(","));
        if let Some(p) = &self.stopwords {
            entries.insert("stopwords", p.display().to_string());
        }
        if let Some(p) = &self.lemma_table {
            entries.insert("lemma_table", p.display().to_string());
        }
        entries.insert(
            "embed.kind",
            match self.embed_kind {
                ProviderKind::Hashing => "hashing".into(),
                ProviderKind::ExternalFile => "external".into(),
            },
        );
        entries.insert("embed.dim", self.embed_dim.to_string());
        if let Some(p) = &self.embed_vectors {
            entries.insert("embed.vectors", p.display().to_string());
        }
        entries.insert("reduce.n_components", self.reduce_n_components.to_string());
        entries.insert(
            "reduce.metric",
            match self.reduce_metric {
                Metric::Cosine => "cosine".into(),
                Metric::Euclidean => "euclidean".into(),
            },
        );
        entries.insert("reduce.n_neighbors", self.reduce_n_neighbors.to_string());
        entries.insert("reduce.n_epochs", self.reduce_n_epochs.to_string());
        entries.insert("reduce.min_dist", format!("{}", self.reduce_min_dist));
        entries.insert(
            "cluster.min_cluster_size",
            self.cluster_min_cluster_size.to_string(),
        );
        entries.insert("cluster.min_samples", self.cluster_min_samples.to_string());
        entries.insert(
            "cluster.noise_outlier_mass",
            format!("{}", self.cluster_noise_outlier_mass),
        );
        entries.insert("topics.top_k", self.topics_top_k.to_string());
        entries.insert(
            "topics.label_mode",
            match self.topics_label_mode {
                LabelMode::Template => "template".into(),
                LabelMode::Override => "override".into(),
                LabelMode::External => "external".into(),
            },
        );
        if let Some(p) = &self.topics_overrides {
            entries.insert("topics.overrides", p.display().to_string());
        }
        if let Some(p) = &self.topics_responses {
            entries.insert("topics.responses", p.display().to_string());
        }
        if let Some(p) = &self.topics_merge_map {
            entries.insert("topics.merge_map", p.display().to_string());
        }
        if let Some(p) = &self.topics_categories {
            entries.insert("topics.categories", p.display().to_string());
        }
        entries.insert(
            "timeline.include_outliers_in_denominator",
            self.include_outliers_in_denominator.to_string(),
        );
        entries.insert("lifecycle.tau", format!("{}", self.lifecycle_tau));
        entries.insert(
            "lifecycle.episodic_max_lifespan",
            self.lifecycle_episodic_max_lifespan.to_string(),
        );
        entries.insert(
            "lifecycle.episodic_max_recurrence",
            self.lifecycle_episodic_max_recurrence.to_string(),
        );
        if !self.sim_topics.is_empty() {
            let topics: Vec<String> = self
                .sim_topics
                .iter()
                .map(|t| {
                    let shape = match t.shape {
                        Shape::Bursting => "bursting",
                        Shape::Stable => "stable",
                        Shape::Emerging => "emerging",
                        Shape::Declining => "declining",
                        Shape::Episodic => "episodic",
                    };
                    format!("{shape}:{}", t.base)
                })
                .collect();
            entries.insert("sim.topics", topics.join(","));
        }
        entries.insert("sim.n_websites", self.sim_n_websites.to_string());
        entries.insert("sim.periods", self.sim_periods.to_string());
        entries.insert("sim.vocab_size", self.sim_vocab_size.to_string());

        let mut out = String::new();
        for (key, value) in entries {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_round_trip() {
        let cfg = RunConfig::default();
        let rendered = cfg.canonical();
        let back = RunConfig::parse(&rendered).unwrap();
        assert_eq!(back.canonical(), rendered);
    }

    #[test]
    fn unknown_key_rejected_by_name() {
        let err = RunConfig::parse("definitely_not_a_key = 1\n").unwrap_err();
        match err {
            CliError::Config { key, .. } => assert_eq!(key, "definitely_not_a_key"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = RunConfig::parse("# a comment\n\nseed = 9\n").unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn bad_value_names_the_key() {
        let err = RunConfig::parse("cluster.min_samples = ninety\n").unwrap_err();
        match err {
            CliError::Config { key, .. } => assert_eq!(key, "cluster.min_samples"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sim_topics_parse() {
        let cfg = RunConfig::parse("sim.topics = stable:8, bursting:6\n").unwrap();
        assert_eq!(cfg.sim_topics.len(), 2);
        assert_eq!(cfg.sim_topics[0].shape, Shape::Stable);
        assert_eq!(cfg.sim_topics[1].base, 6);
    }
}
