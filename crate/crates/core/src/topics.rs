//! Topic representation and curation: class-based TF-IDF keywords, label
//! adapters (template / override file / external prompt+response), human
//! merge maps, and annotator agreement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TOP_K: usize = 10;

/// How many whitespace-separated words an externally supplied label may keep.
pub const MAX_LABEL_WORDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Template,
    Override,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRepresentation {
    pub topic_id: usize,
    /// Descending by weight, ties by term ascending.
    pub top_terms: Vec<(String, f64)>,
    pub label: String,
    pub label_source: LabelSource,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopicsError {
    #[error("class {topic_id} has no tokens")]
    EmptyClass { topic_id: usize },
    #[error("unknown raw topic id {topic_id}")]
    UnknownRawTopic { topic_id: usize },
    #[error("label for topic {topic_id} is empty")]
    EmptyLabel { topic_id: usize },
    #[error("malformed line {line}: {text}")]
    MalformedLine { line: usize, text: String },
}

/// Class-based TF-IDF: W(t,c) = tf(t,c) · ln(1 + A / f(t)) with A the mean
/// total token count per class and f(t) the term's total count across all
/// classes. Natural logarithm; base changes scale, not ranking.
pub fn ctfidf(
    class_tokens: &BTreeMap<usize, Vec<String>>,
    top_k: usize,
) -> Result<BTreeMap<usize, TopicRepresentation>, TopicsError> {
    for (&topic_id, tokens) in class_tokens {
        if tokens.is_empty() {
            return Err(TopicsError::EmptyClass { topic_id });
        }
    }
    let n_classes = class_tokens.len();
    if n_classes == 0 {
        return Ok(BTreeMap::new());
    }

    let mut corpus_freq: BTreeMap<&str, f64> = BTreeMap::new();
    let mut total_tokens = 0usize;
    for tokens in class_tokens.values() {
        total_tokens += tokens.len();
        for t in tokens {
            *corpus_freq.entry(t.as_str()).or_insert(0.0) += 1.0;
        }
    }
    let avg_class_tokens = total_tokens as f64 / n_classes as f64;

    let mut reps = BTreeMap::new();
    for (&topic_id, tokens) in class_tokens {
        let mut tf: BTreeMap<&str, f64> = BTreeMap::new();
        for t in tokens {
            *tf.entry(t.as_str()).or_insert(0.0) += 1.0;
        }
        let mut weighted: Vec<(String, f64)> = tf
            .into_iter()
            .map(|(term, count)| {
                let f = corpus_freq[term];
                (term.to_string(), count * (1.0 + avg_class_tokens / f).ln())
            })
            .collect();
        weighted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        weighted.truncate(top_k);
        reps.insert(
            topic_id,
            TopicRepresentation {
                topic_id,
                top_terms: weighted,
                label: String::new(),
                label_source: LabelSource::Template,
            },
        );
    }
    Ok(reps)
}

/// c-TF-IDF weight of a single (term, class) pair; zero when absent.
pub fn ctfidf_weight(reps_input: &BTreeMap<usize, Vec<String>>, term: &str, class: usize) -> f64 {
    let tokens = match reps_input.get(&class) {
        Some(t) => t,
        None => return 0.0,
    };
    let tf = tokens.iter().filter(|t| t.as_str() == term).count() as f64;
    if tf == 0.0 {
        return 0.0;
    }
    let f: usize = reps_input
        .values()
        .map(|ts| ts.iter().filter(|t| t.as_str() == term).count())
        .sum();
    let total: usize = reps_input.values().map(Vec::len).sum();
    let avg = total as f64 / reps_input.len() as f64;
    tf * (1.0 + avg / f as f64).ln()
}

fn title_case(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Default label: the top three terms, space-joined and title-cased.
pub fn template_label(rep: &TopicRepresentation) -> String {
    rep.top_terms
        .iter()
        .take(3)
        .map(|(term, _)| title_case(term))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Truncate an externally supplied label to at most four words.
pub fn truncate_label(label: &str) -> String {
    label
        .split_whitespace()
        .take(MAX_LABEL_WORDS)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Apply template labels to every representation.
pub fn label_with_template(reps: &mut BTreeMap<usize, TopicRepresentation>) {
    for rep in reps.values_mut() {
        rep.label = template_label(rep);
        rep.label_source = LabelSource::Template;
    }
}

/// Parse `topic_id<TAB>label` lines (override files and external label
/// responses share the shape).
pub fn parse_label_file(text: &str) -> Result<Vec<(usize, String)>, TopicsError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, label) = line
            .split_once('\t')
            .ok_or_else(|| TopicsError::MalformedLine {
                line: idx + 1,
                text: line.to_string(),
            })?;
        let id: usize = id.trim().parse().map_err(|_| TopicsError::MalformedLine {
            line: idx + 1,
            text: line.to_string(),
        })?;
        out.push((id, label.trim().to_string()));
    }
    Ok(out)
}

/// Replace labels for the listed topics; unknown ids and empty labels are
/// errors.
pub fn apply_label_overrides(
    reps: &mut BTreeMap<usize, TopicRepresentation>,
    overrides: &[(usize, String)],
    source: LabelSource,
) -> Result<(), TopicsError> {
    for (topic_id, label) in overrides {
        let rep = reps
            .get_mut(topic_id)
            .ok_or(TopicsError::UnknownRawTopic { topic_id: *topic_id })?;
        let label = if source == LabelSource::External {
            truncate_label(label)
        } else {
            label.clone()
        };
        if label.is_empty() {
            return Err(TopicsError::EmptyLabel { topic_id: *topic_id });
        }
        rep.label = label;
        rep.label_source = source;
    }
    Ok(())
}

/// The external-labeler prompt for one topic, with the top terms
/// comma-joined into the topic-words slot.
pub fn label_prompt(rep: &TopicRepresentation) -> String {
    let words = rep
        .top_terms
        .iter()
        .map(|(term, _)| term.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "Task: Generate a short topic label.\n\
         Rules:\n\
         - Output ONLY the label\n\
         - Maximum 4 words\n\
         - No punctuation\n\
         - No explanation\n\
         \n\
         Topic words: {words}\n\
         Label:"
    )
}

/// Human-curated merge map: raw topic id → final label. Raw topics absent
/// from the map keep their own label. Final labels induce merged topic ids
/// densely, in order of first appearance over ascending raw ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeMap {
    pub entries: BTreeMap<usize, String>,
}

impl MergeMap {
    pub fn parse(text: &str) -> Result<MergeMap, TopicsError> {
        let mut entries = BTreeMap::new();
        for (id, label) in parse_label_file(text)? {
            if label.is_empty() {
                return Err(TopicsError::EmptyLabel { topic_id: id });
            }
            entries.insert(id, label);
        }
        Ok(MergeMap { entries })
    }
}

/// Registry of merged topics with raw lineage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedTopic {
    pub merged_id: usize,
    pub label: String,
    pub raw_ids: Vec<usize>,
}

/// Resolve the raw → merged mapping. Errors if the map names a raw topic the
/// model does not have.
pub fn merge_registry(
    raw_labels: &BTreeMap<usize, String>,
    merge_map: &MergeMap,
) -> Result<(Vec<MergedTopic>, BTreeMap<usize, usize>), TopicsError> {
    for &raw_id in merge_map.entries.keys() {
        if !raw_labels.contains_key(&raw_id) {
            return Err(TopicsError::UnknownRawTopic { topic_id: raw_id });
        }
    }
    let mut merged: Vec<MergedTopic> = Vec::new();
    let mut by_label: BTreeMap<String, usize> = BTreeMap::new();
    let mut raw_to_merged: BTreeMap<usize, usize> = BTreeMap::new();
    for (&raw_id, own_label) in raw_labels {
        let final_label = merge_map.entries.get(&raw_id).unwrap_or(own_label);
        let merged_id = *by_label.entry(final_label.clone()).or_insert_with(|| {
            merged.push(MergedTopic {
                merged_id: merged.len(),
                label: final_label.clone(),
                raw_ids: Vec::new(),
            });
            merged.len() - 1
        });
        merged[merged_id].raw_ids.push(raw_id);
        raw_to_merged.insert(raw_id, merged_id);
    }
    Ok((merged, raw_to_merged))
}

/// Sum member raw-topic probabilities into merged topics; outlier mass is
/// untouched, so per-document total mass is conserved.
pub fn apply_merge_map(
    raw_probabilities: &BTreeMap<usize, f64>,
    raw_to_merged: &BTreeMap<usize, usize>,
) -> Result<BTreeMap<usize, f64>, TopicsError> {
    let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
    for (&raw_id, &p) in raw_probabilities {
        let merged_id = raw_to_merged
            .get(&raw_id)
            .ok_or(TopicsError::UnknownRawTopic { topic_id: raw_id })?;
        *merged.entry(*merged_id).or_insert(0.0) += p;
    }
    Ok(merged)
}

/// Inter-annotator agreement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AgreementError {
    #[error("label sequences differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("label sequences are empty")]
    Empty,
}

/// Cohen's kappa over two equal-length label sequences:
/// κ = (po − pe) / (1 − pe), with κ = 1 when both agreements are perfect.
pub fn cohen_kappa(labels_a: &[String], labels_b: &[String]) -> Result<AgreementReport, AgreementError> {
    if labels_a.len() != labels_b.len() {
        return Err(AgreementError::LengthMismatch {
            a: labels_a.len(),
            b: labels_b.len(),
        });
    }
    if labels_a.is_empty() {
        return Err(AgreementError::Empty);
    }
    let n = labels_a.len() as f64;
    let observed = labels_a
        .iter()
        .zip(labels_b)
        .filter(|(a, b)| a == b)
        .count() as f64
        / n;

    let mut count_a: BTreeMap<&str, f64> = BTreeMap::new();
    let mut count_b: BTreeMap<&str, f64> = BTreeMap::new();
    for (a, b) in labels_a.iter().zip(labels_b) {
        *count_a.entry(a.as_str()).or_insert(0.0) += 1.0;
        *count_b.entry(b.as_str()).or_insert(0.0) += 1.0;
    }
    let expected: f64 = count_a
        .iter()
        .map(|(cat, ca)| ca / n * count_b.get(cat).copied().unwrap_or(0.0) / n)
        .sum();

    let kappa = if expected >= 1.0 {
        if observed >= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (observed - expected) / (1.0 - expected)
    };
    Ok(AgreementReport {
        kappa,
        observed_agreement: observed,
        expected_agreement: expected,
    })
}
