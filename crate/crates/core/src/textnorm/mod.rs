//! Text normalization: lowercasing, URL/email scrubbing, repeated-character
//! collapse, alphabetic tokenization, lemmatization, stopword and length
//! filtering.
//!
//! The rule order is fixed; see `normalize_text`. Output tokens contain only
//! `[a-z]`, have length 3..=25, and preserve input order.

mod langdetect;
mod lemma;
mod stopwords;

pub use langdetect::{
    detect_language, is_retained, Lang, LanguageVerdict, ENGLISH_CONFIDENCE_THRESHOLD,
};
pub use lemma::lemmatize;

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

pub const MIN_TOKEN_LEN: usize = 3;
pub const MAX_TOKEN_LEN: usize = 25;

#[derive(Debug, Error)]
pub enum NormalizeConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

// Span definitions for URL and email removal (documented deviation surface;
// the upstream tool's exact patterns are unspecified):
//   URL   = scheme "://" up to whitespace, or a bare host ending in ".onion"
//   email = local@host.tld with alphanumeric/._%+- local parts
static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[a-z][a-z0-9+.-]*://[^\s]+").unwrap());
static ONION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b[a-z0-9][a-z0-9.-]*\.onion\b").unwrap());
static EMAIL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[a-z0-9._%+-]+@[a-z0-9.-]+\.[a-z]{2,}").unwrap());

/// Stopword set and lemma table, bundled by default and overridable from
/// files (`--stopwords PATH`, `--lemma-table PATH`).
#[derive(Debug, Clone)]
pub struct Normalizer {
    stopwords: HashSet<String>,
    lemmas: HashMap<String, String>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer {
            stopwords: stopwords::STOPWORDS_EN
                .lines()
                .map(|w| w.trim().to_string())
                .filter(|w| !w.is_empty())
                .collect(),
            lemmas: lemma::bundled_table(),
        }
    }
}

impl Normalizer {
    pub fn with_stopwords_file(mut self, path: &Path) -> Result<Self, NormalizeConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| NormalizeConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.stopwords = text
            .lines()
            .map(|w| w.trim().to_string())
            .filter(|w| !w.is_empty())
            .collect();
        Ok(self)
    }

    pub fn with_lemma_file(mut self, path: &Path) -> Result<Self, NormalizeConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| NormalizeConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.lemmas = lemma::parse_table(&text);
        Ok(self)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// Apply the full normalization pipeline, in order: lowercase → remove
    /// URL spans → remove email spans → collapse runs of ≥3 identical
    /// characters to 2 → strip non-alphabetic → split → lemmatize →
    /// drop stopwords → drop tokens outside [3, 25] chars.
    ///
    /// May return an empty list; the caller flags such snapshots as
    /// non-informational.
    pub fn normalize_text(&self, text: &str) -> Vec<String> {
        let lowered = text.to_lowercase();
        let no_urls = URL_RE.replace_all(&lowered, " ");
        let no_onions = ONION_RE.replace_all(&no_urls, " ");
        let no_emails = EMAIL_RE.replace_all(&no_onions, " ");
        let collapsed = collapse_repeats(&no_emails);
        let alpha: String = collapsed
            .chars()
            .map(|c| if c.is_ascii_lowercase() { c } else { ' ' })
            .collect();

        alpha
            .split_whitespace()
            .map(|tok| lemma::lemmatize(tok, &self.lemmas))
            .filter(|tok| !self.stopwords.contains(tok.as_str()))
            .filter(|tok| (MIN_TOKEN_LEN..=MAX_TOKEN_LEN).contains(&tok.chars().count()))
            .collect()
    }
}

/// Collapse every run of three or more identical characters to exactly two.
fn collapse_repeats(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last: Option<char> = None;
    let mut run = 0usize;
    for c in text.chars() {
        if Some(c) == last {
            run += 1;
        } else {
            last = Some(c);
            run = 1;
        }
        if run <= 2 {
            out.push(c);
        }
    }
    out
}
