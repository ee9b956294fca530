//! Per-snapshot embedding vectors.
//!
//! Two providers sit behind the same contract: a deterministic signed
//! feature-hashing embedder for desk-scale runs, and precomputed external
//! vectors loaded from the [`crate::vectors`] file format (standing in for a
//! transformer model that is out of scope here).

use serde::{Deserialize, Serialize};

pub use crate::vectors::{VectorFileError, VectorSet};

const FNV_OFFSET_BASIS: u64 = 14695981039346656037;
const FNV_PRIME: u64 = 1099511628211;

/// FNV-1a over the little-endian seed bytes followed by the token bytes.
fn fnv1a_64(seed: u64, token: &str) -> u64 {
    let mut hash = FNV_OFFSET_BASIS;
    for byte in seed.to_le_bytes().iter().chain(token.as_bytes()) {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Hashing,
    ExternalFile,
}

/// Which provider supplies vectors and at what dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingProviderConfig {
    pub kind: ProviderKind,
    pub dim: usize,
    pub seed: u64,
}

impl Default for EmbeddingProviderConfig {
    fn default() -> Self {
        EmbeddingProviderConfig {
            kind: ProviderKind::Hashing,
            dim: 256,
            seed: 0,
        }
    }
}

/// Signed feature-hashing embedding of a normalized token list.
///
/// Each occurrence of a token adds ±1 to the coordinate
/// `fnv1a_64(seed, token) mod dim`; the sign is +1 when bit 63 of the hash
/// is clear. The accumulated vector is L2-normalized. An empty token list
/// yields the zero vector, which downstream stages treat as unembeddable.
pub fn embed_hashing(tokens: &[String], dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim >= 8, "embedding dimension must be at least 8");
    let mut v = vec![0.0f64; dim];
    for token in tokens {
        let hash = fnv1a_64(seed, token);
        let idx = (hash % dim as u64) as usize;
        let sign = if hash >> 63 == 0 { 1.0 } else { -1.0 };
        v[idx] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Load externally computed vectors, e.g. transformer embeddings exported by
/// another toolchain. Every parse failure carries the offending line number.
pub fn load_vectors(path: &std::path::Path) -> Result<VectorSet, VectorFileError> {
    VectorSet::load(path)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}
