//! Longitudinal topic analytics over timestamped HTML snapshots.
//!
//! The crate turns a manifest of captured web pages into discovered topic
//! clusters, quarterly prevalence tables, and per-topic lifecycle metrics.
//! Stages are plain functions over plain data so they can be driven from the
//! `darkspan` CLI or called directly:
//!
//! 1. [`ingest`] — HTML main-content extraction and snapshot validity rules
//! 2. [`textnorm`] — language filtering and token normalization
//! 3. [`corpus`] — website grouping, chronological ordering, deduplication
//! 4. [`embed`] — deterministic hashing embeddings or precomputed vectors
//! 5. [`reduce`] — neighborhood-preserving dimensionality reduction
//! 6. [`cluster`] — density-based hierarchical clustering with soft membership
//! 7. [`topics`] — class-based TF-IDF keywords, labeling, merge maps
//! 8. [`timeline`] — quarterly prevalence aggregation and concentration
//! 9. [`lifecycle`] — lifespan, recurrence, growth/decay slopes, classes
//!
//! [`simulate`] generates synthetic corpora with planted ground truth for
//! end-to-end validation.

pub mod cluster;
pub mod corpus;
pub mod embed;
pub mod ingest;
pub mod lifecycle;
pub mod randn;
pub mod reduce;
pub mod simulate;
pub mod textnorm;
pub mod timeline;
pub mod topics;
pub mod vectors;
