//! Neighborhood-preserving dimensionality reduction (UMAP) ahead of
//! clustering, plus the trustworthiness diagnostic for embedding quality.
//!
//! The construction: exact k-nearest neighbors under the configured metric,
//! per-point fuzzy memberships with local scaling (ρ = nearest-neighbor
//! distance, σ solved by bisection against log2(k)), fuzzy-union
//! symmetrization, then a seeded per-edge SGD layout on the fuzzy
//! cross-entropy with negative sampling. Exact neighbors and a
//! single-threaded layout keep runs reproducible at desk scale.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::randn::standard_normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Cosine,
    Euclidean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReduceConfig {
    pub n_components: usize,
    pub metric: Metric,
    pub n_neighbors: usize,
    pub n_epochs: usize,
    pub min_dist: f64,
    pub seed: u64,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        ReduceConfig {
            n_components: 5,
            metric: Metric::Cosine,
            n_neighbors: 15,
            n_epochs: 200,
            min_dist: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReduceError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite value in input row {0}")]
    NonFiniteInput(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrustError {
    #[error("k must satisfy 1 ≤ k < n/2 (k = {k}, n = {n})")]
    KOutOfRange { k: usize, n: usize },
}

pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        Metric::Cosine => {
            let mut dot = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for (x, y) in a.iter().zip(b) {
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na.sqrt() * nb.sqrt())
            }
        }
    }
}

/// Exact k nearest neighbors of every row, ties broken by index.
fn knn(vectors: &[Vec<f64>], k: usize, metric: Metric) -> Vec<Vec<(usize, f64)>> {
    let n = vectors.len();
    vectors
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut dists: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, distance(row, &vectors[j], metric)))
                .collect();
            dists.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            dists.truncate(k);
            dists
        })
        .collect()
}

const SIGMA_BISECTION_STEPS: usize = 64;
const SIGMA_LO: f64 = 1e-20;
const SIGMA_HI: f64 = 1e4;

/// Solve σ so that Σ_j exp(−max(0, d_j − ρ)/σ) = log2(k).
fn solve_sigma(dists: &[f64], rho: f64) -> f64 {
    let target = (dists.len() as f64).log2();
    let mass = |sigma: f64| -> f64 {
        dists
            .iter()
            .map(|&d| (-( (d - rho).max(0.0) ) / sigma).exp())
            .sum()
    };
    let (mut lo, mut hi) = (SIGMA_LO, SIGMA_HI);
    for _ in 0..SIGMA_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Symmetrized fuzzy graph edge.
#[derive(Debug, Clone, Copy)]
struct Edge {
    i: usize,
    j: usize,
    weight: f64,
}

fn fuzzy_graph(neighbors: &[Vec<(usize, f64)>]) -> Vec<Edge> {
    // Directed memberships, then fuzzy union a + b − a·b.
    let mut directed: std::collections::BTreeMap<(usize, usize), f64> =
        std::collections::BTreeMap::new();
    for (i, nbrs) in neighbors.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let rho = nbrs[0].1;
        let dists: Vec<f64> = nbrs.iter().map(|(_, d)| *d).collect();
        let sigma = solve_sigma(&dists, rho);
        for (j, d) in nbrs {
            let v = (-((d - rho).max(0.0)) / sigma).exp();
            directed.insert((i, *j), v);
        }
    }
    let mut edges = Vec::new();
    for (&(i, j), &v_ij) in &directed {
        if i > j && directed.contains_key(&(j, i)) {
            continue; // handled from the (j, i) side
        }
        let v_ji = directed.get(&(j, i)).copied().unwrap_or(0.0);
        let w = v_ij + v_ji - v_ij * v_ji;
        if w > 0.0 {
            edges.push(Edge { i, j, weight: w });
        }
    }
    edges
}

/// Fit the attraction curve 1/(1 + a·x^{2b}) to the min_dist target by
/// Levenberg–Marquardt least squares over x ∈ (0, 3].
pub fn fit_curve_params(min_dist: f64) -> (f64, f64) {
    const SAMPLES: usize = 300;
    const SPAN: f64 = 3.0;
    let xs: Vec<f64> = (0..SAMPLES).map(|i| (i + 1) as f64 * SPAN / SAMPLES as f64).collect();
    let target: Vec<f64> = xs
        .iter()
        .map(|&x| if x <= min_dist { 1.0 } else { (-(x - min_dist)).exp() })
        .collect();

    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&target)
            .map(|(&x, &t)| {
                let f = 1.0 / (1.0 + a * x.powf(2.0 * b));
                (f - t) * (f - t)
            })
            .sum()
    };

    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut err = sse(a, b);
    for _ in 0..200 {
        // Normal equations for the two parameters.
        let (mut jtj00, mut jtj01, mut jtj11) = (0.0, 0.0, 0.0);
        let (mut jtr0, mut jtr1) = (0.0, 0.0);
        for (&x, &t) in xs.iter().zip(&target) {
            let u = x.powf(2.0 * b);
            let denom = 1.0 + a * u;
            let f = 1.0 / denom;
            let r = f - t;
            let dfda = -u / (denom * denom);
            let dfdb = -a * u * 2.0 * x.ln() / (denom * denom);
            jtj00 += dfda * dfda;
            jtj01 += dfda * dfdb;
            jtj11 += dfdb * dfdb;
            jtr0 += dfda * r;
            jtr1 += dfdb * r;
        }
        let m00 = jtj00 + lambda;
        let m11 = jtj11 + lambda;
        let det = m00 * m11 - jtj01 * jtj01;
        if det.abs() < 1e-30 {
            break;
        }
        let da = (-jtr0 * m11 + jtr1 * jtj01) / det;
        let db = (-jtr1 * m00 + jtr0 * jtj01) / det;
        let na = (a + da).clamp(1e-6, 1e6);
        let nb = (b + db).clamp(1e-3, 1e3);
        let nerr = sse(na, nb);
        if nerr < err {
            a = na;
            b = nb;
            err = nerr;
            lambda = (lambda / 3.0).max(1e-12);
            if (da.abs() + db.abs()) < 1e-12 {
                break;
            }
        } else {
            lambda *= 3.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

const NEGATIVE_SAMPLE_RATE: usize = 5;
const GRAD_CLIP: f64 = 4.0;

fn clip(x: f64) -> f64 {
    x.clamp(-GRAD_CLIP, GRAD_CLIP)
}

/// UMAP reduction of `vectors` to `cfg.n_components` dimensions.
///
/// Identical (input, config, seed) produce identical output within one
/// build: neighbor search is per-row deterministic and the layout phase is
/// single-threaded by contract.
pub fn reduce(vectors: &[Vec<f64>], cfg: &ReduceConfig) -> Result<Vec<Vec<f64>>, ReduceError> {
    let n = vectors.len();
    if n < 2 {
        return Err(ReduceError::TooFewPoints(n));
    }
    for (i, row) in vectors.iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ReduceError::NonFiniteInput(i));
        }
    }
    if cfg.n_components < 2 {
        return Err(ReduceError::InvalidConfig(
            "n_components must be ≥ 2".into(),
        ));
    }
    if cfg.n_neighbors < 2 {
        return Err(ReduceError::InvalidConfig("n_neighbors must be ≥ 2".into()));
    }

    let k = cfg.n_neighbors.min(n - 1);
    let neighbors = knn(vectors, k, cfg.metric);
    let edges = fuzzy_graph(&neighbors);
    let (a, b) = fit_curve_params(cfg.min_dist);

    // Seeded Gaussian init at scale 1e-2.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.n_components;
    let mut layout: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| 0.01 * standard_normal(&mut rng)).collect())
        .collect();

    let mut order: Vec<usize> = (0..edges.len()).collect();
    for epoch in 0..cfg.n_epochs {
        let lr = 1.0 * (1.0 - epoch as f64 / cfg.n_epochs as f64);
        order.shuffle(&mut rng);
        for &edge_idx in &order {
            let Edge { i, j, weight } = edges[edge_idx];

            // Attraction along the edge, scaled by its membership weight.
            let d2: f64 = (0..dim)
                .map(|d| (layout[i][d] - layout[j][d]).powi(2))
                .sum();
            if d2 > 0.0 {
                let dist_pow = d2.powf(b);
                let grad_coeff = -2.0 * a * b * dist_pow / (d2 * (1.0 + a * dist_pow));
                #[allow(clippy::needless_range_loop)] // i and j rows both move
                for d in 0..dim {
                    let g = clip(weight * grad_coeff * (layout[i][d] - layout[j][d]));
                    layout[i][d] += lr * g;
                    layout[j][d] -= lr * g;
                }
            }

            // Negative sampling: repulse i from random points.
            for _ in 0..NEGATIVE_SAMPLE_RATE {
                let other = rng.random_range(0..n);
                if other == i {
                    continue;
                }
                let d2: f64 = (0..dim)
                    .map(|d| (layout[i][d] - layout[other][d]).powi(2))
                    .sum();
                if d2 > 0.0 {
                    let dist_pow = d2.powf(b);
                    let grad_coeff = 2.0 * b / ((0.001 + d2) * (1.0 + a * dist_pow));
                    #[allow(clippy::needless_range_loop)] // reads row `other`
                    for d in 0..dim {
                        let g = clip(grad_coeff * (layout[i][d] - layout[other][d]));
                        layout[i][d] += lr * g;
                    }
                } else {
                    for v in layout[i].iter_mut() {
                        *v += lr * GRAD_CLIP;
                    }
                }
            }
        }
    }
    Ok(layout)
}

/// Trustworthiness T(k) ∈ [0, 1]: penalizes points that appear among the
/// k nearest neighbors in the reduced space without being k-nearest in the
/// original space, weighted by their original-space rank excess. Both
/// neighbor sets come from exhaustive pairwise distances; the reduced space
/// is always euclidean.
pub fn trustworthiness(
    original: &[Vec<f64>],
    reduced: &[Vec<f64>],
    k: usize,
    original_metric: Metric,
) -> Result<f64, TrustError> {
    let n = original.len();
    if k < 1 || 2 * k >= n {
        return Err(TrustError::KOutOfRange { k, n });
    }
    let rank_lists: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut others: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, distance(&original[i], &original[j], original_metric)))
                .collect();
            others.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.0.cmp(&y.0)));
            others.into_iter().map(|(j, _)| j).collect()
        })
        .collect();

    let mut penalty = 0.0;
    for i in 0..n {
        let mut reduced_nbrs: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, distance(&reduced[i], &reduced[j], Metric::Euclidean)))
            .collect();
        reduced_nbrs.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.0.cmp(&y.0)));

        let original_topk: std::collections::HashSet<usize> =
            rank_lists[i].iter().take(k).copied().collect();
        for (j, _) in reduced_nbrs.iter().take(k) {
            if !original_topk.contains(j) {
                let rank = rank_lists[i].iter().position(|&r| r == *j).unwrap() + 1;
                penalty += (rank - k) as f64;
            }
        }
    }
    let norm = 2.0 / (n as f64 * k as f64 * (2.0 * n as f64 - 3.0 * k as f64 - 1.0));
    Ok(1.0 - norm * penalty)
}
