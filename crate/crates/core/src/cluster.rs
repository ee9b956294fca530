//! Density-based hierarchical clustering of reduced vectors, with noise
//! labeling and soft membership vectors.
//!
//! The steps are the classic HDBSCAN construction: core distances at
//! `min_samples`, mutual-reachability distances, an exact minimum spanning
//! tree, a single-linkage dendrogram (edges ascending, ties by the edge's
//! (lower, higher) index pair), condensation at `min_cluster_size`, and
//! excess-of-mass flat-cluster selection. Points outside every selected
//! cluster carry label −1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    /// Outlier mass assigned to noise points in membership vectors.
    pub noise_outlier_mass: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            min_cluster_size: 80,
            min_samples: 90,
            noise_outlier_mass: 0.5,
        }
    }
}

/// One condensed-tree record: `child` (a point id < n, or a cluster node id
/// ≥ n) leaves or is born from `parent` at density level `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensedNode {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Per-point cluster id ≥ 0, or −1 for noise.
    pub labels: Vec<i32>,
    pub condensed_tree: Vec<CondensedNode>,
    /// Point indices attaining each selected cluster's maximum λ.
    pub exemplars: Vec<Vec<usize>>,
    /// Stability of each selected cluster.
    pub stabilities: Vec<f64>,
    pub n_clusters: usize,
    pub n_points: usize,
}

/// Soft assignment over selected clusters plus an outlier mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVector {
    pub probabilities: Vec<f64>,
    pub outlier_mass: f64,
}

impl MembershipVector {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum::<f64>() + self.outlier_mass
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Density floor: merges at distance 0 (coincident points) get this λ
/// instead of ∞ so stability sums stay finite.
const LAMBDA_CEILING_DIST: f64 = 1e-12;

fn lambda_of(dist: f64) -> f64 {
    1.0 / dist.max(LAMBDA_CEILING_DIST)
}

/// Core distance of every point: distance to its k-th nearest neighbor
/// (excluding itself), k = min(min_samples, n − 1).
pub fn core_distances(points: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    let n = points.len();
    let k = min_samples.min(n.saturating_sub(1)).max(1);
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut dists: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| euclidean(p, &points[j]))
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            dists.get(k - 1).copied().unwrap_or(0.0)
        })
        .collect()
}

/// Pairwise mutual-reachability accessor.
pub struct MutualReachability<'a> {
    points: &'a [Vec<f64>],
    core: Vec<f64>,
}

impl<'a> MutualReachability<'a> {
    pub fn new(points: &'a [Vec<f64>], min_samples: usize) -> Self {
        MutualReachability {
            points,
            core: core_distances(points, min_samples),
        }
    }

    pub fn core(&self, i: usize) -> f64 {
        self.core[i]
    }

    /// max(core(a), core(b), d(a, b))
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        euclidean(&self.points[a], &self.points[b])
            .max(self.core[a])
            .max(self.core[b])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Exact MST of the mutual-reachability graph (Prim, O(n²)).
pub fn minimum_spanning_tree(mreach: &MutualReachability<'_>) -> Vec<MstEdge> {
    let n = mreach.points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best_dist = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);

    let mut current = 0usize;
    for _ in 1..n {
        in_tree[current] = true;
        let mut next = usize::MAX;
        let mut next_dist = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = mreach.dist(current, j);
            if d < best_dist[j] {
                best_dist[j] = d;
                best_from[j] = current;
            }
            if best_dist[j] < next_dist {
                next_dist = best_dist[j];
                next = j;
            }
        }
        edges.push(MstEdge {
            a: best_from[next],
            b: next,
            weight: next_dist,
        });
        current = next;
    }
    edges
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    /// Dendrogram node id currently representing each set root.
    node: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
            node: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize, new_node: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let merged_size = self.size[ra] + self.size[rb];
        self.parent[ra] = rb;
        self.size[rb] = merged_size;
        self.node[rb] = new_node;
        merged_size
    }
}

#[derive(Debug, Clone, Copy)]
struct DendrogramNode {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

/// Single-linkage dendrogram from MST edges. Leaves are 0..n−1; internal
/// node i (0-based) has id n + i.
fn single_linkage(n: usize, edges: &[MstEdge]) -> Vec<DendrogramNode> {
    let mut sorted = edges.to_vec();
    sorted.sort_by(|x, y| {
        let kx = (x.weight, x.a.min(x.b), x.a.max(x.b));
        let ky = (y.weight, y.a.min(y.b), y.a.max(y.b));
        kx.partial_cmp(&ky).unwrap()
    });
    let mut uf = UnionFind::new(n);
    let mut dendrogram = Vec::with_capacity(sorted.len());
    for edge in &sorted {
        let ra = uf.find(edge.a);
        let rb = uf.find(edge.b);
        let left = uf.node[ra];
        let right = uf.node[rb];
        let new_node = n + dendrogram.len();
        let size = uf.union(ra, rb, new_node);
        dendrogram.push(DendrogramNode {
            left,
            right,
            distance: edge.weight,
            size,
        });
    }
    dendrogram
}

fn subtree_leaves(n: usize, dendrogram: &[DendrogramNode], root: usize) -> Vec<usize> {
    let mut stack = vec![root];
    let mut leaves = Vec::new();
    while let Some(node) = stack.pop() {
        if node < n {
            leaves.push(node);
        } else {
            let d = &dendrogram[node - n];
            stack.push(d.left);
            stack.push(d.right);
        }
    }
    leaves
}

/// Condense the dendrogram: subtrees smaller than `min_cluster_size` become
/// points falling out of their parent cluster at λ = 1/distance. Cluster
/// node ids start at n (the root cluster).
fn condense(n: usize, dendrogram: &[DendrogramNode], min_cluster_size: usize) -> Vec<CondensedNode> {
    let mut tree = Vec::new();
    if dendrogram.is_empty() {
        return tree;
    }
    let root = n + dendrogram.len() - 1;
    let mut next_cluster_id = n + 1;
    // (dendrogram node, condensed cluster id it belongs to)
    let mut stack: Vec<(usize, usize)> = vec![(root, n)];
    while let Some((node, cluster)) = stack.pop() {
        let d = &dendrogram[node - n];
        let lambda = lambda_of(d.distance);
        let size_of = |child: usize| {
            if child < n {
                1
            } else {
                dendrogram[child - n].size
            }
        };
        let left_size = size_of(d.left);
        let right_size = size_of(d.right);
        let left_big = left_size >= min_cluster_size;
        let right_big = right_size >= min_cluster_size;

        match (left_big, right_big) {
            (true, true) => {
                // True split: both children become new clusters.
                for (child, size) in [(d.left, left_size), (d.right, right_size)] {
                    let id = next_cluster_id;
                    next_cluster_id += 1;
                    tree.push(CondensedNode {
                        parent: cluster,
                        child: id,
                        lambda,
                        size,
                    });
                    stack.push((child, id));
                }
            }
            (true, false) | (false, true) => {
                // The small side falls out as points; the big side keeps the
                // cluster identity.
                let (big, small) = if left_big {
                    (d.left, d.right)
                } else {
                    (d.right, d.left)
                };
                for leaf in subtree_leaves(n, dendrogram, small) {
                    tree.push(CondensedNode {
                        parent: cluster,
                        child: leaf,
                        lambda,
                        size: 1,
                    });
                }
                if big < n {
                    tree.push(CondensedNode {
                        parent: cluster,
                        child: big,
                        lambda,
                        size: 1,
                    });
                } else {
                    stack.push((big, cluster));
                }
            }
            (false, false) => {
                // Cluster dissolves: every remaining point falls out here.
                for child in [d.left, d.right] {
                    for leaf in subtree_leaves(n, dendrogram, child) {
                        tree.push(CondensedNode {
                            parent: cluster,
                            child: leaf,
                            lambda,
                            size: 1,
                        });
                    }
                }
            }
        }
    }
    tree
}

/// λ at which a cluster node was born (root clusters are born at 0).
fn lambda_birth(tree: &[CondensedNode], cluster: usize) -> f64 {
    tree.iter()
        .find(|rec| rec.child == cluster)
        .map_or(0.0, |rec| rec.lambda)
}

fn cluster_stability(tree: &[CondensedNode], cluster: usize) -> f64 {
    let birth = lambda_birth(tree, cluster);
    tree.iter()
        .filter(|rec| rec.parent == cluster)
        .map(|rec| (rec.lambda - birth) * rec.size as f64)
        .sum()
}

fn cluster_children(tree: &[CondensedNode], n: usize, cluster: usize) -> Vec<usize> {
    tree.iter()
        .filter(|rec| rec.parent == cluster && rec.child >= n)
        .map(|rec| rec.child)
        .collect()
}

fn descendants(tree: &[CondensedNode], n: usize, cluster: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![cluster];
    while let Some(c) = stack.pop() {
        for child in cluster_children(tree, n, c) {
            out.push(child);
            stack.push(child);
        }
    }
    out
}

fn cluster_size(tree: &[CondensedNode], n: usize, n_points: usize, cluster: usize) -> usize {
    if cluster == n {
        n_points
    } else {
        tree.iter()
            .find(|rec| rec.child == cluster)
            .map_or(0, |rec| rec.size)
    }
}

/// Excess-of-mass selection: walking candidates bottom-up, a cluster is
/// selected when its stability strictly exceeds the propagated stability of
/// its children, deselecting any descendants.
fn select_clusters(
    tree: &[CondensedNode],
    n: usize,
    n_points: usize,
    min_cluster_size: usize,
) -> (Vec<usize>, Vec<f64>) {
    let mut candidates: Vec<usize> = tree
        .iter()
        .filter(|rec| rec.child >= n)
        .map(|rec| rec.child)
        .collect();
    if !tree.is_empty() && n_points >= min_cluster_size {
        candidates.push(n); // root
    }
    candidates.sort_unstable();
    candidates.dedup();

    let mut selected: std::collections::BTreeMap<usize, bool> =
        candidates.iter().map(|&c| (c, false)).collect();
    let mut propagated: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    let mut stability: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();

    for &c in candidates.iter().rev() {
        let own = cluster_stability(tree, c);
        stability.insert(c, own);
        let child_sum: f64 = cluster_children(tree, n, c)
            .iter()
            .map(|ch| propagated.get(ch).copied().unwrap_or(0.0))
            .sum();
        if own > child_sum && cluster_size(tree, n, n_points, c) >= min_cluster_size {
            selected.insert(c, true);
            for desc in descendants(tree, n, c) {
                selected.insert(desc, false);
            }
            propagated.insert(c, own);
        } else {
            propagated.insert(c, child_sum);
        }
    }

    let chosen: Vec<usize> = selected
        .into_iter()
        .filter_map(|(c, keep)| keep.then_some(c))
        .collect();
    let stabilities = chosen.iter().map(|c| stability[c]).collect();
    (chosen, stabilities)
}

/// Points inside a selected cluster's subtree, each with the λ at which it
/// fell out.
fn member_points(tree: &[CondensedNode], n: usize, cluster: usize) -> Vec<(usize, f64)> {
    let mut clusters = vec![cluster];
    clusters.extend(descendants(tree, n, cluster));
    let mut members = Vec::new();
    for rec in tree {
        if rec.child < n && clusters.contains(&rec.parent) {
            members.push((rec.child, rec.lambda));
        }
    }
    members
}

/// Full HDBSCAN clustering. Inputs with fewer points than
/// `min_cluster_size` come back all-noise with zero clusters.
pub fn hdbscan(points: &[Vec<f64>], cfg: &ClusterConfig) -> ClusterResult {
    let n = points.len();
    let mut result = ClusterResult {
        labels: vec![-1; n],
        condensed_tree: Vec::new(),
        exemplars: Vec::new(),
        stabilities: Vec::new(),
        n_clusters: 0,
        n_points: n,
    };
    if n < 2 {
        return result;
    }
    // A "cluster" of one point is meaningless; condensation assumes ≥ 2.
    let min_cluster_size = cfg.min_cluster_size.max(2);
    let mreach = MutualReachability::new(points, cfg.min_samples);
    let mst = minimum_spanning_tree(&mreach);
    let dendrogram = single_linkage(n, &mst);
    let tree = condense(n, &dendrogram, min_cluster_size);
    let (chosen, stabilities) = select_clusters(&tree, n, n, min_cluster_size);

    for (cluster_idx, &cluster_node) in chosen.iter().enumerate() {
        let members = member_points(&tree, n, cluster_node);
        let max_lambda = members
            .iter()
            .map(|(_, l)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut exemplars: Vec<usize> = members
            .iter()
            .filter(|(_, l)| *l == max_lambda)
            .map(|(p, _)| *p)
            .collect();
        exemplars.sort_unstable();
        for (p, _) in &members {
            result.labels[*p] = cluster_idx as i32;
        }
        result.exemplars.push(exemplars);
    }
    result.condensed_tree = tree;
    result.stabilities = stabilities;
    result.n_clusters = chosen.len();
    result
}

/// Soft assignment of one clustered point: inverse distance to each
/// cluster's exemplar set, normalized, then scaled so that clustered points
/// keep all their mass in topics and noise points keep
/// `1 − noise_outlier_mass`. With no clusters at all the whole mass is
/// outlier.
pub fn membership_vector(
    point: usize,
    result: &ClusterResult,
    points: &[Vec<f64>],
    noise_outlier_mass: f64,
) -> MembershipVector {
    const EPSILON: f64 = 1e-8;
    if result.n_clusters == 0 {
        return MembershipVector {
            probabilities: Vec::new(),
            outlier_mass: 1.0,
        };
    }
    let raw: Vec<f64> = result
        .exemplars
        .iter()
        .map(|exemplars| {
            let min_dist = exemplars
                .iter()
                .map(|&e| euclidean(&points[point], &points[e]))
                .fold(f64::INFINITY, f64::min);
            1.0 / (min_dist + EPSILON)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let outlier_mass = if result.labels[point] >= 0 {
        0.0
    } else {
        noise_outlier_mass
    };
    let scale = (1.0 - outlier_mass) / total;
    MembershipVector {
        probabilities: raw.iter().map(|r| r * scale).collect(),
        outlier_mass,
    }
}
