//! Agglomerative Ward clustering of activity profiles with automatic
//! cluster-count selection by six validity indices.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PostTable;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("need at least 2 profiles, got {0}")]
    TooFewProfiles(usize),
    #[error("profiles must share one dimension")]
    DimensionMismatch,
    #[error("k range [{0}, {1}] invalid for {2} profiles")]
    BadKRange(usize, usize, usize),
}

/// Users with fewer posts than `threshold` go to the infrequent set.
pub fn split_infrequent(
    table: &PostTable,
    threshold: usize,
) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut frequent = BTreeSet::new();
    let mut infrequent = BTreeSet::new();
    for (user, posts) in table.users() {
        if posts.len() < threshold {
            infrequent.insert(user.to_string());
        } else {
            frequent.insert(user.to_string());
        }
    }
    (frequent, infrequent)
}

/// Default infrequent-poster threshold.
pub const INFREQUENT_THRESHOLD: usize = 240;

/// One agglomeration step: clusters `a` and `b` merge at `height` into a
/// new cluster of `size` leaves. Cluster ids 0..n are leaves; merge `i`
/// creates id `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// Stepwise dendrogram over `n` leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Labels after cutting at `k` clusters, numbered by smallest member.
    pub fn cut(&self, k: usize) -> Vec<usize> {
        assert!(k >= 1 && k <= self.n);
        let mut parent: Vec<usize> = (0..self.n + self.merges.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for (step, m) in self.merges.iter().take(self.n - k).enumerate() {
            let new_id = self.n + step;
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            parent[ra] = new_id;
            parent[rb] = new_id;
        }
        let mut label_of_root = BTreeMap::new();
        let mut labels = Vec::with_capacity(self.n);
        for leaf in 0..self.n {
            let root = find(&mut parent, leaf);
            let next = label_of_root.len();
            labels.push(*label_of_root.entry(root).or_insert(next));
        }
        labels
    }
}

/// Squared Euclidean distance.
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cached nearest neighbour of a cluster slot: cost, tie-break pair key
/// and the other slot.
type Neighbour = (f64, (usize, usize), usize);

/// Full pairwise matrix of `f(x_i, x_j)` values, row-parallel.
fn pairwise_matrix(features: &[Vec<f64>], f: fn(&[f64], &[f64]) -> f64) -> Vec<Vec<f64>> {
    features
        .par_iter()
        .map(|a| features.iter().map(|b| f(a, b)).collect())
        .collect()
}

/// Agglomerative Ward clustering by Lance-Williams updates on squared
/// Euclidean distances.
///
/// Merge heights are the increase in total within-cluster sum of squares.
/// Ties break toward the pair whose smallest original member index is
/// lowest (then the other member), so output is deterministic.
pub fn ward_dendrogram(features: &[Vec<f64>]) -> Result<Dendrogram, ClusterError> {
    let n = features.len();
    if n < 2 {
        return Err(ClusterError::TooFewProfiles(n));
    }
    if features.iter().any(|f| f.len() != features[0].len()) {
        return Err(ClusterError::DimensionMismatch);
    }

    // ward cost between singletons is half the squared distance
    let mut dist = pairwise_matrix(features, sq_dist);
    for row in dist.iter_mut() {
        for d in row.iter_mut() {
            *d *= 0.5;
        }
    }

    let mut active: Vec<bool> = vec![true; n];
    let mut size: Vec<f64> = vec![1.0; n];
    // smallest original member, the tie-break identity of a cluster
    let mut rep: Vec<usize> = (0..n).collect();
    // dendrogram id of the cluster currently stored at each slot
    let mut id: Vec<usize> = (0..n).collect();

    let key_of = |ra: usize, rb: usize| -> (usize, usize) { (ra.min(rb), ra.max(rb)) };
    let nn_of = |slot: usize, active: &[bool], dist: &[Vec<f64>], rep: &[usize]| {
        let mut best: Option<Neighbour> = None;
        for j in 0..dist.len() {
            if j == slot || !active[j] {
                continue;
            }
            let cand = (dist[slot][j], key_of(rep[slot], rep[j]), j);
            if best.is_none_or(|b| (cand.0, cand.1) < (b.0, b.1)) {
                best = Some(cand);
            }
        }
        best
    };

    let mut nn: Vec<Option<Neighbour>> = (0..n).map(|i| nn_of(i, &active, &dist, &rep)).collect();

    let mut merges = Vec::with_capacity(n - 1);
    for _step in 0..n - 1 {
        // best merge over all cached row minima
        let mut best_slot = usize::MAX;
        let mut best: Option<(f64, (usize, usize))> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            if let Some((d, key, _)) = nn[i] {
                if best.is_none_or(|b| (d, key) < b) {
                    best = Some((d, key));
                    best_slot = i;
                }
            }
        }
        let (height, _key, other) = nn[best_slot].unwrap();
        let (i, j) = (best_slot, other);

        merges.push(Merge {
            a: id[i].min(id[j]),
            b: id[i].max(id[j]),
            height,
            size: (size[i] + size[j]) as usize,
        });

        // merged cluster lives in slot i
        let (ni, nj) = (size[i], size[j]);
        let dij = dist[i][j];
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let nk = size[k];
            let updated =
                ((ni + nk) * dist[i][k] + (nj + nk) * dist[j][k] - nk * dij) / (ni + nj + nk);
            dist[i][k] = updated;
            dist[k][i] = updated;
        }
        active[j] = false;
        nn[j] = None;
        size[i] = ni + nj;
        rep[i] = rep[i].min(rep[j]);
        id[i] = n + merges.len() - 1;

        // refresh caches: rows pointing at a merged slot rescan; other rows
        // only need to consider the new cluster
        nn[i] = nn_of(i, &active, &dist, &rep);
        for k in 0..n {
            if !active[k] || k == i {
                continue;
            }
            match nn[k] {
                Some((_, _, t)) if t == i || t == j => nn[k] = nn_of(k, &active, &dist, &rep),
                Some((d, key, _)) => {
                    let cand = (dist[k][i], key_of(rep[k], rep[i]), i);
                    if (cand.0, cand.1) < (d, key) {
                        nn[k] = Some(cand);
                    }
                }
                None => nn[k] = nn_of(k, &active, &dist, &rep),
            }
        }
    }

    Ok(Dendrogram { n, merges })
}

/// Per-k validity index values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexScores {
    pub k: usize,
    pub wcss: f64,
    pub calinski_harabasz: f64,
    pub davies_bouldin: f64,
    pub dunn: f64,
    pub silhouette: f64,
}

/// Outcome of cluster-count selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    pub scores: Vec<IndexScores>,
    /// Votes in index order: elbow, coi, calinski-harabasz, davies-bouldin,
    /// dunn, silhouette.
    pub votes: Vec<(String, usize)>,
    /// All profiles identical; `k` forced to 1.
    pub degenerate: bool,
}

fn centroids(features: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = features[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0.0; k];
    for (f, &l) in features.iter().zip(labels) {
        counts[l] += 1.0;
        for (s, v) in sums[l].iter_mut().zip(f) {
            *s += v;
        }
    }
    for (sum, c) in sums.iter_mut().zip(&counts) {
        for s in sum.iter_mut() {
            *s /= c;
        }
    }
    sums
}

fn wcss(features: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let cents = centroids(features, labels, k);
    features.iter().zip(labels).map(|(f, &l)| sq_dist(f, &cents[l])).sum()
}

fn calinski_harabasz(features: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = features.len() as f64;
    if k < 2 {
        return f64::NAN;
    }
    let cents = centroids(features, labels, k);
    let dim = features[0].len();
    let mut overall = vec![0.0; dim];
    for f in features {
        for (o, v) in overall.iter_mut().zip(f) {
            *o += v;
        }
    }
    for o in overall.iter_mut() {
        *o /= n;
    }
    let mut counts = vec![0.0; k];
    for &l in labels {
        counts[l] += 1.0;
    }
    let between: f64 =
        cents.iter().zip(&counts).map(|(c, cnt)| cnt * sq_dist(c, &overall)).sum();
    let within = wcss(features, labels, k);
    if within == 0.0 {
        return f64::INFINITY;
    }
    (between / (k as f64 - 1.0)) / (within / (n - k as f64))
}

fn davies_bouldin(features: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let cents = centroids(features, labels, k);
    let mut scatter = vec![0.0; k];
    let mut counts = vec![0.0; k];
    for (f, &l) in features.iter().zip(labels) {
        scatter[l] += sq_dist(f, &cents[l]).sqrt();
        counts[l] += 1.0;
    }
    for (s, c) in scatter.iter_mut().zip(&counts) {
        *s /= c;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = sq_dist(&cents[i], &cents[j]).sqrt().max(1e-300);
            worst = worst.max((scatter[i] + scatter[j]) / d);
        }
        total += worst;
    }
    total / k as f64
}

/// Generalized Dunn index: smallest centroid separation over the largest
/// cluster diameter (max pairwise member distance).
fn dunn_index(
    labels: &[usize],
    k: usize,
    cents: &[Vec<f64>],
    euclid: &[Vec<f64>],
) -> f64 {
    let mut max_diameter = 0.0f64;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate().skip(i + 1) {
            if li == lj {
                max_diameter = max_diameter.max(euclid[i][j]);
            }
        }
    }
    if max_diameter == 0.0 {
        return f64::INFINITY;
    }
    let mut min_sep = f64::INFINITY;
    for i in 0..k {
        for j in i + 1..k {
            min_sep = min_sep.min(sq_dist(&cents[i], &cents[j]).sqrt());
        }
    }
    min_sep / max_diameter
}

fn silhouette(labels: &[usize], k: usize, euclid: &[Vec<f64>]) -> f64 {
    let n = labels.len();
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let mut total = 0.0;
    let mut scored = 0usize;
    for i in 0..n {
        let li = labels[i];
        if counts[li] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += euclid[i][j];
            }
        }
        let a = sums[li] / (counts[li] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != li && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
        scored += 1;
    }
    if scored == 0 {
        0.0
    } else {
        total / scored as f64
    }
}

/// Knee of a curve by maximum second difference; `values[i]` corresponds
/// to `k = ks[i]`. Returns the voted k.
fn knee_vote(ks: &[usize], values: &[f64]) -> usize {
    if ks.len() < 3 {
        return ks[0];
    }
    let mut best = 1;
    let mut best_curv = f64::NEG_INFINITY;
    for i in 1..ks.len() - 1 {
        let curv = values[i - 1] - 2.0 * values[i] + values[i + 1];
        if curv > best_curv {
            best_curv = curv;
            best = i;
        }
    }
    ks[best]
}

fn min_mode(votes: &[usize]) -> usize {
    let mut counts = BTreeMap::new();
    for &v in votes {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    let max = *counts.values().max().unwrap();
    *counts.iter().find(|(_, c)| **c == max).unwrap().0
}

/// Picks the cluster count in `k_range` by majority over six indices:
/// elbow and context-independent-optimality knees on within-cluster
/// variance, Calinski-Harabasz (max), Davies-Bouldin (min), generalized
/// Dunn (max) and silhouette (max). Vote ties go to the smaller k.
pub fn choose_k(
    dendrogram: &Dendrogram,
    features: &[Vec<f64>],
    k_range: (usize, usize),
) -> Result<KSelection, ClusterError> {
    let n = features.len();
    let (k_lo, k_hi) = k_range;
    if k_lo < 2 || k_lo > k_hi || k_hi >= n {
        return Err(ClusterError::BadKRange(k_lo, k_hi, n));
    }

    let euclid = pairwise_matrix(features, |a, b| sq_dist(a, b).sqrt());
    let spread = euclid.iter().flatten().fold(0.0f64, |m, d| m.max(*d));
    if spread == 0.0 {
        return Ok(KSelection { k: 1, scores: Vec::new(), votes: Vec::new(), degenerate: true });
    }

    // wcss over an extended range so second differences exist at the ends
    let ext_lo = (k_lo - 1).max(1);
    let ext_hi = (k_hi + 1).min(n);
    let ks_ext: Vec<usize> = (ext_lo..=ext_hi).collect();
    let wcss_ext: Vec<f64> =
        ks_ext.iter().map(|&k| wcss(features, &dendrogram.cut(k), k)).collect();

    let mut scores = Vec::new();
    for k in k_lo..=k_hi {
        let labels = dendrogram.cut(k);
        let cents = centroids(features, &labels, k);
        scores.push(IndexScores {
            k,
            wcss: wcss_ext[k - ext_lo],
            calinski_harabasz: calinski_harabasz(features, &labels, k),
            davies_bouldin: davies_bouldin(features, &labels, k),
            dunn: dunn_index(&labels, k, &cents, &euclid),
            silhouette: silhouette(&labels, k, &euclid),
        });
    }

    let argbest = |better: fn(f64, f64) -> bool, f: fn(&IndexScores) -> f64| -> usize {
        let mut best = &scores[0];
        for s in &scores[1..] {
            if better(f(s), f(best)) {
                best = s;
            }
        }
        best.k
    };

    let knee = knee_vote(&ks_ext, &wcss_ext).clamp(k_lo, k_hi);
    let votes = vec![
        ("elbow".to_string(), knee),
        ("coi".to_string(), knee),
        ("calinski_harabasz".to_string(), argbest(|a, b| a > b, |s| s.calinski_harabasz)),
        ("davies_bouldin".to_string(), argbest(|a, b| a < b, |s| s.davies_bouldin)),
        ("dunn".to_string(), argbest(|a, b| a > b, |s| s.dunn)),
        ("silhouette".to_string(), argbest(|a, b| a > b, |s| s.silhouette)),
    ];
    let k = min_mode(&votes.iter().map(|(_, v)| *v).collect::<Vec<_>>());

    Ok(KSelection { k, scores, votes, degenerate: false })
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let choose2 = |x: u64| -> f64 { (x * x.saturating_sub(1)) as f64 / 2.0 };
    let sum_cells: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let sum_cols: f64 =
        (0..kb).map(|j| choose2(table.iter().map(|r| r[j]).sum())).sum();
    let total = choose2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = (sum_rows + sum_cols) / 2.0;
    if (max_index - expected).abs() < 1e-300 {
        return 1.0;
    }
    (sum_cells - expected) / (max_index - expected)
}
