//! Metrics for embeddings and downstream learners.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sq_dist, DistanceMatrix, Embedding};
use crate::rng::Rng;
use crate::stats;
use crate::uncertainty::{
    check_threshold, triplet_uncertainty, verdict, DistanceStats, Prediction, Verdict,
};

fn same_shape(x: &Embedding, y: &Embedding) -> Result<()> {
    if x.n() != y.n() || x.dim() != y.dim() {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            x.n(),
            x.dim(),
            y.n(),
            y.dim()
        )));
    }
    Ok(())
}

/// `min_U |X U − X*|_F²` over orthogonal `U`, both sides centered; no
/// scaling.
pub fn procrustes_distance(x: &Embedding, target: &Embedding) -> Result<f64> {
    same_shape(x, target)?;
    let a = x.centered().to_matrix();
    let b = target.centered().to_matrix();
    let m = a.transpose() * &b;
    let trace = SVD::new(m, false, false).singular_values.sum();
    Ok((a.norm_squared() + b.norm_squared() - 2.0 * trace).max(0.0))
}

/// [`procrustes_distance`] after rescaling the centered `x` to the
/// Frobenius norm of the centered target, which removes the arbitrary
/// overall scale of an ordinal embedding.
pub fn normalized_procrustes_distance(x: &Embedding, target: &Embedding) -> Result<f64> {
    same_shape(x, target)?;
    let mut xc = x.centered();
    let norm = xc.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Degenerate("embedding has zero spread".into()));
    }
    xc.scale(target.centered().frobenius_norm() / norm);
    procrustes_distance(&xc, target)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub threshold: f64,
    /// Wrong over predicted; 0 when nothing was predicted.
    pub error: f64,
    /// Abstained over total.
    pub abstention: f64,
    pub right: usize,
    pub wrong: usize,
    pub abstained: usize,
}

impl PredictionOutcome {
    fn from_counts(threshold: f64, right: usize, wrong: usize, abstained: usize) -> Self {
        let predicted = right + wrong;
        let total = predicted + abstained;
        Self {
            threshold,
            error: if predicted == 0 {
                0.0
            } else {
                wrong as f64 / predicted as f64
            },
            abstention: if total == 0 {
                0.0
            } else {
                abstained as f64 / total as f64
            },
            right,
            wrong,
            abstained,
        }
    }
}

/// Scores predictions that were each made on a true triplet `(i, j, l)`, so
/// `CloserJ` is right and `CloserL` is wrong.
pub fn triplet_prediction_error(predictions: &[Prediction], threshold: f64) -> PredictionOutcome {
    let (mut right, mut wrong, mut abstained) = (0, 0, 0);
    for p in predictions {
        match p.verdict {
            Verdict::CloserJ => right += 1,
            Verdict::CloserL => wrong += 1,
            Verdict::Abstain => abstained += 1,
        }
    }
    PredictionOutcome::from_counts(threshold, right, wrong, abstained)
}

/// Prediction outcomes at each threshold over every comparison, oriented by
/// the true distances. Comparisons tied in `truth` are skipped.
pub fn evaluate_predictions(
    stats: &DistanceStats,
    truth: &DistanceMatrix,
    thresholds: &[f64],
) -> Result<Vec<PredictionOutcome>> {
    for &t in thresholds {
        check_threshold(t)?;
    }
    let n = stats.n();
    if truth.n() != n {
        return Err(Error::Shape(format!(
            "truth covers {} points, statistics {n}",
            truth.n()
        )));
    }
    let mut counts = vec![[0usize; 3]; thresholds.len()];
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for l in (j + 1)..n {
                if l == i {
                    continue;
                }
                let (dj, dl) = (truth.get(i, j), truth.get(i, l));
                let (near, far) = if dj < dl {
                    (j, l)
                } else if dl < dj {
                    (l, j)
                } else {
                    continue;
                };
                let pi = triplet_uncertainty(stats, i, near, far);
                for (c, &t) in counts.iter_mut().zip(thresholds) {
                    match verdict(pi, t) {
                        Verdict::CloserJ => c[0] += 1,
                        Verdict::CloserL => c[1] += 1,
                        Verdict::Abstain => c[2] += 1,
                    }
                }
            }
        }
    }
    Ok(counts
        .iter()
        .zip(thresholds)
        .map(|(c, &t)| PredictionOutcome::from_counts(t, c[0], c[1], c[2]))
        .collect())
}

/// Fraction of comparisons whose orientation in `x` disagrees with the true
/// distances, without materializing the triplets. Ties in either count as
/// disagreement.
pub fn triplet_error_against(x: &Embedding, truth: &DistanceMatrix) -> Result<f64> {
    let n = x.n();
    if truth.n() != n {
        return Err(Error::Shape(format!(
            "truth covers {} points, embedding {n}",
            truth.n()
        )));
    }
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 points, got {n}")));
    }
    let (mut wrong, mut total) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let (tj, ej) = (truth.get(i, j), x.sq_dist(i, j));
            for l in (j + 1)..n {
                if l == i {
                    continue;
                }
                let (tl, el) = (truth.get(i, l), x.sq_dist(i, l));
                total += 1;
                let agree = (tj < tl && ej < el) || (tl < tj && el < ej);
                if !agree {
                    wrong += 1;
                }
            }
        }
    }
    Ok(wrong as f64 / total as f64)
}

/// Indices of the `k` nearest other points, ordered by (distance, index).
fn nearest(x: &Embedding, i: usize, k: usize) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = (0..x.n())
        .filter(|&j| j != i)
        .map(|j| (x.sq_dist(i, j), j))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

/// Leave-one-out misclassification rate of a `k`-nearest-neighbor majority
/// vote (ties to the smallest label).
pub fn knn_error(x: &Embedding, labels: &[usize], k: usize) -> Result<f64> {
    let n = x.n();
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{} labels for {n} points",
            labels.len()
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k must be in [1, {n}), got {k}")));
    }
    let mut wrong = 0;
    for i in 0..n {
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for (_, j) in nearest(x, i, k) {
            *votes.entry(labels[j]).or_default() += 1;
        }
        // max_by_key keeps the last maximum, so iterate labels descending
        let guess = votes
            .iter()
            .rev()
            .max_by_key(|(_, &c)| c)
            .map(|(&label, _)| label)
            .expect("k >= 1 neighbors");
        if guess != labels[i] {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / n as f64)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub graph_k: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            graph_k: 10,
            kmeans_restarts: 20,
            kmeans_max_iters: 300,
        }
    }
}

/// Normalized spectral clustering on a symmetrized Gaussian-weighted
/// `graph_k`-nearest-neighbor graph.
pub fn spectral_clustering(
    x: &Embedding,
    n_clusters: usize,
    cfg: &SpectralConfig,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    let n = x.n();
    if n_clusters < 2 || n_clusters > n {
        return Err(Error::invalid(format!(
            "cluster count must be in [2, {n}], got {n_clusters}"
        )));
    }
    if cfg.graph_k == 0 {
        return Err(Error::invalid("graph_k must be >= 1"));
    }
    let k = cfg.graph_k.min(n - 1);
    let neighbors: Vec<Vec<(f64, usize)>> = (0..n).map(|i| nearest(x, i, k)).collect();
    let knn_dists: Vec<f64> = neighbors
        .iter()
        .flatten()
        .map(|(d2, _)| d2.sqrt())
        .collect();
    let mut bandwidth = stats::median(&knn_dists);
    if bandwidth <= 0.0 {
        bandwidth = knn_dists.iter().cloned().fold(0.0, f64::max);
    }
    let mut w = DMatrix::<f64>::zeros(n, n);
    let mut parent: Vec<usize> = (0..n).collect();
    for (i, nb) in neighbors.iter().enumerate() {
        for &(d2, j) in nb {
            let v = if bandwidth > 0.0 {
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            } else {
                1.0
            };
            w[(i, j)] = v;
            w[(j, i)] = v;
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            parent[ri] = rj;
        }
    }
    let components = (0..n).filter(|&i| find(&mut parent, i) == i).count();
    if components > n_clusters {
        return Err(Error::DisconnectedGraph {
            components,
            clusters: n_clusters,
        });
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let deg: f64 = w.row(i).sum();
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut lap = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            lap[(i, j)] -= inv_sqrt_deg[i] * w[(i, j)] * inv_sqrt_deg[j];
        }
    }
    let eig = SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let mut rows = Embedding::zeros(n, n_clusters);
    for i in 0..n {
        let row = rows.row_mut(i);
        for (c, &e) in order.iter().take(n_clusters).enumerate() {
            row[c] = eig.eigenvectors[(i, e)];
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let (labels, _) = kmeans(
        &rows,
        n_clusters,
        cfg.kmeans_restarts,
        cfg.kmeans_max_iters,
        rng,
    )?;
    Ok(labels)
}

/// Lloyd's k-means with k-means++ seeding; returns the labeling with the
/// lowest inertia over `restarts` runs, relabeled by first appearance.
pub fn kmeans(
    points: &Embedding,
    k: usize,
    restarts: usize,
    max_iters: usize,
    rng: &mut Rng,
) -> Result<(Vec<usize>, f64)> {
    let n = points.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k must be in [1, {n}], got {k}")));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let (labels, inertia) = kmeans_once(points, k, max_iters, rng);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    let (labels, inertia) = best.expect("at least one restart");
    let mut remap = BTreeMap::new();
    let mut next = 0;
    let labels = labels
        .iter()
        .map(|&l| {
            *remap.entry(l).or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    Ok((labels, inertia))
}

fn kmeans_once(points: &Embedding, k: usize, max_iters: usize, rng: &mut Rng) -> (Vec<usize>, f64) {
    let (n, d) = (points.n(), points.dim());
    let mut centers = Embedding::zeros(k, d);
    centers
        .row_mut(0)
        .copy_from_slice(points.row(rng.random_range(0..n)));
    let mut closest: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in closest.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for (i, cl) in closest.iter_mut().enumerate() {
            *cl = cl.min(sq_dist(points.row(i), centers.row(c)));
        }
    }
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let v = sq_dist(points.row(i), centers.row(c));
                if v < best.0 {
                    best = (v, c);
                }
            }
            if *label != best.1 {
                *label = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Embedding::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &label) in labels.iter().enumerate() {
            counts[label] += 1;
            for (s, v) in sums.row_mut(label).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            // empty clusters keep their previous center
            if count > 0 {
                let inv = 1.0 / count as f64;
                for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(labels[i])))
        .sum();
    (labels, inertia)
}

fn pairs(m: u64) -> f64 {
    (m * m.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand Index; 1 when the chance-corrected denominator vanishes.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "labelings of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sa: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sb: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Per-step evaluation record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub triplet_error: Option<f64>,
    pub abstention: Option<f64>,
    pub knn_error: Option<f64>,
    pub ari: Option<f64>,
    pub procrustes: Option<f64>,
}
