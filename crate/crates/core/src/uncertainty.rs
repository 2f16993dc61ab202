//! Triplet and point uncertainty from an ensemble of embeddings.
//!
//! For each pair the ensemble gives a mean distance `ρ̄` and a sample
//! standard deviation `σ̄`. The probability that `i` is closer to `j` than
//! to `l` is then
//!
//! ```text
//! π_ijl = Φ((ρ̄_il − ρ̄_ij) / (σ̄_il + σ̄_ij))
//! ```
//!
//! with `Φ` the standard normal CDF. When both deviations vanish the limit
//! is used: 1, 0 or ½ by the sign of `ρ̄_il − ρ̄_ij`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::OptimizerConfig;
use crate::ensemble::{EmbeddingEnsemble, EnsembleMethod, EnsembleSource};
use crate::error::{Error, Result};
use crate::geometry::{DistanceMatrix, Embedding};
use crate::rng::{self, Rng};
use crate::stats;
use crate::triplets::{comparison_count, Comparison, TripletSet};

/// Denominators below this use the zero-spread limit.
pub const DEGENERATE_SPREAD: f64 = 1e-12;

/// Entrywise mean and sample standard deviation of member distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    n: usize,
    /// Row-major `n x n`.
    rho_bar: Vec<f64>,
    /// Row-major `n x n`, divisor `b - 1`.
    sigma_bar: Vec<f64>,
}

impl DistanceStats {
    pub fn from_parts(n: usize, rho_bar: Vec<f64>, sigma_bar: Vec<f64>) -> Result<Self> {
        if rho_bar.len() != n * n || sigma_bar.len() != n * n {
            return Err(Error::Shape(format!(
                "distance statistics must have {} entries",
                n * n
            )));
        }
        if sigma_bar.iter().any(|s| s.is_nan() || *s < 0.0) {
            return Err(Error::invalid("standard deviations must be non-negative"));
        }
        Ok(Self {
            n,
            rho_bar,
            sigma_bar,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn rho(&self, i: usize, j: usize) -> f64 {
        self.rho_bar[i * self.n + j]
    }

    #[inline]
    pub fn sigma(&self, i: usize, j: usize) -> f64 {
        self.sigma_bar[i * self.n + j]
    }

    pub fn rho_bar(&self) -> &[f64] {
        &self.rho_bar
    }

    pub fn sigma_bar(&self) -> &[f64] {
        &self.sigma_bar
    }

    /// Mean of `σ̄` over distinct pairs.
    pub fn mean_sigma(&self) -> f64 {
        let n = self.n;
        if n < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += self.sigma(i, j);
            }
        }
        s / (n * (n - 1) / 2) as f64
    }
}

pub fn distance_stats(ens: &EmbeddingEnsemble) -> Result<DistanceStats> {
    let b = ens.len();
    if b < 2 {
        return Err(Error::invalid(format!("need at least 2 members, got {b}")));
    }
    let n = ens.n();
    // Shifted by the first member, so identical members give exactly zero spread.
    let base = &ens.members()[0];
    let mut shift = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            shift[i * n + j] = base.dist(i, j);
        }
    }
    let mut sum = vec![0.0; n * n];
    let mut sum_sq = vec![0.0; n * n];
    for m in &ens.members()[1..] {
        for i in 0..n {
            for j in (i + 1)..n {
                let k = i * n + j;
                let delta = m.dist(i, j) - shift[k];
                sum[k] += delta;
                sum_sq[k] += delta * delta;
            }
        }
    }
    let bf = b as f64;
    let mut rho = vec![0.0; n * n];
    let mut sigma = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let k = i * n + j;
            let mean_delta = sum[k] / bf;
            let var = ((sum_sq[k] - bf * mean_delta * mean_delta) / (bf - 1.0)).max(0.0);
            rho[k] = shift[k] + mean_delta;
            rho[j * n + i] = rho[k];
            sigma[k] = var.sqrt();
            sigma[j * n + i] = sigma[k];
        }
    }
    Ok(DistanceStats {
        n,
        rho_bar: rho,
        sigma_bar: sigma,
    })
}

/// `π_ijl`, the probability that `i` is closer to `j` than to `l`.
#[inline]
pub fn triplet_uncertainty(stats: &DistanceStats, i: usize, j: usize, l: usize) -> f64 {
    let diff = stats.rho(i, l) - stats.rho(i, j);
    let spread = stats.sigma(i, l) + stats.sigma(i, j);
    if spread < DEGENERATE_SPREAD {
        match diff.partial_cmp(&0.0) {
            Some(Ordering::Greater) => 1.0,
            Some(Ordering::Less) => 0.0,
            _ => 0.5,
        }
    } else {
        stats::normal_cdf(diff / spread)
    }
}

/// Per-point mean location and `d x d` sample covariance across members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub means: Embedding,
    /// One row-major `d x d` matrix per point.
    pub covariances: Vec<Vec<f64>>,
}

pub fn point_stats(ens: &EmbeddingEnsemble) -> Result<PointStats> {
    let b = ens.len();
    if b < 2 {
        return Err(Error::invalid(format!("need at least 2 members, got {b}")));
    }
    if matches!(ens.source, EnsembleSource::Bootstrap { .. }) && !ens.aligned {
        return Err(Error::NotAligned);
    }
    let (n, d) = (ens.n(), ens.dim());
    let mut means = Embedding::zeros(n, d);
    for m in ens.members() {
        for (acc, x) in means.as_mut_slice().iter_mut().zip(m.as_slice()) {
            *acc += x;
        }
    }
    means.scale(1.0 / b as f64);
    let mut covariances = vec![vec![0.0; d * d]; n];
    for m in ens.members() {
        for (i, cov) in covariances.iter_mut().enumerate() {
            let (x, mu) = (m.row(i), means.row(i));
            for p in 0..d {
                let dp = x[p] - mu[p];
                for q in p..d {
                    cov[p * d + q] += dp * (x[q] - mu[q]);
                }
            }
        }
    }
    let inv = 1.0 / (b - 1) as f64;
    for cov in &mut covariances {
        for p in 0..d {
            for q in p..d {
                let v = cov[p * d + q] * inv;
                cov[p * d + q] = v;
                cov[q * d + p] = v;
            }
        }
    }
    Ok(PointStats { means, covariances })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    CloserJ,
    CloserL,
    Abstain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub verdict: Verdict,
    pub pi: f64,
}

pub fn check_threshold(t: f64) -> Result<()> {
    if t > 0.5 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::Threshold(t))
    }
}

/// Verdict for a known `π` at threshold `t`.
pub fn verdict(pi: f64, t: f64) -> Verdict {
    if pi > t {
        Verdict::CloserJ
    } else if pi < 1.0 - t {
        Verdict::CloserL
    } else {
        Verdict::Abstain
    }
}

pub fn predict_with_abstention(
    stats: &DistanceStats,
    i: usize,
    j: usize,
    l: usize,
    t: f64,
) -> Result<Prediction> {
    check_threshold(t)?;
    let pi = triplet_uncertainty(stats, i, j, l);
    Ok(Prediction {
        verdict: verdict(pi, t),
        pi,
    })
}

/// Sum over anchors of `f(anchor, first, second)` across all unordered
/// comparisons, split by anchor and reduced in anchor order.
fn sum_over_comparisons<F>(n: usize, f: F) -> f64
where
    F: Fn(usize, usize, usize) -> f64 + Sync,
{
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                for l in (j + 1)..n {
                    if l != i {
                        s += f(i, j, l);
                    }
                }
            }
            s
        })
        .collect();
    partial.iter().sum()
}

/// Mean of `min(π, 1 − π)` over every unordered comparison.
pub fn folded_average_uncertainty(stats: &DistanceStats) -> Result<f64> {
    let n = stats.n();
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 points, got {n}")));
    }
    let total = sum_over_comparisons(n, |i, j, l| {
        let p = triplet_uncertainty(stats, i, j, l);
        p.min(1.0 - p)
    });
    Ok(total / comparison_count(n) as f64)
}

/// Mean `π` over the answers in `truth`.
pub fn true_triplet_average_uncertainty(stats: &DistanceStats, truth: &TripletSet) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyTriplets);
    }
    if truth.n() != stats.n() {
        return Err(Error::Shape(format!(
            "truth covers {} points, statistics {}",
            truth.n(),
            stats.n()
        )));
    }
    let s: f64 = truth
        .iter()
        .map(|t| triplet_uncertainty(stats, t.anchor, t.near, t.far))
        .sum();
    Ok(s / truth.len() as f64)
}

/// Same as [`true_triplet_average_uncertainty`] over all true triplets of
/// `truth`, without materializing them. Exact distance ties are an error.
pub fn true_average_from_distances(stats: &DistanceStats, truth: &DistanceMatrix) -> Result<f64> {
    let n = stats.n();
    if truth.n() != n {
        return Err(Error::Shape(format!(
            "truth covers {} points, statistics {n}",
            truth.n()
        )));
    }
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 points, got {n}")));
    }
    let tie = std::sync::atomic::AtomicBool::new(false);
    let total = sum_over_comparisons(n, |i, j, l| {
        let (dj, dl) = (truth.get(i, j), truth.get(i, l));
        if dj < dl {
            triplet_uncertainty(stats, i, j, l)
        } else if dl < dj {
            triplet_uncertainty(stats, i, l, j)
        } else {
            tie.store(true, std::sync::atomic::Ordering::Relaxed);
            0.0
        }
    });
    if tie.into_inner() {
        return Err(Error::Degenerate(
            "true distances contain an exact tie".into(),
        ));
    }
    Ok(total / comparison_count(n) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionScan {
    pub dims: Vec<usize>,
    /// Folded average uncertainty per entry of `dims`.
    pub uncertainty: Vec<f64>,
    /// Mean `σ̄` per dimension, for diagnostics.
    pub mean_sigma: Vec<f64>,
    pub best: usize,
}

/// Builds one ensemble per candidate dimension and picks the one with the
/// lowest folded average uncertainty (ties to the smaller dimension).
pub fn dimension_scan(
    set: &TripletSet,
    dims: &[usize],
    method: &EnsembleMethod,
    cfg: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<DimensionScan> {
    if dims.is_empty() {
        return Err(Error::invalid("no dimensions to scan"));
    }
    if let Some(&d) = dims.iter().find(|&&d| d == 0) {
        return Err(Error::invalid(format!("dimension must be >= 1, got {d}")));
    }
    let seeds: Vec<u64> = dims.iter().map(|_| rng.random()).collect();
    let mut uncertainty = Vec::with_capacity(dims.len());
    let mut mean_sigma = Vec::with_capacity(dims.len());
    for (&d, &seed) in dims.iter().zip(&seeds) {
        let ens = method.build(set, d, cfg, &mut rng::from_seed(seed))?;
        let st = distance_stats(&ens)?;
        uncertainty.push(folded_average_uncertainty(&st)?);
        mean_sigma.push(st.mean_sigma());
    }
    let mut best = 0;
    for k in 1..dims.len() {
        let better = uncertainty[k] < uncertainty[best]
            || (uncertainty[k] == uncertainty[best] && dims[k] < dims[best]);
        if better {
            best = k;
        }
    }
    Ok(DimensionScan {
        dims: dims.to_vec(),
        best: dims[best],
        uncertainty,
        mean_sigma,
    })
}

/// Heap entry ordered by `(π − ½)²` then lexicographically by comparison.
#[derive(Clone, Copy, Debug)]
struct Ranked {
    key: f64,
    cmp: Comparison,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.tuple() == other.tuple()
    }
}

impl Eq for Ranked {}

impl Ranked {
    fn tuple(&self) -> (u64, usize, usize, usize) {
        (
            self.key.to_bits(),
            self.cmp.anchor,
            self.cmp.first,
            self.cmp.second,
        )
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(Ord::cmp(self, other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then_with(|| self.cmp.anchor.cmp(&other.cmp.anchor))
            .then_with(|| self.cmp.first.cmp(&other.cmp.first))
            .then_with(|| self.cmp.second.cmp(&other.cmp.second))
    }
}

/// The `k` comparisons whose `π` is closest to ½, most uncertain first.
pub fn select_uncertain_batch(stats: &DistanceStats, k: usize) -> Result<Vec<Comparison>> {
    let n = stats.n();
    let available = if n < 3 { 0 } else { comparison_count(n) };
    if k == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    if k > available {
        return Err(Error::BatchTooLarge {
            requested: k,
            available,
        });
    }
    // Max-heap of the best k so far; the top is the worst kept entry.
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for l in (j + 1)..n {
                if l == i {
                    continue;
                }
                let p = triplet_uncertainty(stats, i, j, l);
                let entry = Ranked {
                    key: (p - 0.5) * (p - 0.5),
                    cmp: Comparison {
                        anchor: i,
                        first: j,
                        second: l,
                    },
                };
                if heap.len() < k {
                    heap.push(entry);
                } else if let Some(top) = heap.peek() {
                    if entry < *top {
                        heap.pop();
                        heap.push(entry);
                    }
                }
            }
        }
    }
    Ok(heap.into_sorted_vec().into_iter().map(|r| r.cmp).collect())
}
