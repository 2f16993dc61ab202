//! Synthetic point sets and feature-matrix ingestion.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{weighted::WeightedIndex, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::rng::Rng;

/// Points with optional class labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Embedding,
    pub labels: Option<Vec<usize>>,
}

impl PointSet {
    pub fn new(points: Embedding, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != points.n() {
                return Err(Error::Shape(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.n()
                )));
            }
        }
        if !points.is_finite() {
            return Err(Error::Numerical("non-finite point coordinate".into()));
        }
        Ok(Self { points, labels })
    }

    pub fn n(&self) -> usize {
        self.points.n()
    }

    /// The rows at `indices`, labels carried along.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let rows: Vec<&[f64]> = indices.iter().map(|&i| self.points.row(i)).collect();
        let d = self.points.dim();
        let coords = rows.concat();
        Self {
            points: Embedding::from_vec(indices.len(), d, coords).expect("subset of finite rows"),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// A uniformly random subset of `m` distinct points.
    pub fn sample(&self, m: usize, rng: &mut Rng) -> Result<Self> {
        if m > self.n() {
            return Err(Error::invalid(format!(
                "cannot sample {m} of {} points",
                self.n()
            )));
        }
        let mut idx = rand::seq::index::sample(rng, self.n(), m).into_vec();
        idx.sort_unstable();
        Ok(self.subset(&idx))
    }
}

/// Gaussian mixture with explicit component parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureSpec {
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
    factors: Vec<DMatrix<f64>>,
}

impl MixtureSpec {
    pub fn new(
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let k = means.len();
        if k == 0 || covariances.len() != k || weights.len() != k {
            return Err(Error::Shape(format!(
                "{} means, {} covariances, {} weights",
                k,
                covariances.len(),
                weights.len()
            )));
        }
        let d = means[0].len();
        let wsum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w.is_nan() || w < 0.0) || (wsum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "weights must form a simplex, sum {wsum}"
            )));
        }
        let mut factors = Vec::with_capacity(k);
        for (c, (m, s)) in means.iter().zip(&covariances).enumerate() {
            if m.len() != d || s.shape() != (d, d) {
                return Err(Error::Shape(format!(
                    "component {c} has inconsistent dimension"
                )));
            }
            if (s - s.transpose()).amax() > 1e-12 {
                return Err(Error::invalid(format!("covariance {c} is not symmetric")));
            }
            let chol = s.clone().cholesky().ok_or_else(|| {
                Error::Cholesky(format!("covariance {c} is not positive definite"))
            })?;
            factors.push(chol.l());
        }
        Ok(Self {
            means,
            covariances,
            weights,
            factors,
        })
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.means.clone(), self.covariances.clone(), weights)
    }
}

/// The two-dimensional, three-component mixture used for the calibration and
/// triplet-prediction studies. Weights are equal.
pub fn calibration_mixture() -> MixtureSpec {
    let m = |a: f64, b: f64| DVector::from_vec(vec![a, b]);
    let c = |a: f64, b: f64, d: f64| DMatrix::from_row_slice(2, 2, &[a, b, b, d]);
    MixtureSpec::new(
        vec![m(2.0, 2.0), m(-2.0, -1.0), m(4.0, -2.0)],
        vec![c(2.0, 0.0, 1.0), c(1.0, 0.0, 1.0), c(1.0, 0.7, 2.0)],
        vec![1.0 / 3.0; 3],
    )
    .expect("constant mixture is valid")
}

/// `n` labelled draws; the label is the component index.
pub fn sample_mixture(spec: &MixtureSpec, n: usize, rng: &mut Rng) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::invalid("sample size must be >= 1"));
    }
    let pick = WeightedIndex::new(spec.weights.iter().copied())
        .map_err(|e| Error::invalid(format!("mixture weights: {e}")))?;
    let d = spec.dim();
    let mut coords = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = pick.sample(rng);
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &spec.means[c] + &spec.factors[c] * z;
        coords.extend(x.iter());
        labels.push(c);
    }
    PointSet::new(Embedding::from_vec(n, d, coords)?, Some(labels))
}

/// `k` isotropic unit-variance clusters in `R^dim` whose centers are drawn
/// from `N(0, separation^2 I)`; `n` points split as evenly as possible.
pub fn separated_clusters(
    n: usize,
    k: usize,
    dim: usize,
    separation: f64,
    rng: &mut Rng,
) -> Result<PointSet> {
    if k == 0 || n < k || dim == 0 {
        return Err(Error::invalid(format!(
            "need n >= k >= 1 and dim >= 1, got n={n}, k={k}, dim={dim}"
        )));
    }
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..dim)
                .map(|_| separation * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut coords = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        for center in &centers[c] {
            coords.push(center + rng.sample::<f64, _>(StandardNormal));
        }
        labels.push(c);
    }
    PointSet::new(Embedding::from_vec(n, dim, coords)?, Some(labels))
}

/// `m x dim` standard normal feature matrix.
pub fn gaussian_features(m: usize, dim: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, dim, |_, _| rng.sample(StandardNormal))
}

/// Principal components of a feature matrix.
#[derive(Clone, Debug)]
pub struct Pca {
    /// Column means of the input.
    pub center: DVector<f64>,
    /// Sample-covariance eigenvalues, non-increasing.
    pub variances: Vec<f64>,
    /// `D x k` matrix of unit principal directions, one per column.
    pub components: DMatrix<f64>,
}

impl Pca {
    pub fn fit(features: &DMatrix<f64>, k: usize) -> Result<Self> {
        let (m, dim) = features.shape();
        if m < 2 {
            return Err(Error::invalid(format!(
                "PCA needs at least 2 rows, got {m}"
            )));
        }
        if k == 0 || k > m.min(dim) {
            return Err(Error::invalid(format!(
                "cannot keep {k} components of a {m}x{dim} matrix"
            )));
        }
        let center = features.row_mean().transpose();
        let mut centered = features.clone();
        for mut row in centered.row_iter_mut() {
            row -= center.transpose();
        }
        let cov = centered.transpose() * &centered / (m - 1) as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let tol = top * dim as f64 * f64::EPSILON * 16.0;
        let rank = order.iter().filter(|&&c| eig.eigenvalues[c] > tol).count();
        if top == 0.0 || rank < k {
            return Err(Error::Rank { rank, requested: k });
        }
        let mut components = DMatrix::zeros(dim, k);
        let mut variances = Vec::with_capacity(k);
        for (out, &c) in order.iter().take(k).enumerate() {
            let mut v = eig.eigenvectors.column(c).clone_owned();
            // sign convention: largest-magnitude entry positive
            let imax = v.iamax();
            if v[imax] < 0.0 {
                v.neg_mut();
            }
            components.set_column(out, &v);
            variances.push(eig.eigenvalues[c]);
        }
        Ok(Self {
            center,
            variances,
            components,
        })
    }

    pub fn transform(&self, features: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = features.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.center.transpose();
        }
        centered * &self.components
    }
}

/// Centers the columns and projects onto the top `d_true` principal
/// directions.
pub fn pca_project(features: &DMatrix<f64>, d_true: usize) -> Result<PointSet> {
    let pca = Pca::fit(features, d_true)?;
    PointSet::new(Embedding::from_matrix(&pca.transform(features)), None)
}

/// A feature matrix with optional integer labels, as read from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub features: DMatrix<f64>,
    pub labels: Option<Vec<usize>>,
}

/// Reads comma-separated floats. Lines starting with `#` are comments; if
/// `label_column` is set that column is parsed as a non-negative integer label
/// and excluded from the features.
pub fn read_features(path: impl AsRef<Path>, label_column: Option<usize>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_features(file, label_column)
}

pub fn parse_features(
    reader: impl std::io::Read,
    label_column: Option<usize>,
) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| Error::ParseCell {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if let Some(lc) = label_column {
            if lc >= rec.len() {
                return Err(Error::ParseCell {
                    row,
                    column: lc + 1,
                    message: format!("label column missing, row has {} fields", rec.len()),
                });
            }
        }
        let w = rec.len() - usize::from(label_column.is_some());
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(Error::ParseCell {
                    row,
                    column: rec.len(),
                    message: format!("expected {expected} features, found {w}"),
                })
            }
            _ => {}
        }
        for (c, field) in rec.iter().enumerate() {
            if Some(c) == label_column {
                let l = field.parse::<usize>().map_err(|_| Error::ParseCell {
                    row,
                    column: c + 1,
                    message: format!("label must be a non-negative integer, got {field:?}"),
                })?;
                labels.push(l);
            } else {
                let v = field.parse::<f64>().map_err(|_| Error::ParseCell {
                    row,
                    column: c + 1,
                    message: format!("not a number: {field:?}"),
                })?;
                data.push(v);
            }
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    Ok(FeatureTable {
        features: DMatrix::from_row_slice(rows, cols, &data),
        labels: label_column.map(|_| labels),
    })
}

/// Writes features (and labels as the last column, if any) with full
/// round-trip precision.
pub fn write_features(path: impl AsRef<Path>, table: &FeatureTable) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (r, row) in table.features.row_iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        if let Some(l) = &table.labels {
            fields.push(l[r].to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}
