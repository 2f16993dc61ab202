//! Point coordinates and Euclidean distance matrices.

use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` points in `R^d`, stored row-major so a point's coordinates are
/// contiguous.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    n: usize,
    d: usize,
    coords: Vec<f64>,
}

impl Embedding {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            coords: vec![0.0; n * d],
        }
    }

    pub fn from_vec(n: usize, d: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != n * d {
            return Err(Error::Shape(format!(
                "{} coordinates cannot form a {n}x{d} embedding",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("non-finite coordinate".into()));
        }
        Ok(Self { n, d, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut coords = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            coords.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), d, coords)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (n, d) = m.shape();
        let mut coords = Vec::with_capacity(n * d);
        for i in 0..n {
            coords.extend(m.row(i).iter());
        }
        Self { n, d, coords }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.coords)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero chunk size
        self.coords.chunks_exact(self.d.max(1)).take(self.n)
    }

    #[inline]
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.row(i), self.row(j))
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.sq_dist(i, j).sqrt()
    }

    pub fn distance_matrix(&self) -> DistanceMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.dist(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        DistanceMatrix { n, data }
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.d];
        for row in self.rows() {
            for (ck, x) in c.iter_mut().zip(row) {
                *ck += x;
            }
        }
        if self.n > 0 {
            c.iter_mut().for_each(|ck| *ck /= self.n as f64);
        }
        c
    }

    pub fn translate(&mut self, offset: &[f64]) {
        for i in 0..self.n {
            for (x, o) in self.row_mut(i).iter_mut().zip(offset) {
                *x += o;
            }
        }
    }

    pub fn center(&mut self) {
        let c: Vec<f64> = self.centroid().into_iter().map(|x| -x).collect();
        self.translate(&c);
    }

    pub fn centered(&self) -> Self {
        let mut out = self.clone();
        out.center();
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.coords.iter_mut().for_each(|x| *x *= s);
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }

    /// Stable hash of the exact coordinate bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.n.hash(&mut h);
        self.d.hash(&mut h);
        for x in &self.coords {
            x.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Copy with `extra` zero-filled trailing dimensions.
    pub fn padded(&self, extra: usize) -> Self {
        let d = self.d + extra;
        let mut out = Self::zeros(self.n, d);
        for i in 0..self.n {
            out.row_mut(i)[..self.d].copy_from_slice(self.row(i));
        }
        out
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dense symmetric `n x n` matrix of pairwise distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!(
                "{} entries cannot form a {n}x{n} distance matrix",
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}
