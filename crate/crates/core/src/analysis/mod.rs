//! Timbre-distribution analysis: PCA projection, spread metrics against the
//! original speaker distribution, and a deterministic scatter figure.

pub mod scatter;
pub mod spread;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::codec::TimbreVector;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("too few vectors: need at least {needed}, got {got}")]
    TooFewVectors { needed: usize, got: usize },
    #[error("dimension mismatch: model is {expected}-dimensional, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no groups to analyze")]
    EmptyGroups,
    #[error("cannot write {path}: {source}")]
    UnwritablePath {
        path: String,
        source: std::io::Error,
    },
}

/// A fitted PCA basis over timbre vectors.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows, eigenvalue-descending.
    pub components: Vec<Vec<f64>>,
    /// Top-`k` eigenvalues of the sample covariance, descending.
    pub explained_variance: Vec<f64>,
    /// Trace of the covariance (sum of all eigenvalues).
    pub total_variance: f64,
}

/// Centers by the mean and eigendecomposes the sample covariance
/// (divisor n-1). Component signs follow the convention that each
/// component's largest-magnitude entry is positive.
pub fn fit_pca(vectors: &[TimbreVector], k: usize) -> Result<PcaModel, AnalysisError> {
    assert!(k >= 1, "k must be at least 1");
    if vectors.len() < k + 1 {
        return Err(AnalysisError::TooFewVectors {
            needed: k + 1,
            got: vectors.len(),
        });
    }
    let n = vectors.len();
    let dim = vectors[0].values().len();

    let mut mean = vec![0.0f64; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.values()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let centered = DMatrix::from_fn(n, dim, |i, j| vectors[i].values()[j] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let total_variance = cov.trace();

    let eigen = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .unwrap()
    });

    let mut components = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let col = eigen.eigenvectors.column(idx);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let max_idx = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if v[max_idx] < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        components.push(v);
        explained.push(eigen.eigenvalues[idx].max(0.0));
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance: explained,
        total_variance,
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Fraction of total variance carried by component `i`.
    pub fn explained_variance_ratio(&self, i: usize) -> f64 {
        if self.total_variance == 0.0 {
            0.0
        } else {
            self.explained_variance[i] / self.total_variance
        }
    }

    /// Coordinates of a raw vector in the component basis.
    pub fn project_slice(&self, v: &[f64]) -> Result<Vec<f64>, AnalysisError> {
        if v.len() != self.dim() {
            return Err(AnalysisError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(v.iter().zip(&self.mean))
                    .map(|(ci, (xi, mi))| ci * (xi - mi))
                    .sum()
            })
            .collect())
    }

    pub fn project(&self, v: &TimbreVector) -> Result<Vec<f64>, AnalysisError> {
        self.project_slice(v.values())
    }

    pub fn project_all(&self, vectors: &[TimbreVector]) -> Result<Vec<Vec<f64>>, AnalysisError> {
        vectors.iter().map(|v| self.project(v)).collect()
    }

    /// Maps coordinates back into the original space.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, comp) in coords.iter().zip(&self.components) {
            for (o, x) in out.iter_mut().zip(comp) {
                *o += c * x;
            }
        }
        out
    }

    /// Residual `||Cov v - lambda v||` of component `i` against a covariance
    /// recomputed from `vectors`; measurement hook for the eigen invariant.
    pub fn eigen_residual(&self, vectors: &[TimbreVector], i: usize) -> f64 {
        let n = vectors.len();
        let dim = self.dim();
        let centered = DMatrix::from_fn(n, dim, |r, c| vectors[r].values()[c] - self.mean[c]);
        let cov = centered.transpose() * &centered / (n as f64 - 1.0);
        let v = DVector::from_column_slice(&self.components[i]);
        (&cov * &v - self.explained_variance[i] * &v).norm()
    }
}
