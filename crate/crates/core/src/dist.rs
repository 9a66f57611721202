//! Fréchet distance between Gaussian fits of two feature distributions.
//!
//! `d^2 = |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2})`. The trace of
//! the product root is taken through the similar symmetric matrix
//! `S_a^{1/2} S_b S_a^{1/2}`, so only symmetric eigenproblems are solved.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::model::FeatureSet;

pub const DEFAULT_FID_EPS: f64 = 1e-6;
/// Eigenvalues in `[-NEGATIVE_EIGEN_TOLERANCE, 0)` are rounding noise and
/// clip to zero; anything lower means the operand is not a covariance.
pub const NEGATIVE_EIGEN_TOLERANCE: f64 = 1e-8;
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    mean: Vec<f64>,
    cov: Matrix,
}

/// On-disk shape of directly supplied statistics: `{"mean": [...], "cov": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsDocument {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl GaussianStats {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::invalid(format!(
                "mean has {} entries but covariance is {}x{}",
                mean.len(),
                cov.dim(),
                cov.dim()
            )));
        }
        if mean.is_empty() {
            return Err(Error::invalid("statistics must have dimension at least 1"));
        }
        if mean.iter().chain(cov.as_slice()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("statistics contain non-finite entries"));
        }
        let asym = cov.asymmetry();
        if asym > SYMMETRY_TOLERANCE {
            return Err(Error::invalid(format!(
                "covariance is not symmetric (max |C - C^T| = {asym:e})"
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn from_document(doc: StatsDocument) -> Result<Self> {
        Self::new(doc.mean, Matrix::from_rows(&doc.cov)?)
    }

    pub fn to_document(&self) -> StatsDocument {
        StatsDocument {
            mean: self.mean.clone(),
            cov: self.cov.to_rows(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.cov
    }

    /// Copy with `eps` added to the covariance diagonal.
    pub fn regularized(&self, eps: f64) -> Self {
        let mut cov = self.cov.clone();
        cov.add_diagonal(eps);
        Self {
            mean: self.mean.clone(),
            cov,
        }
    }
}

/// Sample mean and unbiased (N - 1) covariance.
pub fn estimate_stats(features: &FeatureSet) -> Result<GaussianStats> {
    let n = features.rows();
    let d = features.dim();
    if n < 2 {
        return Err(Error::precondition(format!(
            "covariance estimation needs at least 2 rows, got {n}"
        )));
    }
    let mut mean = vec![0.0; d];
    for row in features.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered: Vec<f64> = features
        .iter_rows()
        .flat_map(|row| row.iter().zip(&mean).map(|(v, m)| v - m))
        .collect();
    let upper: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            (i..d)
                .map(|j| {
                    centered
                        .chunks_exact(d)
                        .map(|r| r[i] * r[j])
                        .sum::<f64>()
                        / (n - 1) as f64
                })
                .collect()
        })
        .collect();
    let mut cov = Matrix::zeros(d);
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            cov[(i, i + k)] = v;
            cov[(i + k, i)] = v;
        }
    }
    GaussianStats::new(mean, cov.symmetrized())
}

fn clip_eigenvalue(l: f64, what: &str) -> Result<f64> {
    if l < -NEGATIVE_EIGEN_TOLERANCE {
        return Err(Error::precondition(format!(
            "{what} has eigenvalue {l:e}; it is not positive semi-definite"
        )));
    }
    Ok(l.max(0.0))
}

/// Symmetric PSD square root via eigendecomposition.
pub fn sqrt_psd(a: &Matrix) -> Result<Matrix> {
    let eig = symmetric_eigen(a)?;
    for &l in &eig.values {
        clip_eigenvalue(l, "covariance")?;
    }
    Ok(eig.compose(|l| l.max(0.0).sqrt()))
}

pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::precondition(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mean_term: f64 = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();

    let root_a = sqrt_psd(&a.cov)?;
    let inner = root_a.matmul(&b.cov).matmul(&root_a).symmetrized();
    let eig = symmetric_eigen(&inner)?;
    let mut cross = 0.0;
    for &l in &eig.values {
        cross += clip_eigenvalue(l, "covariance product")?.sqrt();
    }
    let d2 = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    Ok(d2.max(0.0))
}

/// FID between two feature sets, each covariance regularized by `eps * I`.
pub fn fid(gen: &FeatureSet, gt: &FeatureSet, eps: f64) -> Result<f64> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::Usage(format!("fid eps must be non-negative, got {eps}")));
    }
    if gen.dim() != gt.dim() {
        return Err(Error::precondition(format!(
            "feature dimensions differ: {} vs {}",
            gen.dim(),
            gt.dim()
        )));
    }
    let a = estimate_stats(gen)?.regularized(eps);
    let b = estimate_stats(gt)?.regularized(eps);
    frechet_distance(&a, &b)
}
