//! PCA subspace for compressing Log-Gabor feature vectors.
//!
//! When the feature dimension exceeds the sample count the eigenvectors are
//! obtained from the `n x n` Gram matrix of the centered data (snapshot
//! method) and mapped back through the data; otherwise the `d x d` sample
//! covariance is decomposed directly. Both routes use divisor `n - 1`.

use thiserror::Error;

use crate::linalg::{dot, orthonormalize, symmetric_eigen};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubspaceError {
    #[error("PCA needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("all training rows are identical; the centered data has rank 0")]
    DegenerateData,
    #[error("requested rank must be at least 1")]
    InvalidRank,
    #[error("row {row} has length {found}, expected {expected}")]
    RaggedInput {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("vector has length {found}, model dimension is {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Eigenvalues at or below this fraction of the largest are treated as zero
/// when deciding the rank of the centered data.
const RANK_TOLERANCE: f64 = 1e-10;

/// Mean, orthonormal basis and variances of a fitted PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub dim: usize,
    pub rank: usize,
    pub mean: Vec<f64>,
    /// `dim x rank`, row-major; column `j` is the `j`-th principal axis.
    pub basis: Vec<f64>,
    /// Variance along each axis, nonincreasing.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn basis_column(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.basis[i * self.rank + j]).collect()
    }

    /// `basisᵀ (x - mean)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, SubspaceError> {
        if x.len() != self.dim {
            return Err(SubspaceError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.rank];
        for (i, (&xi, &mi)) in x.iter().zip(&self.mean).enumerate() {
            let c = xi - mi;
            let row = &self.basis[i * self.rank..(i + 1) * self.rank];
            out.iter_mut().zip(row).for_each(|(o, &b)| *o += b * c);
        }
        Ok(out)
    }

    /// `mean + basis · coeffs`, using the leading `coeffs.len()` axes.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        assert!(coeffs.len() <= self.rank, "more coefficients than axes");
        (0..self.dim)
            .map(|i| {
                let row = &self.basis[i * self.rank..i * self.rank + coeffs.len()];
                self.mean[i] + dot(row, coeffs)
            })
            .collect()
    }
}

fn validate_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<usize, SubspaceError> {
    if rows.len() < 2 {
        return Err(SubspaceError::TooFewSamples(rows.len()));
    }
    let d = rows[0].as_ref().len();
    for (row, r) in rows.iter().enumerate() {
        if r.as_ref().len() != d {
            return Err(SubspaceError::RaggedInput {
                row,
                expected: d,
                found: r.as_ref().len(),
            });
        }
    }
    Ok(d)
}

fn centered<R: AsRef<[f64]>>(rows: &[R], d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r.as_ref()).for_each(|(m, &x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let centered = rows
        .iter()
        .map(|r| r.as_ref().iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    (mean, centered)
}

/// Column with its largest-magnitude entry (first one on ties) made positive.
fn fix_sign(col: &mut [f64]) {
    let mut best = 0;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        col.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Fits PCA to the rows of `x`, retaining at most `k` axes.
///
/// The retained rank is `min(k, rank of centered x)`.
pub fn fit<R: AsRef<[f64]>>(x: &[R], k: usize) -> Result<PcaModel, SubspaceError> {
    let d = validate_rows(x)?;
    if k == 0 {
        return Err(SubspaceError::InvalidRank);
    }
    let n = x.len();
    let (mean, xc) = centered(x, d);
    let denom = (n - 1) as f64;

    let (values, mut columns): (Vec<f64>, Vec<Vec<f64>>) = if d > n {
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let g = dot(&xc[i], &xc[j]) / denom;
                gram[i * n + j] = g;
                gram[j * n + i] = g;
            }
        }
        let eig = symmetric_eigen(&gram, n);
        let rank = effective_rank(&eig.values).min(k);
        let cols = (0..rank)
            .map(|j| {
                let u = eig.column(j);
                let scale = 1.0 / (denom * eig.values[j]).sqrt();
                let mut v = vec![0.0; d];
                for (ui, row) in u.iter().zip(&xc) {
                    v.iter_mut().zip(row).for_each(|(vv, &r)| *vv += ui * r);
                }
                v.iter_mut().for_each(|vv| *vv *= scale);
                v
            })
            .collect();
        (eig.values[..rank].to_vec(), cols)
    } else {
        let mut cov = vec![0.0; d * d];
        for row in &xc {
            for i in 0..d {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..d {
                    cov[i * d + j] += ri * row[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let c = cov[i * d + j] / denom;
                cov[i * d + j] = c;
                cov[j * d + i] = c;
            }
        }
        let eig = symmetric_eigen(&cov, d);
        let rank = effective_rank(&eig.values).min(k);
        (eig.values[..rank].to_vec(), (0..rank).map(|j| eig.column(j)).collect())
    };

    if columns.is_empty() {
        return Err(SubspaceError::DegenerateData);
    }
    orthonormalize(&mut columns);
    columns.iter_mut().for_each(|c| fix_sign(c));

    let rank = columns.len();
    let mut basis = vec![0.0; d * rank];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            basis[i * rank + j] = v;
        }
    }
    Ok(PcaModel {
        dim: d,
        rank,
        mean,
        basis,
        eigenvalues: values.into_iter().map(|v| v.max(0.0)).collect(),
    })
}

fn effective_rank(sorted_values: &[f64]) -> usize {
    let top = sorted_values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return 0;
    }
    sorted_values
        .iter()
        .take_while(|&&v| v > top * RANK_TOLERANCE)
        .count()
}
