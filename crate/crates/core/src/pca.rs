//! Principal component analysis with a direct covariance route and the
//! small-sample Gram route used for eigenfaces (`d > m`).

use crate::linalg::{jacobi_eigen, Matrix};
use thiserror::Error;

/// Off-diagonal Frobenius norm at which the Jacobi sweeps stop.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PcaError {
    #[error("PCA needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("rank {k} exceeds min(d, m - 1) = {max}")]
    RankTooHigh { k: usize, max: usize },
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("inconsistent model arrays: {0}")]
    Inconsistent(String),
}

/// Which eigenproblem `fit` solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    /// Gram route when `d > m`, covariance route otherwise.
    Auto,
    /// Eigen-decompose the `d × d` covariance.
    Covariance,
    /// Eigen-decompose the `m × m` Gram matrix and back-project.
    Gram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `d × k`, orthonormal columns.
    basis: Matrix,
    /// `k × d` copy of the basis for contiguous projections.
    components: Matrix,
    eigenvalues: Vec<f64>,
    total_variance: f64,
}

impl PcaModel {
    /// Assembles a model from stored parts, checking shapes and orthonormality.
    pub fn from_parts(
        mean: Vec<f64>,
        basis: Matrix,
        eigenvalues: Vec<f64>,
        total_variance: f64,
    ) -> Result<Self, PcaError> {
        let d = mean.len();
        let (rows, k) = basis.shape();
        if rows != d || eigenvalues.len() != k || k == 0 {
            return Err(PcaError::Inconsistent(format!(
                "mean {d}, basis {rows}x{k}, {} eigenvalues",
                eigenvalues.len()
            )));
        }
        let gram = basis.transpose().matmul(&basis);
        if gram.max_abs_diff(&Matrix::identity(k)) > 1e-8 {
            return Err(PcaError::Inconsistent("basis is not orthonormal".into()));
        }
        Ok(Self {
            components: basis.transpose(),
            mean,
            basis,
            eigenvalues,
            total_variance,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// True when the training data had no spread at all.
    pub fn is_degenerate(&self) -> bool {
        self.eigenvalues.iter().all(|&l| l == 0.0)
    }

    /// `Bᵀ (x − mean)`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, PcaError> {
        self.check_dim(x.len())?;
        let mut out = vec![0.0; self.rank()];
        self.transform_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked projection into a caller buffer of length `rank()`.
    pub(crate) fn transform_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .components
                .row(i)
                .iter()
                .zip(x)
                .zip(&self.mean)
                .map(|((b, xv), m)| b * (xv - m))
                .sum();
        }
    }

    /// `B y + mean`.
    pub fn inverse_transform(&self, y: &[f64]) -> Result<Vec<f64>, PcaError> {
        if y.len() != self.rank() {
            return Err(PcaError::DimensionMismatch {
                expected: self.rank(),
                got: y.len(),
            });
        }
        Ok((0..self.dim())
            .map(|r| {
                self.mean[r]
                    + self
                        .basis
                        .row(r)
                        .iter()
                        .zip(y)
                        .map(|(b, v)| b * v)
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        if self.total_variance <= 0.0 {
            return vec![0.0; self.rank()];
        }
        self.eigenvalues
            .iter()
            .map(|l| l / self.total_variance)
            .collect()
    }

    /// Keeps the leading `k` components.
    pub fn truncated(&self, k: usize) -> Result<PcaModel, PcaError> {
        if k == 0 {
            return Err(PcaError::ZeroRank);
        }
        if k > self.rank() {
            return Err(PcaError::RankTooHigh {
                k,
                max: self.rank(),
            });
        }
        let basis = Matrix::from_fn(self.dim(), k, |r, c| self.basis[(r, c)]);
        Ok(PcaModel {
            components: basis.transpose(),
            basis,
            mean: self.mean.clone(),
            eigenvalues: self.eigenvalues[..k].to_vec(),
            total_variance: self.total_variance,
        })
    }

    fn check_dim(&self, got: usize) -> Result<(), PcaError> {
        if got != self.dim() {
            return Err(PcaError::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Fits the top-`k` principal axes of the rows of `samples` (`m × d`).
pub fn fit(samples: &Matrix, k: usize) -> Result<PcaModel, PcaError> {
    fit_with(samples, k, FitMethod::Auto)
}

pub fn fit_with(samples: &Matrix, k: usize, method: FitMethod) -> Result<PcaModel, PcaError> {
    let (m, d) = samples.shape();
    if m < 2 {
        return Err(PcaError::TooFewSamples(m));
    }
    if k == 0 {
        return Err(PcaError::ZeroRank);
    }
    let max = d.min(m - 1);
    if k > max {
        return Err(PcaError::RankTooHigh { k, max });
    }

    let mean: Vec<f64> = (0..d)
        .map(|c| (0..m).map(|r| samples[(r, c)]).sum::<f64>() / m as f64)
        .collect();
    let centered = Matrix::from_fn(m, d, |r, c| samples[(r, c)] - mean[c]);
    let denom = (m - 1) as f64;
    let total_variance = centered.sum_of_squares() / denom;

    let use_gram = match method {
        FitMethod::Auto => d > m,
        FitMethod::Covariance => false,
        FitMethod::Gram => true,
    };

    let (mut eigenvalues, mut columns) = if use_gram {
        let mut gram = centered.matmul(&centered.transpose());
        gram.as_mut_slice().iter_mut().for_each(|v| *v /= denom);
        let eig = jacobi_eigen(&gram, JACOBI_TOLERANCE);
        let order = descending_order(&eig.values);
        let lmax = order.first().map_or(0.0, |&i| eig.values[i]).max(0.0);
        let mut values = Vec::with_capacity(k);
        let mut cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(k);
        for &i in order.iter().take(k) {
            let lambda = eig.values[i];
            values.push(lambda);
            if lmax == 0.0 || lambda <= 1e-12 * lmax {
                cols.push(None);
                continue;
            }
            // v = Xcᵀ u, then unit-normalize
            let u = eig.vectors.column(i);
            let mut v = vec![0.0; d];
            for (r, &ur) in u.iter().enumerate() {
                for (vc, x) in v.iter_mut().zip(centered.row(r)) {
                    *vc += ur * x;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                cols.push(None);
            } else {
                v.iter_mut().for_each(|x| *x /= norm);
                cols.push(Some(v));
            }
        }
        (values, cols)
    } else {
        let mut cov = centered.transpose().matmul(&centered);
        cov.as_mut_slice().iter_mut().for_each(|v| *v /= denom);
        let eig = jacobi_eigen(&cov, JACOBI_TOLERANCE);
        let order = descending_order(&eig.values);
        let values = order.iter().take(k).map(|&i| eig.values[i]).collect();
        let cols = order
            .iter()
            .take(k)
            .map(|&i| Some(eig.vectors.column(i)))
            .collect();
        (values, cols)
    };

    for l in &mut eigenvalues {
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    let basis_cols = orthonormal_completion(&mut columns, d);
    let mut basis = Matrix::zeros(d, k);
    for (c, col) in basis_cols.iter().enumerate() {
        let col = normalize_sign(col);
        for r in 0..d {
            basis[(r, c)] = col[r];
        }
    }
    Ok(PcaModel {
        components: basis.transpose(),
        basis,
        mean,
        eigenvalues,
        total_variance,
    })
}

/// Fits the smallest model whose cumulative explained variance reaches
/// `fraction`, capped at `cap` components and at `min(d, m − 1)`.
pub fn fit_by_variance(samples: &Matrix, fraction: f64, cap: usize) -> Result<PcaModel, PcaError> {
    let (m, d) = samples.shape();
    if m < 2 {
        return Err(PcaError::TooFewSamples(m));
    }
    let max = d.min(m - 1);
    let full = fit(samples, max.min(cap.max(1)))?;
    let k = choose_rank(&full.explained_variance_ratio(), fraction);
    full.truncated(k)
}

/// Smallest `k` whose leading ratios sum to at least `fraction`; all of them
/// if the target is never reached.
pub fn choose_rank(ratios: &[f64], fraction: f64) -> usize {
    let mut acc = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        acc += r;
        if acc >= fraction {
            return i + 1;
        }
    }
    ratios.len().max(1)
}

/// Indices sorted by value, largest first; equal values keep index order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Flips a vector so its largest-magnitude entry (lowest index on ties) is positive.
pub fn normalize_sign(v: &[f64]) -> Vec<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter().map(|x| -x).collect()
    } else {
        v.to_vec()
    }
}

/// Fills missing columns with canonical directions (in index order) and
/// re-orthonormalizes everything with modified Gram-Schmidt.
fn orthonormal_completion(columns: &mut [Option<Vec<f64>>], d: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
    let mut next_canonical = 0;
    for col in columns.iter_mut() {
        let candidate = match col.take() {
            Some(v) => gram_schmidt(v, &out),
            None => None,
        };
        let v = match candidate {
            Some(v) => v,
            None => loop {
                assert!(next_canonical < d, "cannot complete basis");
                let mut e = vec![0.0; d];
                e[next_canonical] = 1.0;
                next_canonical += 1;
                if let Some(v) = gram_schmidt(e, &out) {
                    break v;
                }
            },
        };
        out.push(v);
    }
    out
}

fn gram_schmidt(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for b in basis {
        let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-6 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}
