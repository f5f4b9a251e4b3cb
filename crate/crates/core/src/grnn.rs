//! Generalized regression network: a Gaussian-kernel weighted average of
//! stored training targets, plus the mean kernel mass as a confidence.

use crate::linalg::Matrix;
use thiserror::Error;

/// Weight sums below this are treated as underflow.
pub const UNDERFLOW: f64 = 1e-300;

/// Multipliers of the median pairwise center distance tried by
/// [`select_spread`] when no grid is given.
pub const DEFAULT_GRID_MULTIPLIERS: [f64; 7] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrnnError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("target {index} = {value} lies outside [-90, 90]")]
    TargetOutOfRange { index: usize, value: f64 },
    #[error("spread must be positive, got {0}")]
    NonPositiveSpread(f64),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{centers} centers but {targets} targets")]
    CountMismatch { centers: usize, targets: usize },
    #[error("spread selection needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("spread grid is empty or contains a non-positive value")]
    BadGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Angle in degrees.
    pub value: f64,
    /// Mean kernel mass over the stored centers.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrnnModel {
    centers: Matrix,
    targets: Vec<f64>,
    spread: f64,
    min_target: f64,
    max_target: f64,
}

impl GrnnModel {
    /// Stores the training set; no optimization takes place.
    pub fn fit(centers: Matrix, targets: Vec<f64>, spread: f64) -> Result<Self, GrnnError> {
        if centers.rows() == 0 || targets.is_empty() {
            return Err(GrnnError::EmptyTrainingSet);
        }
        if centers.rows() != targets.len() {
            return Err(GrnnError::CountMismatch {
                centers: centers.rows(),
                targets: targets.len(),
            });
        }
        if let Some((index, &value)) = targets
            .iter()
            .enumerate()
            .find(|(_, t)| !(-90.0..=90.0).contains(*t))
        {
            return Err(GrnnError::TargetOutOfRange { index, value });
        }
        if !(spread > 0.0 && spread.is_finite()) {
            return Err(GrnnError::NonPositiveSpread(spread));
        }
        let min_target = targets.iter().copied().fold(f64::INFINITY, f64::min);
        let max_target = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            centers,
            targets,
            spread,
            min_target,
            max_target,
        })
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }

    pub fn with_spread(&self, spread: f64) -> Result<Self, GrnnError> {
        Self::fit(self.centers.clone(), self.targets.clone(), spread)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, GrnnError> {
        if x.len() != self.dim() {
            return Err(GrnnError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Prediction {
        let scale = 1.0 / (2.0 * self.spread * self.spread);
        let mut wsum = 0.0;
        let mut tsum = 0.0;
        for (i, t) in self.targets.iter().enumerate() {
            let w = (-sq_dist(self.centers.row(i), x) * scale).exp();
            wsum += w;
            tsum += t * w;
        }
        if wsum < UNDERFLOW {
            return Prediction {
                value: self.targets[nearest(&self.centers, x, None)],
                density: 0.0,
            };
        }
        Prediction {
            value: (tsum / wsum).clamp(self.min_target, self.max_target),
            density: wsum / self.len() as f64,
        }
    }

    /// Prediction for center `i` from all other centers.
    pub fn predict_leave_one_out(&self, i: usize) -> Prediction {
        let x = self.centers.row(i);
        let scale = 1.0 / (2.0 * self.spread * self.spread);
        let mut wsum = 0.0;
        let mut tsum = 0.0;
        for (j, t) in self.targets.iter().enumerate() {
            if j == i {
                continue;
            }
            let w = (-sq_dist(self.centers.row(j), x) * scale).exp();
            wsum += w;
            tsum += t * w;
        }
        let others = self.len().saturating_sub(1);
        if others == 0 {
            return Prediction {
                value: self.targets[i],
                density: 0.0,
            };
        }
        if wsum < UNDERFLOW {
            return Prediction {
                value: self.targets[nearest(&self.centers, x, Some(i))],
                density: 0.0,
            };
        }
        Prediction {
            value: (tsum / wsum).clamp(self.min_target, self.max_target),
            density: wsum / others as f64,
        }
    }

    /// Leave-one-out mean absolute error of the stored training set.
    pub fn loo_mean_abs_error(&self) -> f64 {
        let total: f64 = (0..self.len())
            .map(|i| (self.predict_leave_one_out(i).value - self.targets[i]).abs())
            .sum();
        total / self.len() as f64
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the closest center, lowest index on ties.
fn nearest(centers: &Matrix, x: &[f64], skip: Option<usize>) -> usize {
    let mut best = usize::MAX;
    let mut best_d = f64::INFINITY;
    for i in 0..centers.rows() {
        if Some(i) == skip {
            continue;
        }
        let d = sq_dist(centers.row(i), x);
        if d < best_d || best == usize::MAX {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Median Euclidean distance over all center pairs.
pub fn median_pairwise_distance(centers: &Matrix) -> f64 {
    let m = centers.rows();
    let mut d = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            d.push(sq_dist(centers.row(i), centers.row(j)).sqrt());
        }
    }
    crate::wavelet::median_abs(&d)
}

/// The default grid scaled by the median pairwise distance (1 if that is 0).
pub fn default_spread_grid(centers: &Matrix) -> Vec<f64> {
    let base = median_pairwise_distance(centers);
    let base = if base > 0.0 { base } else { 1.0 };
    DEFAULT_GRID_MULTIPLIERS.iter().map(|g| g * base).collect()
}

/// Picks the grid spread with the lowest leave-one-out mean absolute error.
/// Errors equal within 1e-12 count as ties and go to the smaller spread.
pub fn select_spread(
    centers: &Matrix,
    targets: &[f64],
    grid: Option<&[f64]>,
) -> Result<f64, GrnnError> {
    let m = centers.rows();
    if m < 3 {
        return Err(GrnnError::TooFewSamples(m));
    }
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = default_spread_grid(centers);
            &owned
        }
    };
    if grid.is_empty() || grid.iter().any(|g| !(*g > 0.0)) {
        return Err(GrnnError::BadGrid);
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let model = GrnnModel::fit(centers.clone(), targets.to_vec(), sorted[0])?;
    let mut best = (f64::INFINITY, sorted[0]);
    for &s in &sorted {
        let err = model.with_spread(s)?.loo_mean_abs_error();
        if err < best.0 - 1e-12 * (1.0 + best.0.abs().min(1e300)) {
            best = (err, s);
        }
    }
    Ok(best.1)
}
