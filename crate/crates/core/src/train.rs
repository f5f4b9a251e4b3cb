//! Training: de-noise and standardize labeled patches, fit PCA, store the
//! projections in a GRNN and calibrate the density threshold.

use crate::bundle::ModelBundle;
use crate::detector::{PatchPipeline, ScanConfig};
use crate::grnn::{median_pairwise_distance, select_spread, GrnnError, GrnnModel};
use crate::image::{normalize_patch, patch_contrast, Image};
use crate::linalg::Matrix;
use crate::pca::{fit, fit_by_variance, PcaError, PcaModel};
use crate::wavelet::{DenoiseSettings, WaveletError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("no training patches")]
    Empty,
    #[error("{count} patches but {labels} labels")]
    CountMismatch { count: usize, labels: usize },
    #[error("patch {index} is {width}x{height}, expected {window}x{window}")]
    PatchSize {
        index: usize,
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("label {value} of patch {index} is outside [-90, 90]")]
    Label { index: usize, value: f64 },
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Denoise(#[from] WaveletError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Grnn(#[from] GrnnError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankChoice {
    Fixed(usize),
    /// Smallest rank reaching the variance fraction, at most `cap`.
    Variance {
        fraction: f64,
        cap: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpreadChoice {
    Fixed(f64),
    /// Leave-one-out selection over the default grid.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub window: usize,
    pub denoise: DenoiseSettings,
    pub rank: RankChoice,
    pub spread: SpreadChoice,
    /// Quantile of the training densities used as the detection threshold.
    pub threshold_quantile: f64,
    /// The contrast floor is this fraction of the same quantile of the
    /// training patch contrasts. 0 disables the floor.
    pub contrast_fraction: f64,
    /// Recorded in the bundle; training itself is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: 15,
            denoise: DenoiseSettings::patch_default(),
            rank: RankChoice::Variance {
                fraction: 0.95,
                cap: 40,
            },
            spread: SpreadChoice::Auto,
            threshold_quantile: 0.01,
            contrast_fraction: 0.5,
            seed: 0,
        }
    }
}

/// Density threshold used when leave-one-out densities are unavailable.
pub const SINGLE_SAMPLE_THRESHOLD: f64 = 0.5;

/// De-noised, standardized pixel vectors, one per row, and the contrast of
/// each de-noised patch.
pub fn patch_matrix(
    patches: &[Image],
    denoise: &DenoiseSettings,
) -> Result<(Matrix, Vec<f64>), TrainError> {
    let d = patches.first().map_or(0, |p| p.width() * p.height());
    let mut data = Vec::with_capacity(patches.len() * d);
    let mut contrast = Vec::with_capacity(patches.len());
    for p in patches {
        let clean = denoise.apply(p)?;
        contrast.push(patch_contrast(&clean));
        data.extend(normalize_patch(&clean));
    }
    Ok((Matrix::from_vec(patches.len(), d, data), contrast))
}

/// Nearest-rank quantile (`quantile` in `[0, 1]`) of a non-empty sample.
fn nearest_rank(values: &mut [f64], quantile: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = ((quantile * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[rank - 1]
}

/// One sample has no spread to analyse, so the model projects onto the
/// sample's own direction from the origin.
fn single_sample_pca(x: &[f64]) -> Result<PcaModel, PcaError> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dir: Vec<f64> = if norm > 0.0 {
        x.iter().map(|v| v / norm).collect()
    } else {
        let mut e = vec![0.0; x.len()];
        e[0] = 1.0;
        e
    };
    PcaModel::from_parts(
        vec![0.0; x.len()],
        Matrix::from_vec(x.len(), 1, dir),
        vec![0.0],
        0.0,
    )
}

fn fit_pca(samples: &Matrix, rank: RankChoice) -> Result<PcaModel, TrainError> {
    let (m, d) = samples.shape();
    if m == 1 {
        return Ok(single_sample_pca(samples.row(0))?);
    }
    Ok(match rank {
        RankChoice::Fixed(k) => fit(samples, k)?,
        RankChoice::Variance { fraction, cap } => {
            if !(fraction > 0.0 && fraction <= 1.0) || cap == 0 {
                return Err(TrainError::BadConfig(format!(
                    "variance fraction {fraction} / cap {cap}"
                )));
            }
            fit_by_variance(samples, fraction, cap.min(d))?
        }
    })
}

fn choose_spread(
    features: &Matrix,
    targets: &[f64],
    choice: SpreadChoice,
) -> Result<f64, TrainError> {
    match choice {
        SpreadChoice::Fixed(s) => Ok(s),
        SpreadChoice::Auto => match features.rows() {
            1 => Ok(1.0),
            2 => {
                let d = median_pairwise_distance(features);
                Ok(if d > 0.0 { d } else { 1.0 })
            }
            _ => Ok(select_spread(features, targets, None)?),
        },
    }
}

/// Nearest-rank quantile of the leave-one-out training densities.
pub fn calibrate_threshold(grnn: &GrnnModel, quantile: f64) -> f64 {
    let m = grnn.len();
    if m < 2 {
        return SINGLE_SAMPLE_THRESHOLD;
    }
    let mut dens: Vec<f64> = (0..m)
        .map(|i| grnn.predict_leave_one_out(i).density)
        .collect();
    nearest_rank(&mut dens, quantile)
}

pub fn train(
    patches: &[Image],
    angles: &[f64],
    cfg: &TrainConfig,
) -> Result<ModelBundle, TrainError> {
    if patches.is_empty() {
        return Err(TrainError::Empty);
    }
    if patches.len() != angles.len() {
        return Err(TrainError::CountMismatch {
            count: patches.len(),
            labels: angles.len(),
        });
    }
    if !(0.0..=1.0).contains(&cfg.threshold_quantile) {
        return Err(TrainError::BadConfig(
            "threshold quantile must lie in [0, 1]".into(),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.contrast_fraction) {
        return Err(TrainError::BadConfig(
            "contrast fraction must lie in [0, 1]".into(),
        ));
    }
    for (index, p) in patches.iter().enumerate() {
        if p.width() != cfg.window || p.height() != cfg.window {
            return Err(TrainError::PatchSize {
                index,
                width: p.width(),
                height: p.height(),
                window: cfg.window,
            });
        }
    }
    if let Some((index, &value)) = angles
        .iter()
        .enumerate()
        .find(|(_, a)| !(-90.0..=90.0).contains(*a))
    {
        return Err(TrainError::Label { index, value });
    }

    let (samples, mut contrast) = patch_matrix(patches, &cfg.denoise)?;
    let contrast_floor =
        cfg.contrast_fraction * nearest_rank(&mut contrast, cfg.threshold_quantile);
    let pca = fit_pca(&samples, cfg.rank)?;
    let k = pca.rank();
    let mut features = Matrix::zeros(samples.rows(), k);
    for r in 0..samples.rows() {
        let f = pca.transform(samples.row(r))?;
        features.row_mut(r).copy_from_slice(&f);
    }
    let spread = choose_spread(&features, angles, cfg.spread)?;
    let grnn = GrnnModel::fit(features, angles.to_vec(), spread)?;
    let density_threshold = calibrate_threshold(&grnn, cfg.threshold_quantile);
    Ok(ModelBundle {
        window: cfg.window,
        denoise: cfg.denoise,
        pca,
        grnn,
        density_threshold,
        contrast_floor,
        samples: patches.len(),
        seed: cfg.seed,
    })
}

impl ModelBundle {
    /// Scan settings matching how the model was trained, with its calibrated
    /// density threshold and contrast floor.
    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig {
            window: self.window,
            denoise: self.denoise,
            density_threshold: self.density_threshold,
            min_contrast: self.contrast_floor,
            ..ScanConfig::default()
        }
    }

    pub fn pipeline(&self) -> PatchPipeline<'_> {
        PatchPipeline {
            denoise: Some(&self.denoise),
            pca: &self.pca,
            grnn: &self.grnn,
        }
    }
}
