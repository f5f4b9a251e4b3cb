//! 2D wavelet analysis and the decompose / threshold / reconstruct
//! de-noising procedure.
//!
//! Two transforms are provided: the decimated [`dwt2`] (any size, periodic or
//! half-sample symmetric boundary) and the undecimated [`swt2`] (periodic,
//! sizes divisible by `2^levels`). Both use orthonormal filters, so the noise
//! level of white Gaussian input is preserved in every detail band.

mod dwt;
mod swt;
mod threshold;

pub use dwt::{dwt2, idwt2};
pub use swt::{iswt2, swt2};
pub use threshold::{
    estimate_noise_sigma, hard_threshold, median_abs, soft_threshold, universal_threshold,
    ThresholdMode, ThresholdRule, ThresholdSelection,
};

use crate::image::Image;
use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveletError {
    #[error("decomposition needs at least one level")]
    ZeroLevels,
    #[error("level {level}: {rows}x{cols} input is smaller than the filter length {filter_len}")]
    TooManyLevels {
        level: usize,
        rows: usize,
        cols: usize,
        filter_len: usize,
    },
    #[error("band shapes are inconsistent with the pyramid: {0}")]
    ShapeMismatch(String),
    #[error("{rows}x{cols} is not divisible by 2^{levels}")]
    BadDimensions {
        rows: usize,
        cols: usize,
        levels: usize,
    },
    #[error("the stationary transform only supports the periodic boundary")]
    UnsupportedBoundary,
    #[error("threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Haar,
    Db2,
}

impl Family {
    /// Analysis lowpass filter (applied by correlation).
    pub fn lowpass(self) -> &'static [f64] {
        match self {
            Family::Haar => &HAAR_LO,
            Family::Db2 => &DB2_LO,
        }
    }

    /// Quadrature mirror highpass: `hi[j] = (-1)^j lo[L-1-j]`.
    pub fn highpass(self) -> &'static [f64] {
        match self {
            Family::Haar => &HAAR_HI,
            Family::Db2 => &DB2_HI,
        }
    }

    pub fn filter_len(self) -> usize {
        self.lowpass().len()
    }
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(Family::Haar),
            "db2" | "daubechies2" | "daubechies-2" => Ok(Family::Db2),
            other => Err(format!(
                "unknown wavelet family '{other}' (expected haar or db2)"
            )),
        }
    }
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const HAAR_LO: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
const HAAR_HI: [f64; 2] = [FRAC_1_SQRT_2, -FRAC_1_SQRT_2];

// (1+√3, 3+√3, 3−√3, 1−√3) / (4√2)
const DB2_LO: [f64; 4] = [
    0.482_962_913_144_534_16,
    0.836_516_303_737_807_9,
    0.224_143_868_042_013_4,
    -0.129_409_522_551_260_37,
];
const DB2_HI: [f64; 4] = [
    -0.129_409_522_551_260_37,
    -0.224_143_868_042_013_4,
    0.836_516_303_737_807_9,
    -0.482_962_913_144_534_16,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Symmetric,
}

impl std::str::FromStr for Boundary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "periodic" | "per" => Ok(Boundary::Periodic),
            "symmetric" | "sym" => Ok(Boundary::Symmetric),
            other => Err(format!("unknown boundary '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct WaveletSpec {
    pub family: Family,
    pub boundary: Boundary,
}

impl WaveletSpec {
    pub fn new(family: Family, boundary: Boundary) -> Self {
        Self { family, boundary }
    }
}

/// Detail bands of one decomposition level.
///
/// `horizontal` is the column highpass of the row lowpass, `vertical` the
/// column lowpass of the row highpass, `diagonal` highpass in both.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands {
    pub horizontal: Matrix,
    pub vertical: Matrix,
    pub diagonal: Matrix,
}

impl DetailBands {
    fn bands_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.horizontal, &mut self.vertical, &mut self.diagonal]
    }

    fn bands(&self) -> [&Matrix; 3] {
        [&self.horizontal, &self.vertical, &self.diagonal]
    }
}

/// Decimated multi-level decomposition. `details[0]` is the finest level.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandPyramid {
    pub approx: Matrix,
    pub details: Vec<DetailBands>,
    /// Input shape `(rows, cols)` at each level, finest first.
    pub sizes: Vec<(usize, usize)>,
}

/// Undecimated decomposition; every band has the input's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SwtPyramid {
    pub approx: Matrix,
    pub details: Vec<DetailBands>,
}

/// Shared access to detail bands for thresholding and noise estimation.
pub trait Pyramid {
    fn levels(&self) -> usize;
    fn detail_levels(&self) -> &[DetailBands];
    fn detail_levels_mut(&mut self) -> &mut [DetailBands];

    /// Energy of all coefficients, approximation included.
    fn energy(&self) -> f64 {
        let details: f64 = self
            .detail_levels()
            .iter()
            .flat_map(|d| d.bands())
            .map(Matrix::sum_of_squares)
            .sum();
        details + self.approx_band().sum_of_squares()
    }

    fn approx_band(&self) -> &Matrix;
}

impl Pyramid for SubbandPyramid {
    fn levels(&self) -> usize {
        self.details.len()
    }
    fn detail_levels(&self) -> &[DetailBands] {
        &self.details
    }
    fn detail_levels_mut(&mut self) -> &mut [DetailBands] {
        &mut self.details
    }
    fn approx_band(&self) -> &Matrix {
        &self.approx
    }
}

impl Pyramid for SwtPyramid {
    fn levels(&self) -> usize {
        self.details.len()
    }
    fn detail_levels(&self) -> &[DetailBands] {
        &self.details
    }
    fn detail_levels_mut(&mut self) -> &mut [DetailBands] {
        &mut self.details
    }
    fn approx_band(&self) -> &Matrix {
        &self.approx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Dwt,
    Swt,
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dwt" => Ok(Backend::Dwt),
            "swt" => Ok(Backend::Swt),
            other => Err(format!("unknown backend '{other}' (expected dwt or swt)")),
        }
    }
}

/// Applies `rule` to every detail coefficient at every level. The
/// approximation band is left untouched.
pub fn threshold_details<P: Pyramid>(
    pyr: &mut P,
    rule: ThresholdRule,
    pixel_count: usize,
) -> Result<f64, WaveletError> {
    let t = match rule.selection {
        ThresholdSelection::Fixed(t) if t < 0.0 || t.is_nan() => {
            return Err(WaveletError::NegativeThreshold(t))
        }
        ThresholdSelection::Fixed(t) => t,
        ThresholdSelection::Universal => {
            universal_threshold(estimate_noise_sigma(&*pyr), pixel_count.max(1))
        }
    };
    let op: fn(f64, f64) -> f64 = match rule.mode {
        ThresholdMode::Soft => soft_threshold,
        ThresholdMode::Hard => hard_threshold,
    };
    for level in pyr.detail_levels_mut() {
        for band in level.bands_mut() {
            for v in band.as_mut_slice() {
                *v = op(*v, t);
            }
        }
    }
    Ok(t)
}

/// Decompose, threshold the detail bands, reconstruct, clamp to `[0, 1]`.
pub fn denoise(
    img: &Image,
    spec: WaveletSpec,
    levels: usize,
    rule: ThresholdRule,
    backend: Backend,
) -> Result<Image, WaveletError> {
    let input = Matrix::from(img);
    let n = img.pixels().len();
    let out = match backend {
        Backend::Dwt => {
            let mut pyr = dwt2(&input, spec, levels)?;
            threshold_details(&mut pyr, rule, n)?;
            idwt2(&pyr, spec)?
        }
        Backend::Swt => {
            let mut pyr = swt2(&input, spec, levels)?;
            threshold_details(&mut pyr, rule, n)?;
            iswt2(&pyr, spec)?
        }
    };
    Ok(
        Image::from_clamped(img.width(), img.height(), out.into_vec())
            .expect("reconstruction preserves shape"),
    )
}

/// A complete de-noising configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseSettings {
    pub wavelet: WaveletSpec,
    pub levels: usize,
    pub rule: ThresholdRule,
    pub backend: Backend,
}

impl DenoiseSettings {
    /// Haar, two levels, soft universal threshold on the decimated transform.
    pub fn patch_default() -> Self {
        Self {
            wavelet: WaveletSpec::default(),
            levels: 2,
            rule: ThresholdRule::default(),
            backend: Backend::Dwt,
        }
    }

    /// Same as [`patch_default`](Self::patch_default) with three levels.
    pub fn image_default() -> Self {
        Self {
            levels: 3,
            ..Self::patch_default()
        }
    }

    pub fn apply(&self, img: &Image) -> Result<Image, WaveletError> {
        denoise(img, self.wavelet, self.levels, self.rule, self.backend)
    }
}

impl Default for DenoiseSettings {
    fn default() -> Self {
        Self::patch_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_are_orthonormal_qmf() {
        for fam in [Family::Haar, Family::Db2] {
            let lo = fam.lowpass();
            let hi = fam.highpass();
            let l = lo.len();
            assert!((lo.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs() < 1e-12);
            assert!(hi.iter().sum::<f64>().abs() < 1e-12);
            for j in 0..l {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                assert!((hi[j] - sign * lo[l - 1 - j]).abs() < 1e-15);
            }
            // even-shift orthogonality
            for shift in (0..l).step_by(2) {
                let dot: f64 = (0..l - shift).map(|j| lo[j] * lo[j + shift]).sum();
                let expect = if shift == 0 { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12, "{fam:?} shift {shift}");
            }
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("haar".parse::<Family>(), Ok(Family::Haar));
        assert_eq!("DB2".parse::<Family>(), Ok(Family::Db2));
        assert!("sym4".parse::<Family>().is_err());
        assert_eq!("swt".parse::<Backend>(), Ok(Backend::Swt));
        assert_eq!("symmetric".parse::<Boundary>(), Ok(Boundary::Symmetric));
    }

    fn step_image() -> Image {
        Image::from_fn(16, 16, |x, _| if x < 8 { 0.2 } else { 0.8 })
    }

    #[test]
    fn zero_threshold_is_identity() {
        let img = Image::from_fn(15, 13, |x, y| ((x * 7 + y * 11) % 17) as f64 / 16.0);
        let rule = ThresholdRule::new(ThresholdMode::Soft, ThresholdSelection::Fixed(0.0));
        for spec in [
            WaveletSpec::new(Family::Haar, Boundary::Periodic),
            WaveletSpec::new(Family::Db2, Boundary::Symmetric),
        ] {
            let out = denoise(&img, spec, 2, rule, Backend::Dwt).unwrap();
            for (a, b) in out.pixels().iter().zip(img.pixels()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        let img16 = step_image();
        let out = denoise(&img16, WaveletSpec::default(), 2, rule, Backend::Swt).unwrap();
        for (a, b) in out.pixels().iter().zip(img16.pixels()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_image_survives_any_rule() {
        let img = Image::filled(16, 16, 0.37);
        for backend in [Backend::Dwt, Backend::Swt] {
            for rule in [
                ThresholdRule::default(),
                ThresholdRule::new(ThresholdMode::Hard, ThresholdSelection::Fixed(0.5)),
            ] {
                let out = denoise(&img, WaveletSpec::default(), 3, rule, backend).unwrap();
                assert!(out.pixels().iter().all(|p| (p - 0.37).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn negative_fixed_threshold_is_rejected() {
        let rule = ThresholdRule::new(ThresholdMode::Soft, ThresholdSelection::Fixed(-1.0));
        assert_eq!(
            denoise(&step_image(), WaveletSpec::default(), 1, rule, Backend::Dwt),
            Err(WaveletError::NegativeThreshold(-1.0))
        );
    }

    #[test]
    fn swt_rejects_symmetric_boundary() {
        let spec = WaveletSpec::new(Family::Haar, Boundary::Symmetric);
        assert_eq!(
            denoise(
                &step_image(),
                spec,
                1,
                ThresholdRule::default(),
                Backend::Swt
            ),
            Err(WaveletError::UnsupportedBoundary)
        );
    }
}
