use super::Pyramid;
use serde::{Deserialize, Serialize};

/// `sign(v) * max(|v| - t, 0)`.
#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    let m = v.abs() - t;
    if m > 0.0 {
        m.copysign(v)
    } else {
        0.0
    }
}

/// Keeps `v` when `|v| >= t`, otherwise 0.
#[inline]
pub fn hard_threshold(v: f64, t: f64) -> f64 {
    if v.abs() >= t {
        v
    } else {
        0.0
    }
}

/// Median of absolute values; the mean of the two middle values for even
/// counts. Empty input gives 0.
pub fn median_abs(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut a: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    a.sort_by(f64::total_cmp);
    let n = a.len();
    if n % 2 == 1 {
        a[n / 2]
    } else {
        0.5 * (a[n / 2 - 1] + a[n / 2])
    }
}

/// Robust noise level from the finest diagonal band: `median(|d|) / 0.6745`.
pub fn estimate_noise_sigma<P: Pyramid + ?Sized>(pyr: &P) -> f64 {
    match pyr.detail_levels().first() {
        Some(level) => median_abs(level.diagonal.as_slice()) / 0.6745,
        None => 0.0,
    }
}

/// `sigma * sqrt(2 ln n)`.
pub fn universal_threshold(sigma: f64, n: usize) -> f64 {
    sigma * (2.0 * (n.max(1) as f64).ln()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    #[default]
    Soft,
    Hard,
}

impl std::str::FromStr for ThresholdMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "soft" => Ok(ThresholdMode::Soft),
            "hard" => Ok(ThresholdMode::Hard),
            other => Err(format!(
                "unknown threshold mode '{other}' (expected soft or hard)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSelection {
    /// Universal threshold with the MAD noise estimate.
    #[default]
    Universal,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ThresholdRule {
    pub mode: ThresholdMode,
    pub selection: ThresholdSelection,
}

impl ThresholdRule {
    pub fn new(mode: ThresholdMode, selection: ThresholdSelection) -> Self {
        Self { mode, selection }
    }
}
