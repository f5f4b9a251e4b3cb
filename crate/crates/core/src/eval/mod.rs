//! Synthetic data, regression metrics and detection-rate reporting.

mod metrics;
mod report;
mod synth;

pub use metrics::{
    detection_rates, fit_metrics, misclassification_rate, FitMetrics, MatchCriteria, Rate,
    RateReport, RateRow, DEFAULT_ANGLE_TOLERANCE, UPRIGHT_LIMIT,
};
pub use report::{
    fit_metrics_csv, parse_timing_report, render_rate_table, timing_report, Manifest, PatchEntry,
    SceneEntry, TimingRow, REFERENCE_ROWS,
};
pub use synth::{face_template, synth_dataset, synth_patches, FaceBox, LabeledScene, SynthParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("CSV error: {0}")]
    Csv(String),
}
