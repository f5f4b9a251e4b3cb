use super::synth::{FaceBox, LabeledScene};
use super::EvalError;
use crate::detector::{box_iou, Detection};
use serde::{Deserialize, Serialize};

/// Least-squares line `output ≈ m·target + b` and Pearson `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub m: f64,
    pub b: f64,
    pub r: f64,
    /// Set when either series has zero variance; `m`, `b`, `r` are then 0.
    pub degenerate: bool,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn fit_metrics(targets: &[f64], outputs: &[f64]) -> Result<FitMetrics, EvalError> {
    if targets.len() != outputs.len() {
        return Err(EvalError::LengthMismatch {
            left: targets.len(),
            right: outputs.len(),
        });
    }
    if targets.len() < 2 {
        return Err(EvalError::TooFewPoints(targets.len()));
    }
    let (mt, mo) = (mean(targets), mean(outputs));
    let (mut stt, mut soo, mut sto) = (0.0, 0.0, 0.0);
    for (&t, &o) in targets.iter().zip(outputs) {
        let (dt, d_o) = (t - mt, o - mo);
        stt += dt * dt;
        soo += d_o * d_o;
        sto += dt * d_o;
    }
    // relative cut-off so constant series with rounding residue count as flat
    let flat = |s: f64, mu: f64, v: &[f64]| {
        let scale = v.iter().fold(mu.abs(), |a, &x| a.max(x.abs()));
        s <= (f64::EPSILON * scale).powi(2) * v.len() as f64
    };
    if flat(stt, mt, targets) || flat(soo, mo, outputs) {
        return Ok(FitMetrics {
            m: 0.0,
            b: 0.0,
            r: 0.0,
            degenerate: true,
        });
    }
    let m = sto / stt;
    let r = (sto / (stt * soo).sqrt()).clamp(-1.0, 1.0);
    Ok(FitMetrics {
        m,
        b: mo - m * mt,
        r,
        degenerate: false,
    })
}

/// Fraction of predictions more than `tol_deg` away from the ground truth.
/// An empty input has rate 0.
pub fn misclassification_rate(
    ground: &[f64],
    predicted: &[f64],
    tol_deg: f64,
) -> Result<f64, EvalError> {
    if ground.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            left: ground.len(),
            right: predicted.len(),
        });
    }
    if ground.is_empty() {
        return Ok(0.0);
    }
    let missed = ground
        .iter()
        .zip(predicted)
        .filter(|(g, p)| !((*p - *g).abs() <= tol_deg))
        .count();
    Ok(missed as f64 / ground.len() as f64)
}

pub const DEFAULT_ANGLE_TOLERANCE: f64 = 10.0;
/// Faces with `|angle|` at most this many degrees count as upright.
pub const UPRIGHT_LIMIT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchCriteria {
    pub min_iou: f64,
    pub angle_tol: f64,
}

impl Default for MatchCriteria {
    fn default() -> Self {
        Self {
            min_iou: 0.5,
            angle_tol: 15.0,
        }
    }
}

impl MatchCriteria {
    pub fn matches(&self, truth: &FaceBox, det: &Detection) -> bool {
        box_iou((truth.x, truth.y, truth.size), (det.x, det.y, det.size)) >= self.min_iou
            && (det.angle - truth.angle).abs() <= self.angle_tol
    }
}

/// Hits out of a ground-truth count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Rate {
    pub hits: usize,
    pub total: usize,
}

impl Rate {
    /// 0 when there is nothing to find.
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.hits as f64 / self.total as f64
        }
    }

    fn record(&mut self, hit: bool) {
        self.total += 1;
        self.hits += hit as usize;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub name: String,
    pub all: Rate,
    pub upright: Rate,
    pub rotated: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub scenes: usize,
    /// Detections that match no ground-truth box.
    pub false_detections: usize,
}

impl RateReport {
    pub fn false_per_scene(&self) -> f64 {
        if self.scenes == 0 {
            0.0
        } else {
            self.false_detections as f64 / self.scenes as f64
        }
    }
}

/// Scores `detections[i]` against `scenes[i]`. A ground-truth box is found
/// when any detection matches it.
pub fn detection_rates(
    name: &str,
    scenes: &[LabeledScene],
    detections: &[Vec<Detection>],
    criteria: &MatchCriteria,
) -> Result<RateReport, EvalError> {
    if scenes.len() != detections.len() {
        return Err(EvalError::LengthMismatch {
            left: scenes.len(),
            right: detections.len(),
        });
    }
    let mut row = RateRow {
        name: name.to_string(),
        all: Rate::default(),
        upright: Rate::default(),
        rotated: Rate::default(),
    };
    let mut false_detections = 0;
    for (scene, dets) in scenes.iter().zip(detections) {
        for truth in &scene.faces {
            let hit = dets.iter().any(|d| criteria.matches(truth, d));
            row.all.record(hit);
            if truth.angle.abs() <= UPRIGHT_LIMIT {
                row.upright.record(hit);
            } else {
                row.rotated.record(hit);
            }
        }
        false_detections += dets
            .iter()
            .filter(|d| !scene.faces.iter().any(|t| criteria.matches(t, d)))
            .count();
    }
    Ok(RateReport {
        rows: vec![row],
        scenes: scenes.len(),
        false_detections,
    })
}
