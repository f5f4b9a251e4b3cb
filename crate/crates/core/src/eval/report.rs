use super::metrics::{FitMetrics, RateReport};
use super::synth::FaceBox;
use super::EvalError;
use serde::{Deserialize, Serialize};

/// Published figures for other detectors, shown for comparison only.
/// Entries are percentages for (all faces, upright, rotated).
pub const REFERENCE_ROWS: [(&str, Option<f64>, Option<f64>, Option<f64>); 2] = [
    (
        "Viola-Jones (published)",
        Some(92.1),
        Some(93.0),
        Some(94.1),
    ),
    (
        "Rowley-Baluja-Kanade (published)",
        None,
        Some(90.1),
        Some(89.9),
    ),
];

const HEADERS: [&str; 4] = ["Detector", "All faces", "Upright (≤10°)", "Rotated (>10°)"];

fn width(s: &str) -> usize {
    s.chars().count()
}

fn pad_left(s: &str, w: usize) -> String {
    format!("{}{}", " ".repeat(w.saturating_sub(width(s))), s)
}

fn pad_right(s: &str, w: usize) -> String {
    format!("{}{}", s, " ".repeat(w.saturating_sub(width(s))))
}

/// Aligned text table of the computed rows followed by the reference rows,
/// then the raw counts behind every computed rate.
pub fn render_rate_table(report: &RateReport) -> String {
    let mut lines: Vec<[String; 4]> = Vec::new();
    let pct = |r: &super::metrics::Rate| {
        if r.total == 0 {
            "-".to_string()
        } else {
            format!("{:.2}%", 100.0 * r.value())
        }
    };
    for row in &report.rows {
        lines.push([
            row.name.clone(),
            pct(&row.all),
            pct(&row.upright),
            pct(&row.rotated),
        ]);
    }
    let cite = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.1}%"));
    for (name, a, u, r) in REFERENCE_ROWS {
        lines.push([name.to_string(), cite(a), cite(u), cite(r)]);
    }
    let mut widths = HEADERS.map(width);
    for l in &lines {
        for (w, cell) in widths.iter_mut().zip(l) {
            *w = (*w).max(width(cell));
        }
    }
    let render = |cells: [&str; 4]| {
        let mut s = pad_right(cells[0], widths[0]);
        for i in 1..4 {
            s.push_str("  ");
            s.push_str(&pad_left(cells[i], widths[i]));
        }
        s.trim_end().to_string()
    };
    let mut out = String::new();
    out.push_str(&render(HEADERS));
    out.push('\n');
    out.push_str(&render(
        widths.map(|w| "-".repeat(w)).each_ref().map(|s| s.as_str()),
    ));
    out.push('\n');
    for l in &lines {
        out.push_str(&render(l.each_ref().map(|s| s.as_str())));
        out.push('\n');
    }
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{}: {}/{} faces found ({}/{} upright, {}/{} rotated)\n",
            row.name,
            row.all.hits,
            row.all.total,
            row.upright.hits,
            row.upright.total,
            row.rotated.hits,
            row.rotated.total
        ));
    }
    out.push_str(&format!(
        "false detections: {} over {} scenes ({:.3} per scene)\n",
        report.false_detections,
        report.scenes,
        report.false_per_scene()
    ));
    out
}

/// One line of the training-cost comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub seconds: f64,
    pub epochs: usize,
    /// Training MSE on normalized targets.
    pub final_mse: f64,
}

const TIMING_HEADER: &str = "method,seconds,epochs,final_mse";

pub fn timing_report(rows: &[TimingRow]) -> Result<String, EvalError> {
    let mut out = format!("{TIMING_HEADER}\n");
    for r in rows {
        if r.method.contains([',', '\n', '"']) {
            return Err(EvalError::Csv(format!(
                "method name {:?} needs quoting",
                r.method
            )));
        }
        if !(r.seconds >= 0.0) || !(r.final_mse >= 0.0) {
            return Err(EvalError::Csv(format!(
                "negative or NaN field for {}",
                r.method
            )));
        }
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.method, r.seconds, r.epochs, r.final_mse
        ));
    }
    Ok(out)
}

pub fn parse_timing_report(csv: &str) -> Result<Vec<TimingRow>, EvalError> {
    let mut lines = csv.lines();
    if lines.next() != Some(TIMING_HEADER) {
        return Err(EvalError::Csv("missing timing header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || EvalError::Csv(format!("bad timing row {l:?}"));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(TimingRow {
                method: f[0].to_string(),
                seconds: f[1].parse().map_err(|_| bad())?,
                epochs: f[2].parse().map_err(|_| bad())?,
                final_mse: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// CSV of regression metrics, one row per model.
pub fn fit_metrics_csv(rows: &[(&str, FitMetrics, f64)]) -> String {
    let mut out = String::from("model,m,b,r,degenerate,misclassification_rate\n");
    for (name, f, miss) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            name, f.m, f.b, f.r, f.degenerate, miss
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub file: String,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub faces: Vec<FaceBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub file: String,
    pub angle_deg: f64,
}

/// Index of a generated dataset; file names are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub window: usize,
    pub angle_range: (f64, f64),
    pub noise_sigma: f64,
    #[serde(default)]
    pub scenes: Vec<SceneEntry>,
    #[serde(default)]
    pub patches: Vec<PatchEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
