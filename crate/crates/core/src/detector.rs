//! Sliding-window search over an image pyramid.
//!
//! Every window is cropped, de-noised, standardized, projected with PCA and
//! passed to the GRNN. A window becomes a candidate when its contrast and its
//! kernel density reach the configured minimums and its angle lies in
//! `[-90, 90]`; candidates are then reduced with greedy non-maximum
//! suppression.

use crate::grnn::{GrnnModel, Prediction};
use crate::image::{normalize_into, Image};
use crate::pca::PcaModel;
use crate::wavelet::{DenoiseSettings, WaveletError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("invalid scan configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Denoise(#[from] WaveletError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DenoiseMode {
    /// De-noise every cropped window on its own.
    #[default]
    PerWindow,
    /// De-noise each pyramid level once, then crop.
    WholeImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub window: usize,
    pub stride: usize,
    pub scale_factor: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    /// Upper bound on the number of pyramid levels scanned.
    pub max_levels: Option<usize>,
    /// Minimum GRNN density for a window to be reported.
    pub density_threshold: f64,
    /// Windows whose de-noised pixel standard deviation falls below this
    /// are skipped before projection. 0 disables the check.
    pub min_contrast: f64,
    /// IoU above which a lower-confidence box is suppressed.
    pub nms_overlap: f64,
    pub denoise: DenoiseSettings,
    pub denoise_mode: DenoiseMode,
    /// Settings used instead of `denoise` in whole-image mode.
    pub image_denoise: DenoiseSettings,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            window: 15,
            stride: 1,
            scale_factor: 1.2,
            min_scale: 1.0,
            max_scale: f64::INFINITY,
            max_levels: None,
            density_threshold: 0.0,
            min_contrast: 0.0,
            nms_overlap: 0.3,
            denoise: DenoiseSettings::patch_default(),
            denoise_mode: DenoiseMode::PerWindow,
            image_denoise: DenoiseSettings::image_default(),
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        let bad = |m: &str| Err(DetectorError::BadConfig(m.to_string()));
        if self.window < 8 {
            return bad("window must be at least 8");
        }
        if self.stride == 0 {
            return bad("stride must be at least 1");
        }
        if !(self.scale_factor > 1.0) || !self.scale_factor.is_finite() {
            return bad("scale factor must be a finite value > 1");
        }
        if !(self.min_scale > 0.0) || self.max_scale < self.min_scale {
            return bad("need 0 < min_scale <= max_scale");
        }
        if self.density_threshold.is_nan() || self.density_threshold < 0.0 {
            return bad("density threshold must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.nms_overlap) {
            return bad("NMS overlap must lie in [0, 1]");
        }
        if !(self.min_contrast >= 0.0) || !self.min_contrast.is_finite() {
            return bad("minimum contrast must be a finite value >= 0");
        }
        if self.max_levels == Some(0) {
            return bad("max_levels must be at least 1");
        }
        Ok(())
    }
}

/// A square box in original-image pixels with its angle and confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub x: usize,
    pub y: usize,
    pub size: usize,
    #[serde(rename = "angle_deg")]
    pub angle: f64,
    pub confidence: f64,
}

impl Detection {
    pub fn iou(&self, other: &Detection) -> f64 {
        box_iou((self.x, self.y, self.size), (other.x, other.y, other.size))
    }
}

/// Intersection over union of two axis-aligned squares `(x, y, size)`.
pub fn box_iou(a: (usize, usize, usize), b: (usize, usize, usize)) -> f64 {
    let ix = (a.0 + a.2).min(b.0 + b.2).saturating_sub(a.0.max(b.0));
    let iy = (a.1 + a.2).min(b.1 + b.2).saturating_sub(a.1.max(b.1));
    let inter = (ix * iy) as f64;
    let union = (a.2 * a.2 + b.2 * b.2) as f64 - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Confidence descending, then `(y, x, size)` ascending.
pub fn detection_order(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.y.cmp(&b.y))
        .then(a.x.cmp(&b.x))
        .then(a.size.cmp(&b.size))
}

/// Greedy suppression: keep the best remaining box, drop everything whose IoU
/// with it exceeds `overlap`. Output is in [`detection_order`].
pub fn nms(dets: &[Detection], overlap: f64) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sorted.sort_by(detection_order);
    let mut alive = vec![true; sorted.len()];
    let mut kept = Vec::new();
    for i in 0..sorted.len() {
        if !alive[i] {
            continue;
        }
        kept.push(sorted[i]);
        for j in i + 1..sorted.len() {
            if alive[j] && sorted[i].iou(&sorted[j]) > overlap {
                alive[j] = false;
            }
        }
    }
    kept
}

/// One pyramid level: the factor it was shrunk by and the resized image.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevel {
    pub scale: f64,
    pub image: Image,
}

/// Level `i` has scale `factor^i` and size `round(dim / scale)`; levels stop
/// once a side would fall below the window. Only scales within
/// `[min_scale, max_scale]` are kept.
pub fn build_pyramid(img: &Image, cfg: &ScanConfig) -> Vec<PyramidLevel> {
    let mut levels = Vec::new();
    let mut i = 0i32;
    loop {
        let scale = cfg.scale_factor.powi(i);
        i += 1;
        let w = (img.width() as f64 / scale).round() as usize;
        let h = (img.height() as f64 / scale).round() as usize;
        if w < cfg.window || h < cfg.window {
            break;
        }
        if scale > cfg.max_scale * (1.0 + 1e-12) {
            break;
        }
        if scale < cfg.min_scale * (1.0 - 1e-12) {
            continue;
        }
        levels.push(PyramidLevel {
            scale,
            image: img.resize(w, h),
        });
        if cfg.max_levels.is_some_and(|m| levels.len() >= m) {
            break;
        }
    }
    levels
}

/// The per-window chain shared by training and scanning:
/// de-noise → standardize → PCA → GRNN.
#[derive(Debug, Clone, Copy)]
pub struct PatchPipeline<'a> {
    pub denoise: Option<&'a DenoiseSettings>,
    pub pca: &'a PcaModel,
    pub grnn: &'a GrnnModel,
}

impl PatchPipeline<'_> {
    pub fn features(&self, patch: &Image) -> Result<Vec<f64>, DetectorError> {
        let mut scratch = Vec::new();
        let mut out = vec![0.0; self.pca.rank()];
        self.features_into(patch, &mut scratch, &mut out)?;
        Ok(out)
    }

    /// Standardizes the (de-noised) patch into `scratch` and returns its
    /// standard deviation before standardization.
    fn standardize(&self, patch: &Image, scratch: &mut Vec<f64>) -> Result<f64, DetectorError> {
        Ok(match self.denoise {
            Some(d) => normalize_into(d.apply(patch)?.pixels(), scratch),
            None => normalize_into(patch.pixels(), scratch),
        })
    }

    fn features_into(
        &self,
        patch: &Image,
        scratch: &mut Vec<f64>,
        out: &mut [f64],
    ) -> Result<(), DetectorError> {
        self.standardize(patch, scratch)?;
        self.pca.transform_into(scratch, out);
        Ok(())
    }

    pub fn predict(&self, patch: &Image) -> Result<Prediction, DetectorError> {
        let f = self.features(patch)?;
        Ok(self.grnn.predict_unchecked(&f))
    }
}

fn check_models(pca: &PcaModel, grnn: &GrnnModel, cfg: &ScanConfig) -> Result<(), DetectorError> {
    if pca.dim() != cfg.window * cfg.window {
        return Err(DetectorError::ModelMismatch(format!(
            "PCA input length {} does not match a {}x{} window",
            pca.dim(),
            cfg.window,
            cfg.window
        )));
    }
    if grnn.dim() != pca.rank() {
        return Err(DetectorError::ModelMismatch(format!(
            "GRNN expects {}-dimensional features, PCA produces {}",
            grnn.dim(),
            pca.rank()
        )));
    }
    Ok(())
}

/// Raw candidates before suppression, in row-major scan order per level.
pub fn scan_candidates(
    img: &Image,
    pca: &PcaModel,
    grnn: &GrnnModel,
    cfg: &ScanConfig,
    jobs: usize,
) -> Result<Vec<Detection>, DetectorError> {
    cfg.validate()?;
    check_models(pca, grnn, cfg)?;
    let mut levels = build_pyramid(img, cfg);
    if cfg.denoise_mode == DenoiseMode::WholeImage {
        for level in &mut levels {
            level.image = cfg.image_denoise.apply(&level.image)?;
        }
    }
    let per_window = match cfg.denoise_mode {
        DenoiseMode::PerWindow => Some(&cfg.denoise),
        DenoiseMode::WholeImage => None,
    };
    let pipeline = PatchPipeline {
        denoise: per_window,
        pca,
        grnn,
    };

    // one task per (level, row); results are concatenated in task order
    let tasks: Vec<(usize, usize)> = levels
        .iter()
        .enumerate()
        .flat_map(|(li, l)| {
            (0..=l.image.height() - cfg.window)
                .step_by(cfg.stride)
                .map(move |y| (li, y))
        })
        .collect();
    let run = |&(li, y): &(usize, usize)| -> Result<Vec<Detection>, DetectorError> {
        scan_row(&levels[li], y, img, &pipeline, cfg)
    };
    let rows: Vec<Result<Vec<Detection>, DetectorError>> = if jobs <= 1 {
        tasks.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| DetectorError::Pool(e.to_string()))?;
        pool.install(|| tasks.par_iter().map(run).collect())
    };
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

fn scan_row(
    level: &PyramidLevel,
    y: usize,
    original: &Image,
    pipeline: &PatchPipeline<'_>,
    cfg: &ScanConfig,
) -> Result<Vec<Detection>, DetectorError> {
    let w = cfg.window;
    let mut scratch = Vec::with_capacity(w * w);
    let mut feats = vec![0.0; pipeline.pca.rank()];
    let mut found = Vec::new();
    for x in (0..=level.image.width() - w).step_by(cfg.stride) {
        let patch = level.image.crop(x, y, w, w).expect("window inside level");
        if pipeline.standardize(&patch, &mut scratch)? < cfg.min_contrast {
            continue;
        }
        pipeline.pca.transform_into(&scratch, &mut feats);
        let p = pipeline.grnn.predict_unchecked(&feats);
        if p.density >= cfg.density_threshold && (-90.0..=90.0).contains(&p.value) {
            found.push(to_original(x, y, level.scale, p, original, w));
        }
    }
    Ok(found)
}

fn to_original(
    x: usize,
    y: usize,
    scale: f64,
    p: Prediction,
    img: &Image,
    window: usize,
) -> Detection {
    let size = ((window as f64 * scale).round() as usize)
        .min(img.width())
        .min(img.height());
    let ox = ((x as f64 * scale).round() as usize).min(img.width() - size);
    let oy = ((y as f64 * scale).round() as usize).min(img.height() - size);
    Detection {
        x: ox,
        y: oy,
        size,
        angle: p.value,
        confidence: p.density,
    }
}

/// Full search: candidates from every level, suppressed and ordered.
/// Images smaller than the window yield no detections.
pub fn scan(
    img: &Image,
    pca: &PcaModel,
    grnn: &GrnnModel,
    cfg: &ScanConfig,
) -> Result<Vec<Detection>, DetectorError> {
    scan_with_jobs(img, pca, grnn, cfg, 1)
}

/// [`scan`] spread over `jobs` worker threads; the output does not depend on
/// `jobs`.
pub fn scan_with_jobs(
    img: &Image,
    pca: &PcaModel,
    grnn: &GrnnModel,
    cfg: &ScanConfig,
    jobs: usize,
) -> Result<Vec<Detection>, DetectorError> {
    let candidates = scan_candidates(img, pca, grnn, cfg, jobs)?;
    Ok(nms(&candidates, cfg.nms_overlap))
}

/// Number of windows visited on a `width × height` level.
pub fn window_count(width: usize, height: usize, window: usize, stride: usize) -> usize {
    if width < window || height < window {
        return 0;
    }
    ((width - window) / stride + 1) * ((height - window) / stride + 1)
}

/// Draws each box outline at 1.0 and a centre-to-edge line at the detected
/// angle (0 = up, clockwise positive). Pixels outside the image are skipped.
pub fn annotate(img: &Image, dets: &[Detection]) -> Image {
    let mut out = img.clone();
    for d in dets {
        for p in outline_pixels(d) {
            plot(&mut out, p);
        }
        for p in angle_line_pixels(d) {
            plot(&mut out, p);
        }
    }
    out
}

fn plot(img: &mut Image, (x, y): (i64, i64)) {
    if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
        img.set(x as usize, y as usize, 1.0);
    }
}

/// Border pixels of a detection box (each listed once).
pub fn outline_pixels(d: &Detection) -> Vec<(i64, i64)> {
    let (x0, y0) = (d.x as i64, d.y as i64);
    let s = d.size as i64;
    if s == 0 {
        return Vec::new();
    }
    let (x1, y1) = (x0 + s - 1, y0 + s - 1);
    let mut px = Vec::with_capacity(4 * d.size);
    for x in x0..=x1 {
        px.push((x, y0));
        if y1 != y0 {
            px.push((x, y1));
        }
    }
    for y in y0 + 1..y1 {
        px.push((x0, y));
        if x1 != x0 {
            px.push((x1, y));
        }
    }
    px
}

/// Pixels of the orientation line from the box centre, length `(size-1)/2`.
pub fn angle_line_pixels(d: &Detection) -> Vec<(i64, i64)> {
    let half = (d.size as f64 - 1.0) / 2.0;
    let cx = d.x as f64 + half;
    let cy = d.y as f64 + half;
    let (s, c) = d.angle.to_radians().sin_cos();
    let (ex, ey) = (cx + half * s, cy - half * c);
    let steps = (ex - cx).abs().max((ey - cy).abs()).ceil().max(1.0) as usize;
    let mut px: Vec<(i64, i64)> = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let p = (
            (cx + t * (ex - cx)).round() as i64,
            (cy + t * (ey - cy)).round() as i64,
        );
        if px.last() != Some(&p) {
            px.push(p);
        }
    }
    px
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub image: String,
    pub window: usize,
    pub detections: Vec<Detection>,
}

impl DetectionReport {
    /// Angles are rounded to two decimals.
    pub fn new(image: impl Into<String>, window: usize, dets: &[Detection]) -> Self {
        Self {
            image: image.into(),
            window,
            detections: dets
                .iter()
                .map(|d| Detection {
                    angle: (d.angle * 100.0).round() / 100.0,
                    ..*d
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: usize, y: usize, size: usize, confidence: f64) -> Detection {
        Detection {
            x,
            y,
            size,
            angle: 0.0,
            confidence,
        }
    }

    #[test]
    fn nms_disjoint_kept() {
        let d = [det(0, 0, 10, 0.5), det(20, 0, 10, 0.9), det(0, 20, 10, 0.1)];
        assert_eq!(nms(&d, 0.3).len(), 3);
    }

    #[test]
    fn nms_identical_boxes() {
        let d = [det(5, 5, 10, 0.5), det(5, 5, 10, 0.9)];
        assert_eq!(nms(&d, 0.3), vec![det(5, 5, 10, 0.9)]);
    }

    #[test]
    fn nms_chain() {
        // A-B and B-C overlap above the threshold, A and C only touch.
        // |A∩B| = 4*8 = 32, |A∪B| = 64 + 64 - 32 = 96, IoU 1/3
        let a = det(0, 0, 8, 0.9);
        let b = det(4, 0, 8, 0.6);
        let c = det(8, 0, 8, 0.3);
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-12);
        assert!((b.iou(&c) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.iou(&c), 0.0);
        // greedy: keep A, B falls to A, C survives because B is gone
        assert_eq!(nms(&[c, a, b], 0.3), vec![a, c]);
    }

    #[test]
    fn iou_half() {
        // 12-wide boxes shifted 4 rows share 8x12 = 96, union 192
        assert!((det(0, 0, 12, 1.0).iou(&det(0, 4, 12, 1.0)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ordering_is_total() {
        let mut d = [
            det(3, 1, 10, 0.5),
            det(1, 1, 10, 0.5),
            det(0, 0, 10, 0.7),
            det(1, 0, 10, 0.5),
        ];
        d.sort_by(detection_order);
        assert_eq!(
            d.iter().map(|d| (d.x, d.y)).collect::<Vec<_>>(),
            vec![(0, 0), (1, 0), (1, 1), (3, 1)]
        );
    }

    #[test]
    fn pyramid_levels() {
        let cfg = ScanConfig {
            scale_factor: 2.0,
            ..ScanConfig::default()
        };
        let img = Image::filled(60, 60, 0.4);
        let p = build_pyramid(&img, &cfg);
        assert_eq!(
            p.iter().map(|l| l.scale).collect::<Vec<_>>(),
            vec![1.0, 2.0, 4.0]
        );
        assert_eq!(
            p.iter().map(|l| l.image.width()).collect::<Vec<_>>(),
            vec![60, 30, 15]
        );
        assert!(p
            .iter()
            .all(|l| l.image.pixels().iter().all(|&v| (v - 0.4).abs() < 1e-15)));

        let single = build_pyramid(&Image::filled(15, 15, 0.1), &ScanConfig::default());
        assert_eq!(single.len(), 1);
        assert!(build_pyramid(&Image::filled(14, 30, 0.1), &ScanConfig::default()).is_empty());

        let capped = ScanConfig {
            max_levels: Some(2),
            ..cfg.clone()
        };
        assert_eq!(build_pyramid(&img, &capped).len(), 2);
        let ranged = ScanConfig {
            min_scale: 1.5,
            max_scale: 2.5,
            ..cfg
        };
        let r = build_pyramid(&img, &ranged);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].scale, 2.0);
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_count(20, 17, 15, 1), 6 * 3);
        assert_eq!(window_count(14, 17, 15, 1), 0);
        assert_eq!(window_count(20, 20, 15, 2), 3 * 3);
    }

    #[test]
    fn annotate_counts_pixels() {
        let black = Image::filled(40, 40, 0.0);
        assert_eq!(annotate(&black, &[]), black);
        let d = Detection {
            x: 5,
            y: 7,
            size: 15,
            angle: 30.0,
            confidence: 1.0,
        };
        let out = annotate(&black, &[d]);
        let border = outline_pixels(&d);
        assert_eq!(border.len(), 4 * 15 - 4);
        let line_only = angle_line_pixels(&d)
            .into_iter()
            .filter(|p| !border.contains(p))
            .count();
        let lit = out.pixels().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(lit, 4 * 15 - 4 + line_only);
        assert!(line_only > 0);
    }

    #[test]
    fn annotate_clips() {
        let img = Image::filled(10, 10, 0.2);
        let d = Detection {
            x: 6,
            y: 6,
            size: 9,
            angle: -60.0,
            confidence: 0.1,
        };
        let out = annotate(&img, &[d]);
        assert_eq!(out.width(), 10);
        assert!(out.pixels().iter().filter(|&&v| v == 1.0).count() > 0);
    }

    #[test]
    fn angle_line_points_up_at_zero() {
        let d = det(0, 0, 11, 1.0);
        let line = angle_line_pixels(&d);
        assert_eq!(line.first(), Some(&(5, 5)));
        assert_eq!(line.last(), Some(&(5, 0)));
        let right = angle_line_pixels(&Detection { angle: 90.0, ..d });
        assert_eq!(right.last(), Some(&(10, 5)));
    }

    #[test]
    fn report_json_rounds_angles() {
        let d = Detection {
            x: 1,
            y: 2,
            size: 15,
            angle: 12.3456,
            confidence: 0.25,
        };
        let r = DetectionReport::new("a.pgm", 15, &[d]);
        let json = r.to_json();
        assert!(json.contains("\"angle_deg\": 12.35"));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["image"], "a.pgm");
        assert_eq!(v["window"], 15);
        assert_eq!(v["detections"][0]["x"], 1);
        assert_eq!(DetectionReport::from_json(&json).unwrap(), r);
    }

    #[test]
    fn config_validation() {
        assert!(ScanConfig::default().validate().is_ok());
        for bad in [
            ScanConfig {
                window: 7,
                ..ScanConfig::default()
            },
            ScanConfig {
                stride: 0,
                ..ScanConfig::default()
            },
            ScanConfig {
                scale_factor: 1.0,
                ..ScanConfig::default()
            },
            ScanConfig {
                density_threshold: -1.0,
                ..ScanConfig::default()
            },
            ScanConfig {
                min_contrast: f64::NAN,
                ..ScanConfig::default()
            },
            ScanConfig {
                nms_overlap: 1.5,
                ..ScanConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
