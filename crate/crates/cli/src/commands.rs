use crate::args::{DenoiseArgs, DetectArgs, EvalArgs, ScanArgs, SpreadArg, SynthArgs, TrainArgs};
use crate::error::{CliError, CliResult};
use crate::io::{beside, read_image, read_manifest, read_model, write_bytes, write_image};
use rifd::detector::{
    annotate, scan_with_jobs, DenoiseMode, Detection, DetectionReport, ScanConfig,
};
use rifd::eval::{
    detection_rates, face_template, fit_metrics, fit_metrics_csv, misclassification_rate,
    render_rate_table, synth_dataset, synth_patches, timing_report, FitMetrics, LabeledScene,
    Manifest, MatchCriteria, PatchEntry, SceneEntry, SynthParams, TimingRow,
    DEFAULT_ANGLE_TOLERANCE,
};
use rifd::grnn::GrnnModel;
use rifd::linalg::Matrix;
use rifd::rprop::{history_csv, mlp_init, rprop_train, RpropConfig};
use rifd::train::{train, RankChoice, SpreadChoice, TrainConfig, TrainError};
use rifd::wavelet::DenoiseSettings;
use rifd::{Image, ModelBundle};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let usage = |m: &str| Err(CliError::Usage(m.to_string()));
    if !(-90.0..=90.0).contains(&a.angle_min)
        || !(-90.0..=90.0).contains(&a.angle_max)
        || a.angle_min > a.angle_max
    {
        return usage("angle range must satisfy -90 <= min <= max <= 90");
    }
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return usage("noise must be a finite value >= 0");
    }
    if !(0.0..1.0).contains(&a.jitter) {
        return usage("jitter must lie in [0, 1)");
    }
    if a.window < 8 || a.width < a.window || a.height < a.window {
        return usage("need window >= 8 and a scene at least as large as the window");
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let template = face_template(a.window);
    let params = SynthParams {
        angle_range: (a.angle_min, a.angle_max),
        noise_sigma: a.noise,
        brightness_jitter: a.jitter,
        scene_width: a.width,
        scene_height: a.height,
    };
    let mut manifest = Manifest {
        seed: a.seed,
        window: a.window,
        angle_range: params.angle_range,
        noise_sigma: a.noise,
        scenes: Vec::new(),
        patches: Vec::new(),
    };
    for (i, scene) in synth_dataset(a.seed, a.count, &template, &params)
        .into_iter()
        .enumerate()
    {
        let file = format!("scene_{i:04}.pgm");
        write_image(&a.out_dir.join(&file), &scene.image)?;
        manifest.scenes.push(SceneEntry {
            file,
            width: scene.image.width(),
            height: scene.image.height(),
            seed: scene.seed,
            faces: scene.faces,
        });
    }
    let (patches, angles) = synth_patches(a.seed, a.patches, &template, &params);
    for (i, (p, angle)) in patches.iter().zip(angles).enumerate() {
        let file = format!("patch_{i:04}.pgm");
        write_image(&a.out_dir.join(&file), p)?;
        manifest.patches.push(PatchEntry {
            file,
            angle_deg: angle,
        });
    }
    write_bytes(
        &a.out_dir.join("manifest.json"),
        manifest.to_json().as_bytes(),
    )?;
    println!(
        "wrote {} scenes and {} patches to {}",
        manifest.scenes.len(),
        manifest.patches.len(),
        a.out_dir.display()
    );
    Ok(())
}

/// Labeled patches with the file each came from.
struct Labeled {
    files: Vec<PathBuf>,
    patches: Vec<Image>,
    angles: Vec<f64>,
}

fn load_manifest_patches(path: &Path) -> CliResult<Labeled> {
    let m = read_manifest(path)?;
    let mut out = Labeled {
        files: Vec::new(),
        patches: Vec::new(),
        angles: Vec::new(),
    };
    for p in &m.patches {
        let file = beside(path, &p.file);
        out.patches.push(read_image(&file)?);
        out.files.push(file);
        out.angles.push(p.angle_deg);
    }
    Ok(out)
}

fn load_labeled_dir(dir: &Path) -> CliResult<Labeled> {
    let labels = dir.join("labels.csv");
    let text = std::fs::read_to_string(&labels).map_err(|e| CliError::io(&labels, e))?;
    let mut out = Labeled {
        files: Vec::new(),
        patches: Vec::new(),
        angles: Vec::new(),
    };
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("file,")) {
            continue;
        }
        let bad = || {
            CliError::Data(format!(
                "{}:{}: expected 'file,angle_deg'",
                labels.display(),
                n + 1
            ))
        };
        let (name, angle) = line.split_once(',').ok_or_else(bad)?;
        let angle: f64 = angle.trim().parse().map_err(|_| bad())?;
        let file = dir.join(name.trim());
        out.patches.push(read_image(&file)?);
        out.files.push(file);
        out.angles.push(angle);
    }
    Ok(out)
}

pub fn train_cmd(a: &TrainArgs) -> CliResult<()> {
    if !(a.variance > 0.0 && a.variance <= 1.0) {
        return Err(CliError::Usage("--variance must lie in (0, 1]".into()));
    }
    if a.pca_k == Some(0) || a.max_k == 0 {
        return Err(CliError::Usage("PCA rank must be at least 1".into()));
    }
    let data = match (&a.manifest, &a.data_dir) {
        (Some(m), _) => load_manifest_patches(m)?,
        (None, Some(d)) => load_labeled_dir(d)?,
        (None, None) => unreachable!("clap requires a data source"),
    };
    let cfg = TrainConfig {
        window: a.window,
        denoise: a.wavelet.settings(),
        rank: match a.pca_k {
            Some(k) => RankChoice::Fixed(k),
            None => RankChoice::Variance {
                fraction: a.variance,
                cap: a.max_k,
            },
        },
        spread: match a.spread {
            SpreadArg::Auto => SpreadChoice::Auto,
            SpreadArg::Fixed(s) => SpreadChoice::Fixed(s),
        },
        threshold_quantile: a.quantile,
        contrast_fraction: a.contrast_fraction,
        seed: a.seed,
    };
    let bundle = train(&data.patches, &data.angles, &cfg).map_err(|e| {
        let file = |i: usize| data.files[i].display().to_string();
        match e {
            TrainError::PatchSize {
                index,
                width,
                height,
                window,
            } => CliError::Data(format!(
                "{}: patch is {width}x{height}, expected {window}x{window}",
                file(index)
            )),
            TrainError::Label { index, value } => CliError::Data(format!(
                "{}: angle {value} is outside [-90, 90]",
                file(index)
            )),
            TrainError::Empty => CliError::Data("no training patches found".into()),
            TrainError::BadConfig(m) => CliError::Usage(m),
            TrainError::Denoise(e) => CliError::Usage(format!("de-noising settings: {e}")),
            TrainError::Pca(e) => CliError::Data(format!("PCA: {e}")),
            other => CliError::Data(other.to_string()),
        }
    })?;
    write_bytes(&a.out, &bundle.to_bytes())?;
    println!(
        "trained on {} patches: k = {}, sigma = {}, theta = {:e}, contrast floor = {}",
        bundle.samples,
        bundle.pca.rank(),
        bundle.grnn.spread(),
        bundle.density_threshold,
        bundle.contrast_floor
    );
    Ok(())
}

fn resolve_jobs(jobs: Option<usize>) -> CliResult<usize> {
    match jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn scan_config(bundle: &ModelBundle, s: &ScanArgs) -> CliResult<(ScanConfig, usize)> {
    let base = bundle.scan_config();
    let cfg = ScanConfig {
        stride: s.stride,
        scale_factor: s.scale_factor,
        min_scale: s.min_scale,
        max_scale: s.max_scale.unwrap_or(f64::INFINITY),
        max_levels: s.max_levels,
        density_threshold: s.theta.unwrap_or(base.density_threshold),
        min_contrast: s.min_contrast.unwrap_or(base.min_contrast),
        nms_overlap: s.nms,
        denoise_mode: if s.whole_image {
            DenoiseMode::WholeImage
        } else {
            DenoiseMode::PerWindow
        },
        image_denoise: DenoiseSettings {
            levels: DenoiseSettings::image_default().levels,
            ..bundle.denoise
        },
        ..base
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((cfg, resolve_jobs(s.jobs)?))
}

fn run_scan(
    img: &Image,
    bundle: &ModelBundle,
    cfg: &ScanConfig,
    jobs: usize,
) -> CliResult<Vec<Detection>> {
    scan_with_jobs(img, &bundle.pca, &bundle.grnn, cfg, jobs)
        .map_err(|e| CliError::Data(e.to_string()))
}

pub fn detect(a: &DetectArgs) -> CliResult<()> {
    let bundle = read_model(&a.model)?;
    let (cfg, jobs) = scan_config(&bundle, &a.scan)?;
    let img = read_image(&a.image)?;
    let dets = run_scan(&img, &bundle, &cfg, jobs)?;
    let report = DetectionReport::new(a.image.display().to_string(), cfg.window, &dets);
    let json = report.to_json() + "\n";
    match &a.json_out {
        Some(p) => write_bytes(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    if let Some(p) = &a.annotate_out {
        write_image(p, &annotate(&img, &dets))?;
    }
    Ok(())
}

fn load_scenes(path: &Path) -> CliResult<Vec<LabeledScene>> {
    let m = read_manifest(path)?;
    m.scenes
        .iter()
        .map(|s| {
            let file = beside(path, &s.file);
            let image = read_image(&file)?;
            if image.width() != s.width || image.height() != s.height {
                return Err(CliError::Data(format!(
                    "{}: image is {}x{}, manifest says {}x{}",
                    file.display(),
                    image.width(),
                    image.height(),
                    s.width,
                    s.height
                )));
            }
            for f in &s.faces {
                if f.x + f.size > s.width
                    || f.y + f.size > s.height
                    || !(-90.0..=90.0).contains(&f.angle)
                {
                    return Err(CliError::Data(format!(
                        "{}: ground-truth box out of range",
                        file.display()
                    )));
                }
            }
            Ok(LabeledScene {
                image,
                faces: s.faces.clone(),
                seed: s.seed,
            })
        })
        .collect()
}

/// Ground-truth crops resized to the model window, with their angles.
fn truth_crops(scenes: &[LabeledScene], window: usize) -> (Vec<Image>, Vec<f64>) {
    let mut crops = Vec::new();
    let mut angles = Vec::new();
    for s in scenes {
        for f in &s.faces {
            let c = s
                .image
                .crop(f.x, f.y, f.size, f.size)
                .expect("validated box");
            crops.push(if f.size == window {
                c
            } else {
                c.resize(window, window)
            });
            angles.push(f.angle);
        }
    }
    (crops, angles)
}

fn write_optional(path: &Option<PathBuf>, text: &str) -> CliResult<()> {
    if let Some(p) = path {
        write_bytes(p, text.as_bytes())?;
    }
    Ok(())
}

fn features(bundle: &ModelBundle, patches: &[Image]) -> CliResult<Matrix> {
    let pipe = bundle.pipeline();
    let mut m = Matrix::zeros(patches.len(), bundle.pca.rank());
    for (i, p) in patches.iter().enumerate() {
        let f = pipe
            .features(p)
            .map_err(|e| CliError::Data(e.to_string()))?;
        m.row_mut(i).copy_from_slice(&f);
    }
    Ok(m)
}

fn metrics_row(truth: &[f64], predicted: &[f64]) -> CliResult<(FitMetrics, f64)> {
    let f = fit_metrics(truth, predicted).map_err(|e| CliError::Data(e.to_string()))?;
    let miss = misclassification_rate(truth, predicted, DEFAULT_ANGLE_TOLERANCE)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok((f, miss))
}

pub fn eval_cmd(a: &EvalArgs) -> CliResult<()> {
    let scenes = load_scenes(&a.manifest)?;
    let bundle = a.model.as_deref().map(read_model).transpose()?;
    let (name, detections) = if a.oracle {
        let dets = scenes
            .iter()
            .map(|s| {
                s.faces
                    .iter()
                    .map(|f| Detection {
                        x: f.x,
                        y: f.y,
                        size: f.size,
                        angle: f.angle,
                        confidence: 1.0,
                    })
                    .collect()
            })
            .collect();
        ("ground truth (oracle)", dets)
    } else {
        let bundle = bundle
            .as_ref()
            .expect("clap requires --model without --oracle");
        let (cfg, jobs) = scan_config(bundle, &a.scan)?;
        let dets = scenes
            .iter()
            .map(|s| run_scan(&s.image, bundle, &cfg, jobs))
            .collect::<CliResult<Vec<_>>>()?;
        ("rifd (this run)", dets)
    };
    let report = detection_rates(name, &scenes, &detections, &MatchCriteria::default())
        .map_err(|e| CliError::Data(e.to_string()))?;
    let text = render_rate_table(&report);
    print!("{text}");
    write_optional(&a.report, &text)?;

    let Some(bundle) = bundle else {
        return Ok(());
    };
    let (crops, truth) = truth_crops(&scenes, bundle.window);
    let feats = features(&bundle, &crops)?;
    let grnn_pred: Vec<f64> = (0..feats.rows())
        .map(|i| {
            bundle
                .grnn
                .predict(feats.row(i))
                .expect("matching dimension")
                .value
        })
        .collect();
    let mut rows: Vec<(&str, FitMetrics, f64)> = Vec::new();
    if truth.len() >= 2 {
        let (f, miss) = metrics_row(&truth, &grnn_pred)?;
        rows.push(("grnn", f, miss));
    }

    if a.baseline {
        let train_path = a
            .train_manifest
            .as_ref()
            .expect("clap enforces --train-manifest");
        let data = load_manifest_patches(train_path)?;
        if data
            .patches
            .iter()
            .any(|p| p.width() != bundle.window || p.height() != bundle.window)
        {
            return Err(CliError::Data(
                "training patches do not match the model window".into(),
            ));
        }
        let train_feats = features(&bundle, &data.patches)?;
        let start = Instant::now();
        let grnn = GrnnModel::fit(
            train_feats.clone(),
            data.angles.clone(),
            bundle.grnn.spread(),
        )
        .map_err(|e| CliError::Data(e.to_string()))?;
        let grnn_secs = start.elapsed().as_secs_f64();
        let grnn_mse = (0..train_feats.rows())
            .map(|i| {
                ((grnn.predict(train_feats.row(i)).expect("dims").value - data.angles[i]) / 90.0)
                    .powi(2)
            })
            .sum::<f64>()
            / train_feats.rows().max(1) as f64;

        let model = mlp_init(train_feats.cols(), a.hidden, a.seed)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let cfg = RpropConfig {
            max_epochs: a.epochs,
            ..RpropConfig::default()
        };
        let start = Instant::now();
        let outcome = rprop_train(model, &train_feats, &data.angles, &cfg)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let rprop_secs = start.elapsed().as_secs_f64();
        let mlp_pred: Vec<f64> = (0..feats.rows())
            .map(|i| outcome.model.predict_degrees(feats.row(i)))
            .collect();
        if truth.len() >= 2 {
            let (f, miss) = metrics_row(&truth, &mlp_pred)?;
            rows.push(("rprop", f, miss));
        }
        let timing = timing_report(&[
            TimingRow {
                method: "grnn".into(),
                seconds: grnn_secs,
                epochs: 1,
                final_mse: grnn_mse,
            },
            TimingRow {
                method: "rprop".into(),
                seconds: rprop_secs,
                epochs: outcome.epochs,
                final_mse: *outcome
                    .history
                    .last()
                    .expect("history has the initial loss"),
            },
        ])
        .map_err(|e| CliError::Data(e.to_string()))?;
        print!("\n{timing}");
        write_optional(&a.timing_csv, &timing)?;
        write_optional(&a.history_csv, &history_csv(&outcome.history))?;
    }
    let metrics = fit_metrics_csv(&rows);
    print!("\n{metrics}");
    write_optional(&a.metrics_csv, &metrics)?;
    Ok(())
}

pub fn denoise_cmd(a: &DenoiseArgs) -> CliResult<()> {
    let settings = a.wavelet.settings();
    let img = read_image(&a.input)?;
    let out = settings
        .apply(&img)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    write_image(&a.out, &out)
}
