use rifd::{load_pgm, save_pgm, Image};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;
use std::time::Instant;
use tempfile::TempDir;

fn rifd(args: &[&str]) -> Output {
    rifd_env(args, &[])
}

fn rifd_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rifd"));
    cmd.args(args).env_remove("RIFD_JOBS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_pgm(path: &Path, img: &Image) {
    std::fs::write(path, save_pgm(img, 255)).unwrap();
}

fn read_pgm(path: &Path) -> Image {
    load_pgm(&std::fs::read(path).unwrap()).unwrap()
}

/// Training data (seed 42, 120 patches), held-out scenes (seed 43) and a
/// model trained from the former, shared by every test.
struct Fixture {
    _dir: TempDir,
    train: PathBuf,
    scenes: PathBuf,
    model: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let train = dir.path().join("train");
        let scenes = dir.path().join("scenes");
        let model = dir.path().join("model.rifd");
        let o = rifd(&[
            "synth",
            "--seed",
            "42",
            "--count",
            "0",
            "--patches",
            "120",
            "--out-dir",
            s(&train),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = rifd(&[
            "synth",
            "--seed",
            "43",
            "--count",
            "6",
            "--out-dir",
            s(&scenes),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let manifest = train.join("manifest.json");
        let o = rifd(&[
            "train",
            "--manifest",
            s(&manifest),
            "--out",
            s(&model),
            "--seed",
            "42",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        Fixture {
            _dir: dir,
            train,
            scenes,
            model,
        }
    })
}

fn detect_json(model: &Path, image: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["detect", "--model", s(model), "--image", s(image)];
    args.extend_from_slice(extra);
    let o = rifd(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).expect("detect prints JSON")
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = rifd(&[
            "synth",
            "--seed",
            "7",
            "--count",
            "5",
            "--patches",
            "3",
            "--out-dir",
            s(out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (ca, cb) = (dir_contents(&a), dir_contents(&b));
    assert_eq!(ca.len(), 9);
    assert_eq!(ca, cb);
}

#[test]
fn synth_with_zero_count_writes_an_empty_manifest() {
    let dir = TempDir::new().unwrap();
    let o = rifd(&["synth", "--count", "0", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let m: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["scenes"], Value::Array(vec![]));
    assert_eq!(m["patches"], Value::Array(vec![]));
}

#[test]
fn synth_into_an_unwritable_location_exits_3() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, b"x").unwrap();
    let o = rifd(&["synth", "--count", "1", "--out-dir", s(&file.join("sub"))]);
    assert_eq!(code(&o), 3);
    assert!(!stderr(&o).is_empty());
}

#[test]
fn synth_rejects_bad_angles() {
    let dir = TempDir::new().unwrap();
    let o = rifd(&[
        "synth",
        "--angle-min",
        "30",
        "--angle-max",
        "10",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn train_with_the_wrong_window_exits_4_and_names_the_file() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let o = rifd(&[
        "train",
        "--manifest",
        s(&f.train.join("manifest.json")),
        "--window",
        "17",
        "--out",
        s(&dir.path().join("m.rifd")),
    ]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("patch_0000.pgm"), "{}", stderr(&o));
}

#[test]
fn train_from_a_labeled_directory() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("file,angle_deg\n");
    for (i, angle) in [(0, -40.0), (1, 10.0), (2, 75.0), (3, -5.0)] {
        let name = format!("patch_{i:04}.pgm");
        std::fs::copy(f.train.join(&name), dir.path().join(&name)).unwrap();
        csv.push_str(&format!("{name},{angle}\n"));
    }
    std::fs::write(dir.path().join("labels.csv"), &csv).unwrap();
    let out = dir.path().join("m.rifd");
    let o = rifd(&["train", "--data-dir", s(dir.path()), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("trained on 4 patches"));

    std::fs::write(
        dir.path().join("labels.csv"),
        "file,angle_deg\npatch_0000.pgm,120\n",
    )
    .unwrap();
    let o = rifd(&["train", "--data-dir", s(dir.path()), "--out", s(&out)]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("patch_0000.pgm"));
}

#[test]
fn single_patch_model_finds_its_patch() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let patch = read_pgm(&f.train.join("patch_0000.pgm"));
    write_pgm(&dir.path().join("p.pgm"), &patch);
    std::fs::write(dir.path().join("labels.csv"), "file,angle_deg\np.pgm,0\n").unwrap();
    let model = dir.path().join("one.rifd");
    let o = rifd(&["train", "--data-dir", s(dir.path()), "--out", s(&model)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let (x0, y0) = (17, 9);
    let mut scene = Image::filled(48, 40, 0.5);
    for y in 0..15 {
        for x in 0..15 {
            scene.set(x0 + x, y0 + y, patch.get(x, y));
        }
    }
    let scene_path = dir.path().join("scene.pgm");
    write_pgm(&scene_path, &scene);
    let json = detect_json(&model, &scene_path, &["--max-levels", "1"]);
    let top = &json["detections"][0];
    assert_eq!(
        (top["x"].as_u64(), top["y"].as_u64()),
        (Some(x0 as u64), Some(y0 as u64)),
        "{json}"
    );
    assert_eq!(top["angle_deg"].as_f64(), Some(0.0));
}

#[test]
fn blank_image_has_no_detections() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let blank = dir.path().join("blank.pgm");
    write_pgm(&blank, &Image::filled(64, 64, 0.5));
    let json = detect_json(&f.model, &blank, &[]);
    assert_eq!(json["detections"], Value::Array(vec![]));
}

#[test]
fn detect_output_follows_the_schema_and_matches_ground_truth() {
    let f = fixture();
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(f.scenes.join("manifest.json")).unwrap()).unwrap();
    let mut hits = 0;
    for scene in manifest["scenes"].as_array().unwrap() {
        let truth = &scene["faces"][0];
        let image = f.scenes.join(scene["file"].as_str().unwrap());
        let json = detect_json(&f.model, &image, &[]);
        assert_eq!(json["window"], 15);
        assert!(json["image"].is_string());
        for d in json["detections"].as_array().unwrap() {
            let keys: Vec<&str> = d.as_object().unwrap().keys().map(String::as_str).collect();
            assert_eq!(keys, ["angle_deg", "confidence", "size", "x", "y"]);
            assert!(d["confidence"].as_f64().unwrap() >= 0.0);
            assert!(d["angle_deg"].as_f64().unwrap().abs() <= 90.0);
        }
        if let Some(top) = json["detections"].get(0) {
            let dx = top["x"].as_i64().unwrap() - truth["x"].as_i64().unwrap();
            let dy = top["y"].as_i64().unwrap() - truth["y"].as_i64().unwrap();
            let da = top["angle_deg"].as_f64().unwrap() - truth["angle_deg"].as_f64().unwrap();
            if dx.abs() <= 3 && dy.abs() <= 3 && da.abs() <= 15.0 {
                hits += 1;
            }
        }
    }
    assert!(hits >= 5, "{hits}/6 top detections match");
}

#[test]
fn detect_writes_json_and_annotation_files() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let (json, ann) = (dir.path().join("d.json"), dir.path().join("a.pgm"));
    let image = f.scenes.join("scene_0000.pgm");
    let o = rifd(&[
        "detect",
        "--model",
        s(&f.model),
        "--image",
        s(&image),
        "--json-out",
        s(&json),
        "--annotate-out",
        s(&ann),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert!(!v["detections"].as_array().unwrap().is_empty());
    let a = read_pgm(&ann);
    assert_eq!((a.width(), a.height()), (64, 64));
    assert!(a.pixels().contains(&1.0));
}

#[test]
fn corrupt_model_exits_5() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.rifd");
    let mut bytes = std::fs::read(&f.model).unwrap();
    bytes.truncate(bytes.len() / 2);
    std::fs::write(&bad, &bytes).unwrap();
    let o = rifd(&[
        "detect",
        "--model",
        s(&bad),
        "--image",
        s(&f.scenes.join("scene_0000.pgm")),
    ]);
    assert_eq!(code(&o), 5);
    std::fs::write(&bad, b"not a model at all").unwrap();
    let o = rifd(&[
        "detect",
        "--model",
        s(&bad),
        "--image",
        s(&f.scenes.join("scene_0000.pgm")),
    ]);
    assert_eq!(code(&o), 5);
}

#[test]
fn malformed_image_exits_3() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.pgm");
    std::fs::write(&bad, b"P5 4 4 255\n\x00\x01").unwrap();
    let o = rifd(&["detect", "--model", s(&f.model), "--image", s(&bad)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn job_count_does_not_change_detections() {
    let f = fixture();
    for i in 0..3 {
        let image = f.scenes.join(format!("scene_{i:04}.pgm"));
        let base = rifd(&[
            "detect",
            "--model",
            s(&f.model),
            "--image",
            s(&image),
            "--jobs",
            "1",
        ]);
        let many = rifd(&[
            "detect",
            "--model",
            s(&f.model),
            "--image",
            s(&image),
            "--jobs",
            "4",
        ]);
        let env = rifd_env(
            &["detect", "--model", s(&f.model), "--image", s(&image)],
            &[("RIFD_JOBS", "3")],
        );
        assert_eq!(code(&base), 0);
        assert_eq!(base.stdout, many.stdout);
        assert_eq!(base.stdout, env.stdout);
    }
}

#[test]
fn zero_jobs_is_a_usage_error() {
    let f = fixture();
    let image = f.scenes.join("scene_0000.pgm");
    let o = rifd_env(
        &["detect", "--model", s(&f.model), "--image", s(&image)],
        &[("RIFD_JOBS", "0")],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn wider_stride_is_much_faster() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let o = rifd(&[
        "synth",
        "--seed",
        "3",
        "--count",
        "1",
        "--width",
        "320",
        "--height",
        "240",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let image = dir.path().join("scene_0000.pgm");
    let time = |stride: &str| {
        let start = Instant::now();
        let o = rifd(&[
            "detect",
            "--model",
            s(&f.model),
            "--image",
            s(&image),
            "--stride",
            stride,
            "--jobs",
            "1",
        ]);
        assert_eq!(code(&o), 0);
        start.elapsed().as_secs_f64()
    };
    let (one, three) = (time("1"), time("3"));
    assert!(
        one >= 4.0 * three,
        "stride 1 {one:.2} s, stride 3 {three:.2} s"
    );
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let image = f.scenes.join("scene_0000.pgm");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"theta": 1e300}"#).unwrap();
    let from_config = detect_json(&f.model, &image, &["--config", s(&cfg)]);
    assert_eq!(from_config["detections"], Value::Array(vec![]));
    let overridden = detect_json(&f.model, &image, &["--config", s(&cfg), "--theta", "0"]);
    assert!(!overridden["detections"].as_array().unwrap().is_empty());

    std::fs::write(&cfg, r#"{"theta": [1]}"#).unwrap();
    let o = rifd(&[
        "detect",
        "--config",
        s(&cfg),
        "--model",
        s(&f.model),
        "--image",
        s(&image),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn oracle_evaluation_scores_everything() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.txt");
    let o = rifd(&[
        "eval",
        "--oracle",
        "--manifest",
        s(&f.scenes.join("manifest.json")),
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("100.0"), "{text}");
    assert!(text.contains("Viola-Jones"));
}

#[test]
fn eval_with_a_missing_manifest_exits_3() {
    let f = fixture();
    let o = rifd(&[
        "eval",
        "--model",
        s(&f.model),
        "--manifest",
        "/nonexistent/manifest.json",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn eval_with_baseline_writes_the_csvs() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let (metrics, timing, history) = (
        dir.path().join("fit.csv"),
        dir.path().join("timing.csv"),
        dir.path().join("history.csv"),
    );
    let o = rifd(&[
        "eval",
        "--model",
        s(&f.model),
        "--manifest",
        s(&f.scenes.join("manifest.json")),
        "--baseline",
        "--train-manifest",
        s(&f.train.join("manifest.json")),
        "--seed",
        "42",
        "--metrics-csv",
        s(&metrics),
        "--timing-csv",
        s(&timing),
        "--history-csv",
        s(&history),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let timing = std::fs::read_to_string(&timing).unwrap();
    let mut lines = timing.lines();
    assert_eq!(lines.next(), Some("method,seconds,epochs,final_mse"));
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert!(
            fields[1..].iter().all(|v| v.parse::<f64>().unwrap() >= 0.0),
            "{line}"
        );
    }
    assert!(std::fs::read_to_string(&metrics)
        .unwrap()
        .starts_with("model,m,b,r,degenerate,misclassification_rate\n"));
    assert!(std::fs::read_to_string(&history)
        .unwrap()
        .starts_with("epoch,mse\n"));
}

#[test]
fn timing_csv_without_baseline_is_a_usage_error() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let o = rifd(&[
        "eval",
        "--oracle",
        "--manifest",
        s(&f.scenes.join("manifest.json")),
        "--timing-csv",
        s(&dir.path().join("t.csv")),
    ]);
    assert_eq!(code(&o), 2);
}

fn psnr(a: &Image, b: &Image) -> f64 {
    let mse: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.pixels().len() as f64;
    10.0 * (1.0 / mse).log10()
}

#[test]
fn denoise_with_zero_threshold_keeps_the_image() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let input = f.scenes.join("scene_0001.pgm");
    let out = dir.path().join("out.pgm");
    let o = rifd(&[
        "denoise",
        "--in",
        s(&input),
        "--out",
        s(&out),
        "--mode",
        "soft",
        "--fixed-t",
        "0",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (a, b) = (read_pgm(&input), read_pgm(&out));
    for (x, y) in a.pixels().iter().zip(b.pixels()) {
        assert!((x - y).abs() <= 1.0 / 510.0 + 1e-12);
    }
}

#[test]
fn denoise_improves_psnr_on_noisy_input() {
    let dir = TempDir::new().unwrap();
    let clean = Image::from_fn(64, 64, |x, y| {
        if x < 32 {
            0.3
        } else if y < 32 {
            0.7
        } else {
            0.5
        }
    });
    let mut state = 12345u64;
    let mut gauss = || {
        // Box-Muller over a small LCG keeps the fixture self-contained
        let mut uni = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 + 0.5) / (1u64 << 53) as f64
        };
        let (u, v) = (uni(), uni());
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    };
    let noisy = Image::from_clamped(
        64,
        64,
        clean.pixels().iter().map(|p| p + 0.1 * gauss()).collect(),
    )
    .unwrap();
    let (input, out) = (dir.path().join("noisy.pgm"), dir.path().join("clean.pgm"));
    write_pgm(&input, &noisy);
    let o = rifd(&[
        "denoise",
        "--in",
        s(&input),
        "--out",
        s(&out),
        "--levels",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(psnr(&read_pgm(&out), &clean) > psnr(&read_pgm(&input), &clean));
}

#[test]
fn unknown_family_exits_2_with_usage() {
    let f = fixture();
    let o = rifd(&[
        "denoise",
        "--in",
        s(&f.scenes.join("scene_0000.pgm")),
        "--out",
        "/tmp/x.pgm",
        "--family",
        "sym9",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}
