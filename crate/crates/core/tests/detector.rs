use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rifd::detector::{build_pyramid, scan_candidates, scan_with_jobs, window_count, ScanConfig};
use rifd::eval::{face_template, synth_dataset, synth_patches, SynthParams};
use rifd::train::{train, TrainConfig};
use rifd::{Image, ModelBundle};
use std::sync::OnceLock;

fn bundle() -> &'static ModelBundle {
    static B: OnceLock<ModelBundle> = OnceLock::new();
    B.get_or_init(|| {
        let (patches, angles) = synth_patches(42, 120, &face_template(15), &SynthParams::default());
        train(
            &patches,
            &angles,
            &TrainConfig {
                seed: 42,
                ..TrainConfig::default()
            },
        )
        .unwrap()
    })
}

fn scene(seed: u64, angle: (f64, f64)) -> rifd::eval::LabeledScene {
    let params = SynthParams {
        angle_range: angle,
        ..SynthParams::default()
    };
    synth_dataset(seed, 1, &face_template(15), &params).remove(0)
}

#[test]
fn finds_a_thirty_degree_template() {
    let b = bundle();
    for seed in [1, 2, 3] {
        let s = scene(seed, (30.0, 30.0));
        let truth = s.faces[0];
        let dets = scan_with_jobs(&s.image, &b.pca, &b.grnn, &b.scan_config(), 1).unwrap();
        let top = dets.first().expect("at least one detection");
        assert!(
            top.x.abs_diff(truth.x) <= 2 && top.y.abs_diff(truth.y) <= 2,
            "{top:?} vs {truth:?}"
        );
        assert!((top.angle - 30.0).abs() <= 10.0, "{top:?}");
    }
}

#[test]
fn infinite_threshold_rejects_everything() {
    let b = bundle();
    let cfg = ScanConfig {
        density_threshold: f64::INFINITY,
        ..b.scan_config()
    };
    let s = scene(4, (-90.0, 90.0));
    assert!(scan_with_jobs(&s.image, &b.pca, &b.grnn, &cfg, 1)
        .unwrap()
        .is_empty());
}

#[test]
fn images_smaller_than_the_window_give_nothing() {
    let b = bundle();
    let img = Image::filled(14, 40, 0.5);
    assert!(scan_with_jobs(&img, &b.pca, &b.grnn, &b.scan_config(), 1)
        .unwrap()
        .is_empty());
}

#[test]
fn raising_the_threshold_only_removes_candidates() {
    let b = bundle();
    let s = scene(5, (-90.0, 90.0));
    let base = ScanConfig {
        density_threshold: 0.0,
        min_contrast: 0.0,
        stride: 2,
        ..b.scan_config()
    };
    let mut prev = scan_candidates(&s.image, &b.pca, &b.grnn, &base, 1).unwrap();
    for theta in [1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.2] {
        let cfg = ScanConfig {
            density_threshold: theta,
            ..base.clone()
        };
        let next = scan_candidates(&s.image, &b.pca, &b.grnn, &cfg, 1).unwrap();
        assert!(next.iter().all(|d| prev.contains(d)));
        assert!(next.iter().all(|d| d.confidence >= theta));
        prev = next;
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let b = bundle();
    let cfg = ScanConfig {
        min_contrast: 0.0,
        ..b.scan_config()
    };
    for seed in 6..9 {
        let s = scene(seed, (-90.0, 90.0));
        let one = scan_with_jobs(&s.image, &b.pca, &b.grnn, &cfg, 1).unwrap();
        for jobs in [2, 3, 8] {
            assert_eq!(
                scan_with_jobs(&s.image, &b.pca, &b.grnn, &cfg, jobs).unwrap(),
                one
            );
        }
    }
}

#[test]
fn stride_one_visits_every_window() {
    let b = bundle();
    let cfg = ScanConfig {
        density_threshold: 0.0,
        min_contrast: 0.0,
        nms_overlap: 1.0,
        max_levels: Some(1),
        ..b.scan_config()
    };
    let img = Image::from_fn(23, 19, |x, y| ((x * 3 + y * 5) % 7) as f64 / 7.0);
    let cands = scan_candidates(&img, &b.pca, &b.grnn, &cfg, 1).unwrap();
    assert_eq!(cands.len(), window_count(23, 19, 15, 1));
    assert_eq!(cands.len(), (23 - 15 + 1) * (19 - 15 + 1));
}

#[test]
fn pyramid_scales_follow_the_factor() {
    let cfg = ScanConfig {
        scale_factor: 2.0,
        ..ScanConfig::default()
    };
    let levels = build_pyramid(&Image::filled(60, 60, 0.3), &cfg);
    let got: Vec<(f64, usize)> = levels.iter().map(|l| (l.scale, l.image.width())).collect();
    assert_eq!(got, vec![(1.0, 60), (2.0, 30), (4.0, 15)]);
    assert!(levels
        .iter()
        .all(|l| l.image.pixels().iter().all(|&p| (p - 0.3).abs() < 1e-12)));
}

#[test]
fn bundle_round_trip_predicts_bit_exactly() {
    let b = bundle();
    let back = ModelBundle::from_bytes(&b.to_bytes()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let patch = Image::from_fn(15, 15, |_, _| rng.random_range(0.0..=1.0));
        let p = b.pipeline().predict(&patch).unwrap();
        let q = back.pipeline().predict(&patch).unwrap();
        assert_eq!(p.value.to_bits(), q.value.to_bits());
        assert_eq!(p.density.to_bits(), q.density.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn detections_stay_inside_the_image(seed in any::<u64>(), w in 15usize..50, h in 15usize..50, stride in 1usize..4) {
        let b = bundle();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = Image::from_fn(w, h, |_, _| rng.random_range(0.0..=1.0));
        let cfg = ScanConfig { stride, density_threshold: 0.0, min_contrast: 0.0, ..b.scan_config() };
        for d in scan_with_jobs(&img, &b.pca, &b.grnn, &cfg, 2).unwrap() {
            prop_assert!(d.x + d.size <= w && d.y + d.size <= h);
            prop_assert!((-90.0..=90.0).contains(&d.angle));
            prop_assert!(d.confidence >= 0.0);
        }
    }
}
