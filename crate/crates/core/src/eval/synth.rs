//! Seeded synthetic faces: a drawn template, rotated and pasted over
//! smooth random texture with Gaussian noise.

use crate::image::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Ground-truth placement of one template instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: usize,
    pub y: usize,
    pub size: usize,
    #[serde(rename = "angle_deg")]
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScene {
    pub image: Image,
    pub faces: Vec<FaceBox>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// Inclusive angle range in degrees, sampled uniformly.
    pub angle_range: (f64, f64),
    pub noise_sigma: f64,
    /// Template gain is drawn from `1 ± brightness_jitter`.
    pub brightness_jitter: f64,
    pub scene_width: usize,
    pub scene_height: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            angle_range: (-90.0, 90.0),
            noise_sigma: 0.05,
            brightness_jitter: 0.1,
            scene_width: 64,
            scene_height: 64,
        }
    }
}

/// A stylized upright face: bright oval on a darker surround, two dark eyes
/// above a dark mouth. Features are anti-aliased so rotation stays smooth.
pub fn face_template(window: usize) -> Image {
    let c = (window as f64 - 1.0) / 2.0;
    let r = window as f64 / 2.0;
    // ellipse indicator with a linear rim over the outer third of its radius;
    // coordinates are in units of the half-size
    let blob = |x: f64, y: f64, px: f64, py: f64, rx: f64, ry: f64| -> f64 {
        let d = (((x - px) / rx).powi(2) + ((y - py) / ry).powi(2)).sqrt();
        ((1.0 - d) * 3.0).clamp(0.0, 1.0)
    };
    Image::from_fn(window, window, |xi, yi| {
        let x = (xi as f64 - c) / r;
        let y = (yi as f64 - c) / r;
        let head = blob(x, y, 0.0, 0.05, 0.78, 0.95);
        let mut v = 0.3 + 0.5 * head;
        let left_eye = blob(x, y, -0.36, -0.25, 0.2, 0.16);
        let right_eye = blob(x, y, 0.36, -0.25, 0.2, 0.16);
        let mouth = blob(x, y, 0.0, 0.45, 0.38, 0.12);
        let nose = blob(x, y, 0.0, 0.1, 0.08, 0.18);
        v -= 0.6 * left_eye.max(right_eye);
        v -= 0.5 * mouth;
        v -= 0.2 * nose;
        v
    })
}

/// Smooth random texture: a few random plane waves around a random offset.
fn texture(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Image {
    let base = rng.random_range(0.3..0.6);
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let amp = rng.random_range(0.02..0.08);
            let freq = rng.random_range(0.02..0.2);
            let dir = rng.random_range(0.0..std::f64::consts::TAU);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (amp, freq, dir, phase)
        })
        .collect();
    Image::from_fn(width, height, |x, y| {
        let mut v = base;
        for &(amp, freq, dir, phase) in &waves {
            let t = (x as f64 * dir.cos() + y as f64 * dir.sin()) * freq;
            v += amp * (t + phase).sin();
        }
        v
    })
}

/// Pastes `template` rotated by `angle` with gain `gain` at `(x0, y0)`.
/// Pixels the rotation pulls from outside the template stay untouched.
fn paste(canvas: &mut Image, template: &Image, angle: f64, gain: f64, x0: usize, y0: usize) {
    let rotated = template.rotate(angle);
    let coverage = Image::filled(template.width(), template.height(), 1.0).rotate(angle);
    for y in 0..template.height() {
        for x in 0..template.width() {
            let a = coverage.get(x, y);
            if a > 0.0 {
                let (cx, cy) = (x0 + x, y0 + y);
                let bg = canvas.get(cx, cy);
                canvas.set(cx, cy, bg * (1.0 - a) + a * gain * rotated.get(x, y));
            }
        }
    }
}

fn add_noise(img: &mut Image, rng: &mut ChaCha8Rng, sigma: f64) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = img.get(x, y) + normal.sample(rng);
            img.set(x, y, v);
        }
    }
}

fn draw_angle(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    let (lo, hi) = range;
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn draw_gain(rng: &mut ChaCha8Rng, jitter: f64) -> f64 {
    if jitter > 0.0 {
        rng.random_range(1.0 - jitter..=1.0 + jitter)
    } else {
        1.0
    }
}

/// Training patches: one rotated template per patch over its own texture.
/// Returns the patches and their angles.
pub fn synth_patches(
    seed: u64,
    n: usize,
    template: &Image,
    params: &SynthParams,
) -> (Vec<Image>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (template.width(), template.height());
    let mut patches = Vec::with_capacity(n);
    let mut angles = Vec::with_capacity(n);
    for _ in 0..n {
        let angle = draw_angle(&mut rng, params.angle_range);
        let gain = draw_gain(&mut rng, params.brightness_jitter);
        let mut canvas = texture(&mut rng, w, h);
        paste(&mut canvas, template, angle, gain, 0, 0);
        add_noise(&mut canvas, &mut rng, params.noise_sigma);
        patches.push(canvas);
        angles.push(angle);
    }
    (patches, angles)
}

/// Scenes with one template each at a uniformly random in-bounds position.
/// Scene `i` is generated from its own stream seeded by `seed` and `i`.
pub fn synth_dataset(
    seed: u64,
    n_scenes: usize,
    template: &Image,
    params: &SynthParams,
) -> Vec<LabeledScene> {
    assert!(
        params.scene_width >= template.width() && params.scene_height >= template.height(),
        "scene smaller than template"
    );
    (0..n_scenes)
        .map(|i| {
            let scene_seed = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
            let angle = draw_angle(&mut rng, params.angle_range);
            let gain = draw_gain(&mut rng, params.brightness_jitter);
            let x = rng.random_range(0..=params.scene_width - template.width());
            let y = rng.random_range(0..=params.scene_height - template.height());
            let mut canvas = texture(&mut rng, params.scene_width, params.scene_height);
            paste(&mut canvas, template, angle, gain, x, y);
            add_noise(&mut canvas, &mut rng, params.noise_sigma);
            LabeledScene {
                image: canvas,
                faces: vec![FaceBox {
                    x,
                    y,
                    size: template.width(),
                    angle,
                }],
                seed: scene_seed,
            }
        })
        .collect()
}
