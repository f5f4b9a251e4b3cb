//! Rotation-aware detection of a trained patch pattern in grayscale images.
//!
//! Each candidate window goes through wavelet de-noising, PCA projection and
//! a generalized regression network that returns an in-plane angle together
//! with a kernel-density confidence. A sliding window over an image pyramid
//! plus non-maximum suppression turns those per-window answers into
//! detections.
//!
//! Angles are in degrees, `0` is upright and positive angles are clockwise.

pub mod bundle;
pub mod detector;
pub mod eval;
pub mod grnn;
pub mod image;
pub mod linalg;
pub mod pca;
pub mod pgm;
pub mod rprop;
pub mod train;
pub mod wavelet;

pub use bundle::{BundleError, ModelBundle};
pub use image::{normalize_patch, patch_contrast, Image, ImageError};
pub use pgm::{load_pgm, save_pgm, PgmError};
