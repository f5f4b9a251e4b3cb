//! Trained-model file: magic bytes, a little-endian `u32` header length, a
//! JSON header, then every numeric array as little-endian `f64`.
//!
//! Payload order: θ, contrast floor, PCA total variance, GRNN spread, PCA mean (`d`),
//! PCA basis (`d × k`, row-major), eigenvalues (`k`), GRNN centers
//! (`m × k`, row-major), GRNN targets (`m`).

use crate::grnn::GrnnModel;
use crate::linalg::Matrix;
use crate::pca::PcaModel;
use crate::wavelet::DenoiseSettings;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"RIFDMODL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("model file is truncated")]
    Truncated,
    #[error("unreadable model header: {0}")]
    Header(String),
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("inconsistent model file: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub window: usize,
    pub denoise: DenoiseSettings,
    pub pca: PcaModel,
    pub grnn: GrnnModel,
    pub density_threshold: f64,
    /// Minimum de-noised window contrast; 0 disables the check.
    pub contrast_floor: f64,
    /// Number of training patches.
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    window: usize,
    denoise: DenoiseSettings,
    dim: usize,
    rank: usize,
    centers: usize,
    samples: usize,
    seed: u64,
}

impl ModelBundle {
    pub fn to_bytes(&self) -> Vec<u8> {
        let (d, k, m) = (self.pca.dim(), self.pca.rank(), self.grnn.len());
        let header = Header {
            format_version: FORMAT_VERSION,
            window: self.window,
            denoise: self.denoise,
            dim: d,
            rank: k,
            centers: m,
            samples: self.samples,
            seed: self.seed,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + json.len() + 8 * payload_len(d, k, m));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |vals: &[f64]| {
            for v in vals {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        put(&[
            self.density_threshold,
            self.contrast_floor,
            self.pca.total_variance(),
            self.grnn.spread(),
        ]);
        put(self.pca.mean());
        put(self.pca.basis().as_slice());
        put(self.pca.eigenvalues());
        put(self.grnn.centers().as_slice());
        put(self.grnn.targets());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BundleError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(BundleError::BadMagic);
        }
        let rest = &bytes[MAGIC.len()..];
        let len_bytes: [u8; 4] = rest
            .get(..4)
            .ok_or(BundleError::Truncated)?
            .try_into()
            .expect("4 bytes");
        let hlen = u32::from_le_bytes(len_bytes) as usize;
        let rest = &rest[4..];
        let json = rest.get(..hlen).ok_or(BundleError::Truncated)?;
        let header: Header =
            serde_json::from_slice(json).map_err(|e| BundleError::Header(e.to_string()))?;
        if header.format_version != FORMAT_VERSION {
            return Err(BundleError::Version(header.format_version));
        }
        let (d, k, m) = (header.dim, header.rank, header.centers);
        if header.window.checked_mul(header.window) != Some(d) {
            return Err(BundleError::Inconsistent(format!(
                "window {} does not match PCA dimension {d}",
                header.window
            )));
        }
        let payload = &rest[hlen..];
        let need = checked_payload_len(d, k, m)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| BundleError::Inconsistent("array sizes overflow".into()))?;
        if payload.len() < need {
            return Err(BundleError::Truncated);
        }
        if payload.len() > need {
            return Err(BundleError::Inconsistent(
                "trailing bytes after payload".into(),
            ));
        }
        let mut vals = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut take = |n: usize| -> Vec<f64> { vals.by_ref().take(n).collect() };
        let head = take(HEAD_LEN);
        let mean = take(d);
        let basis = Matrix::from_vec(d, k, take(d * k));
        let eigenvalues = take(k);
        let centers = Matrix::from_vec(m, k, take(m * k));
        let targets = take(m);
        let bad = |e: String| BundleError::Inconsistent(e);
        let pca = PcaModel::from_parts(mean, basis, eigenvalues, head[2])
            .map_err(|e| bad(e.to_string()))?;
        let grnn = GrnnModel::fit(centers, targets, head[3]).map_err(|e| bad(e.to_string()))?;
        if !(head[0] >= 0.0) || !(head[1] >= 0.0) {
            return Err(bad(format!("thresholds {} / {}", head[0], head[1])));
        }
        Ok(Self {
            window: header.window,
            denoise: header.denoise,
            pca,
            grnn,
            density_threshold: head[0],
            contrast_floor: head[1],
            samples: header.samples,
            seed: header.seed,
        })
    }
}

const HEAD_LEN: usize = 4;

fn payload_len(d: usize, k: usize, m: usize) -> usize {
    HEAD_LEN + d + d * k + k + m * k + m
}

fn checked_payload_len(d: usize, k: usize, m: usize) -> Option<usize> {
    let dk = d.checked_mul(k)?;
    let mk = m.checked_mul(k)?;
    [d, dk, k, mk, m]
        .iter()
        .try_fold(HEAD_LEN, |acc, &n| acc.checked_add(n))
}
