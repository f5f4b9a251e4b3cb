use crate::error::{CliError, CliResult};
use rifd::eval::Manifest;
use rifd::{load_pgm, save_pgm, BundleError, Image, ModelBundle};
use std::path::{Path, PathBuf};

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_image(path: &Path) -> CliResult<Image> {
    load_pgm(&read_bytes(path)?).map_err(|e| CliError::io(path, e))
}

pub fn write_image(path: &Path, img: &Image) -> CliResult<()> {
    write_bytes(path, &save_pgm(img, 255))
}

pub fn read_model(path: &Path) -> CliResult<ModelBundle> {
    ModelBundle::from_bytes(&read_bytes(path)?)
        .map_err(|e: BundleError| CliError::Model(format!("{}: {e}", path.display())))
}

pub fn read_manifest(path: &Path) -> CliResult<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Manifest::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Resolves a file named in a manifest relative to the manifest's directory.
pub fn beside(manifest: &Path, file: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(file)
}
