use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use xami_core::annot::{parse_coco, parse_predictions, CocoKind, Dataset};
use xami_core::imgproc::{read_fits, read_png_grayscale, PixelGrid};

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_gt(path: &Path) -> Result<Dataset> {
    parse_coco(&read(path)?, CocoKind::GroundTruth).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_preds(path: &Path, gt: &Dataset) -> Result<Dataset> {
    parse_predictions(&read(path)?, gt).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    Fits,
    Png,
}

pub fn image_kind(path: &Path) -> Option<ImageKind> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "fits" | "fit" | "fts" => Some(ImageKind::Fits),
        "png" => Some(ImageKind::Png),
        _ => None,
    }
}

pub fn load_grid(path: &Path) -> Result<PixelGrid> {
    let bytes = read(path)?;
    match image_kind(path) {
        Some(ImageKind::Fits) => Ok(read_fits(&bytes)?),
        Some(ImageKind::Png) => Ok(read_png_grayscale(&bytes)?),
        None => bail!("{} is neither FITS nor PNG", path.display()),
    }
}

/// FITS and PNG files directly inside `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && image_kind(&path).is_some() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn file_label(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}
