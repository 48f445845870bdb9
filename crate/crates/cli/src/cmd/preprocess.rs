use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;
use xami_core::imgproc::{preprocess, write_png_gray8, PreprocessParams};

use crate::config::RunConfig;
use crate::errlog::ErrorLog;
use crate::io::{file_label, list_images, load_grid, write};

#[derive(Debug, Serialize)]
struct ManifestEntry {
    input: String,
    output: String,
    input_width: usize,
    input_height: usize,
    width: usize,
    height: usize,
    z1: f64,
    z2: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    params: &'a PreprocessParams,
    images: Vec<ManifestEntry>,
}

fn process_one(path: &Path, params: &PreprocessParams, out_dir: &Path) -> Result<ManifestEntry> {
    let grid = load_grid(path)?;
    let done = preprocess(&grid, params)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let output = format!("{stem}.png");
    write(&out_dir.join(&output), write_png_gray8(&done.image)?)?;
    Ok(ManifestEntry {
        input: file_label(path),
        output,
        input_width: grid.width(),
        input_height: grid.height(),
        width: done.image.width(),
        height: done.image.height(),
        z1: done.z1,
        z2: done.z2,
    })
}

pub fn run(cfg: &RunConfig, errors: &ErrorLog) -> Result<()> {
    let images = cfg.require(&cfg.paths.images, "images directory")?;
    let out = cfg.out_dir()?;
    let png_dir = out.join("images");
    std::fs::create_dir_all(&png_dir)?;
    let inputs = list_images(images)?;
    log::info!("preprocessing {} files from {}", inputs.len(), images.display());

    let results: Vec<_> = inputs
        .par_iter()
        .map(|p| (p, process_one(p, &cfg.preprocess, &png_dir)))
        .collect();
    let mut entries = Vec::new();
    for (path, r) in results {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => errors.record(file_label(path), "preprocess", e),
        }
    }
    let manifest = Manifest { params: &cfg.preprocess, images: entries };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write(&out.join("manifest.json"), bytes)?;
    println!(
        "preprocessed {} of {} files into {}",
        manifest.images.len(),
        inputs.len(),
        png_dir.display()
    );
    Ok(())
}
