use std::io::Cursor;

use image::{DynamicImage, ImageFormat, ImageReader};

use super::{ImgError, PixelGrid};

const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

fn luminance(r: f64, g: f64, b: f64) -> f64 {
    LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
}

/// Decodes a PNG into a grid of raw sample values (0..=255 or 0..=65535).
/// Colour images are reduced to luminance; alpha is ignored.
pub fn read_png_grayscale(bytes: &[u8]) -> Result<PixelGrid, ImgError> {
    let reader = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
    let img = reader.decode().map_err(|e| ImgError::Png(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| f64::from(p.0[0])).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| f64::from(p.0[0])).collect(),
        DynamicImage::ImageRgb8(b) => b
            .pixels()
            .map(|p| luminance(p.0[0].into(), p.0[1].into(), p.0[2].into()))
            .collect(),
        DynamicImage::ImageRgba8(b) => b
            .pixels()
            .map(|p| luminance(p.0[0].into(), p.0[1].into(), p.0[2].into()))
            .collect(),
        DynamicImage::ImageRgb16(b) => b
            .pixels()
            .map(|p| luminance(p.0[0].into(), p.0[1].into(), p.0[2].into()))
            .collect(),
        DynamicImage::ImageRgba16(b) => b
            .pixels()
            .map(|p| luminance(p.0[0].into(), p.0[1].into(), p.0[2].into()))
            .collect(),
        other => return Err(ImgError::UnsupportedColor(format!("{:?}", other.color()))),
    };
    PixelGrid::new(w, h, values)
}

/// Encodes an 8-bit grid (integral values in 0..=255) as a grayscale PNG.
pub fn write_png_gray8(grid: &PixelGrid) -> Result<Vec<u8>, ImgError> {
    let mut raw = Vec::with_capacity(grid.values().len());
    for &v in grid.values() {
        if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
            return Err(ImgError::NotEightBit(v));
        }
        raw.push(v as u8);
    }
    let buf = image::GrayImage::from_raw(grid.width() as u32, grid.height() as u32, raw)
        .expect("buffer sized from grid");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ImgError::Png(e.to_string()))?;
    Ok(out.into_inner())
}
