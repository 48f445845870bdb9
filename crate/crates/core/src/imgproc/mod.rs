//! Frame ingestion and display normalisation.
//!
//! Frames are read from FITS or PNG, block-mean rebinned, clipped to ZScale
//! limits and asinh stretched before being quantised to 8 bits.

mod filter;
pub mod fits;
mod grid;
mod png;
mod stretch;
mod zscale;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::FilterBand;
pub use fits::{read_fits, FitsError};
pub use grid::{rebin, PixelGrid};
pub use png::{read_png_grayscale, write_png_gray8};
pub use stretch::{asinh_stretch, to_eight_bit, StretchParams};
pub use zscale::{zscale_limits, ZScaleParams};

#[derive(Debug, Error, PartialEq)]
pub enum ImgError {
    #[error("grid must be non-empty, got {width}x{height}")]
    EmptyGrid { width: usize, height: usize },
    #[error("expected {expected} pixel values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("rows have different lengths")]
    RaggedRows,
    #[error("frame has no finite pixels")]
    NoFinitePixels,
    #[error("rebin factor must be >= 1, got {0}")]
    InvalidRebinFactor(usize),
    #[error("{width}x{height} is not divisible by rebin factor {factor}")]
    NotDivisible { width: usize, height: usize, factor: usize },
    #[error("need at least {needed} finite pixels, found {found}")]
    TooFewPixels { needed: usize, found: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid display limits z1={z1}, z2={z2}")]
    InvalidLimits { z1: f64, z2: f64 },
    #[error("value {0} outside [0, 1]")]
    OutOfUnitRange(f64),
    #[error("value {0} is not an 8-bit integer")]
    NotEightBit(f64),
    #[error("png: {0}")]
    Png(String),
    #[error("unsupported colour type {0}")]
    UnsupportedColor(String),
    #[error("unknown filter {0:?}")]
    UnknownFilter(String),
}

/// Parameters of the full preprocessing chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PreprocessParams {
    pub zscale: ZScaleParams,
    pub stretch: StretchParams,
    pub rebin: RebinParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RebinParams {
    pub factor: usize,
}

impl Default for RebinParams {
    fn default() -> Self {
        Self { factor: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    /// Integral values in `0..=255`.
    pub image: PixelGrid,
    pub z1: f64,
    pub z2: f64,
}

/// rebin -> zscale -> asinh -> 8 bit.
pub fn preprocess(grid: &PixelGrid, params: &PreprocessParams) -> Result<Preprocessed, ImgError> {
    let binned = rebin(grid, params.rebin.factor)?;
    let (z1, z2) = zscale_limits(&binned, &params.zscale)?;
    let stretched = asinh_stretch(&binned, z1, z2, &params.stretch)?;
    Ok(Preprocessed { image: to_eight_bit(&stretched)?, z1, z2 })
}
