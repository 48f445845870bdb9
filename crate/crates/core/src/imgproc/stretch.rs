use serde::{Deserialize, Serialize};

use super::{ImgError, PixelGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StretchParams {
    /// Softening of the asinh curve; smaller values stretch faint levels more.
    pub a: f64,
}

impl Default for StretchParams {
    fn default() -> Self {
        Self { a: 0.1 }
    }
}

/// Clips to `[z1, z2]`, rescales to `[0, 1]` and applies
/// `asinh(x / a) / asinh(1 / a)`.
pub fn asinh_stretch(
    grid: &PixelGrid,
    z1: f64,
    z2: f64,
    params: &StretchParams,
) -> Result<PixelGrid, ImgError> {
    if !z1.is_finite() || !z2.is_finite() {
        return Err(ImgError::InvalidLimits { z1, z2 });
    }
    if !(params.a > 0.0 && params.a.is_finite()) {
        return Err(ImgError::InvalidParams(format!("{params:?}")));
    }
    if z2 < z1 {
        return Err(ImgError::InvalidLimits { z1, z2 });
    }
    if z2 == z1 {
        return Ok(grid.map(|_| 0.0));
    }
    let span = z2 - z1;
    let norm = (1.0 / params.a).asinh();
    Ok(grid.map(|v| {
        let x = ((v - z1) / span).clamp(0.0, 1.0);
        ((x / params.a).asinh() / norm).min(1.0)
    }))
}

/// Quantises `[0, 1]` values to integral `0..=255`, rounding half away
/// from zero.
pub fn to_eight_bit(grid: &PixelGrid) -> Result<PixelGrid, ImgError> {
    if let Some(&v) = grid.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(ImgError::OutOfUnitRange(v));
    }
    Ok(grid.map(|v| (v * 255.0).round()))
}
