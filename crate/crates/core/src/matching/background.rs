use serde::{Deserialize, Serialize};

use super::MatchError;
use crate::imgproc::PixelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundStats {
    pub median: f64,
    /// Standard deviation of the pixels surviving the clipping.
    pub sigma: f64,
    pub k_clip: f64,
    pub iterations: usize,
}

pub const DEFAULT_K_CLIP: f64 = 3.0;
pub const DEFAULT_CLIP_ITERATIONS: usize = 5;
const MIN_PIXELS: usize = 5;

/// Global frame background by iterative sigma clipping with the default
/// 3-sigma, 5-round settings.
pub fn background_stats(grid: &PixelGrid) -> Result<BackgroundStats, MatchError> {
    background_stats_with(grid, DEFAULT_K_CLIP, DEFAULT_CLIP_ITERATIONS)
}

/// Repeatedly drops pixels outside `median ± k_clip * sigma` until nothing
/// changes or `iterations` rounds have run, then reports the median and
/// population standard deviation of what is left.
pub fn background_stats_with(grid: &PixelGrid, k_clip: f64, iterations: usize) -> Result<BackgroundStats, MatchError> {
    let mut data: Vec<f64> = grid.values().iter().copied().filter(|v| v.is_finite()).collect();
    if data.len() < MIN_PIXELS {
        return Err(MatchError::TooFewPixels { needed: MIN_PIXELS, found: data.len() });
    }
    for _ in 0..iterations {
        let (median, sigma) = median_std(&mut data);
        let before = data.len();
        data.retain(|&v| (v - median).abs() <= k_clip * sigma);
        if data.is_empty() {
            return Err(MatchError::AllRejected);
        }
        if data.len() == before {
            break;
        }
    }
    let (median, sigma) = median_std(&mut data);
    Ok(BackgroundStats { median, sigma, k_clip, iterations })
}

fn median_std(data: &mut [f64]) -> (f64, f64) {
    let n = data.len();
    let mean = data.iter().sum::<f64>() / n as f64;
    let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let mid = n / 2;
    let (_, &mut upper, _) = data.select_nth_unstable_by(mid, f64::total_cmp);
    let median = if n % 2 == 1 {
        upper
    } else {
        let lower = data[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    (median, var.sqrt())
}
