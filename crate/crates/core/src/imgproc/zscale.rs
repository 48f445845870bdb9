use serde::{Deserialize, Serialize};

use super::{ImgError, PixelGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZScaleParams {
    pub n_samples: usize,
    pub contrast: f64,
    pub max_reject_fraction: f64,
    pub min_pixels: usize,
    pub k_rej: f64,
    pub max_iterations: usize,
}

impl Default for ZScaleParams {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            contrast: 0.25,
            max_reject_fraction: 0.5,
            min_pixels: 5,
            k_rej: 2.5,
            max_iterations: 5,
        }
    }
}

impl ZScaleParams {
    pub fn validate(&self) -> Result<(), ImgError> {
        let ok = self.contrast > 0.0
            && self.contrast <= 1.0
            && self.min_pixels >= 1
            && self.n_samples >= self.min_pixels
            && self.k_rej > 0.0
            && (0.0..=1.0).contains(&self.max_reject_fraction);
        if ok {
            Ok(())
        } else {
            Err(ImgError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Display limits `(z1, z2)` from a robust line fit to the sorted sample
/// distribution.
///
/// Samples are taken on an even stride, sorted, and fitted against their
/// rank. Points further than `k_rej` sigma from the line are rejected along
/// with their immediate neighbours, and the fit is repeated until nothing new
/// is rejected, `max_iterations` is reached, or too few points remain. The
/// fitted slope scaled by `1 / contrast` then spans the range around the
/// median. Degenerate fits fall back to the sample extrema.
pub fn zscale_limits(grid: &PixelGrid, params: &ZScaleParams) -> Result<(f64, f64), ImgError> {
    params.validate()?;
    let finite: Vec<f64> = grid.values().iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < params.min_pixels {
        return Err(ImgError::TooFewPixels { needed: params.min_pixels, found: finite.len() });
    }
    let stride = (finite.len() / params.n_samples).max(1);
    let mut samples: Vec<f64> = finite.iter().step_by(stride).take(params.n_samples).copied().collect();
    samples.sort_by(f64::total_cmp);

    let n = samples.len();
    let (vmin, vmax) = (samples[0], samples[n - 1]);
    let min_good = params
        .min_pixels
        .max((n as f64 * params.max_reject_fraction) as usize);

    let mut bad = vec![false; n];
    let mut n_good = n;
    let mut last_good = n + 1;
    let mut slope = None;
    for _ in 0..params.max_iterations {
        if n_good >= last_good || n_good < min_good {
            break;
        }
        let Some((a, b)) = fit_line(&samples, &bad) else {
            slope = None;
            break;
        };
        slope = Some(b);
        let residual = |i: usize| samples[i] - (a + b * i as f64);
        let threshold = params.k_rej * residual_std(&bad, residual);

        let mut rejected: Vec<bool> = (0..n).map(|i| bad[i] || residual(i).abs() > threshold).collect();
        // grow by one sample on each side
        let flagged = rejected.clone();
        for (i, &f) in flagged.iter().enumerate() {
            if f {
                if i > 0 {
                    rejected[i - 1] = true;
                }
                if i + 1 < n {
                    rejected[i + 1] = true;
                }
            }
        }
        bad = rejected;
        last_good = n_good;
        n_good = bad.iter().filter(|&&b| !b).count();
    }

    match slope {
        Some(s) if n_good >= min_good && s > 0.0 => {
            let s = s / params.contrast;
            let mid = (n - 1) / 2;
            let median = if n % 2 == 1 {
                samples[mid]
            } else {
                0.5 * (samples[mid] + samples[mid + 1])
            };
            let z1 = vmin.max(median - mid as f64 * s);
            let z2 = vmax.min(median + (n - mid) as f64 * s);
            Ok((z1, z2))
        }
        _ => Ok((vmin, vmax)),
    }
}

/// Least-squares line `y = a + b x` over the unmasked samples, `x` = rank.
fn fit_line(samples: &[f64], bad: &[bool]) -> Option<(f64, f64)> {
    let good = || samples.iter().enumerate().filter(|(i, _)| !bad[*i]);
    let count = good().count();
    if count < 2 {
        return None;
    }
    let nf = count as f64;
    let x_mean = good().map(|(i, _)| i as f64).sum::<f64>() / nf;
    let y_mean = good().map(|(_, &y)| y).sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in good() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some((y_mean - b * x_mean, b))
}

fn residual_std(bad: &[bool], residual: impl Fn(usize) -> f64) -> f64 {
    let idx = || (0..bad.len()).filter(|&i| !bad[i]);
    let count = idx().count() as f64;
    let mean = idx().map(&residual).sum::<f64>() / count;
    (idx().map(|i| (residual(i) - mean).powi(2)).sum::<f64>() / count).sqrt()
}
