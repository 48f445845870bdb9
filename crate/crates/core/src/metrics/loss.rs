use thiserror::Error;

use crate::annot::Bitmap;

pub const FOCAL_EPS: f64 = 1e-7;
pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_ALPHA: f64 = 0.25;
pub const FOCAL_WEIGHT: f64 = 20.0;
pub const DICE_WEIGHT: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("probability map has {actual} values, mask has {expected} pixels")]
    DimMismatch { expected: usize, actual: usize },
    #[error("probability {0} at index {1} is outside [0, 1]")]
    OutOfRange(f64, usize),
}

fn check(pred: &[f64], gt: &Bitmap) -> Result<(), LossError> {
    let (h, w) = gt.dims();
    if pred.len() != h * w {
        return Err(LossError::DimMismatch { expected: h * w, actual: pred.len() });
    }
    match pred.iter().position(|p| !(0.0..=1.0).contains(p)) {
        Some(i) => Err(LossError::OutOfRange(pred[i], i)),
        None => Ok(()),
    }
}

/// `1 - 2 sum(p g) / (sum p + sum g)`; 0 when both are empty.
pub fn dice_loss(pred: &[f64], gt: &Bitmap) -> Result<f64, LossError> {
    check(pred, gt)?;
    let gt = gt.to_bools();
    let (mut inter, mut sp, mut sg) = (0.0, 0.0, 0.0);
    for (&p, &g) in pred.iter().zip(&gt) {
        sp += p;
        if g {
            sg += 1.0;
            inter += p;
        }
    }
    Ok(dice_from_sums(inter, sp, sg))
}

fn dice_from_sums(inter: f64, sum_pred: f64, sum_gt: f64) -> f64 {
    let denom = sum_pred + sum_gt;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 - 2.0 * inter / denom).clamp(0.0, 1.0)
    }
}

fn focal_term(p: f64, foreground: bool, gamma: f64, alpha: f64) -> f64 {
    let p = p.clamp(FOCAL_EPS, 1.0 - FOCAL_EPS);
    let (pt, at) = if foreground { (p, alpha) } else { (1.0 - p, 1.0 - alpha) };
    -at * (1.0 - pt).powf(gamma) * pt.ln()
}

/// Mean per-pixel focal loss.
pub fn focal_loss(pred: &[f64], gt: &Bitmap, gamma: f64, alpha: f64) -> Result<f64, LossError> {
    check(pred, gt)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let gt = gt.to_bools();
    let total: f64 = pred.iter().zip(&gt).map(|(&p, &g)| focal_term(p, g, gamma, alpha)).sum();
    Ok(total / pred.len() as f64)
}

pub fn combined_loss(pred: &[f64], gt: &Bitmap) -> Result<f64, LossError> {
    let focal = focal_loss(pred, gt, DEFAULT_GAMMA, DEFAULT_ALPHA)?;
    let dice = dice_loss(pred, gt)?;
    Ok(weighted(focal, dice))
}

pub fn weighted(focal: f64, dice: f64) -> f64 {
    FOCAL_WEIGHT * focal + DICE_WEIGHT * dice
}

/// Pixel counts for a prediction that is constant `score` on its mask and
/// 0 elsewhere; enough to evaluate both losses without a probability map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryOverlap {
    pub pixels: usize,
    pub pred: usize,
    pub gt: usize,
    pub intersection: usize,
    pub score: f64,
}

impl BinaryOverlap {
    pub fn dice(&self) -> f64 {
        dice_from_sums(
            self.score * self.intersection as f64,
            self.score * self.pred as f64,
            self.gt as f64,
        )
    }

    pub fn focal(&self, gamma: f64, alpha: f64) -> f64 {
        if self.pixels == 0 {
            return 0.0;
        }
        let tp = self.intersection as f64;
        let fp = (self.pred - self.intersection) as f64;
        let fnn = (self.gt - self.intersection) as f64;
        let tn = (self.pixels + self.intersection - self.pred - self.gt) as f64;
        let s = self.score;
        let total = tp * focal_term(s, true, gamma, alpha)
            + fp * focal_term(s, false, gamma, alpha)
            + fnn * focal_term(0.0, true, gamma, alpha)
            + tn * focal_term(0.0, false, gamma, alpha);
        total / self.pixels as f64
    }

    pub fn combined(&self) -> f64 {
        weighted(self.focal(DEFAULT_GAMMA, DEFAULT_ALPHA), self.dice())
    }
}
