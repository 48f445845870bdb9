//! Prediction to ground-truth assignment per image, and the rule that swaps
//! in box-detector masks for faint instances of some classes.

mod background;
mod fusion;
mod hungarian;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annot::{rasterize, AnnotError, Annotation, ArtefactClass, Bitmap, Dataset, ImageRecord, InstanceMask};
use crate::imgproc::PixelGrid;

pub use background::{background_stats, background_stats_with, BackgroundStats, DEFAULT_CLIP_ITERATIONS, DEFAULT_K_CLIP};
pub use fusion::{fuse_masks, is_faint, FUSION_CLASSES};
pub use hungarian::{kuhn_munkres, PAD_COST};

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },
    #[error("cost matrix rows differ in length")]
    RaggedCost,
    #[error("both masks are empty, IoU undefined")]
    BothEmpty,
    #[error("mask is empty")]
    EmptyMask,
    #[error("mask canvas {actual:?} does not match {expected:?}")]
    CanvasMismatch { expected: (usize, usize), actual: (usize, usize) },
    #[error("annotations span several images ({0} and {1})")]
    MixedImages(u64, u64),
    #[error("predictions refer to image {0} which is not in the ground truth")]
    UnknownImage(u64),
    #[error("need at least {needed} finite pixels, found {found}")]
    TooFewPixels { needed: usize, found: usize },
    #[error("sigma clipping rejected every pixel")]
    AllRejected,
    #[error("image {image}: {reason}")]
    ImageLoad { image: u64, reason: String },
    #[error(transparent)]
    Annot(#[from] AnnotError),
}

/// IoU between two masks rendered on an `h x w` canvas.
pub fn iou(a: &InstanceMask, b: &InstanceMask, height: usize, width: usize) -> Result<f64, MatchError> {
    let ra = Raster::new(rasterize(a, height, width)?);
    let rb = Raster::new(rasterize(b, height, width)?);
    if ra.count == 0 && rb.count == 0 {
        return Err(MatchError::BothEmpty);
    }
    Ok(ra.iou(&rb))
}

/// A rendered mask with its pixel count and row/column extent.
#[derive(Debug, Clone)]
pub struct Raster {
    pub bitmap: Bitmap,
    pub count: usize,
    /// (row0, row1, col0, col1), exclusive ends; `None` when empty.
    extent: Option<(usize, usize, usize, usize)>,
}

impl Raster {
    pub fn new(bitmap: Bitmap) -> Self {
        let count = bitmap.count();
        let extent = bitmap.bbox().map(|b| {
            let (c0, r0) = (b.x as usize, b.y as usize);
            (r0, r0 + b.h as usize, c0, c0 + b.w as usize)
        });
        Self { bitmap, count, extent }
    }

    pub fn intersection(&self, other: &Raster) -> usize {
        let (Some(a), Some(b)) = (self.extent, other.extent) else {
            return 0;
        };
        let (r0, r1) = (a.0.max(b.0), a.1.min(b.1));
        if r0 >= r1 || a.2.max(b.2) >= a.3.min(b.3) {
            return 0;
        }
        self.bitmap.intersection_count_in_rows(&other.bitmap, r0, r1)
    }

    /// 0 when the union is empty.
    pub fn iou(&self, other: &Raster) -> f64 {
        let inter = self.intersection(other);
        if inter == 0 {
            return 0.0;
        }
        inter as f64 / (self.count + other.count - inter) as f64
    }
}

/// Pairwise IoUs, predictions as rows and ground truths as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct IoUMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl IoUMatrix {
    pub fn compute(preds: &[Raster], gts: &[Raster]) -> Self {
        let values = preds.iter().flat_map(|p| gts.iter().map(move |g| p.iou(g))).collect();
        Self { rows: preds.len(), cols: gts.len(), values }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    pub iou_threshold: f64,
    /// Cross-class pairs cost as much as no overlap.
    pub class_aware: bool,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self { iou_threshold: 0.5, class_aware: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
    pub pred_id: u64,
    pub gt_id: u64,
    pub pred_class: ArtefactClass,
    pub gt_class: ArtefactClass,
    pub pred_pixels: usize,
    pub gt_pixels: usize,
    pub intersection: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unmatched {
    pub index: usize,
    pub id: u64,
    pub class: ArtefactClass,
}

/// Outcome for one image; one JSON line in the match dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub image_id: u64,
    pub iou_threshold: f64,
    pub class_aware: bool,
    pub pairs: Vec<MatchedPair>,
    pub false_positives: Vec<Unmatched>,
    pub false_negatives: Vec<Unmatched>,
    /// Predictions whose mask was replaced by the detector mask.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fused: Vec<u64>,
}

impl MatchResult {
    pub fn n_preds(&self) -> usize {
        self.pairs.len() + self.false_positives.len()
    }

    pub fn n_gts(&self) -> usize {
        self.pairs.len() + self.false_negatives.len()
    }
}

fn common_image(preds: &[&Annotation], gts: &[&Annotation]) -> Result<Option<u64>, MatchError> {
    let mut ids = preds.iter().chain(gts).map(|a| a.image_id);
    let Some(first) = ids.next() else { return Ok(None) };
    match ids.find(|&id| id != first) {
        Some(other) => Err(MatchError::MixedImages(first, other)),
        None => Ok(Some(first)),
    }
}

/// Optimal one-to-one assignment on `1 - IoU`, then pairs below the
/// threshold are split back into a false positive and a false negative.
pub fn match_instances(
    preds: &[&Annotation],
    gts: &[&Annotation],
    height: usize,
    width: usize,
    params: &MatchParams,
) -> Result<MatchResult, MatchError> {
    let image_id = common_image(preds, gts)?.unwrap_or_default();
    let render = |a: &&Annotation| rasterize(&a.mask, height, width).map(Raster::new);
    let pred_r = preds.iter().map(render).collect::<Result<Vec<_>, _>>()?;
    let gt_r = gts.iter().map(render).collect::<Result<Vec<_>, _>>()?;
    Ok(assign(image_id, preds, gts, &pred_r, &gt_r, params, Vec::new()))
}

fn assign(
    image_id: u64,
    preds: &[&Annotation],
    gts: &[&Annotation],
    pred_r: &[Raster],
    gt_r: &[Raster],
    params: &MatchParams,
    fused: Vec<u64>,
) -> MatchResult {
    let ious = IoUMatrix::compute(pred_r, gt_r);
    let effective = |i: usize, j: usize| {
        if params.class_aware && preds[i].class != gts[j].class {
            0.0
        } else {
            ious.get(i, j)
        }
    };
    let cost: Vec<Vec<f64>> = (0..preds.len())
        .map(|i| (0..gts.len()).map(|j| 1.0 - effective(i, j)).collect())
        .collect();
    let assignment = kuhn_munkres(&cost).expect("IoU costs are finite and rectangular");

    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for (i, j) in assignment {
        let v = effective(i, j);
        if v > 0.0 && v >= params.iou_threshold {
            pred_used[i] = true;
            gt_used[j] = true;
            pairs.push(MatchedPair {
                pred: i,
                gt: j,
                iou: v,
                pred_id: preds[i].id,
                gt_id: gts[j].id,
                pred_class: preds[i].class,
                gt_class: gts[j].class,
                pred_pixels: pred_r[i].count,
                gt_pixels: gt_r[j].count,
                intersection: pred_r[i].intersection(&gt_r[j]),
            });
        }
    }
    let unmatched = |anns: &[&Annotation], used: &[bool]| {
        anns.iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(index, a)| Unmatched { index, id: a.id, class: a.class })
            .collect()
    };
    MatchResult {
        image_id,
        iou_threshold: params.iou_threshold,
        class_aware: params.class_aware,
        false_positives: unmatched(preds, &pred_used),
        false_negatives: unmatched(gts, &gt_used),
        pairs,
        fused,
    }
}

/// Outcome of matching one image, keyed by image id.
pub type ImageOutcome = (u64, Result<MatchResult, MatchError>);

/// Supplies the pixel data used by the fusion rule.
pub type GridLoader<'a> = dyn Fn(&ImageRecord) -> Result<PixelGrid, String> + Sync + 'a;

/// Matches every ground-truth image, in image-id order. With a loader,
/// predictions carrying a detector mask go through [`fuse_masks`] first.
/// Runs on the current rayon pool and stops at the first failing image.
pub fn match_dataset(
    gt: &Dataset,
    preds: &Dataset,
    params: &MatchParams,
    loader: Option<&GridLoader<'_>>,
) -> Result<Vec<MatchResult>, MatchError> {
    match_each_image(gt, preds, params, loader)?.into_iter().map(|(_, r)| r).collect()
}

/// Like [`match_dataset`] but keeps going past failing images, returning
/// one outcome per ground-truth image id.
pub fn match_each_image(
    gt: &Dataset,
    preds: &Dataset,
    params: &MatchParams,
    loader: Option<&GridLoader<'_>>,
) -> Result<Vec<ImageOutcome>, MatchError> {
    let gt_by_image = gt.annotations_by_image();
    let mut pred_by_image = preds.annotations_by_image();
    if let Some((&id, _)) = pred_by_image.iter().find(|(id, v)| !v.is_empty() && !gt_by_image.contains_key(id)) {
        return Err(MatchError::UnknownImage(id));
    }
    let mut images: Vec<&ImageRecord> = gt.images.iter().collect();
    images.sort_by_key(|i| i.id);
    let work: Vec<(&ImageRecord, Vec<&Annotation>, &Vec<&Annotation>)> = images
        .into_iter()
        .map(|img| (img, pred_by_image.remove(&img.id).unwrap_or_default(), &gt_by_image[&img.id]))
        .collect();
    Ok(work
        .par_iter()
        .map(|(img, p, g)| (img.id, match_image(img, p, g, params, loader)))
        .collect())
}

/// Matches one image's predictions against its ground truth.
pub fn match_image(
    img: &ImageRecord,
    preds: &[&Annotation],
    gts: &[&Annotation],
    params: &MatchParams,
    loader: Option<&GridLoader<'_>>,
) -> Result<MatchResult, MatchError> {
    let (h, w) = (img.height, img.width);
    let mut fused = Vec::new();
    let mut masks: Vec<&InstanceMask> = preds.iter().map(|a| &a.mask).collect();
    if let Some(load) = loader {
        if preds.iter().any(|a| a.detector_mask.is_some()) {
            let grid = load(img).map_err(|reason| MatchError::ImageLoad { image: img.id, reason })?;
            if (grid.height(), grid.width()) != (h, w) {
                return Err(MatchError::ImageLoad {
                    image: img.id,
                    reason: format!("pixel grid is {}x{}, annotations expect {h}x{w}", grid.height(), grid.width()),
                });
            }
            let bg = background_stats(&grid)?;
            for (k, a) in preds.iter().enumerate() {
                if let Some(det) = &a.detector_mask {
                    let chosen = fuse_masks(det, &a.mask, a.class, &grid, &bg)?;
                    if std::ptr::eq(chosen, det) {
                        fused.push(a.id);
                    }
                    masks[k] = chosen;
                }
            }
        }
    }
    let pred_r = masks
        .iter()
        .map(|m| rasterize(m, h, w).map(Raster::new))
        .collect::<Result<Vec<_>, _>>()?;
    let gt_r = gts
        .iter()
        .map(|a| rasterize(&a.mask, h, w).map(Raster::new))
        .collect::<Result<Vec<_>, _>>()?;
    let mut result = assign(img.id, preds, gts, &pred_r, &gt_r, params, fused);
    result.image_id = img.id;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annot::{BBox, Polygon};

    fn square(id: u64, image_id: u64, class: ArtefactClass, x: f64, y: f64, s: f64) -> Annotation {
        let bbox = BBox::new(x, y, s, s);
        Annotation {
            id,
            image_id,
            class,
            mask: InstanceMask::Polygon(Polygon::from_bbox(&bbox)),
            bbox,
            area: s * s,
            score: None,
            detector_mask: None,
        }
    }

    #[test]
    fn iou_examples() {
        let a = square(1, 1, ArtefactClass::CR, 0.0, 0.0, 2.0).mask;
        let b = square(2, 1, ArtefactClass::CR, 1.0, 1.0, 2.0).mask;
        let c = square(3, 1, ArtefactClass::CR, 5.0, 5.0, 2.0).mask;
        assert_eq!(iou(&a, &a, 8, 8).unwrap(), 1.0);
        assert_eq!(iou(&a, &c, 8, 8).unwrap(), 0.0);
        assert_eq!(iou(&a, &b, 8, 8).unwrap(), 1.0 / 7.0);
        let empty: InstanceMask = Bitmap::new(8, 8).into();
        assert_eq!(iou(&empty, &empty, 8, 8), Err(MatchError::BothEmpty));
        assert_eq!(iou(&empty, &a, 8, 8).unwrap(), 0.0);
    }

    #[test]
    fn identical_sets_pair_perfectly() {
        let gts = [
            square(1, 5, ArtefactClass::CR, 0.0, 0.0, 3.0),
            square(2, 5, ArtefactClass::ROS, 10.0, 2.0, 4.0),
        ];
        let refs: Vec<&Annotation> = gts.iter().collect();
        let r = match_instances(&refs, &refs, 16, 16, &MatchParams::default()).unwrap();
        assert_eq!(r.pairs.len(), 2);
        assert!(r.pairs.iter().all(|p| p.iou == 1.0 && p.pred == p.gt));
        assert!(r.false_positives.is_empty() && r.false_negatives.is_empty());
        assert_eq!(r.image_id, 5);
    }

    #[test]
    fn lone_prediction_is_false_positive() {
        let p = square(1, 2, ArtefactClass::SL, 0.0, 0.0, 3.0);
        let r = match_instances(&[&p], &[], 8, 8, &MatchParams::default()).unwrap();
        assert_eq!(r.false_positives.len(), 1);
        assert!(r.pairs.is_empty() && r.false_negatives.is_empty());
    }

    #[test]
    fn threshold_and_class_rules() {
        let g = square(1, 1, ArtefactClass::SR, 0.0, 0.0, 4.0);
        let p = square(2, 1, ArtefactClass::SR, 1.0, 0.0, 4.0); // IoU 12/20
        let r = match_instances(&[&p], &[&g], 8, 8, &MatchParams { iou_threshold: 0.7, class_aware: true }).unwrap();
        assert_eq!((r.pairs.len(), r.false_positives.len(), r.false_negatives.len()), (0, 1, 1));
        let r = match_instances(&[&p], &[&g], 8, 8, &MatchParams::default()).unwrap();
        assert_eq!(r.pairs[0].iou, 0.6);

        let other = square(3, 1, ArtefactClass::CR, 0.0, 0.0, 4.0);
        let aware = match_instances(&[&other], &[&g], 8, 8, &MatchParams::default()).unwrap();
        assert!(aware.pairs.is_empty());
        let agnostic = MatchParams { class_aware: false, ..Default::default() };
        let r = match_instances(&[&other], &[&g], 8, 8, &agnostic).unwrap();
        assert_eq!(r.pairs.len(), 1);
    }

    #[test]
    fn mixed_images_rejected() {
        let a = square(1, 1, ArtefactClass::SR, 0.0, 0.0, 2.0);
        let b = square(2, 2, ArtefactClass::SR, 0.0, 0.0, 2.0);
        assert_eq!(
            match_instances(&[&a], &[&b], 8, 8, &MatchParams::default()),
            Err(MatchError::MixedImages(1, 2))
        );
    }
}
