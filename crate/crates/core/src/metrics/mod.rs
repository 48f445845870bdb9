//! Confusion accounting, precision/recall, IoU distribution statistics and
//! per-pair focal/dice diagnostics.

mod export;
mod loss;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annot::{ArtefactClass, Dataset};
use crate::matching::MatchResult;

pub use export::{cdf_csv, cdf_svg, per_image_csv, report_artifacts, report_csv, report_json, summary_table};
pub use loss::{
    combined_loss, dice_loss, focal_loss, weighted, BinaryOverlap, LossError, DEFAULT_ALPHA, DEFAULT_GAMMA,
    DICE_WEIGHT, FOCAL_EPS, FOCAL_WEIGHT,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no matched pairs, IoU distribution undefined")]
    EmptyMatches,
    #[error("match results refer to image {0} which is not in the ground truth")]
    UnknownImage(u64),
    #[error("image {0} appears in more than one match result")]
    DuplicateImage(u64),
    #[error("ground-truth image {0} has no match result")]
    MissingImage(u64),
    #[error("image {image}: prediction {id} not found")]
    UnknownPrediction { image: u64, id: u64 },
    #[error("image {image}: ground-truth annotation {id} not found")]
    UnknownAnnotation { image: u64, id: u64 },
    #[error("image {image}: match result covers {found} ground-truth instances, dataset has {expected}")]
    GroundTruthCount { image: u64, expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Percentages; `None` when the denominator is zero.
pub fn precision_recall(c: &ConfusionCounts) -> (Option<f64>, Option<f64>) {
    let pct = |num: u64, den: u64| (den > 0).then(|| 100.0 * num as f64 / den as f64);
    (pct(c.tp, c.tp + c.fp), pct(c.tp, c.tp + c.fn_))
}

/// Class a TP is booked under: the ground-truth class.
fn confusion_by_class(matches: &[MatchResult]) -> [ConfusionCounts; ArtefactClass::COUNT] {
    let mut out = [ConfusionCounts::default(); ArtefactClass::COUNT];
    for m in matches {
        for p in &m.pairs {
            out[p.gt_class.id()].tp += 1;
        }
        for u in &m.false_positives {
            out[u.class.id()].fp += 1;
        }
        for u in &m.false_negatives {
            out[u.class.id()].fn_ += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub iou: f64,
    pub fraction: f64,
}

/// Empirical CDF: sorted samples against `(i + 1) / n`.
pub fn empirical_cdf(mut samples: Vec<f64>) -> Vec<CdfPoint> {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .into_iter()
        .enumerate()
        .map(|(i, iou)| CdfPoint { iou, fraction: (i + 1) as f64 / n })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageIou {
    pub image_id: u64,
    pub mean_iou: f64,
    pub pairs: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Mean over pairs with each FP and FN counted as 0. Images without any
/// instance on either side are skipped.
pub fn per_image_means(matches: &[MatchResult]) -> Vec<ImageIou> {
    matches
        .iter()
        .filter_map(|m| {
            let n = m.pairs.len() + m.false_positives.len() + m.false_negatives.len();
            (n > 0).then(|| ImageIou {
                image_id: m.image_id,
                mean_iou: m.pairs.iter().map(|p| p.iou).sum::<f64>() / n as f64,
                pairs: m.pairs.len(),
                false_positives: m.false_positives.len(),
                false_negatives: m.false_negatives.len(),
            })
        })
        .collect()
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouDistribution {
    pub cdf: Vec<CdfPoint>,
    pub mean: f64,
    /// Population standard deviation over per-image means.
    pub std: f64,
    pub per_image: Vec<ImageIou>,
}

pub fn iou_distribution(matches: &[MatchResult]) -> Result<IouDistribution, MetricsError> {
    let samples: Vec<f64> = matches.iter().flat_map(|m| m.pairs.iter().map(|p| p.iou)).collect();
    if samples.is_empty() {
        return Err(MetricsError::EmptyMatches);
    }
    let per_image = per_image_means(matches);
    let (mean, std) = mean_std(per_image.iter().map(|i| i.mean_iou));
    Ok(IouDistribution { cdf: empirical_cdf(samples), mean, std, per_image })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub label: String,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub mean_pair_iou: Option<f64>,
}

impl ClassRow {
    fn new(label: &str, counts: ConfusionCounts, pair_ious: &[f64]) -> Self {
        let (precision, recall) = precision_recall(&counts);
        let mean_pair_iou = (!pair_ious.is_empty()).then(|| pair_ious.iter().sum::<f64>() / pair_ious.len() as f64);
        Self { label: label.into(), counts, precision, recall, mean_pair_iou }
    }
}

/// Unweighted mean over the classes where each quantity is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroRow {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub precision_classes: usize,
    pub recall_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouSummary {
    pub pairs: usize,
    pub images: usize,
    pub mean: f64,
    pub std: f64,
    pub cdf: Vec<CdfPoint>,
    pub cdf_by_class: BTreeMap<String, Vec<CdfPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub label: String,
    pub pairs: usize,
    pub focal: f64,
    pub dice: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub gamma: f64,
    pub alpha: f64,
    pub focal_weight: f64,
    pub dice_weight: f64,
    pub rows: Vec<LossRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iou_threshold: f64,
    pub class_aware: bool,
    pub images: usize,
    pub per_class: Vec<ClassRow>,
    pub overall_micro: ClassRow,
    pub overall_macro: MacroRow,
    pub iou: Option<IouSummary>,
    pub per_image: Vec<ImageIou>,
    pub losses: Option<LossSummary>,
    pub fused_predictions: usize,
    pub notes: Vec<String>,
}

fn check_consistency(gt: &Dataset, preds: &Dataset, matches: &[MatchResult]) -> Result<(), MetricsError> {
    let gt_by_image = gt.annotations_by_image();
    let pred_ids: HashSet<u64> = preds.annotations.iter().map(|a| a.id).collect();
    let mut seen = HashSet::new();
    for m in matches {
        let image = m.image_id;
        let Some(anns) = gt_by_image.get(&image) else {
            return Err(MetricsError::UnknownImage(image));
        };
        if !seen.insert(image) {
            return Err(MetricsError::DuplicateImage(image));
        }
        if anns.len() != m.n_gts() {
            return Err(MetricsError::GroundTruthCount { image, expected: anns.len(), found: m.n_gts() });
        }
        let gt_ids: HashSet<u64> = anns.iter().map(|a| a.id).collect();
        let gt_refs = m.pairs.iter().map(|p| p.gt_id).chain(m.false_negatives.iter().map(|u| u.id));
        for id in gt_refs {
            if !gt_ids.contains(&id) {
                return Err(MetricsError::UnknownAnnotation { image, id });
            }
        }
        let pred_refs = m.pairs.iter().map(|p| p.pred_id).chain(m.false_positives.iter().map(|u| u.id));
        for id in pred_refs {
            if !pred_ids.contains(&id) {
                return Err(MetricsError::UnknownPrediction { image, id });
            }
        }
    }
    match gt.images.iter().find(|i| !seen.contains(&i.id)) {
        Some(img) => Err(MetricsError::MissingImage(img.id)),
        None => Ok(()),
    }
}

fn loss_summary(gt: &Dataset, preds: &Dataset, matches: &[MatchResult]) -> Option<LossSummary> {
    let canvas: HashMap<u64, usize> = gt.images.iter().map(|i| (i.id, i.width * i.height)).collect();
    let scores: HashMap<u64, f64> = preds.annotations.iter().map(|a| (a.id, a.score.unwrap_or(1.0))).collect();
    let mut per_class: Vec<(f64, f64, usize)> = vec![(0.0, 0.0, 0); ArtefactClass::COUNT];
    for m in matches {
        for p in &m.pairs {
            let o = BinaryOverlap {
                pixels: canvas[&m.image_id],
                pred: p.pred_pixels,
                gt: p.gt_pixels,
                intersection: p.intersection,
                score: scores[&p.pred_id],
            };
            let slot = &mut per_class[p.gt_class.id()];
            slot.0 += o.focal(DEFAULT_GAMMA, DEFAULT_ALPHA);
            slot.1 += o.dice();
            slot.2 += 1;
        }
    }
    let total = per_class.iter().fold((0.0, 0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    if total.2 == 0 {
        return None;
    }
    let row = |label: &str, (f, d, n): (f64, f64, usize)| {
        let (focal, dice) = if n == 0 { (0.0, 0.0) } else { (f / n as f64, d / n as f64) };
        LossRow { label: label.into(), pairs: n, focal, dice, combined: weighted(focal, dice) }
    };
    let mut rows: Vec<LossRow> = ArtefactClass::ALL.iter().map(|c| row(c.code(), per_class[c.id()])).collect();
    rows.push(row("Overall", total));
    Some(LossSummary {
        gamma: DEFAULT_GAMMA,
        alpha: DEFAULT_ALPHA,
        focal_weight: FOCAL_WEIGHT,
        dice_weight: DICE_WEIGHT,
        rows,
    })
}

pub const STD_NOTE: &str = "IoU spread is the population standard deviation of per-image mean IoU; unmatched instances count as IoU 0";

/// Assembles the full report. `matches` must hold exactly one result per
/// ground-truth image.
pub fn build_report(gt: &Dataset, preds: &Dataset, matches: &[MatchResult]) -> Result<MetricsReport, MetricsError> {
    check_consistency(gt, preds, matches)?;
    let mut matches: Vec<&MatchResult> = matches.iter().collect();
    matches.sort_by_key(|m| m.image_id);
    let owned: Vec<MatchResult> = matches.into_iter().cloned().collect();
    let matches = owned.as_slice();

    let (iou_threshold, class_aware) = matches.first().map(|m| (m.iou_threshold, m.class_aware)).unwrap_or((0.5, true));
    let counts = confusion_by_class(matches);
    let mut pair_ious: Vec<Vec<f64>> = vec![Vec::new(); ArtefactClass::COUNT];
    for p in matches.iter().flat_map(|m| &m.pairs) {
        pair_ious[p.gt_class.id()].push(p.iou);
    }
    let per_class: Vec<ClassRow> = ArtefactClass::ALL
        .iter()
        .map(|c| ClassRow::new(c.code(), counts[c.id()], &pair_ious[c.id()]))
        .collect();
    let all_ious: Vec<f64> = pair_ious.concat();
    let overall_micro = ClassRow::new("Overall (micro)", counts.iter().copied().sum(), &all_ious);
    let macro_of = |get: fn(&ClassRow) -> Option<f64>| {
        let vals: Vec<f64> = per_class.iter().filter_map(get).collect();
        ((!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64), vals.len())
    };
    let (mp, mpn) = macro_of(|r| r.precision);
    let (mr, mrn) = macro_of(|r| r.recall);
    let overall_macro = MacroRow { precision: mp, recall: mr, precision_classes: mpn, recall_classes: mrn };

    let per_image = per_image_means(matches);
    let iou = match iou_distribution(matches) {
        Ok(d) => {
            let cdf_by_class = ArtefactClass::ALL
                .iter()
                .filter(|c| !pair_ious[c.id()].is_empty())
                .map(|c| (c.code().to_string(), empirical_cdf(pair_ious[c.id()].clone())))
                .collect();
            Some(IouSummary {
                pairs: all_ious.len(),
                images: d.per_image.len(),
                mean: d.mean,
                std: d.std,
                cdf: d.cdf,
                cdf_by_class,
            })
        }
        Err(_) => None,
    };

    Ok(MetricsReport {
        iou_threshold,
        class_aware,
        images: matches.len(),
        per_class,
        overall_micro,
        overall_macro,
        iou,
        per_image,
        losses: loss_summary(gt, preds, matches),
        fused_predictions: matches.iter().map(|m| m.fused.len()).sum(),
        notes: vec![
            STD_NOTE.to_string(),
            "true positives are booked under the ground-truth class".to_string(),
            format!(
                "a prediction is a true positive when its assigned IoU is at least {iou_threshold} ({})",
                if class_aware { "class-aware" } else { "class-agnostic" }
            ),
        ],
    })
}
