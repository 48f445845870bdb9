use proptest::prelude::*;
use xami_core::annot::{ArtefactClass, Bitmap, Dataset};
use xami_core::matching::{match_dataset, MatchParams};
use xami_core::metrics::{
    build_report, dice_loss, empirical_cdf, focal_loss, precision_recall, report_artifacts, weighted, ConfusionCounts,
};
use xami_core::synth::{synth_dataset, synth_predictions, PredictionNoise, SynthSpec};

proptest! {
    #[test]
    fn precision_and_recall_fall_with_errors(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50, extra in 1u64..20) {
        let (p, r) = precision_recall(&ConfusionCounts::new(tp, fp, fn_));
        let (p2, _) = precision_recall(&ConfusionCounts::new(tp, fp + extra, fn_));
        let (_, r2) = precision_recall(&ConfusionCounts::new(tp, fp, fn_ + extra));
        prop_assert!(p2.unwrap() <= p.unwrap_or(100.0));
        prop_assert!(r2.unwrap() <= r.unwrap_or(100.0));
        for v in [p, r, p2, r2].into_iter().flatten() {
            prop_assert!((0.0..=100.0).contains(&v));
        }
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one(samples in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
        let cdf = empirical_cdf(samples);
        prop_assert!(cdf[0].iou >= 0.0);
        prop_assert!(cdf.windows(2).all(|w| w[0].iou <= w[1].iou && w[0].fraction < w[1].fraction));
        prop_assert_eq!(cdf.last().unwrap().fraction, 1.0);
    }

    #[test]
    fn loss_bounds(probs in proptest::collection::vec(0.0f64..=1.0, 30), bits in proptest::collection::vec(any::<bool>(), 30)) {
        let gt = Bitmap::from_bools(5, 6, &bits);
        let d = dice_loss(&probs, &gt).unwrap();
        let f = focal_loss(&probs, &gt, 2.0, 0.25).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(f >= 0.0);
        prop_assert!(weighted(f, d) >= d);
    }

    #[test]
    fn focal_falls_as_prediction_improves(p in 0.01f64..0.98, step in 0.001f64..0.02, fg in any::<bool>()) {
        let gt = Bitmap::from_bools(1, 1, &[fg]);
        let toward = |q: f64| if fg { q } else { 1.0 - q };
        let a = focal_loss(&[toward(p)], &gt, 2.0, 0.25).unwrap();
        let b = focal_loss(&[toward((p + step).min(1.0))], &gt, 2.0, 0.25).unwrap();
        prop_assert!(b < a);
    }
}

fn evaluate(gt: &Dataset, preds: &Dataset) -> xami_core::metrics::MetricsReport {
    let matches = match_dataset(gt, preds, &MatchParams::default(), None).unwrap();
    build_report(gt, preds, &matches).unwrap()
}

#[test]
fn self_evaluation_is_perfect() {
    let gt = synth_dataset(&SynthSpec::small(30, 150, 4));
    let report = evaluate(&gt, &gt);
    for row in report.per_class.iter().filter(|r| r.counts.tp > 0) {
        assert_eq!((row.precision, row.recall), (Some(100.0), Some(100.0)), "{}", row.label);
    }
    assert_eq!(report.overall_micro.precision, Some(100.0));
    let iou = report.iou.unwrap();
    assert_eq!((iou.mean, iou.std), (1.0, 0.0));
    let total = report.losses.unwrap().rows.last().unwrap().clone();
    assert!(total.dice.abs() < 1e-12 && total.focal <= 1e-6);
}

#[test]
fn empty_predictions_give_zero_recall_and_no_precision() {
    let gt = synth_dataset(&SynthSpec::small(10, 40, 4));
    let preds = Dataset::new(gt.images.clone(), gt.categories.clone(), Vec::new()).unwrap();
    let report = evaluate(&gt, &preds);
    for row in &report.per_class {
        if row.counts.fn_ > 0 {
            assert_eq!(row.recall, Some(0.0));
        }
        assert_eq!(row.precision, None);
    }
    assert!(report.iou.is_none() && report.losses.is_none());
    assert!(report.per_image.iter().all(|i| i.mean_iou == 0.0));
}

#[test]
fn overall_counts_are_class_sums_and_report_is_deterministic() {
    let gt = synth_dataset(&SynthSpec::small(40, 200, 8));
    let preds = synth_predictions(&gt, &PredictionNoise::default());
    let a = evaluate(&gt, &preds);
    let sum: ConfusionCounts = a.per_class.iter().map(|r| r.counts).sum();
    assert_eq!(sum, a.overall_micro.counts);
    assert_eq!(sum.tp + sum.fn_, gt.annotations.len() as u64);
    assert_eq!(sum.tp + sum.fp, preds.annotations.len() as u64);
    let b = evaluate(&gt, &preds);
    assert_eq!(report_artifacts(&a), report_artifacts(&b));
    let csv = String::from_utf8(report_artifacts(&a)[0].1.clone()).unwrap();
    assert_eq!(csv.lines().count(), 1 + ArtefactClass::COUNT + 2);
}

#[test]
fn inconsistent_inputs_are_rejected() {
    let gt = synth_dataset(&SynthSpec::small(6, 12, 2));
    let matches = match_dataset(&gt, &gt, &MatchParams::default(), None).unwrap();
    assert!(build_report(&gt, &gt, &matches[1..]).is_err());
    let mut dup = matches.clone();
    dup.push(matches[0].clone());
    assert!(build_report(&gt, &gt, &dup).is_err());
    let empty = Dataset::new(gt.images.clone(), gt.categories.clone(), Vec::new()).unwrap();
    assert!(build_report(&gt, &empty, &matches).is_err());
}
