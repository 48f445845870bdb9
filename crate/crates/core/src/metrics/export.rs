use std::fmt::Write;

use crate::plot::{Plot, SeriesKind};

use super::{ClassRow, MetricsReport, STD_NOTE};

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map(|x| format!("{x:.decimals$}")).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(&r).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

fn class_fields(r: &ClassRow) -> Vec<String> {
    vec![
        r.label.clone(),
        r.counts.tp.to_string(),
        r.counts.fp.to_string(),
        r.counts.fn_.to_string(),
        opt(r.precision, 4),
        opt(r.recall, 4),
        opt(r.mean_pair_iou, 6),
    ]
}

/// One row per class, then the micro and macro overall rows. Undefined
/// values are empty cells.
pub fn report_csv(report: &MetricsReport) -> Vec<u8> {
    let mut rows: Vec<Vec<String>> = report.per_class.iter().map(class_fields).collect();
    rows.push(class_fields(&report.overall_micro));
    let m = &report.overall_macro;
    rows.push(vec![
        "Overall (macro)".into(),
        String::new(),
        String::new(),
        String::new(),
        opt(m.precision, 4),
        opt(m.recall, 4),
        String::new(),
    ]);
    csv_bytes(&["class", "tp", "fp", "fn", "precision", "recall", "mean_pair_iou"], rows)
}

pub fn report_json(report: &MetricsReport) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
    out.push(b'\n');
    out
}

/// Overall CDF followed by the per-class ones.
pub fn cdf_csv(report: &MetricsReport) -> Vec<u8> {
    let mut rows = Vec::new();
    if let Some(iou) = &report.iou {
        let all = std::iter::once(("all", &iou.cdf)).chain(iou.cdf_by_class.iter().map(|(k, v)| (k.as_str(), v)));
        for (label, cdf) in all {
            for p in cdf {
                rows.push(vec![label.to_string(), format!("{:.6}", p.iou), format!("{:.6}", p.fraction)]);
            }
        }
    }
    csv_bytes(&["series", "iou", "fraction"], rows)
}

pub fn per_image_csv(report: &MetricsReport) -> Vec<u8> {
    let rows = report.per_image.iter().map(|i| {
        vec![
            i.image_id.to_string(),
            format!("{:.6}", i.mean_iou),
            i.pairs.to_string(),
            i.false_positives.to_string(),
            i.false_negatives.to_string(),
        ]
    });
    csv_bytes(&["image_id", "mean_iou", "pairs", "false_positives", "false_negatives"], rows)
}

pub fn cdf_svg(report: &MetricsReport) -> Vec<u8> {
    let mut plot = Plot::new("Cumulative distribution of IoU", "IoU", "fraction of matched pairs")
        .with_ranges((0.0, 1.0), (0.0, 1.0));
    if let Some(iou) = &report.iou {
        let pts = |cdf: &[super::CdfPoint]| {
            let mut v = vec![(0.0, 0.0)];
            v.extend(cdf.iter().map(|p| (p.iou, p.fraction)));
            v
        };
        plot.add("all", SeriesKind::Step, pts(&iou.cdf));
        for (label, cdf) in &iou.cdf_by_class {
            plot.add(label, SeriesKind::Step, pts(cdf));
        }
    }
    plot.to_svg().into_bytes()
}

/// File name and contents of every report artifact.
pub fn report_artifacts(report: &MetricsReport) -> Vec<(&'static str, Vec<u8>)> {
    vec![
        ("report.csv", report_csv(report)),
        ("report.json", report_json(report)),
        ("iou_cdf.csv", cdf_csv(report)),
        ("iou_cdf.svg", cdf_svg(report)),
        ("per_image_iou.csv", per_image_csv(report)),
    ]
}

/// Plain-text table in the layout of the per-class results table.
pub fn summary_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let mode = if report.class_aware { "class-aware" } else { "class-agnostic" };
    let _ = writeln!(out, "IoU threshold {} ({mode}), {} images", report.iou_threshold, report.images);
    let _ = writeln!(out, "{:<16} {:>6} {:>6} {:>6} {:>10} {:>8}", "Class", "TP", "FP", "FN", "Precision", "Recall");
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "n/a".into());
    for r in report.per_class.iter().chain(std::iter::once(&report.overall_micro)) {
        let _ = writeln!(
            out,
            "{:<16} {:>6} {:>6} {:>6} {:>10} {:>8}",
            r.label,
            r.counts.tp,
            r.counts.fp,
            r.counts.fn_,
            fmt(r.precision),
            fmt(r.recall)
        );
    }
    let m = &report.overall_macro;
    let _ = writeln!(
        out,
        "{:<16} {:>6} {:>6} {:>6} {:>10} {:>8}",
        "Overall (macro)",
        "",
        "",
        "",
        fmt(m.precision),
        fmt(m.recall)
    );
    match &report.iou {
        Some(iou) => {
            let _ = writeln!(
                out,
                "mean IoU {:.3} +/- {:.3} over {} images, {} matched pairs",
                iou.mean, iou.std, iou.images, iou.pairs
            );
        }
        None => out.push_str("mean IoU n/a (no matched pairs)\n"),
    }
    if let Some(l) = report.losses.as_ref().and_then(|l| l.rows.last()) {
        let _ = writeln!(
            out,
            "loss over matched pairs: focal {:.6}, dice {:.6}, combined (20:1) {:.6}",
            l.focal, l.dice, l.combined
        );
    }
    if report.fused_predictions > 0 {
        let _ = writeln!(out, "detector masks used for {} faint predictions", report.fused_predictions);
    }
    let _ = writeln!(out, "note: {STD_NOTE}");
    out
}
