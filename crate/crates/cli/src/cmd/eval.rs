use std::collections::HashSet;
use std::path::Path;

use anyhow::{Context, Result};
use xami_core::annot::ImageRecord;
use xami_core::imgproc::PixelGrid;
use xami_core::matching::{match_dataset, match_each_image, GridLoader, MatchResult};
use xami_core::metrics::{build_report, report_artifacts, summary_table, MetricsReport};

use crate::config::RunConfig;
use crate::errlog::ErrorLog;
use crate::io::{load_grid, load_gt, load_preds, write};

fn loader_for(dir: &Path) -> impl Fn(&ImageRecord) -> Result<PixelGrid, String> + Sync + '_ {
    move |img: &ImageRecord| load_grid(&dir.join(&img.file_name)).map_err(|e| format!("{e:#}"))
}

pub fn match_dump(matches: &[MatchResult]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for m in matches {
        serde_json::to_writer(&mut out, m)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig, errors: &ErrorLog) -> Result<MetricsReport> {
    let gt = load_gt(cfg.require(&cfg.paths.gt, "ground-truth file")?)?;
    let preds = load_preds(cfg.require(&cfg.paths.preds, "predictions file")?, &gt)?;
    let out = cfg.out_dir()?;
    let params = cfg.matching.params();

    let images_dir = match (&cfg.paths.images, cfg.matching.fusion) {
        (Some(_), true) => Some(cfg.require(&cfg.paths.images, "images directory")?),
        (None, true) if preds.annotations.iter().any(|a| a.detector_mask.is_some()) => {
            log::warn!("predictions carry detector masks but no images directory was given; fusion skipped");
            None
        }
        _ => None,
    };
    let loader = images_dir.map(loader_for);
    let loader_ref: Option<&GridLoader<'_>> = loader.as_ref().map(|l| l as &GridLoader<'_>);

    let outcomes = match_each_image(&gt, &preds, &params, loader_ref)?;
    let mut matches = Vec::with_capacity(outcomes.len());
    let mut failed = HashSet::new();
    for (id, r) in outcomes {
        match r {
            Ok(m) => matches.push(m),
            Err(e) => {
                let name = gt.image(id).map_or_else(|| id.to_string(), |i| i.file_name.clone());
                errors.record(name, "fusion", e);
                failed.insert(id);
            }
        }
    }
    if !failed.is_empty() {
        log::warn!("{} images matched without fusion after errors", failed.len());
        let retry = match_dataset(&gt.subset(&failed), &preds.subset(&failed), &params, None)
            .context("matching images without fusion")?;
        matches.extend(retry);
        matches.sort_by_key(|m| m.image_id);
    }

    let report = build_report(&gt, &preds, &matches)?;
    if cfg.report.match_dump {
        write(&out.join("matches.jsonl"), match_dump(&matches)?)?;
    }
    for (name, bytes) in report_artifacts(&report) {
        if !cfg.report.svg && name.ends_with(".svg") {
            continue;
        }
        write(&out.join(name), bytes)?;
    }
    print!("{}", summary_table(&report));
    Ok(report)
}
