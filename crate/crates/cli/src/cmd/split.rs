use std::collections::HashSet;
use std::fmt::Write;

use anyhow::Result;
use xami_core::annot::{serialize_coco, ArtefactClass};
use xami_core::split::{fold_summaries, materialize_split, stratified_kfold, FoldSummary};

use crate::config::RunConfig;
use crate::io::{load_gt, write};

pub fn share_table(rows: &[FoldSummary]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<6} {:>7} {:>7}", "fold", "images", "masks");
    for c in ArtefactClass::ALL {
        let _ = write!(out, " {:>8}", c.code());
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:<6} {:>7} {:>7}", r.fold, r.images, r.annotations());
        for share in r.class_shares {
            let _ = write!(out, " {:>7.2}%", share);
        }
        out.push('\n');
    }
    out
}

fn summary_csv(rows: &[FoldSummary]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["fold".to_string(), "images".into(), "masks".into()];
    for c in ArtefactClass::ALL {
        header.push(format!("{}_count", c.code()));
        header.push(format!("{}_share", c.code()));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.fold.to_string(), r.images.to_string(), r.annotations().to_string()];
        for (n, s) in r.class_counts.iter().zip(r.class_shares) {
            rec.push(n.to_string());
            rec.push(format!("{s:.4}"));
        }
        w.write_record(&rec)?;
    }
    Ok(w.into_inner()?)
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let gt = load_gt(cfg.require(&cfg.paths.gt, "ground-truth file")?)?;
    let out = cfg.out_dir()?;
    let spec = stratified_kfold(&gt, cfg.split.k, cfg.split.seed)?;
    let mut bytes = serde_json::to_vec_pretty(&spec)?;
    bytes.push(b'\n');
    write(&out.join("split.json"), bytes)?;

    for fold in 0..spec.k {
        let ids: HashSet<u64> = spec.folds.iter().filter(|(_, &f)| f == fold).map(|(&id, _)| id).collect();
        write(&out.join(format!("fold_{fold}.json")), serialize_coco(&gt.subset(&ids)))?;
    }
    if let Some(v) = cfg.split.val_fold {
        let (train, val) = materialize_split(&gt, &spec, v)?;
        write(&out.join("train.json"), serialize_coco(&train))?;
        write(&out.join("val.json"), serialize_coco(&val))?;
    }
    let rows = fold_summaries(&gt, &spec);
    write(&out.join("fold_summary.csv"), summary_csv(&rows)?)?;
    println!("k = {}, seed = {}", spec.k, spec.seed);
    print!("{}", share_table(&rows));
    Ok(())
}
