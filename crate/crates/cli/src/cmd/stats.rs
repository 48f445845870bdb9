use anyhow::Result;
use serde::Serialize;
use xami_core::annot::{dataset_stats, StatsTable};

use crate::config::RunConfig;
use crate::io::{load_gt, write};

#[derive(Debug, Serialize)]
struct StatsJson<'a> {
    #[serde(flatten)]
    table: &'a StatsTable,
    expected_images: Option<usize>,
    image_discrepancy: Option<i64>,
}

pub fn run(cfg: &RunConfig) -> Result<StatsTable> {
    let gt = load_gt(cfg.require(&cfg.paths.gt, "ground-truth file")?)?;
    let out = cfg.out_dir()?;
    let table = dataset_stats(&gt);
    let expected = cfg.stats.expected_images;
    let discrepancy = expected.map(|e| table.image_discrepancy(e));

    write(&out.join("filters.csv"), table.filter_csv())?;
    write(&out.join("classes.csv"), table.class_csv())?;
    write(&out.join("bbox_sizes.csv"), table.bbox_csv())?;
    if cfg.report.svg {
        write(&out.join("bbox_sizes.svg"), table.bbox_svg())?;
    }
    let json = StatsJson { table: &table, expected_images: expected, image_discrepancy: discrepancy };
    let mut bytes = serde_json::to_vec_pretty(&json)?;
    bytes.push(b'\n');
    write(&out.join("stats.json"), bytes)?;

    print!("{}", table.filter_csv());
    print!("{}", table.class_csv());
    println!("images in file: {}, masks: {}", table.total_images, table.total_masks);
    if let (Some(e), Some(d)) = (expected, discrepancy) {
        println!("per-filter image sum {} vs nominal {e}: discrepancy {d:+}", table.filter_image_sum);
    }
    Ok(table)
}
