use serde::Serialize;

use super::{ArtefactClass, Dataset};
use crate::imgproc::FilterBand;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterRow {
    /// `None` collects images whose band could not be determined.
    pub filter: Option<FilterBand>,
    pub wavelength_nm: Option<u32>,
    pub width_nm: Option<u32>,
    pub images: usize,
    pub masks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub class: ArtefactClass,
    pub count: usize,
    /// Share of all masks in percent; 0 for an empty dataset.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BBoxSample {
    pub annotation_id: u64,
    pub image_id: u64,
    pub class: ArtefactClass,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsTable {
    pub per_filter: Vec<FilterRow>,
    pub per_class: Vec<ClassRow>,
    pub total_images: usize,
    pub total_masks: usize,
    /// Sum of the per-filter image column, kept separately from
    /// `total_images` so that a stated nominal count can be compared.
    pub filter_image_sum: usize,
    pub filter_mask_sum: usize,
    pub bbox_sizes: Vec<BBoxSample>,
}

pub fn dataset_stats(ds: &Dataset) -> StatsTable {
    let mut per_filter: Vec<FilterRow> = FilterBand::ALL
        .iter()
        .map(|&f| FilterRow {
            filter: Some(f),
            wavelength_nm: Some(f.central_wavelength_nm()),
            width_nm: Some(f.width_nm()),
            images: 0,
            masks: 0,
        })
        .collect();
    let mut unknown = FilterRow { filter: None, wavelength_nm: None, width_nm: None, images: 0, masks: 0 };

    let by_image = ds.annotations_by_image();
    for img in &ds.images {
        let row = match img.filter {
            Some(f) => &mut per_filter[FilterBand::ALL.iter().position(|&b| b == f).expect("known band")],
            None => &mut unknown,
        };
        row.images += 1;
        row.masks += by_image.get(&img.id).map_or(0, Vec::len);
    }
    if unknown.images > 0 {
        per_filter.push(unknown);
    }

    let counts = ds.class_counts();
    let total_masks = ds.annotations.len();
    let per_class = ArtefactClass::ALL
        .iter()
        .map(|&c| ClassRow {
            class: c,
            count: counts[c.id()],
            percent: if total_masks == 0 { 0.0 } else { 100.0 * counts[c.id()] as f64 / total_masks as f64 },
        })
        .collect();

    let mut bbox_sizes: Vec<BBoxSample> = ds
        .annotations
        .iter()
        .map(|a| BBoxSample {
            annotation_id: a.id,
            image_id: a.image_id,
            class: a.class,
            width: a.bbox.w,
            height: a.bbox.h,
        })
        .collect();
    bbox_sizes.sort_by_key(|b| (b.image_id, b.annotation_id));

    StatsTable {
        filter_image_sum: per_filter.iter().map(|r| r.images).sum(),
        filter_mask_sum: per_filter.iter().map(|r| r.masks).sum(),
        per_filter,
        per_class,
        total_images: ds.images.len(),
        total_masks,
        bbox_sizes,
    }
}

fn csv_string(rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    rows(&mut w).expect("in-memory csv write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
}

impl StatsTable {
    /// `filter_image_sum - expected`, for comparing against a nominal image count.
    pub fn image_discrepancy(&self, expected_images: usize) -> i64 {
        self.filter_image_sum as i64 - expected_images as i64
    }

    pub fn filter_csv(&self) -> String {
        csv_string(|w| {
            w.write_record(["filter", "wavelength_nm", "width_nm", "images", "masks"])?;
            for r in &self.per_filter {
                w.write_record([
                    r.filter.map_or("unknown".to_string(), |f| f.name().to_string()),
                    r.wavelength_nm.map_or(String::new(), |v| v.to_string()),
                    r.width_nm.map_or(String::new(), |v| v.to_string()),
                    r.images.to_string(),
                    r.masks.to_string(),
                ])?;
            }
            w.write_record(["total", "", "", &self.filter_image_sum.to_string(), &self.filter_mask_sum.to_string()])
        })
    }

    pub fn class_csv(&self) -> String {
        csv_string(|w| {
            w.write_record(["class", "count", "percent"])?;
            for r in &self.per_class {
                w.write_record([r.class.code().to_string(), r.count.to_string(), format!("{:.2}", r.percent)])?;
            }
            w.write_record(["total".to_string(), self.total_masks.to_string(), String::new()])
        })
    }

    /// Bounding-box width against height, one colour per class.
    pub fn bbox_svg(&self) -> String {
        let mut plot = crate::plot::Plot::new("Bounding-box sizes", "width (px)", "height (px)");
        for class in ArtefactClass::ALL {
            let pts = self.bbox_sizes.iter().filter(|b| b.class == class).map(|b| (b.width, b.height)).collect();
            plot.add(class.code(), crate::plot::SeriesKind::Points, pts);
        }
        plot.to_svg()
    }

    pub fn bbox_csv(&self) -> String {
        csv_string(|w| {
            w.write_record(["annotation_id", "image_id", "class", "width", "height"])?;
            for b in &self.bbox_sizes {
                w.write_record([
                    b.annotation_id.to_string(),
                    b.image_id.to_string(),
                    b.class.code().to_string(),
                    b.width.to_string(),
                    b.height.to_string(),
                ])?;
            }
            Ok(())
        })
    }
}
