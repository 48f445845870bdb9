//! Dataset model: images, categories and instance annotations, with COCO
//! style (de)serialisation and mask geometry.

mod class;
mod coco;
mod mask;
mod stats;

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::imgproc::FilterBand;

pub use class::ArtefactClass;
pub use coco::{parse_coco, parse_predictions, serialize_coco, CocoKind};
pub use mask::{
    bbox_of, rasterize, rle_decode, rle_encode, BBox, Bitmap, InstanceMask, Polygon, Rle,
    VERTEX_TOLERANCE,
};
pub use stats::{dataset_stats, BBoxSample, ClassRow, FilterRow, StatsTable};

#[derive(Debug, Error, PartialEq)]
pub enum AnnotError {
    #[error("invalid json: {0}")]
    Json(String),
    #[error("annotation {annotation} refers to unknown image {image_id}")]
    DanglingImage { annotation: u64, image_id: u64 },
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("RLE counts sum to {actual}, expected h*w = {expected}")]
    CountsSum { expected: u64, actual: u64 },
    #[error("duplicate image id {0}")]
    DuplicateImageId(u64),
    #[error("duplicate annotation id {0}")]
    DuplicateAnnotationId(u64),
    #[error("duplicate category id {0}")]
    DuplicateCategoryId(u64),
    #[error("categories {0} and {1} both map to class {2}")]
    DuplicateCategoryClass(u64, u64, ArtefactClass),
    #[error("invalid polygon: {0}")]
    BadPolygon(String),
    #[error("vertex ({x}, {y}) lies outside the {height}x{width} canvas")]
    VertexOutOfBounds { x: f64, y: f64, height: usize, width: usize },
    #[error("mask canvas {actual:?} does not match image {expected:?}")]
    CanvasMismatch { expected: (usize, usize), actual: (usize, usize) },
    #[error("mask is empty")]
    EmptyMask,
    #[error("compressed RLE strings are not supported (annotation {0})")]
    CompressedRle(u64),
    #[error("annotation {0} has neither segmentation nor bbox")]
    MissingGeometry(u64),
    #[error("annotation {0}: score {1} outside [0, 1]")]
    ScoreOutOfRange(u64, f64),
    #[error("ground-truth annotation {0} carries a score")]
    ScoreInGroundTruth(u64),
    #[error("image {id} has invalid size {width}x{height}")]
    BadImageSize { id: u64, width: usize, height: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: u64,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
    pub filter: Option<FilterBand>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    /// Id as used in the source file.
    pub id: u64,
    pub name: String,
    pub supercategory: Option<String>,
    /// `None` for grouping entries that do not name an artefact class.
    pub class: Option<ArtefactClass>,
}

/// File category ids mapped onto the fixed class list.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryTable {
    entries: Vec<Category>,
}

impl Default for CategoryTable {
    /// One entry per class, ids 0..=4 in class order.
    fn default() -> Self {
        let entries = ArtefactClass::ALL
            .iter()
            .map(|&c| Category {
                id: c.id() as u64,
                name: c.code().to_string(),
                supercategory: Some("artefact".to_string()),
                class: Some(c),
            })
            .collect();
        Self { entries }
    }
}

impl CategoryTable {
    pub fn new(entries: Vec<Category>) -> Result<Self, AnnotError> {
        let mut ids = HashSet::new();
        let mut by_class: BTreeMap<ArtefactClass, u64> = BTreeMap::new();
        for e in &entries {
            if !ids.insert(e.id) {
                return Err(AnnotError::DuplicateCategoryId(e.id));
            }
            if let Some(c) = e.class {
                if let Some(prev) = by_class.insert(c, e.id) {
                    return Err(AnnotError::DuplicateCategoryClass(prev, e.id, c));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Category] {
        &self.entries
    }

    pub fn class_of(&self, id: u64) -> Result<ArtefactClass, AnnotError> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .and_then(|e| e.class)
            .ok_or_else(|| AnnotError::UnknownCategory(id.to_string()))
    }

    /// File id for a class; classes absent from the file fall back to their
    /// fixed id.
    pub fn id_of(&self, class: ArtefactClass) -> u64 {
        self.entries
            .iter()
            .find(|e| e.class == Some(class))
            .map_or(class.id() as u64, |e| e.id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub id: u64,
    pub image_id: u64,
    pub class: ArtefactClass,
    pub mask: InstanceMask,
    pub bbox: BBox,
    pub area: f64,
    /// Present for predictions only.
    pub score: Option<f64>,
    /// Box-detector mask that the fusion step may substitute for `mask`.
    pub detector_mask: Option<InstanceMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<ImageRecord>,
    pub categories: CategoryTable,
    pub annotations: Vec<Annotation>,
}

impl Dataset {
    /// Links and validates: unique ids, annotations resolve to images.
    pub fn new(
        images: Vec<ImageRecord>,
        categories: CategoryTable,
        annotations: Vec<Annotation>,
    ) -> Result<Self, AnnotError> {
        let mut image_ids = HashSet::new();
        for img in &images {
            if !image_ids.insert(img.id) {
                return Err(AnnotError::DuplicateImageId(img.id));
            }
            if img.width == 0 || img.height == 0 {
                return Err(AnnotError::BadImageSize { id: img.id, width: img.width, height: img.height });
            }
        }
        let mut ann_ids = HashSet::new();
        for a in &annotations {
            if !ann_ids.insert(a.id) {
                return Err(AnnotError::DuplicateAnnotationId(a.id));
            }
            if !image_ids.contains(&a.image_id) {
                return Err(AnnotError::DanglingImage { annotation: a.id, image_id: a.image_id });
            }
        }
        Ok(Self { images, categories, annotations })
    }

    pub fn empty() -> Self {
        Self { images: Vec::new(), categories: CategoryTable::default(), annotations: Vec::new() }
    }

    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.id == id)
    }

    /// Annotations grouped by image id, in file order within each image.
    pub fn annotations_by_image(&self) -> BTreeMap<u64, Vec<&Annotation>> {
        let mut map: BTreeMap<u64, Vec<&Annotation>> =
            self.images.iter().map(|i| (i.id, Vec::new())).collect();
        for a in &self.annotations {
            map.entry(a.image_id).or_default().push(a);
        }
        map
    }

    /// Instance counts per class, indexed by class id.
    pub fn class_counts(&self) -> [usize; ArtefactClass::COUNT] {
        let mut counts = [0; ArtefactClass::COUNT];
        for a in &self.annotations {
            counts[a.class.id()] += 1;
        }
        counts
    }

    /// Keeps only the given images and their annotations.
    pub fn subset(&self, keep: &HashSet<u64>) -> Dataset {
        Dataset {
            images: self.images.iter().filter(|i| keep.contains(&i.id)).cloned().collect(),
            categories: self.categories.clone(),
            annotations: self
                .annotations
                .iter()
                .filter(|a| keep.contains(&a.image_id))
                .cloned()
                .collect(),
        }
    }
}
