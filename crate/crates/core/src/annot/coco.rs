use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    rasterize, AnnotError, Annotation, ArtefactClass, BBox, Category, CategoryTable, Dataset,
    ImageRecord, InstanceMask, Polygon, Rle,
};
use crate::annot::mask::rle_encode;
use crate::imgproc::FilterBand;

/// What a COCO document is expected to hold.
#[derive(Debug, Clone, Copy)]
pub enum CocoKind<'a> {
    GroundTruth,
    /// Results for the images of `reference`; either a bare results array
    /// or an object with an `annotations` array.
    Predictions { reference: &'a Dataset },
}

#[derive(Deserialize)]
struct RawGroundTruth {
    images: Vec<RawImage>,
    annotations: Vec<RawAnnotation>,
    categories: Vec<RawCategory>,
}

#[derive(Deserialize)]
struct RawPredictionFile {
    annotations: Vec<RawAnnotation>,
    #[serde(default)]
    categories: Option<Vec<RawCategory>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawPredictions {
    Results(Vec<RawAnnotation>),
    File(RawPredictionFile),
}

#[derive(Serialize, Deserialize)]
struct RawImage {
    id: u64,
    file_name: String,
    width: usize,
    height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    filter: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RawCategory {
    id: u64,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    supercategory: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RawAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    image_id: u64,
    category_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segmentation: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    iscrowd: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detector_segmentation: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detector_bbox: Option<[f64; 4]>,
}

#[derive(Serialize)]
struct RawDataset {
    images: Vec<RawImage>,
    categories: Vec<RawCategory>,
    annotations: Vec<RawAnnotation>,
}

fn json_err(e: serde_json::Error) -> AnnotError {
    AnnotError::Json(e.to_string())
}

pub fn parse_coco(bytes: &[u8], kind: CocoKind<'_>) -> Result<Dataset, AnnotError> {
    match kind {
        CocoKind::GroundTruth => parse_ground_truth(bytes),
        CocoKind::Predictions { reference } => parse_predictions(bytes, reference),
    }
}

fn parse_ground_truth(bytes: &[u8]) -> Result<Dataset, AnnotError> {
    let raw: RawGroundTruth = serde_json::from_slice(bytes).map_err(json_err)?;
    let categories = category_table(raw.categories)?;
    let images = raw
        .images
        .into_iter()
        .map(|i| {
            let filter = match &i.filter {
                Some(f) => Some(f.parse::<FilterBand>().map_err(|_| AnnotError::Json(format!("image {}: unknown filter {f:?}", i.id)))?),
                None => FilterBand::from_file_name(&i.file_name),
            };
            Ok(ImageRecord { id: i.id, file_name: i.file_name, width: i.width, height: i.height, filter })
        })
        .collect::<Result<Vec<_>, AnnotError>>()?;
    let index = ImageIndex::new(&images);
    let annotations = raw
        .annotations
        .into_iter()
        .map(|a| {
            let id = a.id.ok_or_else(|| AnnotError::Json(format!("annotation on image {} has no id", a.image_id)))?;
            if a.score.is_some() {
                return Err(AnnotError::ScoreInGroundTruth(id));
            }
            convert_annotation(a, id, &categories, &index)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(images, categories, annotations)
}

/// Parses a results file against the images of `reference`. Predictions
/// without a score get 1.0; ids default to position + 1.
pub fn parse_predictions(bytes: &[u8], reference: &Dataset) -> Result<Dataset, AnnotError> {
    let raw: RawPredictions = serde_json::from_slice(bytes).map_err(json_err)?;
    let (anns, categories) = match raw {
        RawPredictions::Results(v) => (v, reference.categories.clone()),
        RawPredictions::File(f) => {
            let cats = match f.categories {
                Some(c) => category_table(c)?,
                None => reference.categories.clone(),
            };
            (f.annotations, cats)
        }
    };
    let index = ImageIndex::new(&reference.images);
    let annotations = anns
        .into_iter()
        .enumerate()
        .map(|(pos, mut a)| {
            let id = a.id.unwrap_or(pos as u64 + 1);
            let score = *a.score.get_or_insert(1.0);
            if !(0.0..=1.0).contains(&score) {
                return Err(AnnotError::ScoreOutOfRange(id, score));
            }
            convert_annotation(a, id, &categories, &index)
        })
        .collect::<Result<Vec<_>, _>>()?;
    // Class identity is kept; ids are re-expressed in the reference table.
    Dataset::new(reference.images.clone(), reference.categories.clone(), annotations)
}

fn category_table(raw: Vec<RawCategory>) -> Result<CategoryTable, AnnotError> {
    CategoryTable::new(
        raw.into_iter()
            .map(|c| Category {
                id: c.id,
                class: c.name.parse::<ArtefactClass>().ok(),
                name: c.name,
                supercategory: c.supercategory,
            })
            .collect(),
    )
}

struct ImageIndex<'a> {
    images: std::collections::HashMap<u64, &'a ImageRecord>,
}

impl<'a> ImageIndex<'a> {
    fn new(images: &'a [ImageRecord]) -> Self {
        Self { images: images.iter().map(|i| (i.id, i)).collect() }
    }
}

fn convert_annotation(
    a: RawAnnotation,
    id: u64,
    categories: &CategoryTable,
    index: &ImageIndex<'_>,
) -> Result<Annotation, AnnotError> {
    let image = *index
        .images
        .get(&a.image_id)
        .ok_or(AnnotError::DanglingImage { annotation: id, image_id: a.image_id })?;
    let class = categories.class_of(a.category_id)?;
    let file_bbox = a.bbox.map(|[x, y, w, h]| BBox::new(x, y, w, h));
    let mask = match a.segmentation.as_ref().map(|s| parse_segmentation(s, id)).transpose()?.flatten() {
        Some(m) => m,
        None => InstanceMask::Polygon(Polygon::from_bbox(&file_bbox.ok_or(AnnotError::MissingGeometry(id))?)),
    };
    let detector_mask = match (&a.detector_segmentation, a.detector_bbox) {
        (Some(s), _) => parse_segmentation(s, id)?,
        (None, Some([x, y, w, h])) => Some(InstanceMask::Polygon(Polygon::from_bbox(&BBox::new(x, y, w, h)))),
        (None, None) => None,
    };
    for m in std::iter::once(&mask).chain(detector_mask.as_ref()) {
        check_on_canvas(m, image)?;
    }
    let bbox = match file_bbox {
        Some(b) => b,
        None => super::bbox_of(&mask)?,
    };
    let area = match a.area {
        Some(area) => area,
        None => match &mask {
            InstanceMask::Rle(r) => r.area() as f64,
            m => rasterize(m, image.height, image.width)?.count() as f64,
        },
    };
    Ok(Annotation { id, image_id: a.image_id, class, mask, bbox, area, score: a.score, detector_mask })
}

fn check_on_canvas(mask: &InstanceMask, image: &ImageRecord) -> Result<(), AnnotError> {
    match mask {
        InstanceMask::Polygon(p) => {
            let tol = super::VERTEX_TOLERANCE;
            let (w, h) = (image.width as f64, image.height as f64);
            for &[x, y] in p.rings.iter().flatten() {
                if x < -tol || x > w + tol || y < -tol || y > h + tol {
                    return Err(AnnotError::VertexOutOfBounds { x, y, height: image.height, width: image.width });
                }
            }
            Ok(())
        }
        m => {
            let dims = m.canvas().expect("pixel encodings carry a canvas");
            if dims != (image.height, image.width) {
                return Err(AnnotError::CanvasMismatch { expected: (image.height, image.width), actual: dims });
            }
            Ok(())
        }
    }
}

/// Empty polygon lists yield `None` so the bbox can stand in.
fn parse_segmentation(v: &Value, id: u64) -> Result<Option<InstanceMask>, AnnotError> {
    match v {
        Value::Array(rings) if rings.is_empty() => Ok(None),
        Value::Array(_) => {
            let flat: Vec<Vec<f64>> = serde_json::from_value(v.clone()).map_err(json_err)?;
            Ok(Some(Polygon::try_from(flat)?.into()))
        }
        Value::Object(obj) => {
            let counts = obj.get("counts").ok_or_else(|| AnnotError::Json(format!("annotation {id}: RLE without counts")))?;
            if counts.is_string() {
                return Err(AnnotError::CompressedRle(id));
            }
            let counts: Vec<u64> = serde_json::from_value(counts.clone()).map_err(json_err)?;
            let size: [usize; 2] = obj
                .get("size")
                .cloned()
                .map(serde_json::from_value)
                .transpose()
                .map_err(json_err)?
                .ok_or_else(|| AnnotError::Json(format!("annotation {id}: RLE without size")))?;
            Ok(Some(Rle::new(size[0], size[1], counts)?.into()))
        }
        _ => Err(AnnotError::Json(format!("annotation {id}: unrecognised segmentation"))),
    }
}

fn segmentation_json(mask: &InstanceMask) -> Value {
    match mask {
        InstanceMask::Polygon(p) => serde_json::to_value(p).expect("polygon serialises"),
        InstanceMask::Rle(r) => serde_json::to_value(r).expect("rle serialises"),
        InstanceMask::Bitmap(b) => serde_json::to_value(rle_encode(b)).expect("rle serialises"),
    }
}

/// Writes a dataset as pretty-printed COCO JSON. Bitmap masks are stored as
/// uncompressed RLE.
pub fn serialize_coco(ds: &Dataset) -> Vec<u8> {
    let raw = RawDataset {
        images: ds
            .images
            .iter()
            .map(|i| RawImage {
                id: i.id,
                file_name: i.file_name.clone(),
                width: i.width,
                height: i.height,
                filter: i.filter.map(|f| f.name().to_string()),
            })
            .collect(),
        categories: ds
            .categories
            .entries()
            .iter()
            .map(|c| RawCategory { id: c.id, name: c.name.clone(), supercategory: c.supercategory.clone() })
            .collect(),
        annotations: ds
            .annotations
            .iter()
            .map(|a| RawAnnotation {
                id: Some(a.id),
                image_id: a.image_id,
                category_id: ds.categories.id_of(a.class),
                segmentation: Some(segmentation_json(&a.mask)),
                bbox: Some(a.bbox.to_array()),
                area: Some(a.area),
                iscrowd: Some(0),
                score: a.score,
                detector_segmentation: a.detector_mask.as_ref().map(segmentation_json),
                detector_bbox: None,
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&raw).expect("dataset serialises");
    out.push(b'\n');
    out
}
