//! Seeded synthetic datasets with artefact-like geometry.
//!
//! The default layout reproduces the published per-filter image/mask counts
//! and per-class totals of the XMM-OM artefact dataset, so that pipelines can
//! be exercised at full scale without the real annotation file.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annot::{
    bbox_of, rasterize, Annotation, ArtefactClass, CategoryTable, Dataset, ImageRecord,
    InstanceMask, Polygon,
};
use crate::imgproc::FilterBand;

/// (band, images, masks) of the published dataset.
pub const PUBLISHED_FILTERS: [(FilterBand, usize, usize); 7] = [
    (FilterBand::V, 102, 880),
    (FilterBand::B, 116, 1259),
    (FilterBand::U, 193, 1837),
    (FilterBand::Uvw1, 403, 2127),
    (FilterBand::Uvm2, 175, 681),
    (FilterBand::Uvw2, 63, 226),
    (FilterBand::White, 3, 11),
];

/// Instances per class (train + validation) of the published dataset.
pub const PUBLISHED_CLASS_TOTALS: [usize; ArtefactClass::COUNT] = [668, 1669, 1844, 2799, 41];

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub filters: Vec<(FilterBand, usize, usize)>,
    pub class_totals: [usize; ArtefactClass::COUNT],
    pub size: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn published(seed: u64) -> Self {
        Self {
            filters: PUBLISHED_FILTERS.to_vec(),
            class_totals: PUBLISHED_CLASS_TOTALS,
            size: 512,
            seed,
        }
    }

    /// Scales the published layout down to roughly `images` images while
    /// keeping the class mix.
    pub fn small(images: usize, masks: usize, seed: u64) -> Self {
        let per = images.div_ceil(3).max(1);
        let filters = vec![
            (FilterBand::U, per, masks / 3),
            (FilterBand::Uvw1, per, masks / 3),
            (FilterBand::B, images.saturating_sub(2 * per).max(1), masks - 2 * (masks / 3)),
        ];
        let total: usize = PUBLISHED_CLASS_TOTALS.iter().sum();
        let mut class_totals = PUBLISHED_CLASS_TOTALS.map(|c| c * masks / total);
        let assigned: usize = class_totals.iter().sum();
        class_totals[ArtefactClass::ROS.id()] += masks - assigned;
        Self { filters, class_totals, size: 128, seed }
    }
}

/// Builds a ground-truth dataset following `spec`. Every image gets at
/// least one mask when there are enough masks to go round.
pub fn synth_dataset(spec: &SynthSpec) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total_masks: usize = spec.filters.iter().map(|f| f.2).sum();
    assert_eq!(total_masks, spec.class_totals.iter().sum::<usize>(), "class totals must match mask totals");

    let mut labels: Vec<ArtefactClass> = ArtefactClass::ALL
        .iter()
        .flat_map(|&c| std::iter::repeat_n(c, spec.class_totals[c.id()]))
        .collect();
    labels.shuffle(&mut rng);
    let mut labels = labels.into_iter();

    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut next_image = 1u64;
    let mut next_ann = 1u64;
    for &(band, n_images, n_masks) in &spec.filters {
        let mut per_image = vec![usize::from(n_masks >= n_images); n_images];
        let mut left = n_masks - per_image.iter().sum::<usize>();
        while left > 0 {
            // skewed: a few crowded frames, many sparse ones
            let i = ((rng.gen::<f64>().powi(2)) * n_images as f64) as usize;
            per_image[i.min(n_images - 1)] += 1;
            left -= 1;
        }
        for count in per_image {
            let id = next_image;
            next_image += 1;
            images.push(ImageRecord {
                id,
                file_name: format!("S{:010}_{}.png", 100_000_000 + id * 7, band.code()),
                width: spec.size,
                height: spec.size,
                filter: Some(band),
            });
            for _ in 0..count {
                let class = labels.next().expect("label pool sized to masks");
                let poly = artefact_polygon(class, spec.size as f64, &mut rng);
                annotations.push(annotation(next_ann, id, class, poly, spec.size));
                next_ann += 1;
            }
        }
    }
    Dataset::new(images, CategoryTable::default(), annotations).expect("synthetic dataset is consistent")
}

fn annotation(id: u64, image_id: u64, class: ArtefactClass, poly: Polygon, size: usize) -> Annotation {
    let mask = InstanceMask::Polygon(poly);
    let bitmap = rasterize(&mask, size, size).expect("synthetic polygon on canvas");
    let bbox = bbox_of(&mask).expect("non-degenerate polygon");
    Annotation { id, image_id, class, mask, bbox, area: bitmap.count() as f64, score: None, detector_mask: None }
}

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, angle: f64, n: usize, size: f64) -> Vec<[f64; 2]> {
    let (s, c) = angle.sin_cos();
    (0..n)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            let (ex, ey) = (rx * t.cos(), ry * t.sin());
            let x = (cx + ex * c - ey * s).clamp(0.0, size);
            let y = (cy + ex * s + ey * c).clamp(0.0, size);
            [round2(x), round2(y)]
        })
        .collect()
}

/// Keeps coordinates short in JSON output.
fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Class-flavoured shapes: rings near the centre, small smoke rings, long
/// thin loops, column-aligned streaks and large diffuse patches.
pub fn artefact_polygon(class: ArtefactClass, size: f64, rng: &mut impl Rng) -> Polygon {
    let s = size / 512.0;
    let rings = match class {
        ArtefactClass::CR => {
            let (cx, cy) = (size / 2.0 + rng.gen_range(-20.0..20.0) * s, size / 2.0 + rng.gen_range(-20.0..20.0) * s);
            let r = rng.gen_range(25.0..40.0) * s;
            vec![ellipse(cx, cy, r, r, 0.0, 24, size), ellipse(cx, cy, r * 0.6, r * 0.6, 0.0, 24, size)]
        }
        ArtefactClass::SR => {
            let r = rng.gen_range(6.0..25.0) * s;
            let (cx, cy) = (rng.gen_range(r..size - r), rng.gen_range(r..size - r));
            vec![ellipse(cx, cy, r, r * rng.gen_range(0.8..1.0), rng.gen_range(0.0..std::f64::consts::PI), 16, size)]
        }
        ArtefactClass::SL => {
            let len = rng.gen_range(20.0..75.0) * s;
            let (cx, cy) = (rng.gen_range(len..size - len), rng.gen_range(len..size - len));
            let aspect = rng.gen_range(3.0..6.0);
            vec![ellipse(cx, cy, len, len / aspect, rng.gen_range(0.0..std::f64::consts::PI), 20, size)]
        }
        ArtefactClass::ROS => {
            let w = rng.gen_range(2.0..6.0) * s.max(0.5);
            let x = rng.gen_range(0.0..size - w);
            let top = rng.gen_range(0.0..size * 0.5);
            let bottom = rng.gen_range(top + size * 0.1..=size);
            vec![vec![[round2(x), round2(top)], [round2(x + w), round2(top)], [round2(x + w), round2(bottom)], [round2(x), round2(bottom)]]]
        }
        ArtefactClass::Other => {
            let r = rng.gen_range(60.0..150.0) * s;
            let (cx, cy) = (rng.gen_range(0.0..size), rng.gen_range(0.0..size));
            vec![ellipse(cx, cy, r, r * rng.gen_range(0.5..1.0), rng.gen_range(0.0..std::f64::consts::PI), 18, size)]
        }
    };
    Polygon::new(rings).expect("generated rings have >= 3 vertices")
}

/// Noise model for [`synth_predictions`].
#[derive(Debug, Clone, Copy)]
pub struct PredictionNoise {
    pub miss_rate: f64,
    pub spurious_rate: f64,
    pub class_flip_rate: f64,
    /// Maximum vertex shift in pixels.
    pub jitter: f64,
    /// Fraction of predictions that also carry a box-detector mask.
    pub detector_rate: f64,
    pub seed: u64,
}

impl Default for PredictionNoise {
    fn default() -> Self {
        Self { miss_rate: 0.2, spurious_rate: 0.1, class_flip_rate: 0.05, jitter: 2.0, detector_rate: 0.5, seed: 7 }
    }
}

/// Perturbed copies of the ground truth standing in for model output:
/// missed instances, shifted outlines, flipped labels and extra detections.
pub fn synth_predictions(gt: &Dataset, noise: &PredictionNoise) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut out = Vec::new();
    let mut next_id = 1u64;
    for img in &gt.images {
        let size = img.width.min(img.height) as f64;
        let anns: Vec<&Annotation> = gt.annotations.iter().filter(|a| a.image_id == img.id).collect();
        for a in anns {
            if rng.gen_bool(noise.miss_rate) {
                continue;
            }
            let InstanceMask::Polygon(p) = &a.mask else { continue };
            let (dx, dy) = (rng.gen_range(-noise.jitter..=noise.jitter), rng.gen_range(-noise.jitter..=noise.jitter));
            let rings = p
                .rings
                .iter()
                .map(|ring| {
                    ring.iter()
                        .map(|v| [round2((v[0] + dx).clamp(0.0, img.width as f64)), round2((v[1] + dy).clamp(0.0, img.height as f64))])
                        .collect()
                })
                .collect();
            let Ok(poly) = Polygon::new(rings) else { continue };
            if poly.vertex_bbox().w <= 0.0 || poly.vertex_bbox().h <= 0.0 {
                continue;
            }
            let class = if rng.gen_bool(noise.class_flip_rate) {
                *ArtefactClass::ALL.choose(&mut rng).expect("non-empty")
            } else {
                a.class
            };
            out.push(prediction(next_id, img, class, poly, noise, &mut rng));
            next_id += 1;
        }
        while rng.gen_bool(noise.spurious_rate) {
            let class = *ArtefactClass::ALL.choose(&mut rng).expect("non-empty");
            let poly = artefact_polygon(class, size, &mut rng);
            out.push(prediction(next_id, img, class, poly, noise, &mut rng));
            next_id += 1;
        }
    }
    Dataset::new(gt.images.clone(), gt.categories.clone(), out).expect("predictions reference gt images")
}

fn prediction(
    id: u64,
    img: &ImageRecord,
    class: ArtefactClass,
    poly: Polygon,
    noise: &PredictionNoise,
    rng: &mut impl Rng,
) -> Annotation {
    let mut a = annotation(id, img.id, class, poly, img.width.min(img.height));
    a.score = Some(round2(rng.gen_range(0.3..1.0)));
    if rng.gen_bool(noise.detector_rate) {
        a.detector_mask = Some(InstanceMask::Polygon(Polygon::from_bbox(&a.bbox)));
    }
    a
}
