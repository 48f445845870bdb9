//! Image-level stratified k-fold assignment.
//!
//! Images carry multisets of class labels, so folds are filled by iterative
//! stratification: the rarest remaining class is placed first, each image
//! going to the fold that still wants the most instances of that class.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annot::{ArtefactClass, Dataset};

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("k must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("k = {k} exceeds the number of images ({images})")]
    TooManyFolds { k: usize, images: usize },
    #[error("fold index {fold} out of range for k = {k}")]
    InvalidFold { fold: usize, k: usize },
    #[error("image {0} has no fold assignment")]
    Unassigned(u64),
}

/// Fold membership of every image, serialised as the split manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub k: usize,
    pub seed: u64,
    /// image id -> fold index
    pub folds: BTreeMap<u64, usize>,
}

const N: usize = ArtefactClass::COUNT;

pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<SplitSpec, SplitError> {
    if k < 2 {
        return Err(SplitError::TooFewFolds(k));
    }
    if k > ds.images.len() {
        return Err(SplitError::TooManyFolds { k, images: ds.images.len() });
    }

    let by_image = ds.annotations_by_image();
    let mut order: Vec<u64> = ds.images.iter().map(|i| i.id).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let counts_of = |id: u64| {
        let mut c = [0usize; N];
        for a in by_image.get(&id).into_iter().flatten() {
            c[a.class.id()] += 1;
        }
        c
    };
    type Counted = Vec<(u64, [usize; N])>;
    let (labelled, unlabelled): (Counted, Counted) =
        order.iter().map(|&id| (id, counts_of(id))).partition(|(_, c)| c.iter().any(|&n| n > 0));

    let mut remaining = [0usize; N];
    for (_, c) in &labelled {
        for (r, n) in remaining.iter_mut().zip(c) {
            *r += n;
        }
    }
    let kf = k as f64;
    let mut demand: Vec<[f64; N]> = vec![remaining.map(|t| t as f64 / kf); k];
    let mut capacity: Vec<f64> = vec![labelled.len() as f64 / kf; k];

    let mut folds = BTreeMap::new();
    let mut pending: Vec<(u64, [usize; N])> = labelled;
    while !pending.is_empty() {
        let class = (0..N)
            .filter(|&c| remaining[c] > 0)
            .min_by_key(|&c| (remaining[c], c))
            .expect("pending images hold at least one instance");
        let (with_class, rest): (Vec<_>, Vec<_>) = pending.into_iter().partition(|(_, c)| c[class] > 0);
        pending = rest;
        for (id, counts) in with_class {
            let fold = (0..k)
                .max_by(|&a, &b| {
                    demand[a][class]
                        .total_cmp(&demand[b][class])
                        .then(capacity[a].total_cmp(&capacity[b]))
                        .then(b.cmp(&a))
                })
                .expect("k >= 2");
            folds.insert(id, fold);
            capacity[fold] -= 1.0;
            for c in 0..N {
                demand[fold][c] -= counts[c] as f64;
                remaining[c] -= counts[c];
            }
        }
    }
    for (j, (id, _)) in unlabelled.into_iter().enumerate() {
        folds.insert(id, j % k);
    }
    Ok(SplitSpec { k, seed, folds })
}

/// Splits `ds` into (train, validation) with `val_fold` held out.
pub fn materialize_split(ds: &Dataset, spec: &SplitSpec, val_fold: usize) -> Result<(Dataset, Dataset), SplitError> {
    if val_fold >= spec.k {
        return Err(SplitError::InvalidFold { fold: val_fold, k: spec.k });
    }
    let mut val = HashSet::new();
    let mut train = HashSet::new();
    for img in &ds.images {
        match spec.folds.get(&img.id) {
            Some(&f) if f == val_fold => val.insert(img.id),
            Some(_) => train.insert(img.id),
            None => return Err(SplitError::Unassigned(img.id)),
        };
    }
    Ok((ds.subset(&train), ds.subset(&val)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub images: usize,
    pub class_counts: [usize; N],
    /// Class shares within the fold, percent.
    pub class_shares: [f64; N],
}

impl FoldSummary {
    pub fn annotations(&self) -> usize {
        self.class_counts.iter().sum()
    }
}

pub fn fold_summaries(ds: &Dataset, spec: &SplitSpec) -> Vec<FoldSummary> {
    let mut out: Vec<FoldSummary> = (0..spec.k)
        .map(|fold| FoldSummary { fold, images: 0, class_counts: [0; N], class_shares: [0.0; N] })
        .collect();
    for img in &ds.images {
        if let Some(&f) = spec.folds.get(&img.id) {
            out[f].images += 1;
        }
    }
    for a in &ds.annotations {
        if let Some(&f) = spec.folds.get(&a.image_id) {
            out[f].class_counts[a.class.id()] += 1;
        }
    }
    for s in &mut out {
        let total = s.annotations();
        if total > 0 {
            s.class_shares = s.class_counts.map(|c| 100.0 * c as f64 / total as f64);
        }
    }
    out
}
