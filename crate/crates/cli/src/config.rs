use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use xami_core::imgproc::PreprocessParams;
use xami_core::matching::MatchParams;

/// Everything a run needs. Loaded from TOML, then command-line flags
/// override individual fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub preprocess: PreprocessParams,
    pub split: SplitConfig,
    pub matching: MatchingConfig,
    pub stats: StatsConfig,
    pub report: ReportConfig,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub images: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub preds: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub k: usize,
    pub seed: u64,
    pub val_fold: Option<usize>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { k: 4, seed: 0, val_fold: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingConfig {
    pub iou_threshold: f64,
    pub class_aware: bool,
    pub fusion: bool,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        let d = MatchParams::default();
        Self { iou_threshold: d.iou_threshold, class_aware: d.class_aware, fusion: true }
    }
}

impl MatchingConfig {
    pub fn params(&self) -> MatchParams {
        MatchParams { iou_threshold: self.iou_threshold, class_aware: self.class_aware }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    /// Nominal image count the per-filter table is compared against.
    pub expected_images: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub svg: bool,
    pub match_dump: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { svg: true, match_dump: true }
    }
}

impl RunConfig {
    /// Relative paths inside the file are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.paths.images, &mut cfg.paths.gt, &mut cfg.paths.preds, &mut cfg.paths.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.zscale.validate()?;
        if !(self.preprocess.stretch.a > 0.0 && self.preprocess.stretch.a.is_finite()) {
            bail!("stretch.a must be positive");
        }
        if self.preprocess.rebin.factor == 0 {
            bail!("rebin.factor must be at least 1");
        }
        let t = self.matching.iou_threshold;
        if !(0.0..=1.0).contains(&t) {
            bail!("iou_threshold {t} outside [0, 1]");
        }
        if self.split.k < 2 {
            bail!("split.k must be at least 2");
        }
        if let Some(v) = self.split.val_fold {
            if v >= self.split.k {
                bail!("val_fold {v} must be below k = {}", self.split.k);
            }
        }
        if self.jobs == Some(0) {
            bail!("jobs must be at least 1");
        }
        Ok(())
    }

    pub fn require<'a>(&self, p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        let path = p.as_deref().with_context(|| format!("no {what} given (flag or config)"))?;
        if !path.exists() {
            bail!("{what} {} does not exist", path.display());
        }
        Ok(path)
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let out = self.paths.out.clone().unwrap_or_else(|| PathBuf::from("xami-out"));
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(out)
    }
}
