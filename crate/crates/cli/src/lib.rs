pub mod cmd;
pub mod config;
pub mod errlog;
pub mod io;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use errlog::ErrorLog;

#[derive(Debug, Parser)]
#[command(name = "xami", version, about = "Artefact dataset preprocessing, splitting and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub images: Option<PathBuf>,
    #[arg(long, global = true)]
    pub gt: Option<PathBuf>,
    #[arg(long, global = true)]
    pub preds: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rebin, ZScale, asinh-stretch and write 8-bit PNGs plus a manifest.
    Preprocess,
    /// Stratified k-fold split with per-fold COCO files.
    Split {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        val_fold: Option<usize>,
    },
    /// Match predictions to ground truth and write the metrics report.
    Eval {
        #[arg(long)]
        iou_threshold: Option<f64>,
        /// Ignore detector masks even when images are available.
        #[arg(long)]
        no_fusion: bool,
        #[arg(long)]
        class_agnostic: bool,
    },
    /// Per-filter and per-class tables and bounding-box sizes.
    Stats {
        #[arg(long)]
        expected_images: Option<usize>,
    },
}

impl Cli {
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let c = &self.common;
        for (slot, flag) in [
            (&mut cfg.paths.images, &c.images),
            (&mut cfg.paths.gt, &c.gt),
            (&mut cfg.paths.preds, &c.preds),
            (&mut cfg.paths.out, &c.out),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if c.jobs.is_some() {
            cfg.jobs = c.jobs;
        }
        match &self.command {
            Command::Preprocess => {}
            Command::Split { k, seed, val_fold } => {
                if let Some(k) = k {
                    cfg.split.k = *k;
                }
                if let Some(s) = seed {
                    cfg.split.seed = *s;
                }
                if val_fold.is_some() {
                    cfg.split.val_fold = *val_fold;
                }
            }
            Command::Eval { iou_threshold, no_fusion, class_agnostic } => {
                if let Some(t) = iou_threshold {
                    cfg.matching.iou_threshold = *t;
                }
                if *no_fusion {
                    cfg.matching.fusion = false;
                }
                if *class_agnostic {
                    cfg.matching.class_aware = false;
                }
            }
            Command::Stats { expected_images } => {
                if expected_images.is_some() {
                    cfg.stats.expected_images = *expected_images;
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one command; `Ok(false)` means some items failed and were logged.
pub fn run(cli: &Cli) -> Result<bool> {
    let cfg = cli.resolve_config()?;
    if let Some(n) = cfg.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("worker pool already initialised: {e}");
        }
    }
    let errors = ErrorLog::default();
    match cli.command {
        Command::Preprocess => cmd::preprocess::run(&cfg, &errors)?,
        Command::Split { .. } => cmd::split::run(&cfg)?,
        Command::Eval { .. } => {
            cmd::eval::run(&cfg, &errors)?;
        }
        Command::Stats { .. } => {
            cmd::stats::run(&cfg)?;
        }
    }
    errors.write(&cfg.out_dir()?)?;
    if !errors.is_empty() {
        eprintln!("{} item(s) failed, see errors.json", errors.len());
    }
    Ok(errors.is_empty())
}
