use std::path::Path;
use std::sync::Mutex;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ItemError {
    pub item: String,
    pub stage: String,
    pub message: String,
}

/// Per-item failures collected across worker threads; written sorted so the
/// file does not depend on scheduling.
#[derive(Debug, Default)]
pub struct ErrorLog {
    items: Mutex<Vec<ItemError>>,
}

impl ErrorLog {
    pub fn record(&self, item: impl Into<String>, stage: &str, err: impl std::fmt::Display) {
        let e = ItemError { item: item.into(), stage: stage.into(), message: format!("{err:#}") };
        log::error!("{}: {} failed: {}", e.item, e.stage, e.message);
        self.items.lock().expect("error log lock").push(e);
    }

    pub fn is_empty(&self) -> bool {
        self.items.lock().expect("error log lock").is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.lock().expect("error log lock").len()
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let mut items = self.items.lock().expect("error log lock").clone();
        items.sort();
        let mut bytes = serde_json::to_vec_pretty(&items)?;
        bytes.push(b'\n');
        let path = out_dir.join("errors.json");
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }
}
