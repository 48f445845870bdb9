use super::{BackgroundStats, MatchError};
use crate::annot::{rasterize, ArtefactClass, InstanceMask};
use crate::imgproc::PixelGrid;

/// Classes whose faint instances take the box-detector mask.
pub const FUSION_CLASSES: [ArtefactClass; 2] = [ArtefactClass::SL, ArtefactClass::Other];

/// Mean intensity under the mask is at most one sigma above the background
/// median (inclusive).
pub fn is_faint(mask: &InstanceMask, grid: &PixelGrid, bg: &BackgroundStats) -> Result<bool, MatchError> {
    let bitmap = rasterize(mask, grid.height(), grid.width())?;
    let n = bitmap.count();
    if n == 0 {
        return Err(MatchError::EmptyMask);
    }
    let sum: f64 = bitmap.ones().map(|(r, c)| grid.get(r, c)).sum();
    Ok(sum / n as f64 <= bg.median + bg.sigma)
}

/// Picks the detector mask for faint SL/Other instances, the segmenter
/// mask otherwise. Always returns one of the two inputs.
pub fn fuse_masks<'a>(
    detector_mask: &'a InstanceMask,
    segmenter_mask: &'a InstanceMask,
    class: ArtefactClass,
    grid: &PixelGrid,
    bg: &BackgroundStats,
) -> Result<&'a InstanceMask, MatchError> {
    let canvas = (grid.height(), grid.width());
    for m in [detector_mask, segmenter_mask] {
        if let Some(dims) = m.canvas() {
            if dims != canvas {
                return Err(MatchError::CanvasMismatch { expected: canvas, actual: dims });
            }
        }
    }
    if FUSION_CLASSES.contains(&class) && is_faint(segmenter_mask, grid, bg)? {
        Ok(detector_mask)
    } else {
        Ok(segmenter_mask)
    }
}
