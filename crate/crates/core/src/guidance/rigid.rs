use alloc::vec::Vec;

use super::{check_alpha, Branch, GuidanceError, GuidanceMask};
use crate::grid::{FrameMask, TokenGrid};
use crate::layout::BoundingBox;
use crate::math;

/// Frame-pair weights for rigid guidance; `values` is row-major `frames x frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    pub frames: usize,
    pub values: Vec<f64>,
}

impl PenaltyMatrix {
    pub fn get(&self, f: usize, g: usize) -> f64 {
        self.values[f * self.frames + g]
    }
}

/// `exp(-alpha * |C_f - C_g|) + 1` over box centers in canvas units.
pub fn displacement_penalty(boxes: &[BoundingBox], alpha: f64) -> Result<PenaltyMatrix, GuidanceError> {
    check_alpha(alpha)?;
    let frames = boxes.len();
    let mut values = alloc::vec![2.0; frames * frames];
    for f in 0..frames {
        for g in f + 1..frames {
            let d = (boxes[f].center() - boxes[g].center()).norm();
            let v = math::exp(-alpha * d) + 1.0;
            values[f * frames + g] = v;
            values[g * frames + f] = v;
        }
    }
    Ok(PenaltyMatrix { frames, values })
}

/// Foreground-to-foreground token pairs weighted by the frame-pair penalty.
pub fn build_rigid_mask(
    masks: &[FrameMask],
    gamma: &PenaltyMatrix,
    grid: TokenGrid,
    instance: Option<u32>,
) -> Result<GuidanceMask, GuidanceError> {
    if masks.len() != grid.frames || gamma.frames != grid.frames {
        return Err(GuidanceError::ShapeMismatch { what: "one foreground mask and penalty row per frame" });
    }
    if masks.iter().any(|m| m.height() != grid.height || m.width() != grid.width) {
        return Err(GuidanceError::ShapeMismatch { what: "mask raster differs from token grid" });
    }
    let n = grid.pixels_per_frame();
    let fg: Vec<Vec<usize>> = masks.iter().map(FrameMask::set_pixels).collect();
    let mut out = GuidanceMask::new(grid, Branch::Rigid, instance);
    for f in 0..grid.frames {
        for g in 0..grid.frames {
            if fg[f].is_empty() || fg[g].is_empty() {
                continue;
            }
            let v = gamma.get(f, g) as f32;
            let block = out.block_mut(f, g);
            for &p in &fg[f] {
                for &q in &fg[g] {
                    block[p * n + q] = v;
                }
            }
        }
    }
    Ok(out)
}
