use super::{Branch, GuidanceError, GuidanceMask};
use crate::features::{squared_distance, FeatureVolume};
use crate::graph::MotionCategory;
use crate::grid::{PixelRect, TokenGrid};
use crate::layout::Track;
use crate::math;

/// Distance between two frames of a feature volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameDistance {
    /// Mean over pixels of the per-pixel L2 feature distance.
    #[default]
    MeanPixelL2,
    /// Mean over pixels of the squared per-pixel L2 distance.
    MeanSquared,
}

pub fn frame_distance(features: &FeatureVolume, a: usize, b: usize, metric: FrameDistance) -> f64 {
    let (h, w) = (features.height(), features.width());
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w {
            let d2 = squared_distance(features.pixel(a, r, c), features.pixel(b, r, c));
            total += match metric {
                FrameDistance::MeanPixelL2 => math::sqrt(d2),
                FrameDistance::MeanSquared => d2,
            };
        }
    }
    total / (h * w) as f64
}

/// The frame with the smallest summed distance to all frames; ties go to
/// the lowest index.
pub fn select_reference_frame(features: &FeatureVolume, metric: FrameDistance) -> usize {
    let frames = features.frames();
    let mut pair = alloc::vec![0.0f64; frames * frames];
    for a in 0..frames {
        for b in a + 1..frames {
            let d = frame_distance(features, a, b, metric);
            pair[a * frames + b] = d;
            pair[b * frames + a] = d;
        }
    }
    let mut best = 0;
    let mut best_sum = f64::INFINITY;
    for a in 0..frames {
        let sum: f64 = pair[a * frames..(a + 1) * frames].iter().sum();
        if sum < best_sum {
            best = a;
            best_sum = sum;
        }
    }
    best
}

/// Weight 1 from every in-box pixel of every frame to the same pixel of the
/// reference frame. The first box is used for all frames.
pub fn build_motionless_mask(track: &Track, reference: usize, grid: TokenGrid) -> Result<GuidanceMask, GuidanceError> {
    if track.category != MotionCategory::Motionless {
        return Err(GuidanceError::WrongCategory { expected: MotionCategory::Motionless, found: track.category });
    }
    if reference >= grid.frames {
        return Err(GuidanceError::FrameOutOfRange { frame: reference, frames: grid.frames });
    }
    let mut mask = GuidanceMask::new(grid, Branch::Motionless, Some(track.id));
    let Some(first) = track.boxes.first() else {
        return Ok(mask);
    };
    let rect = PixelRect::from_box(first, grid.height, grid.width);
    if rect.is_empty() {
        log::warn!("track {}: box covers no pixel; motionless mask is empty", track.id);
        return Ok(mask);
    }
    let n = grid.pixels_per_frame();
    for f in 0..grid.frames {
        let block = mask.block_mut(f, reference);
        for (r, c) in rect.iter() {
            let p = r * grid.width + c;
            block[p * n + p] = 1.0;
        }
    }
    Ok(mask)
}
