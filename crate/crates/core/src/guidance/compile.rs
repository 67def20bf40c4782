use alloc::vec::Vec;

use super::{
    build_motionless_mask, build_nonrigid_mask, build_rigid_mask, build_shape_template, compose_masks,
    displacement_penalty, segment_foreground, select_reference_frame, warp_template, Branch, ComposeReport,
    DeformationPenalties, FrameDistance, GuidanceError, GuidanceMask, ShapeTemplate,
};
use crate::features::FeatureVolume;
use crate::graph::MotionCategory;
use crate::grid::{FrameMask, PixelRect, TokenGrid};
use crate::layout::{SceneLayout, Track};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceParams {
    /// Penalty sharpness for box-center distances (canvas units).
    pub alpha_canvas: f64,
    /// Penalty sharpness for deformation disagreement (pixels).
    pub alpha_pixel: f64,
    pub metric: FrameDistance,
}

impl Default for GuidanceParams {
    fn default() -> Self {
        Self { alpha_canvas: 1.0, alpha_pixel: 1.0, metric: FrameDistance::MeanPixelL2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledGuidance {
    /// One mask per track, in layout order.
    pub masks: Vec<GuidanceMask>,
    pub composed: GuidanceMask,
    pub report: ComposeReport,
    pub reference_frame: usize,
}

fn kmeans_masks(features: &FeatureVolume, track: &Track) -> Result<Vec<FrameMask>, GuidanceError> {
    let (h, w) = (features.height(), features.width());
    track
        .boxes
        .iter()
        .enumerate()
        .map(|(f, b)| match segment_foreground(features, b, f) {
            Ok(s) => Ok(s.mask),
            Err(GuidanceError::DegenerateBox { .. }) => Ok(FrameMask::from_rect(&PixelRect::from_box(b, h, w), h, w)),
            Err(e) => Err(e),
        })
        .collect()
}

fn template_masks(features: &FeatureVolume, track: &Track, raw: &[FrameMask]) -> Vec<FrameMask> {
    let (h, w) = (features.height(), features.width());
    let first = PixelRect::from_box(&track.boxes[0], h, w);
    let resolution = (first.rows().max(1), first.cols().max(1));
    let template = build_shape_template(raw, &track.boxes, resolution).unwrap_or_else(|e| {
        log::warn!("track {}: {e}; using the full box", track.id);
        ShapeTemplate::full(resolution.0, resolution.1)
    });
    track.boxes.iter().map(|b| warp_template(&template, b, h, w)).collect()
}

/// Builds the per-track guidance masks and their sum.
pub fn compile_guidance(
    layout: &SceneLayout,
    features: &FeatureVolume,
    params: &GuidanceParams,
) -> Result<CompiledGuidance, GuidanceError> {
    let grid = features.grid();
    if layout.frames != grid.frames {
        let expected = TokenGrid::new(layout.frames, grid.height, grid.width);
        return Err(GuidanceError::GridMismatch { expected, found: grid });
    }
    if let Some(t) = layout.tracks.iter().find(|t| t.boxes.len() != grid.frames) {
        log::debug!("track {} has {} boxes", t.id, t.boxes.len());
        return Err(GuidanceError::ShapeMismatch { what: "track length differs from frame count" });
    }
    let reference_frame = select_reference_frame(features, params.metric);
    let mut masks = Vec::with_capacity(layout.tracks.len());
    for track in &layout.tracks {
        let mask = match track.category {
            MotionCategory::Motionless => build_motionless_mask(track, reference_frame, grid)?,
            MotionCategory::Rigid => {
                let raw = kmeans_masks(features, track)?;
                let warped = template_masks(features, track, &raw);
                let gamma = displacement_penalty(&track.boxes, params.alpha_canvas)?;
                build_rigid_mask(&warped, &gamma, grid, Some(track.id))?
            }
            MotionCategory::NonRigid => {
                let raw = kmeans_masks(features, track)?;
                let penalties = DeformationPenalties::compute(features, &raw, &track.boxes, params.alpha_pixel)?;
                build_nonrigid_mask(&raw, &penalties, grid, Some(track.id))?
            }
        };
        log::debug!("track {}: {} mask with {} nonzero entries", track.id, mask.branch().tag(), mask.nnz());
        masks.push(mask);
    }
    let (composed, report) = if masks.is_empty() {
        (GuidanceMask::new(grid, Branch::Composed, None), ComposeReport::default())
    } else {
        compose_masks(&masks)?
    };
    Ok(CompiledGuidance { masks, composed, report, reference_frame })
}
