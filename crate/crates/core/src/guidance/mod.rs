//! Guidance-mask compilation: a scene layout plus a feature volume become
//! per-instance masks over spatio-temporal token pairs.
//!
//! * motionless tracks: every frame attends to the same pixel of a reference frame,
//! * rigid tracks: foreground-to-foreground pairs weighted by box displacement,
//! * non-rigid tracks: foreground pairs weighted by agreement between
//!   feature-matched and box-induced deformation.
//!
//! Frames are 0-based throughout.

mod compile;
mod deformation;
mod mask;
mod reference;
mod rigid;
mod segment;
mod template;

use core::fmt;

pub use compile::{compile_guidance, CompiledGuidance, GuidanceParams};
pub use deformation::{
    box_deformation, build_nonrigid_mask, deformation_penalty, perceptual_deformation, DeformationField,
    DeformationPenalties, PixelPenalty,
};
pub use mask::{compose_masks, Branch, ComposeReport, GuidanceMask};
pub use reference::{build_motionless_mask, frame_distance, select_reference_frame, FrameDistance};
pub use rigid::{build_rigid_mask, displacement_penalty, PenaltyMatrix};
pub use segment::{segment_foreground, Segmentation, KMEANS_MAX_ITERATIONS};
pub use template::{build_shape_template, warp_template, ShapeTemplate};

use crate::graph::MotionCategory;
use crate::grid::TokenGrid;

#[derive(Debug, Clone, PartialEq)]
pub enum GuidanceError {
    WrongCategory { expected: MotionCategory, found: MotionCategory },
    FrameOutOfRange { frame: usize, frames: usize },
    DegenerateBox { pixels: usize },
    EmptyTemplate,
    EmptyForeground,
    GridMismatch { expected: TokenGrid, found: TokenGrid },
    ShapeMismatch { what: &'static str },
    InvalidAlpha,
}

impl fmt::Display for GuidanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WrongCategory { expected, found } => {
                write!(f, "expected a {expected} track, found {found}")
            }
            Self::FrameOutOfRange { frame, frames } => {
                write!(f, "frame {frame} outside 0..{frames}")
            }
            Self::DegenerateBox { pixels } => {
                write!(f, "box covers {pixels} pixel(s); at least 2 are needed")
            }
            Self::EmptyTemplate => f.write_str("no pixel won the template vote"),
            Self::EmptyForeground => f.write_str("foreground mask is empty"),
            Self::GridMismatch { expected, found } => write!(
                f,
                "token grid mismatch: expected {}x{}x{}, found {}x{}x{}",
                expected.frames, expected.height, expected.width, found.frames, found.height, found.width
            ),
            Self::ShapeMismatch { what } => write!(f, "shape mismatch: {what}"),
            Self::InvalidAlpha => f.write_str("alpha must be positive and finite"),
        }
    }
}

impl core::error::Error for GuidanceError {}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), GuidanceError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(GuidanceError::InvalidAlpha)
    }
}
