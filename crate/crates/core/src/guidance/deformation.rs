use alloc::vec;
use alloc::vec::Vec;

use super::{check_alpha, Branch, GuidanceError, GuidanceMask};
use crate::features::{squared_distance, FeatureVolume};
use crate::grid::{FrameMask, PixelRect, TokenGrid};
use crate::layout::BoundingBox;
use crate::math;
use crate::Vec2;

/// Per-pixel displacements in pixel units (`x` along columns, `y` along rows).
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    pub height: usize,
    pub width: usize,
    pub vectors: Vec<Vec2>,
}

impl DeformationField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, vectors: vec![Vec2::ZERO; height * width] }
    }

    pub fn get(&self, row: usize, col: usize) -> Vec2 {
        self.vectors[row * self.width + col]
    }
}

/// Matches every source-foreground pixel of frame `f` to its nearest
/// neighbour (feature L2) among the target-foreground pixels of frame `g`.
/// Ties keep the first target in row-major order.
pub fn perceptual_deformation(
    features: &FeatureVolume,
    f: usize,
    g: usize,
    fg_src: &FrameMask,
    fg_dst: &FrameMask,
) -> Result<DeformationField, GuidanceError> {
    let frames = features.frames();
    for frame in [f, g] {
        if frame >= frames {
            return Err(GuidanceError::FrameOutOfRange { frame, frames });
        }
    }
    let (h, w) = (features.height(), features.width());
    for m in [fg_src, fg_dst] {
        if m.height() != h || m.width() != w {
            return Err(GuidanceError::ShapeMismatch { what: "foreground raster differs from features" });
        }
    }
    let src = fg_src.set_pixels();
    let dst = fg_dst.set_pixels();
    if src.is_empty() || dst.is_empty() {
        return Err(GuidanceError::EmptyForeground);
    }
    let mut field = DeformationField::zeros(h, w);
    for &p in &src {
        let (pr, pc) = (p / w, p % w);
        let query = features.pixel(f, pr, pc);
        let mut best = dst[0];
        let mut best_d = f64::INFINITY;
        for &q in &dst {
            let d = squared_distance(query, features.pixel(g, q / w, q % w));
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        field.vectors[p] = Vec2::new((best % w) as f64 - pc as f64, (best / w) as f64 - pr as f64);
    }
    Ok(field)
}

/// Bilinear interpolation of the four corner displacements from `from` to
/// `to`, evaluated at each in-box pixel center of `from`.
pub fn box_deformation(from: &BoundingBox, to: &BoundingBox, height: usize, width: usize) -> DeformationField {
    let (hf, wf) = (height as f64, width as f64);
    let corner = |x0: f64, y0: f64, x1: f64, y1: f64| Vec2::new((x1 - x0) * wf, (y1 - y0) * hf);
    let top_left = corner(from.x_min, from.y_min, to.x_min, to.y_min);
    let top_right = corner(from.x_max, from.y_min, to.x_max, to.y_min);
    let bottom_left = corner(from.x_min, from.y_max, to.x_min, to.y_max);
    let bottom_right = corner(from.x_max, from.y_max, to.x_max, to.y_max);

    let mut field = DeformationField::zeros(height, width);
    let rect = PixelRect::from_box(from, height, width);
    for (r, c) in rect.iter() {
        let u = ((c as f64 + 0.5 - from.x_min * wf) / (from.width() * wf)).clamp(0.0, 1.0);
        let v = ((r as f64 + 0.5 - from.y_min * hf) / (from.height() * hf)).clamp(0.0, 1.0);
        // Nested lerps reproduce equal corners exactly.
        let top = top_left + (top_right - top_left) * u;
        let bottom = bottom_left + (bottom_right - bottom_left) * u;
        field.vectors[r * width + c] = top + (bottom - top) * v;
    }
    field
}

/// Per-pixel weights `exp(-alpha * |d_perc - d_box|) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelPenalty {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl PixelPenalty {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

pub fn deformation_penalty(
    perceptual: &DeformationField,
    boxed: &DeformationField,
    alpha: f64,
) -> Result<PixelPenalty, GuidanceError> {
    check_alpha(alpha)?;
    if perceptual.height != boxed.height || perceptual.width != boxed.width {
        return Err(GuidanceError::ShapeMismatch { what: "deformation fields" });
    }
    let values = perceptual
        .vectors
        .iter()
        .zip(&boxed.vectors)
        .map(|(p, b)| math::exp(-alpha * (*p - *b).norm()) + 1.0)
        .collect();
    Ok(PixelPenalty { height: perceptual.height, width: perceptual.width, values })
}

/// Penalties for every ordered frame pair; `None` where either frame has no
/// foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationPenalties {
    pub frames: usize,
    pub fields: Vec<Option<PixelPenalty>>,
}

impl DeformationPenalties {
    pub fn get(&self, f: usize, g: usize) -> Option<&PixelPenalty> {
        self.fields[f * self.frames + g].as_ref()
    }

    /// Runs the perceptual / box comparison for every ordered frame pair.
    pub fn compute(
        features: &FeatureVolume,
        masks: &[FrameMask],
        boxes: &[BoundingBox],
        alpha: f64,
    ) -> Result<Self, GuidanceError> {
        check_alpha(alpha)?;
        let frames = features.frames();
        if masks.len() != frames || boxes.len() != frames {
            return Err(GuidanceError::ShapeMismatch { what: "one mask and one box per frame" });
        }
        let (h, w) = (features.height(), features.width());
        let mut fields = Vec::with_capacity(frames * frames);
        for f in 0..frames {
            for g in 0..frames {
                if masks[f].is_empty() || masks[g].is_empty() {
                    fields.push(None);
                    continue;
                }
                let perceptual = perceptual_deformation(features, f, g, &masks[f], &masks[g])?;
                let boxed = box_deformation(&boxes[f], &boxes[g], h, w);
                fields.push(Some(deformation_penalty(&perceptual, &boxed, alpha)?));
            }
        }
        Ok(Self { frames, fields })
    }
}

/// Foreground-to-foreground token pairs weighted by the source pixel's
/// penalty for that frame pair.
pub fn build_nonrigid_mask(
    masks: &[FrameMask],
    penalties: &DeformationPenalties,
    grid: TokenGrid,
    instance: Option<u32>,
) -> Result<GuidanceMask, GuidanceError> {
    if masks.len() != grid.frames || penalties.frames != grid.frames {
        return Err(GuidanceError::ShapeMismatch { what: "one foreground mask and penalty row per frame" });
    }
    if masks.iter().any(|m| m.height() != grid.height || m.width() != grid.width) {
        return Err(GuidanceError::ShapeMismatch { what: "mask raster differs from token grid" });
    }
    let n = grid.pixels_per_frame();
    let fg: Vec<Vec<usize>> = masks.iter().map(FrameMask::set_pixels).collect();
    let mut out = GuidanceMask::new(grid, Branch::NonRigid, instance);
    for f in 0..grid.frames {
        for g in 0..grid.frames {
            if fg[f].is_empty() || fg[g].is_empty() {
                continue;
            }
            let Some(lambda) = penalties.get(f, g) else { continue };
            let block = out.block_mut(f, g);
            for &p in &fg[f] {
                let v = lambda.values[p] as f32;
                for &q in &fg[g] {
                    block[p * n + q] = v;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn self_match_is_zero() {
        let data: Vec<f32> = (0..16).map(|v| v as f32).collect();
        let v = FeatureVolume::new(1, 4, 4, 1, data).unwrap();
        let fg = FrameMask::from_bits(4, 4, vec![true; 16]);
        let d = perceptual_deformation(&v, 0, 0, &fg, &fg).unwrap();
        assert!(d.vectors.iter().all(|x| *x == Vec2::ZERO));
        let empty = FrameMask::empty(4, 4);
        assert_eq!(perceptual_deformation(&v, 0, 0, &empty, &fg), Err(GuidanceError::EmptyForeground));
    }

    #[test]
    fn shifted_frame_matches_by_one_column() {
        let mut v = FeatureVolume::zeros(2, 3, 5, 1).unwrap();
        let mut src = FrameMask::empty(3, 5);
        let mut dst = FrameMask::empty(3, 5);
        for r in 0..3 {
            for c in 0..3 {
                let value = (1 + r * 3 + c) as f32;
                v.pixel_mut(0, r, c)[0] = value;
                v.pixel_mut(1, r, c + 1)[0] = value;
                src.set(r, c, true);
                dst.set(r, c + 1, true);
            }
        }
        let d = perceptual_deformation(&v, 0, 1, &src, &dst).unwrap();
        for p in src.set_pixels() {
            assert_eq!(d.vectors[p], Vec2::new(1.0, 0.0));
        }
        assert_eq!(d.get(0, 4), Vec2::ZERO);
    }

    #[test]
    fn box_field_cases() {
        let a = bx(0.25, 0.25, 0.75, 0.75);
        let shifted = a.translated(Vec2::new(0.125, 0.0));
        let d = box_deformation(&a, &shifted, 8, 8);
        let rect = PixelRect::from_box(&a, 8, 8);
        for (r, c) in rect.iter() {
            assert_eq!(d.get(r, c), Vec2::new(1.0, 0.0));
        }
        assert_eq!(d.get(0, 0), Vec2::ZERO);
        assert!(box_deformation(&a, &a, 8, 8).vectors.iter().all(|x| *x == Vec2::ZERO));

        // Width doubled about the left edge: the right corners move 4 px.
        let wide = bx(0.0, 0.0, 0.5, 1.0);
        let doubled = bx(0.0, 0.0, 1.0, 1.0);
        let d = box_deformation(&wide, &doubled, 1, 8);
        let mid = (0..4).map(|c| d.get(0, c).x).sum::<f64>() / 4.0;
        assert!((mid - 2.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_values() {
        let p = DeformationField { height: 1, width: 2, vectors: vec![Vec2::new(1.0, 0.0), Vec2::ZERO] };
        let b = DeformationField::zeros(1, 2);
        let l = deformation_penalty(&p, &b, 1.0).unwrap();
        assert!((l.values[0] - 1.367_879_441_171_442_2).abs() < 1e-12);
        assert_eq!(l.values[1], 2.0);
    }

    #[test]
    fn nonrigid_tiny_instance() {
        let grid = TokenGrid::new(2, 2, 2);
        let mut m = FrameMask::empty(2, 2);
        m.set(1, 1, true);
        let lam = |v: f64| Some(PixelPenalty { height: 2, width: 2, values: vec![v; 4] });
        let pens = DeformationPenalties { frames: 2, fields: vec![lam(2.0), lam(1.5), lam(1.25), lam(2.0)] };
        let mask = build_nonrigid_mask(&[m.clone(), m], &pens, grid, Some(0)).unwrap();
        assert_eq!(mask.get(3, 7), 1.5);
        assert_eq!(mask.get(7, 3), 1.25);
        assert_eq!(mask.nnz(), 4);
    }
}
