use alloc::vec;
use alloc::vec::Vec;

use super::GuidanceError;
use crate::grid::{FrameMask, PixelRect};
use crate::layout::BoundingBox;

/// Binary silhouette on a box-normalized `rows x cols` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTemplate {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl ShapeTemplate {
    /// Fails with `EmptyTemplate` when no bit is set.
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self, GuidanceError> {
        if bits.len() != rows * cols {
            return Err(GuidanceError::ShapeMismatch { what: "template bits" });
        }
        if !bits.iter().any(|b| *b) {
            return Err(GuidanceError::EmptyTemplate);
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self { rows: rows.max(1), cols: cols.max(1), bits: vec![true; rows.max(1) * cols.max(1)] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

// Nearest source offset for canonical cell `t` when `len` pixels map onto `cells` cells.
fn nearest(t: usize, len: usize, cells: usize) -> usize {
    (((2 * t + 1) * len) / (2 * cells)).min(len.saturating_sub(1))
}

/// Resamples every frame's mask into the canonical grid and keeps the
/// cells set in a strict majority of frames.
pub fn build_shape_template(
    masks: &[FrameMask],
    boxes: &[BoundingBox],
    resolution: (usize, usize),
) -> Result<ShapeTemplate, GuidanceError> {
    let (rows, cols) = resolution;
    if masks.is_empty() || masks.len() != boxes.len() {
        return Err(GuidanceError::ShapeMismatch { what: "one mask and one box per frame" });
    }
    if rows == 0 || cols == 0 {
        return Err(GuidanceError::ShapeMismatch { what: "template resolution" });
    }
    let mut votes = vec![0usize; rows * cols];
    for (mask, b) in masks.iter().zip(boxes) {
        let rect = PixelRect::from_box(b, mask.height(), mask.width());
        if rect.is_empty() {
            continue;
        }
        for ty in 0..rows {
            let sy = rect.row0 + nearest(ty, rect.rows(), rows);
            for tx in 0..cols {
                let sx = rect.col0 + nearest(tx, rect.cols(), cols);
                if mask.get(sy, sx) {
                    votes[ty * cols + tx] += 1;
                }
            }
        }
    }
    let frames = masks.len();
    let bits = votes.iter().map(|v| 2 * v > frames).collect();
    ShapeTemplate::new(rows, cols, bits)
}

/// Maps the template onto the box's pixel rectangle of an `height x width`
/// raster. Pixels outside the box stay unset.
pub fn warp_template(template: &ShapeTemplate, b: &BoundingBox, height: usize, width: usize) -> FrameMask {
    let rect = PixelRect::from_box(b, height, width);
    let mut mask = FrameMask::empty(height, width);
    for (r, c) in rect.iter() {
        let ty = nearest(r - rect.row0, template.rows, rect.rows());
        let tx = nearest(c - rect.col0, template.cols, rect.cols());
        if template.get(ty, tx) {
            mask.set(r, c, true);
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    fn mask(h: usize, w: usize, on: &[(usize, usize)]) -> FrameMask {
        let mut m = FrameMask::empty(h, w);
        on.iter().for_each(|&(r, c)| m.set(r, c, true));
        m
    }

    #[test]
    fn majority_vote() {
        let b = bx(0.0, 0.0, 0.5, 0.5); // 2x2 pixels on a 4x4 raster
        let masks = [mask(4, 4, &[(0, 0), (0, 1)]), mask(4, 4, &[(0, 0), (1, 1)]), mask(4, 4, &[(0, 0), (1, 0)])];
        let t = build_shape_template(&masks, &[b; 3], (2, 2)).unwrap();
        assert_eq!(t.bits(), &[true, false, false, false]);
        let one = build_shape_template(&masks[1..2], &[b], (2, 2)).unwrap();
        assert_eq!(one.bits(), &[true, false, false, true]);
        let none = build_shape_template(&[mask(4, 4, &[])], &[b], (2, 2));
        assert_eq!(none, Err(GuidanceError::EmptyTemplate));
    }

    #[test]
    fn warp_identity_and_translation() {
        let t = ShapeTemplate::new(2, 3, vec![true, false, true, false, true, false]).unwrap();
        let b = bx(0.0, 0.0, 3.0 / 8.0, 2.0 / 8.0);
        let m = warp_template(&t, &b, 8, 8);
        assert_eq!(m.set_pixels(), vec![0, 2, 9]);
        let moved = bx(2.0 / 8.0, 1.0 / 8.0, 5.0 / 8.0, 3.0 / 8.0);
        let m = warp_template(&t, &moved, 8, 8);
        assert_eq!(m.set_pixels(), vec![8 + 2, 8 + 4, 16 + 3]);
    }

    #[test]
    fn full_template_fills_box() {
        let b = bx(0.25, 0.25, 1.0, 0.75);
        let m = warp_template(&ShapeTemplate::full(1, 1), &b, 4, 4);
        assert_eq!(m.count(), 6);
    }

    #[test]
    fn upsampling_repeats_cells() {
        let t = ShapeTemplate::new(1, 2, vec![true, false]).unwrap();
        let m = warp_template(&t, &bx(0.0, 0.0, 1.0, 0.25), 4, 4);
        assert_eq!(m.set_pixels(), vec![0, 1]);
    }
}
