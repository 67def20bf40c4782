//! Token indexing, pixel rectangles and per-frame binary masks.

use alloc::vec;
use alloc::vec::Vec;

use crate::layout::BoundingBox;
use crate::math;

/// Spatio-temporal token lattice. Token `t` is frame-major, then row, then column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenGrid {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl TokenGrid {
    pub const fn new(frames: usize, height: usize, width: usize) -> Self {
        Self { frames, height, width }
    }

    pub const fn pixels_per_frame(&self) -> usize {
        self.height * self.width
    }

    pub const fn tokens(&self) -> usize {
        self.frames * self.height * self.width
    }

    #[inline]
    pub const fn index(&self, frame: usize, row: usize, col: usize) -> usize {
        (frame * self.height + row) * self.width + col
    }

    #[inline]
    pub const fn coords(&self, token: usize) -> (usize, usize, usize) {
        let per_frame = self.pixels_per_frame();
        let pixel = token % per_frame;
        (token / per_frame, pixel / self.width, pixel % self.width)
    }
}

/// Half-open pixel rectangle `[row0, row1) x [col0, col1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelRect {
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
}

// Absorbs round-off in coordinates that sit exactly on a pixel center.
const CENTER_EPS: f64 = 1e-9;

fn covered_range(lo: f64, hi: f64, n: usize) -> (usize, usize) {
    let scale = n as f64;
    let first = math::ceil(lo * scale - 0.5 - CENTER_EPS).max(0.0);
    let end = math::ceil(hi * scale - 0.5 - CENTER_EPS).max(0.0);
    let first = (first as usize).min(n);
    let end = (end as usize).min(n);
    (first, end.max(first))
}

impl PixelRect {
    /// Pixels whose centers fall inside the box on an `height x width` raster.
    pub fn from_box(b: &BoundingBox, height: usize, width: usize) -> Self {
        let (row0, row1) = covered_range(b.y_min, b.y_max, height);
        let (col0, col1) = covered_range(b.x_min, b.x_max, width);
        Self { row0, row1, col0, col1 }
    }

    pub fn rows(&self) -> usize {
        self.row1 - self.row0
    }

    pub fn cols(&self) -> usize {
        self.col1 - self.col0
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row0..self.row1).contains(&row) && (self.col0..self.col1).contains(&col)
    }

    /// `(row, col)` pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.row0..self.row1).flat_map(move |r| (self.col0..self.col1).map(move |c| (r, c)))
    }

    /// The one-pixel ring around the rectangle, clipped to the raster.
    pub fn outer_ring(&self, height: usize, width: usize) -> Vec<(usize, usize)> {
        let r0 = self.row0.saturating_sub(1);
        let c0 = self.col0.saturating_sub(1);
        let r1 = (self.row1 + 1).min(height);
        let c1 = (self.col1 + 1).min(width);
        let mut ring = Vec::new();
        for r in r0..r1 {
            for c in c0..c1 {
                if !self.contains(r, c) {
                    ring.push((r, c));
                }
            }
        }
        ring
    }
}

/// Binary mask over one frame's `height x width` pixels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrameMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl FrameMask {
    pub fn empty(height: usize, width: usize) -> Self {
        Self { height, width, bits: vec![false; height * width] }
    }

    pub fn from_rect(rect: &PixelRect, height: usize, width: usize) -> Self {
        let mut m = Self::empty(height, width);
        for (r, c) in rect.iter() {
            m.set(r, c, true);
        }
        m
    }

    /// Panics if `bits.len() != height * width`.
    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), height * width, "mask size mismatch");
        Self { height, width, bits }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Flat pixel indices (`row * width + col`) of set pixels, ascending.
    pub fn set_pixels(&self) -> Vec<usize> {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect()
    }

    /// True when no set pixel lies outside `rect`.
    pub fn within(&self, rect: &PixelRect) -> bool {
        self.set_pixels().into_iter().all(|p| rect.contains(p / self.width, p % self.width))
    }
}
