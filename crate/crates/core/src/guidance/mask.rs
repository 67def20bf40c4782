use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::GuidanceError;
use crate::grid::TokenGrid;

/// Which guidance branch produced a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Motionless,
    Rigid,
    NonRigid,
    Composed,
}

impl Branch {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Motionless => "m",
            Self::Rigid => "r",
            Self::NonRigid => "nr",
            Self::Composed => "composed",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Self::Motionless => 0,
            Self::Rigid => 1,
            Self::NonRigid => 2,
            Self::Composed => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Self::Motionless,
            1 => Self::Rigid,
            2 => Self::NonRigid,
            3 => Self::Composed,
            _ => return None,
        })
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Nonnegative weights over `T x T` token pairs, stored as dense
/// `pixels x pixels` blocks keyed by `(source frame, target frame)`.
/// Missing blocks are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceMask {
    grid: TokenGrid,
    branch: Branch,
    instance: Option<u32>,
    blocks: BTreeMap<(usize, usize), Vec<f32>>,
}

impl GuidanceMask {
    pub fn new(grid: TokenGrid, branch: Branch, instance: Option<u32>) -> Self {
        Self { grid, branch, instance, blocks: BTreeMap::new() }
    }

    pub fn grid(&self) -> TokenGrid {
        self.grid
    }
    pub fn branch(&self) -> Branch {
        self.branch
    }
    pub fn instance(&self) -> Option<u32> {
        self.instance
    }
    pub fn tokens(&self) -> usize {
        self.grid.tokens()
    }
    pub fn block_size(&self) -> usize {
        self.grid.pixels_per_frame()
    }

    pub fn block(&self, src: usize, dst: usize) -> Option<&[f32]> {
        self.blocks.get(&(src, dst)).map(Vec::as_slice)
    }

    /// The block for a frame pair, zero-initialised on first access.
    pub fn block_mut(&mut self, src: usize, dst: usize) -> &mut [f32] {
        let n = self.block_size();
        self.blocks.entry((src, dst)).or_insert_with(|| vec![0.0; n * n])
    }

    pub fn insert_block(&mut self, src: usize, dst: usize, payload: Vec<f32>) -> Result<(), GuidanceError> {
        let n = self.block_size();
        if payload.len() != n * n {
            return Err(GuidanceError::ShapeMismatch { what: "block payload length" });
        }
        if src >= self.grid.frames || dst >= self.grid.frames {
            return Err(GuidanceError::FrameOutOfRange { frame: src.max(dst), frames: self.grid.frames });
        }
        self.blocks.insert((src, dst), payload);
        Ok(())
    }

    /// Blocks in `(src, dst)` order.
    pub fn blocks(&self) -> impl Iterator<Item = ((usize, usize), &[f32])> {
        self.blocks.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        let n = self.block_size();
        self.blocks.get(&(row / n, col / n)).map_or(0.0, |b| b[(row % n) * n + col % n])
    }

    /// Nonzero entries as `(row token, col token, value)`, row-major within blocks.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, f32)> + '_ {
        let n = self.block_size();
        self.blocks.iter().flat_map(move |(&(sf, df), payload)| {
            payload
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(move |(i, &v)| (sf * n + i / n, df * n + i % n, v))
        })
    }

    pub fn nnz(&self) -> usize {
        self.blocks.values().map(|b| b.iter().filter(|v| **v != 0.0).count()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|b| b.iter().all(|v| *v == 0.0))
    }

    /// Smallest and largest nonzero value.
    pub fn value_range(&self) -> Option<(f32, f32)> {
        self.blocks.values().flat_map(|b| b.iter().copied()).filter(|v| *v != 0.0).fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    pub fn sum(&self) -> f64 {
        self.blocks.values().flat_map(|b| b.iter()).map(|v| *v as f64).sum()
    }

    /// Row-major `T x T` copy.
    pub fn to_dense(&self) -> Vec<f32> {
        let t = self.tokens();
        let n = self.block_size();
        let mut dense = vec![0.0f32; t * t];
        for (&(sf, df), payload) in &self.blocks {
            for r in 0..n {
                let row = sf * n + r;
                let start = row * t + df * n;
                dense[start..start + n].copy_from_slice(&payload[r * n..(r + 1) * n]);
            }
        }
        dense
    }

    /// Drops blocks that are entirely zero.
    pub fn prune(&mut self) {
        self.blocks.retain(|_, b| b.iter().any(|v| *v != 0.0));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComposeReport {
    /// Entries that received nonzero weight from more than one input mask.
    pub overlapping_entries: usize,
    /// Entries whose summed weight exceeds 4 (more than two full-strength branches).
    pub entries_above_four: usize,
    pub max_value: f32,
}

impl ComposeReport {
    pub fn has_overlap(&self) -> bool {
        self.overlapping_entries > 0
    }
}

/// Elementwise sum of masks sharing one token grid.
pub fn compose_masks(masks: &[GuidanceMask]) -> Result<(GuidanceMask, ComposeReport), GuidanceError> {
    let Some(first) = masks.first() else {
        return Err(GuidanceError::ShapeMismatch { what: "no masks to compose" });
    };
    let grid = first.grid;
    if let Some(m) = masks.iter().find(|m| m.grid != grid) {
        return Err(GuidanceError::GridMismatch { expected: grid, found: m.grid });
    }
    if masks.len() == 1 {
        let mut out = first.clone();
        let max_value = out.value_range().map_or(0.0, |(_, hi)| hi);
        out.branch = Branch::Composed;
        out.instance = None;
        let report = ComposeReport {
            overlapping_entries: 0,
            entries_above_four: out.nonzero().filter(|e| e.2 > 4.0).count(),
            max_value,
        };
        return Ok((out, report));
    }
    let mut out = GuidanceMask::new(grid, Branch::Composed, None);
    let n = out.block_size();
    let mut contributors: BTreeMap<(usize, usize), Vec<u8>> = BTreeMap::new();
    for m in masks {
        for (&key, payload) in &m.blocks {
            let counts = contributors.entry(key).or_insert_with(|| vec![0u8; n * n]);
            let target = out.block_mut(key.0, key.1);
            for ((dst, src), count) in target.iter_mut().zip(payload).zip(counts.iter_mut()) {
                if *src != 0.0 {
                    *dst += *src;
                    *count = count.saturating_add(1);
                }
            }
        }
    }
    let mut report = ComposeReport {
        overlapping_entries: contributors.values().flat_map(|c| c.iter()).filter(|c| **c > 1).count(),
        ..ComposeReport::default()
    };
    for (_, _, v) in out.nonzero() {
        report.max_value = report.max_value.max(v);
        if v > 4.0 {
            report.entries_above_four += 1;
        }
    }
    if report.has_overlap() {
        log::warn!(
            "{} token pairs receive guidance from several masks (max weight {})",
            report.overlapping_entries,
            report.max_value
        );
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TokenGrid {
        TokenGrid::new(2, 1, 2)
    }

    #[test]
    fn dense_and_get_agree() {
        let mut m = GuidanceMask::new(grid(), Branch::Rigid, Some(0));
        m.block_mut(0, 1)[1] = 1.5;
        m.block_mut(1, 1)[2] = 2.0;
        let d = m.to_dense();
        let t = m.tokens();
        for r in 0..t {
            for c in 0..t {
                assert_eq!(d[r * t + c], m.get(r, c));
            }
        }
        assert_eq!(m.get(0, 3), 1.5);
        assert_eq!(m.get(3, 2), 2.0);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.value_range(), Some((1.5, 2.0)));
    }

    #[test]
    fn compose_single_is_identity() {
        let mut m = GuidanceMask::new(grid(), Branch::Rigid, Some(0));
        m.block_mut(0, 0)[0] = 2.0;
        let (c, r) = compose_masks(&[m.clone()]).unwrap();
        assert_eq!(c.to_dense(), m.to_dense());
        assert!(!r.has_overlap());
    }

    #[test]
    fn compose_disjoint_and_overlap() {
        let mut a = GuidanceMask::new(grid(), Branch::Rigid, Some(0));
        a.block_mut(0, 0)[0] = 2.0;
        let mut b = GuidanceMask::new(grid(), Branch::Motionless, Some(1));
        b.block_mut(1, 0)[3] = 1.0;
        let (c, r) = compose_masks(&[a.clone(), b]).unwrap();
        assert_eq!((c.get(0, 0), c.get(3, 1), c.nnz()), (2.0, 1.0, 2));
        assert!(!r.has_overlap());

        let mut nr = GuidanceMask::new(grid(), Branch::NonRigid, Some(2));
        nr.block_mut(0, 0)[0] = 2.0;
        let (c, r) = compose_masks(&[a, nr]).unwrap();
        assert_eq!(c.get(0, 0), 4.0);
        assert_eq!(r.overlapping_entries, 1);
        assert_eq!(r.max_value, 4.0);
    }

    #[test]
    fn compose_rejects_grid_mismatch() {
        let a = GuidanceMask::new(grid(), Branch::Rigid, None);
        let b = GuidanceMask::new(TokenGrid::new(3, 1, 2), Branch::Rigid, None);
        assert!(matches!(compose_masks(&[a, b]), Err(GuidanceError::GridMismatch { .. })));
    }
}
