//! `GMSK` guidance-mask files plus a JSON sidecar.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! "GMSK" | version u16 | tokens u64 | branch u8 | instance i64 (-1: none)
//! frames u32 | height u32 | width u32 | block_count u32
//! block_count x ( row_block u32 | col_block u32 | (H*W)^2 x f32 )
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use motionfactor_core::grid::TokenGrid;
use motionfactor_core::guidance::{Branch, GuidanceError, GuidanceMask};
use serde::{Deserialize, Serialize};

use crate::fvol::read_full;

pub const MAGIC: [u8; 4] = *b"GMSK";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 1 + 8 + 4 * 4;

#[derive(Debug, thiserror::Error)]
pub enum GmskError {
    #[error("not a GMSK file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported GMSK version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown branch code {0}")]
    UnknownBranch(u8),
    #[error("token count {tokens} does not match grid {frames}x{height}x{width}")]
    TokenMismatch { tokens: u64, frames: u32, height: u32, width: u32 },
    #[error("grid dimensions overflow")]
    DimOverflow,
    #[error("file truncated")]
    Truncated,
    #[error("invalid mask: {0}")]
    Invalid(#[from] GuidanceError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_mask<W: Write>(mut w: W, mask: &GuidanceMask) -> Result<(), GmskError> {
    let grid = mask.grid();
    let dim = |v: usize| u32::try_from(v).map_err(|_| GmskError::DimOverflow);
    let mut buf = Vec::with_capacity(HEADER_LEN);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.tokens() as u64).to_le_bytes());
    buf.push(mask.branch().code());
    buf.extend_from_slice(&mask.instance().map_or(-1i64, i64::from).to_le_bytes());
    for v in [grid.frames, grid.height, grid.width, mask.block_count()] {
        buf.extend_from_slice(&dim(v)?.to_le_bytes());
    }
    w.write_all(&buf)?;
    for ((src, dst), payload) in mask.blocks() {
        buf.clear();
        buf.extend_from_slice(&dim(src)?.to_le_bytes());
        buf.extend_from_slice(&dim(dst)?.to_le_bytes());
        for v in payload {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn take<const N: usize>(buf: &[u8], at: &mut usize) -> [u8; N] {
    let out = buf[*at..*at + N].try_into().expect("length checked by caller");
    *at += N;
    out
}

pub fn read_mask<R: Read>(mut r: R) -> Result<GuidanceMask, GmskError> {
    let mut header = [0u8; HEADER_LEN];
    if read_full(&mut r, &mut header).map_err(|_| GmskError::Truncated)? < HEADER_LEN {
        return Err(GmskError::Truncated);
    }
    let mut at = 0;
    let magic = take::<4>(&header, &mut at);
    if magic != MAGIC {
        return Err(GmskError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(take(&header, &mut at));
    if version != VERSION {
        return Err(GmskError::UnsupportedVersion(version));
    }
    let tokens = u64::from_le_bytes(take(&header, &mut at));
    let code = take::<1>(&header, &mut at)[0];
    let branch = Branch::from_code(code).ok_or(GmskError::UnknownBranch(code))?;
    let instance = i64::from_le_bytes(take(&header, &mut at));
    let instance = if instance < 0 { None } else { Some(u32::try_from(instance).map_err(|_| GmskError::DimOverflow)?) };
    let [frames, height, width, blocks] = [0; 4].map(|_| u32::from_le_bytes(take(&header, &mut at)));
    let expected = (frames as u64).checked_mul(height as u64).and_then(|v| v.checked_mul(width as u64));
    if expected != Some(tokens) {
        return Err(GmskError::TokenMismatch { tokens, frames, height, width });
    }
    let grid = TokenGrid::new(frames as usize, height as usize, width as usize);
    let n = grid.pixels_per_frame();
    let block_bytes = n.checked_mul(n).and_then(|v| v.checked_mul(4)).ok_or(GmskError::DimOverflow)?;

    let mut mask = GuidanceMask::new(grid, branch, instance);
    let mut key = [0u8; 8];
    for _ in 0..blocks {
        if read_full(&mut r, &mut key).map_err(|_| GmskError::Truncated)? < 8 {
            return Err(GmskError::Truncated);
        }
        let src = u32::from_le_bytes(key[..4].try_into().expect("4 bytes")) as usize;
        let dst = u32::from_le_bytes(key[4..].try_into().expect("4 bytes")) as usize;
        let mut raw = Vec::new();
        let got = r.by_ref().take(block_bytes as u64).read_to_end(&mut raw)?;
        if got < block_bytes {
            return Err(GmskError::Truncated);
        }
        let payload = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        mask.insert_block(src, dst, payload)?;
    }
    Ok(mask)
}

pub fn save_mask(mask: &GuidanceMask, path: impl AsRef<Path>) -> Result<(), GmskError> {
    write_mask(BufWriter::new(File::create(path)?), mask)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<GuidanceMask, GmskError> {
    read_mask(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDims {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub tokens: usize,
}

/// Where a mask came from: input files and the parameters used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MaskInputs {
    pub layout: Option<String>,
    pub features: Option<String>,
    pub alpha_canvas: Option<f64>,
    pub alpha_pixel: Option<f64>,
    pub reference_frame: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub version: u16,
    pub grid: GridDims,
    pub branch: String,
    pub instance: Option<u32>,
    pub blocks: usize,
    pub nonzero: usize,
    pub value_range: Option<[f32; 2]>,
    pub inputs: MaskInputs,
}

impl Sidecar {
    pub fn describe(mask: &GuidanceMask, inputs: MaskInputs) -> Self {
        let g = mask.grid();
        Self {
            format: "GMSK".into(),
            version: VERSION,
            grid: GridDims { frames: g.frames, height: g.height, width: g.width, tokens: g.tokens() },
            branch: mask.branch().tag().into(),
            instance: mask.instance(),
            blocks: mask.block_count(),
            nonzero: mask.nnz(),
            value_range: mask.value_range().map(|(lo, hi)| [lo, hi]),
            inputs,
        }
    }
}

/// Writes `<stem>.gmsk` and `<stem>.json` into `dir`.
pub fn save_with_sidecar(
    mask: &GuidanceMask,
    dir: impl AsRef<Path>,
    stem: &str,
    inputs: MaskInputs,
) -> Result<Sidecar, GmskError> {
    let dir = dir.as_ref();
    save_mask(mask, dir.join(format!("{stem}.gmsk")))?;
    let sidecar = Sidecar::describe(mask, inputs);
    let json = serde_json::to_string_pretty(&sidecar).map_err(io::Error::other)?;
    std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    Ok(sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GuidanceMask {
        let mut m = GuidanceMask::new(TokenGrid::new(3, 2, 2), Branch::Rigid, Some(4));
        m.block_mut(0, 2)[5] = 1.5;
        m.block_mut(2, 1)[0] = 2.0;
        m
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_mask(&mut buf, &sample()).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 2 * (8 + 16 * 4));
        assert_eq!(read_mask(buf.as_slice()).unwrap(), sample());
    }

    #[test]
    fn composed_without_instance() {
        let m = GuidanceMask::new(TokenGrid::new(1, 1, 1), Branch::Composed, None);
        let mut buf = Vec::new();
        write_mask(&mut buf, &m).unwrap();
        assert_eq!(read_mask(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn corrupt_inputs() {
        let mut buf = Vec::new();
        write_mask(&mut buf, &sample()).unwrap();
        let mut bad = buf.clone();
        bad[1] = b'X';
        assert!(matches!(read_mask(bad.as_slice()), Err(GmskError::BadMagic(_))));
        let short = &buf[..buf.len() - 1];
        assert!(matches!(read_mask(short), Err(GmskError::Truncated)));
        let mut wrong_t = buf.clone();
        wrong_t[6] = 99;
        assert!(matches!(read_mask(wrong_t.as_slice()), Err(GmskError::TokenMismatch { .. })));
    }

    #[test]
    fn sidecar_summary() {
        let s = Sidecar::describe(&sample(), MaskInputs::default());
        assert_eq!(s.branch, "r");
        assert_eq!(s.nonzero, 2);
        assert_eq!(s.value_range, Some([1.5, 2.0]));
        assert_eq!(s.grid.tokens, 12);
    }
}
