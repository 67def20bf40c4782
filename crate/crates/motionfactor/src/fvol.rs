//! `FVOL` feature-volume files: the magic `FVOL`, a little-endian `u16`
//! version, `F H W C` as little-endian `u32`, then `F*H*W*C` little-endian
//! `f32` values.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use motionfactor_core::features::{FeatureError, FeatureVolume};

pub const MAGIC: [u8; 4] = *b"FVOL";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 * 4;

#[derive(Debug, thiserror::Error)]
pub enum FvolError {
    #[error("not an FVOL file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported FVOL version {0}")]
    UnsupportedVersion(u16),
    #[error("header dimensions {0:?} overflow the addressable size")]
    DimOverflow([u32; 4]),
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("header truncated")]
    TruncatedHeader,
    #[error("invalid volume: {0}")]
    Invalid(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_volume<W: Write>(mut w: W, volume: &FeatureVolume) -> Result<(), FvolError> {
    let dims = volume.dims();
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    for d in dims {
        let d = u32::try_from(d).map_err(|_| FvolError::DimOverflow(dims.map(|d| d as u32)))?;
        header.extend_from_slice(&d.to_le_bytes());
    }
    w.write_all(&header)?;
    let mut payload = Vec::with_capacity(volume.data().len() * 4);
    for v in volume.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

/// Reads exactly one volume. Trailing bytes are ignored.
pub fn read_volume<R: Read>(mut r: R) -> Result<FeatureVolume, FvolError> {
    let mut header = [0u8; HEADER_LEN];
    if read_full(&mut r, &mut header)? < HEADER_LEN {
        return Err(FvolError::TruncatedHeader);
    }
    let magic: [u8; 4] = header[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(FvolError::BadMagic(magic));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(FvolError::UnsupportedVersion(version));
    }
    let mut dims = [0u32; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        let at = 6 + 4 * i;
        *d = u32::from_le_bytes(header[at..at + 4].try_into().expect("4 bytes"));
    }
    let count = dims.iter().try_fold(1u64, |acc, d| acc.checked_mul(*d as u64));
    let bytes = count.and_then(|c| c.checked_mul(4)).ok_or(FvolError::DimOverflow(dims))?;
    let len = usize::try_from(bytes).map_err(|_| FvolError::DimOverflow(dims))?;

    let mut payload = Vec::new();
    let found = r.by_ref().take(bytes).read_to_end(&mut payload)? as u64;
    if found < bytes {
        return Err(FvolError::TruncatedPayload { expected: bytes, found });
    }
    debug_assert_eq!(payload.len(), len);
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let [f, h, w, c] = dims.map(|d| d as usize);
    Ok(FeatureVolume::new(f, h, w, c, data)?)
}

pub(crate) fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, FvolError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

pub fn save_volume(volume: &FeatureVolume, path: impl AsRef<Path>) -> Result<(), FvolError> {
    write_volume(BufWriter::new(File::create(path)?), volume)
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<FeatureVolume, FvolError> {
    read_volume(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureVolume {
        let data = (0..2 * 3 * 4 * 2).map(|i| i as f32 * 0.25 - 3.0).collect();
        FeatureVolume::new(2, 3, 4, 2, data).unwrap()
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_volume(&mut buf, &sample()).unwrap();
        assert_eq!(&buf[..4], b"FVOL");
        assert_eq!(buf.len(), HEADER_LEN + 48 * 4);
        assert_eq!(read_volume(buf.as_slice()).unwrap(), sample());
    }

    #[test]
    fn rejects_bad_magic() {
        let mut buf = Vec::new();
        write_volume(&mut buf, &sample()).unwrap();
        buf[0] = b'X';
        assert!(matches!(read_volume(buf.as_slice()), Err(FvolError::BadMagic(_))));
    }

    #[test]
    fn rejects_short_payload() {
        let mut buf = Vec::new();
        write_volume(&mut buf, &sample()).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_volume(buf.as_slice()), Err(FvolError::TruncatedPayload { expected: 192, found: 189 })));
    }

    #[test]
    fn rejects_huge_dims() {
        let mut buf = Vec::from(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        for _ in 0..4 {
            buf.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(matches!(read_volume(buf.as_slice()), Err(FvolError::DimOverflow(_))));
    }
}
