//! Per-frame feature volumes and the deterministic synthetic backend that
//! stands in for diffusion features.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{PixelRect, TokenGrid};
use crate::layout::{LayoutError, SceneLayout};

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureError {
    ZeroDimension,
    LengthMismatch { expected: usize, found: usize },
    DimOverflow,
    NonFinite { index: usize },
    NegativeNoise,
    SignatureCount { expected: usize, found: usize },
    SignatureLength { expected: usize, found: usize },
    SignaturesTooClose { a: Option<u32>, b: Option<u32>, distance: f64 },
    Layout(LayoutError),
}

impl fmt::Display for FeatureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZeroDimension => f.write_str("feature volume dimensions must be positive"),
            Self::LengthMismatch { expected, found } => {
                write!(f, "feature payload has {found} values, expected {expected}")
            }
            Self::DimOverflow => f.write_str("feature volume dimensions overflow"),
            Self::NonFinite { index } => write!(f, "non-finite feature value at {index}"),
            Self::NegativeNoise => f.write_str("noise scale must be nonnegative"),
            Self::SignatureCount { expected, found } => {
                write!(f, "{found} signatures for {expected} tracks")
            }
            Self::SignatureLength { expected, found } => {
                write!(f, "signature has {found} channels, expected {expected}")
            }
            Self::SignaturesTooClose { a, b, distance } => {
                let name = |x: &Option<u32>| x.map_or("background".into(), |id| alloc::format!("track {id}"));
                write!(f, "{} and {} signatures are only {distance} apart", name(a), name(b))
            }
            Self::Layout(e) => write!(f, "layout: {e}"),
        }
    }
}

impl core::error::Error for FeatureError {}

impl From<LayoutError> for FeatureError {
    fn from(e: LayoutError) -> Self {
        Self::Layout(e)
    }
}

/// `F x H x W x C` row-major `f32` features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    frames: usize,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

pub(crate) fn checked_len(dims: [usize; 4]) -> Result<usize, FeatureError> {
    if dims.contains(&0) {
        return Err(FeatureError::ZeroDimension);
    }
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or(FeatureError::DimOverflow)
}

impl FeatureVolume {
    pub fn new(
        frames: usize,
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, FeatureError> {
        let expected = checked_len([frames, height, width, channels])?;
        if data.len() != expected {
            return Err(FeatureError::LengthMismatch { expected, found: data.len() });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { index });
        }
        Ok(Self { frames, height, width, channels, data })
    }

    pub fn zeros(frames: usize, height: usize, width: usize, channels: usize) -> Result<Self, FeatureError> {
        let n = checked_len([frames, height, width, channels])?;
        Ok(Self { frames, height, width, channels, data: vec![0.0; n] })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn dims(&self) -> [usize; 4] {
        [self.frames, self.height, self.width, self.channels]
    }

    pub fn grid(&self) -> TokenGrid {
        TokenGrid::new(self.frames, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, frame: usize, row: usize, col: usize) -> &[f32] {
        let start = ((frame * self.height + row) * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, frame: usize, row: usize, col: usize) -> &mut [f32] {
        let start = ((frame * self.height + row) * self.width + col) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    pub fn frame(&self, frame: usize) -> &[f32] {
        let n = self.height * self.width * self.channels;
        &self.data[frame * n..(frame + 1) * n]
    }
}

/// Squared L2 distance between two feature vectors, accumulated in `f64`.
#[inline]
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    layout: SceneLayout,
    seed: u64,
    noise_scale: f32,
    signatures: Vec<Vec<f32>>,
}

impl SyntheticSceneSpec {
    /// `signatures[i]` belongs to `layout.tracks[i]`. Signatures, and the
    /// zero background, must be pairwise more than `4 * noise_scale` apart.
    pub fn new(
        layout: SceneLayout,
        seed: u64,
        noise_scale: f32,
        signatures: Vec<Vec<f32>>,
    ) -> Result<Self, FeatureError> {
        layout.validate()?;
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(FeatureError::NegativeNoise);
        }
        if signatures.len() != layout.tracks.len() {
            return Err(FeatureError::SignatureCount { expected: layout.tracks.len(), found: signatures.len() });
        }
        let channels = signatures.first().map_or(1, Vec::len);
        if channels == 0 {
            return Err(FeatureError::ZeroDimension);
        }
        for s in &signatures {
            if s.len() != channels {
                return Err(FeatureError::SignatureLength { expected: channels, found: s.len() });
            }
            if let Some(index) = s.iter().position(|v| !v.is_finite()) {
                return Err(FeatureError::NonFinite { index });
            }
        }
        let background = vec![0.0f32; channels];
        let threshold = 4.0 * noise_scale as f64;
        let labelled: Vec<(Option<u32>, &[f32])> = core::iter::once((None, background.as_slice()))
            .chain(layout.tracks.iter().zip(&signatures).map(|(t, s)| (Some(t.id), s.as_slice())))
            .collect();
        for i in 0..labelled.len() {
            for j in i + 1..labelled.len() {
                let distance = crate::math::sqrt(squared_distance(labelled[i].1, labelled[j].1));
                if distance <= threshold || distance == 0.0 {
                    return Err(FeatureError::SignaturesTooClose { a: labelled[i].0, b: labelled[j].0, distance });
                }
            }
        }
        Ok(Self { layout, seed, noise_scale, signatures })
    }

    /// Distinct signatures: track `k` gets `1 + k / C` on channel `k mod C`.
    pub fn with_default_signatures(
        layout: SceneLayout,
        seed: u64,
        noise_scale: f32,
        channels: usize,
    ) -> Result<Self, FeatureError> {
        let signatures = default_signatures(layout.tracks.len(), channels);
        Self::new(layout, seed, noise_scale, signatures)
    }

    pub fn layout(&self) -> &SceneLayout {
        &self.layout
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn noise_scale(&self) -> f32 {
        self.noise_scale
    }
    pub fn signatures(&self) -> &[Vec<f32>] {
        &self.signatures
    }
    pub fn channels(&self) -> usize {
        self.signatures.first().map_or(1, Vec::len)
    }
}

pub fn default_signatures(count: usize, channels: usize) -> Vec<Vec<f32>> {
    let channels = channels.max(1);
    (0..count)
        .map(|k| {
            let mut s = vec![0.0f32; channels];
            s[k % channels] = 1.0 + (k / channels) as f32;
            s
        })
        .collect()
}

/// Two tracks' stamps share pixels in a frame; the later track is drawn on top.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlap {
    pub frame: usize,
    pub below: u32,
    pub above: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub volume: FeatureVolume,
    pub overlaps: Vec<Overlap>,
}

/// Stamps each track's signature over its box pixels (later tracks on
/// top), then adds seeded Gaussian noise to every value.
pub fn synthesize_features(spec: &SyntheticSceneSpec, height: usize, width: usize) -> Result<Synthesis, FeatureError> {
    let layout = &spec.layout;
    let channels = spec.channels();
    let mut volume = FeatureVolume::zeros(layout.frames, height, width, channels)?;
    let mut overlaps = Vec::new();
    for frame in 0..layout.frames {
        let rects: Vec<PixelRect> =
            layout.tracks.iter().map(|t| PixelRect::from_box(&t.boxes[frame], height, width)).collect();
        for (i, (track, rect)) in layout.tracks.iter().zip(&rects).enumerate() {
            for (lower, other) in layout.tracks[..i].iter().zip(&rects[..i]) {
                if rect.iter().any(|(r, c)| other.contains(r, c)) {
                    overlaps.push(Overlap { frame, below: lower.id, above: track.id });
                }
            }
            for (r, c) in rect.iter() {
                volume.pixel_mut(frame, r, c).copy_from_slice(&spec.signatures[i]);
            }
        }
    }
    if spec.noise_scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for v in volume.data.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += spec.noise_scale * z as f32;
        }
    }
    if !overlaps.is_empty() {
        log::warn!("{} overlapping stamps; later tracks drawn on top", overlaps.len());
    }
    Ok(Synthesis { volume, overlaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MotionCategory;
    use crate::layout::{BoundingBox, Track};

    fn layout(boxes: Vec<BoundingBox>) -> SceneLayout {
        SceneLayout { frames: boxes.len(), tracks: vec![Track { id: 0, category: MotionCategory::Rigid, boxes }] }
    }

    #[test]
    fn static_box_zero_noise_frames_identical() {
        let b = BoundingBox::new(0.25, 0.25, 0.5, 0.5).unwrap();
        let spec = SyntheticSceneSpec::with_default_signatures(layout(vec![b; 4]), 1, 0.0, 3).unwrap();
        let v = synthesize_features(&spec, 8, 8).unwrap().volume;
        for f in 1..4 {
            assert_eq!(v.frame(f), v.frame(0));
        }
        assert_eq!(v.pixel(0, 2, 2), &[1.0, 0.0, 0.0]);
        assert_eq!(v.pixel(0, 0, 0), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn shifting_box_translates_stamp() {
        let w = 16.0;
        let boxes: Vec<BoundingBox> =
            (0..4).map(|f| BoundingBox::new((4.0 + f as f64) / w, 0.25, (8.0 + f as f64) / w, 0.5).unwrap()).collect();
        let spec = SyntheticSceneSpec::with_default_signatures(layout(boxes), 1, 0.0, 2).unwrap();
        let v = synthesize_features(&spec, 16, 16).unwrap().volume;
        for f in 0..3 {
            for r in 0..16 {
                for c in 0..15 {
                    assert_eq!(v.pixel(f, r, c), v.pixel(f + 1, r, c + 1), "f={f} r={r} c={c}");
                }
            }
        }
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let b = BoundingBox::new(0.25, 0.25, 0.5, 0.5).unwrap();
        let spec = SyntheticSceneSpec::with_default_signatures(layout(vec![b; 3]), 42, 0.1, 4).unwrap();
        let a = synthesize_features(&spec, 8, 8).unwrap().volume;
        let b2 = synthesize_features(&spec, 8, 8).unwrap().volume;
        assert!(a.data().iter().zip(b2.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let other = SyntheticSceneSpec::with_default_signatures(layout(vec![b; 3]), 43, 0.1, 4).unwrap();
        assert_ne!(synthesize_features(&other, 8, 8).unwrap().volume, a);
    }

    #[test]
    fn signatures_must_separate() {
        let b = BoundingBox::new(0.25, 0.25, 0.5, 0.5).unwrap();
        let err = SyntheticSceneSpec::new(layout(vec![b]), 0, 0.3, vec![vec![1.0, 0.0]]).unwrap_err();
        assert!(matches!(err, FeatureError::SignaturesTooClose { a: None, b: Some(0), .. }));
    }

    #[test]
    fn overlapping_stamps_reported() {
        let a = BoundingBox::new(0.0, 0.0, 0.5, 0.5).unwrap();
        let b = BoundingBox::new(0.25, 0.25, 0.75, 0.75).unwrap();
        let l = SceneLayout {
            frames: 1,
            tracks: vec![
                Track { id: 0, category: MotionCategory::Motionless, boxes: vec![a] },
                Track { id: 1, category: MotionCategory::Motionless, boxes: vec![b] },
            ],
        };
        let spec = SyntheticSceneSpec::with_default_signatures(l, 0, 0.0, 2).unwrap();
        let s = synthesize_features(&spec, 8, 8).unwrap();
        assert_eq!(s.overlaps, vec![Overlap { frame: 0, below: 0, above: 1 }]);
        assert_eq!(s.volume.pixel(0, 3, 3), &[0.0, 1.0]);
    }

    #[test]
    fn volume_rejects_bad_payload() {
        assert_eq!(
            FeatureVolume::new(1, 2, 2, 1, vec![0.0; 3]),
            Err(FeatureError::LengthMismatch { expected: 4, found: 3 })
        );
        assert_eq!(FeatureVolume::new(0, 2, 2, 1, vec![]), Err(FeatureError::ZeroDimension));
        assert_eq!(FeatureVolume::new(1, 1, 1, 1, vec![f32::NAN]), Err(FeatureError::NonFinite { index: 0 }));
    }
}
