use alloc::vec;
use alloc::vec::Vec;

use super::GuidanceError;
use crate::features::{squared_distance, FeatureVolume};
use crate::grid::{FrameMask, PixelRect};
use crate::layout::BoundingBox;

pub const KMEANS_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub mask: FrameMask,
    /// All in-box features were identical; the whole box is foreground.
    pub uniform: bool,
}

fn centroid(features: &FeatureVolume, frame: usize, pixels: &[(usize, usize)], channels: usize) -> Vec<f64> {
    let mut acc = vec![0.0f64; channels];
    for &(r, c) in pixels {
        for (a, v) in acc.iter_mut().zip(features.pixel(frame, r, c)) {
            *a += *v as f64;
        }
    }
    let n = pixels.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

fn distance_to(point: &[f32], center: &[f64]) -> f64 {
    point.iter().zip(center).map(|(p, c)| (*p as f64 - c) * (*p as f64 - c)).sum()
}

fn centers_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Two-means over the in-box feature vectors of one frame.
///
/// Seeds are the pair of in-box pixels at maximal feature distance (first
/// such pair in row-major order). Lloyd iterations run until the assignment
/// is stable, at most [`KMEANS_MAX_ITERATIONS`] times. The cluster whose
/// centroid lies farther from the mean feature of the one-pixel ring around
/// the box is foreground; when the box has no ring (it covers the whole
/// frame) the smaller cluster is foreground.
pub fn segment_foreground(
    features: &FeatureVolume,
    b: &BoundingBox,
    frame: usize,
) -> Result<Segmentation, GuidanceError> {
    if frame >= features.frames() {
        return Err(GuidanceError::FrameOutOfRange { frame, frames: features.frames() });
    }
    let (h, w, ch) = (features.height(), features.width(), features.channels());
    let rect = PixelRect::from_box(b, h, w);
    if rect.len() < 2 {
        return Err(GuidanceError::DegenerateBox { pixels: rect.len() });
    }
    let pixels: Vec<(usize, usize)> = rect.iter().collect();
    let feat = |i: usize| features.pixel(frame, pixels[i].0, pixels[i].1);

    let mut seeds = (0, 0);
    let mut widest = 0.0;
    for i in 0..pixels.len() {
        for j in i + 1..pixels.len() {
            let d = squared_distance(feat(i), feat(j));
            if d > widest {
                widest = d;
                seeds = (i, j);
            }
        }
    }
    if widest == 0.0 {
        log::warn!("frame {frame}: uniform features inside box; whole box is foreground");
        return Ok(Segmentation { mask: FrameMask::from_rect(&rect, h, w), uniform: true });
    }

    let mut centers = [
        feat(seeds.0).iter().map(|v| *v as f64).collect::<Vec<_>>(),
        feat(seeds.1).iter().map(|v| *v as f64).collect::<Vec<_>>(),
    ];
    let mut labels: Vec<u8> = vec![u8::MAX; pixels.len()];
    for _ in 0..KMEANS_MAX_ITERATIONS {
        let mut changed = false;
        for (i, current) in labels.iter_mut().enumerate() {
            let d0 = distance_to(feat(i), &centers[0]);
            let d1 = distance_to(feat(i), &centers[1]);
            let label = u8::from(d1 < d0);
            if *current != label {
                *current = label;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (k, center) in centers.iter_mut().enumerate() {
            let members: Vec<(usize, usize)> =
                pixels.iter().zip(&labels).filter(|(_, l)| **l as usize == k).map(|(p, _)| *p).collect();
            if !members.is_empty() {
                *center = centroid(features, frame, &members, ch);
            }
        }
    }

    let sizes = [labels.iter().filter(|l| **l == 0).count(), labels.iter().filter(|l| **l == 1).count()];
    if sizes.contains(&0) {
        return Ok(Segmentation { mask: FrameMask::from_rect(&rect, h, w), uniform: true });
    }
    let ring = rect.outer_ring(h, w);
    let foreground: u8 = if ring.is_empty() {
        u8::from(sizes[1] < sizes[0])
    } else {
        let ring_mean = centroid(features, frame, &ring, ch);
        let d0 = centers_distance(&centers[0], &ring_mean);
        let d1 = centers_distance(&centers[1], &ring_mean);
        u8::from(d1 > d0)
    };
    let mut mask = FrameMask::empty(h, w);
    for (&(r, c), &l) in pixels.iter().zip(&labels) {
        if l == foreground {
            mask.set(r, c, true);
        }
    }
    Ok(Segmentation { mask, uniform: false })
}
