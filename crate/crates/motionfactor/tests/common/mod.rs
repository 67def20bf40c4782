//! Fixtures and brute-force reference implementations shared by the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

use motionfactor_core::features::FeatureVolume;
use motionfactor_core::graph::{InstanceNode, KinematicHint, MotionGraph, RelationEdge};
use motionfactor_core::grid::{FrameMask, TokenGrid};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_volume(rng: &mut impl Rng, frames: usize, height: usize, width: usize, channels: usize) -> FeatureVolume {
    let data = (0..frames * height * width * channels).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    FeatureVolume::new(frames, height, width, channels, data).unwrap()
}

// ---------------------------------------------------------------- parser

/// `(noun phrase, attributes, category, speed, oscillation, direction)`
pub type NodeRow = (&'static str, &'static [&'static str], &'static str, &'static str, &'static str, &'static str);
/// `(src, dst, kind, phrase, placement)`
pub type EdgeRow = (u32, u32, &'static str, &'static str, &'static str);

pub struct ParserFixture {
    pub prompt: &'static str,
    pub nodes: &'static [NodeRow],
    pub edges: &'static [EdgeRow],
}

impl ParserFixture {
    pub fn expected(&self) -> MotionGraph {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, (phrase, attrs, category, speed, osc, dir))| InstanceNode {
                id: id as u32,
                noun_phrase: phrase.to_string(),
                motion_attributes: attrs.iter().map(|a| a.to_string()).collect(),
                category: category.parse().unwrap(),
                hint: KinematicHint {
                    speed: speed.parse().unwrap(),
                    oscillation: osc.parse().unwrap(),
                    direction: dir.parse().unwrap(),
                },
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|(src, dst, kind, phrase, placement)| RelationEdge {
                src: *src,
                dst: *dst,
                kind: kind.parse().unwrap(),
                phrase: phrase.to_string(),
                placement: Some(placement.parse().unwrap()),
            })
            .collect();
        MotionGraph { nodes, edges, source_prompt: self.prompt.to_string() }
    }
}

macro_rules! fixture {
    ($prompt:literal; $($node:expr),* ; $($edge:expr),*) => {
        ParserFixture { prompt: $prompt, nodes: &[$($node),*], edges: &[$($edge),*] }
    };
}

pub const PARSER_FIXTURES: &[ParserFixture] = &[
    fixture!("a parked car next to a tree";
        ("car", &["parked"], "motionless", "medium", "none", "none"),
        ("tree", &[], "motionless", "medium", "none", "none");
        (0, 1, "spatial", "next to", "left-of")),
    fixture!("an ambulance driving down the street";
        ("ambulance", &["driving"], "rigid", "medium", "none", "right");),
    fixture!("a woman dancing";
        ("woman", &["dancing"], "nonrigid", "medium", "sway", "none");),
    fixture!("two men boxing";
        ("man", &["boxing"], "nonrigid", "medium", "pulse", "none"),
        ("man", &["boxing"], "nonrigid", "medium", "pulse", "none");
        (0, 1, "dynamic", "boxing", "near")),
    fixture!("a bus passing by a tree";
        ("bus", &["passing by"], "rigid", "medium", "none", "right"),
        ("tree", &[], "motionless", "medium", "none", "none");
        (0, 1, "dynamic", "pass by", "near")),
    fixture!("a flag waving";
        ("flag", &["waving"], "nonrigid", "medium", "wave", "none");),
    fixture!("a red car driving slowly leftward";
        ("red car", &["driving"], "rigid", "slow", "none", "left");),
    fixture!("a man and a woman standing";
        ("man", &["standing"], "motionless", "medium", "none", "none"),
        ("woman", &["standing"], "motionless", "medium", "none", "none");),
    fixture!("a parked car, a man walking and a flag waving";
        ("car", &["parked"], "motionless", "medium", "none", "none"),
        ("man", &["walking"], "rigid", "slow", "none", "right"),
        ("flag", &["waving"], "nonrigid", "medium", "wave", "none");),
    fixture!("a dog running toward a ball";
        ("dog", &["running toward"], "rigid", "fast", "none", "right"),
        ("ball", &[], "motionless", "medium", "none", "none");
        (0, 1, "dynamic", "run toward", "toward")),
    fixture!("a bird flying over a house";
        ("bird", &["flying over"], "rigid", "fast", "none", "right"),
        ("house", &[], "motionless", "medium", "none", "none");
        (0, 1, "dynamic", "fly over", "above")),
    fixture!("a cat sleeping under a table";
        ("cat", &["sleeping"], "motionless", "medium", "none", "none"),
        ("table", &[], "motionless", "medium", "none", "none");
        (0, 1, "spatial", "under", "below")),
    fixture!("a candle burning on a table";
        ("candle", &["burning"], "nonrigid", "medium", "pulse", "none");),
    fixture!("three children jumping";
        ("child", &["jumping"], "nonrigid", "medium", "jump", "none"),
        ("child", &["jumping"], "nonrigid", "medium", "jump", "none"),
        ("child", &["jumping"], "nonrigid", "medium", "jump", "none");),
    fixture!("a boat sailing while a fire burns";
        ("boat", &["sailing"], "rigid", "slow", "none", "right"),
        ("fire", &["burns"], "nonrigid", "medium", "pulse", "none");),
    fixture!("a horse standing next to a man dancing";
        ("horse", &["standing"], "motionless", "medium", "none", "none"),
        ("man", &["dancing"], "nonrigid", "medium", "sway", "none");
        (0, 1, "spatial", "next to", "left-of")),
    fixture!("a truck moving away from a house";
        ("truck", &["moving away from"], "rigid", "medium", "none", "right"),
        ("house", &[], "motionless", "medium", "none", "none");
        (0, 1, "dynamic", "move away from", "away")),
    fixture!("a small boy and a big dog walking quickly";
        ("small boy", &["walking"], "rigid", "fast", "none", "right"),
        ("big dog", &["walking"], "rigid", "fast", "none", "right");),
    fixture!("two people hugging next to a fountain";
        ("person", &["hugging"], "nonrigid", "medium", "pulse", "none"),
        ("person", &["hugging"], "nonrigid", "medium", "pulse", "none"),
        ("fountain", &[], "nonrigid", "medium", "jump", "none");
        (0, 1, "dynamic", "hugging", "near"),
        (0, 2, "spatial", "next to", "left-of"),
        (1, 2, "spatial", "next to", "left-of")),
    fixture!("a plane flying above a car driving";
        ("plane", &["flying"], "rigid", "fast", "none", "right"),
        ("car", &["driving"], "rigid", "medium", "none", "right");
        (0, 1, "spatial", "above", "above")),
];

// ---------------------------------------------------------------- oracles

/// `argmin_f sum_g mean_pixels |phi_f(p) - phi_g(p)|`, first index on ties.
pub fn reference_frame_oracle(v: &FeatureVolume) -> usize {
    let [frames, h, w, c] = v.dims();
    let data = v.data();
    let pixel = |f: usize, p: usize| &data[(f * h * w + p) * c..(f * h * w + p + 1) * c];
    let mut best = (f64::INFINITY, 0);
    for f in 0..frames {
        let mut total = 0.0;
        for g in 0..frames {
            let mut sum = 0.0;
            for p in 0..h * w {
                let d2: f64 = pixel(f, p).iter().zip(pixel(g, p)).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum();
                sum += d2.sqrt();
            }
            total += sum / (h * w) as f64;
        }
        if total < best.0 {
            best = (total, f);
        }
    }
    best.1
}

/// Exhaustive minimum-SSE split of `points` into two non-empty groups.
/// Returns membership of group "true" for the best split, with point 0
/// always in group "false" (the labelling is symmetric).
pub fn min_sse_partition(points: &[Vec<f64>]) -> Vec<bool> {
    let n = points.len();
    assert!((2..=20).contains(&n));
    let sse = |members: &[&Vec<f64>]| -> f64 {
        let dim = members[0].len();
        let mut mean = vec![0.0; dim];
        for m in members {
            for (a, v) in mean.iter_mut().zip(m.iter()) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= members.len() as f64);
        members.iter().map(|m| m.iter().zip(&mean).map(|(v, c)| (v - c).powi(2)).sum::<f64>()).sum()
    };
    let mut best = (f64::INFINITY, 0u32);
    // Bit i set: point i in the second group. Point 0 stays in the first.
    for bits in (2u32..1 << n).step_by(2) {
        let (a, b): (Vec<_>, Vec<_>) = (0..n).partition(|i| bits & (1 << i) == 0);
        let a: Vec<&Vec<f64>> = a.iter().map(|&i| &points[i]).collect();
        let b: Vec<&Vec<f64>> = b.iter().map(|&i| &points[i]).collect();
        let cost = sse(&a) + sse(&b);
        if cost < best.0 {
            best = (cost, bits);
        }
    }
    (0..n).map(|i| best.1 & (1 << i) != 0).collect()
}

/// Per-cell strict-majority vote over box-relative masks already sampled
/// at the template resolution.
pub fn majority_oracle(samples: &[Vec<bool>]) -> Vec<bool> {
    let cells = samples[0].len();
    (0..cells)
        .map(|i| {
            let votes = samples.iter().filter(|s| s[i]).count();
            votes * 2 > samples.len()
        })
        .collect()
}

/// Nearest target-foreground pixel for every source-foreground pixel by
/// exhaustive search; ties go to the first target in row-major order.
/// Returns `(d_col, d_row)` per pixel, zero outside the source foreground.
pub fn nearest_neighbour_oracle(
    v: &FeatureVolume,
    f: usize,
    g: usize,
    src: &FrameMask,
    dst: &FrameMask,
) -> Vec<(f64, f64)> {
    let (h, w) = (v.height(), v.width());
    let mut out = vec![(0.0, 0.0); h * w];
    let targets: Vec<(usize, usize)> =
        (0..h).flat_map(|r| (0..w).map(move |c| (r, c))).filter(|&(r, c)| dst.get(r, c)).collect();
    for r in 0..h {
        for c in 0..w {
            if !src.get(r, c) {
                continue;
            }
            let dist = |&(tr, tc): &(usize, usize)| -> f64 {
                v.pixel(f, r, c).iter().zip(v.pixel(g, tr, tc)).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum()
            };
            let (tr, tc) = targets
                .iter()
                .enumerate()
                .min_by(|(i, a), (j, b)| dist(a).total_cmp(&dist(b)).then(i.cmp(j)))
                .map(|(_, t)| *t)
                .unwrap();
            out[r * w + c] = (tc as f64 - c as f64, tr as f64 - r as f64);
        }
    }
    out
}

/// Plain row softmax of `Q K^T / sqrt(d)`.
pub fn softmax_oracle(grid: TokenGrid, dim: usize, q: &[f64], k: &[f64]) -> Vec<f64> {
    let t = grid.tokens();
    let mut out = vec![0.0; t * t];
    for i in 0..t {
        let logits: Vec<f64> = (0..t)
            .map(|j| (0..dim).map(|x| q[i * dim + x] * k[j * dim + x]).sum::<f64>() / (dim as f64).sqrt())
            .collect();
        let max = logits.iter().cloned().fold(f64::MIN, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for j in 0..t {
            out[i * t + j] = exps[j] / total;
        }
    }
    out
}

/// `1 - (beta / p) * sum(softmax(z Wq (z Wk)^T / sqrt(d)) * G)`, computed from scratch.
#[allow(clippy::too_many_arguments)]
pub fn loss_oracle(
    grid: TokenGrid,
    channels: usize,
    dim: usize,
    z: &[f64],
    wq: &[f64],
    wk: &[f64],
    g: &[f64],
    beta: f64,
    p: f64,
) -> f64 {
    let t = grid.tokens();
    let project = |w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; t * dim];
        for tok in 0..t {
            for x in 0..dim {
                out[tok * dim + x] = (0..channels).map(|ch| z[tok * channels + ch] * w[ch * dim + x]).sum();
            }
        }
        out
    };
    let a = softmax_oracle(grid, dim, &project(wq), &project(wk));
    1.0 - beta / p * a.iter().zip(g).map(|(a, g)| a * g).sum::<f64>()
}
