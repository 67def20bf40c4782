use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::{AttentionContext, AttentionError};
use crate::features::FeatureVolume;
use crate::grid::TokenGrid;
use crate::math;

/// Latent tokens `z`, row-major `tokens x channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub grid: TokenGrid,
    pub channels: usize,
    pub z: Vec<f64>,
}

impl LatentState {
    pub fn new(grid: TokenGrid, channels: usize, z: Vec<f64>) -> Result<Self, AttentionError> {
        if channels == 0 || z.len() != grid.tokens() * channels {
            return Err(AttentionError::ShapeMismatch { what: "latent tensor" });
        }
        Ok(Self { grid, channels, z })
    }

    pub fn from_volume(volume: &FeatureVolume) -> Self {
        Self { grid: volume.grid(), channels: volume.channels(), z: volume.data().iter().map(|v| *v as f64).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.z.iter().all(|v| v.is_finite())
    }
}

/// A differentiable map from latent tokens to attention queries and keys.
pub trait AttentionBackend {
    fn dim(&self) -> usize;

    fn project(&self, state: &LatentState) -> Result<AttentionContext, AttentionError>;

    /// Pulls gradients with respect to Q and K back to the latent.
    fn pullback(&self, state: &LatentState, dq: &[f64], dk: &[f64]) -> Vec<f64>;
}

/// `Q = z Wq`, `K = z Wk` with fixed `channels x dim` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProjectionBackend {
    channels: usize,
    dim: usize,
    wq: Vec<f64>,
    wk: Vec<f64>,
}

impl LinearProjectionBackend {
    /// Gaussian weights scaled by `scale / sqrt(channels)`, drawn from a
    /// ChaCha8 stream seeded with `seed` (queries first, then keys).
    pub fn seeded(channels: usize, dim: usize, seed: u64, scale: f64) -> Result<Self, AttentionError> {
        if channels == 0 || dim == 0 {
            return Err(AttentionError::ShapeMismatch { what: "projection dimensions" });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = scale / math::sqrt(channels as f64);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * std
                })
                .collect()
        };
        let wq = draw(channels * dim);
        let wk = draw(channels * dim);
        Ok(Self { channels, dim, wq, wk })
    }

    pub fn with_weights(channels: usize, dim: usize, wq: Vec<f64>, wk: Vec<f64>) -> Result<Self, AttentionError> {
        if channels == 0 || dim == 0 || wq.len() != channels * dim || wk.len() != channels * dim {
            return Err(AttentionError::ShapeMismatch { what: "projection weights" });
        }
        Ok(Self { channels, dim, wq, wk })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    fn apply(&self, z: &[f64], w: &[f64], tokens: usize) -> Vec<f64> {
        let (c, d) = (self.channels, self.dim);
        let mut out = alloc::vec![0.0; tokens * d];
        for t in 0..tokens {
            let zt = &z[t * c..(t + 1) * c];
            let row = &mut out[t * d..(t + 1) * d];
            for (ch, zv) in zt.iter().enumerate() {
                for (o, wv) in row.iter_mut().zip(&w[ch * d..(ch + 1) * d]) {
                    *o += zv * wv;
                }
            }
        }
        out
    }
}

impl AttentionBackend for LinearProjectionBackend {
    fn dim(&self) -> usize {
        self.dim
    }

    fn project(&self, state: &LatentState) -> Result<AttentionContext, AttentionError> {
        if state.channels != self.channels {
            return Err(AttentionError::ShapeMismatch { what: "latent channels differ from projection" });
        }
        let tokens = state.grid.tokens();
        let q = self.apply(&state.z, &self.wq, tokens);
        let k = self.apply(&state.z, &self.wk, tokens);
        AttentionContext::new(state.grid, self.dim, q, k)
    }

    fn pullback(&self, state: &LatentState, dq: &[f64], dk: &[f64]) -> Vec<f64> {
        let (c, d) = (self.channels, self.dim);
        let tokens = state.grid.tokens();
        let mut dz = alloc::vec![0.0; tokens * c];
        for t in 0..tokens {
            let gq = &dq[t * d..(t + 1) * d];
            let gk = &dk[t * d..(t + 1) * d];
            for ch in 0..c {
                let wq = &self.wq[ch * d..(ch + 1) * d];
                let wk = &self.wk[ch * d..(ch + 1) * d];
                dz[t * c + ch] = gq.iter().zip(wq).map(|(a, b)| a * b).sum::<f64>()
                    + gk.iter().zip(wk).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        dz
    }
}
