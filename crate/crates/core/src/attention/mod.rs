//! Applying composed guidance masks to attention, either as a loss whose
//! gradient nudges the latent (U-Net style) or as a multiplicative bias on
//! the attention logits (DiT style).

mod backend;
mod schedule;
mod toy;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub use backend::{AttentionBackend, LatentState, LinearProjectionBackend};
pub use schedule::{guidance_schedule, GuidanceConfig, GuidanceMode, LossNormalizer, StepRange};
pub use toy::{foreground_mass, loss_and_gradient, run_toy_denoise, unet_guidance_step, ToyRun, TraceRow};

use crate::grid::TokenGrid;
use crate::guidance::GuidanceMask;
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub enum AttentionError {
    ShapeMismatch { what: &'static str },
    NonFiniteGradient,
    NonFiniteInput,
    InvalidConfig { what: &'static str },
}

impl fmt::Display for AttentionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ShapeMismatch { what } => write!(f, "shape mismatch: {what}"),
            Self::NonFiniteGradient => f.write_str("guidance gradient is not finite"),
            Self::NonFiniteInput => f.write_str("query/key rows must be finite"),
            Self::InvalidConfig { what } => write!(f, "invalid guidance config: {what}"),
        }
    }
}

impl core::error::Error for AttentionError {}

/// Queries and keys for every token, row-major `tokens x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionContext {
    pub grid: TokenGrid,
    pub dim: usize,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
}

impl AttentionContext {
    pub fn new(grid: TokenGrid, dim: usize, q: Vec<f64>, k: Vec<f64>) -> Result<Self, AttentionError> {
        let t = grid.tokens();
        if dim == 0 || q.len() != t * dim || k.len() != t * dim {
            return Err(AttentionError::ShapeMismatch { what: "query/key matrices" });
        }
        if q.iter().chain(&k).any(|v| !v.is_finite()) {
            return Err(AttentionError::NonFiniteInput);
        }
        Ok(Self { grid, dim, q, k })
    }

    pub fn tokens(&self) -> usize {
        self.grid.tokens()
    }

    /// Raw scores `q_i . k_j / sqrt(d)`, row-major.
    pub fn logits(&self) -> Vec<f64> {
        let (t, d) = (self.tokens(), self.dim);
        let scale = 1.0 / math::sqrt(d as f64);
        let mut out = vec![0.0; t * t];
        for i in 0..t {
            let qi = &self.q[i * d..(i + 1) * d];
            for (j, o) in out[i * t..(i + 1) * t].iter_mut().enumerate() {
                let kj = &self.k[j * d..(j + 1) * d];
                *o = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
            }
        }
        out
    }
}

/// Row-stochastic `tokens x tokens` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub tokens: usize,
    pub values: Vec<f64>,
}

impl AttentionMap {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.tokens..(i + 1) * self.tokens]
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.tokens + j]
    }
}

/// Dense copy of a guidance mask, for repeated use against attention maps.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMask {
    tokens: usize,
    values: Vec<f64>,
    guided: Vec<usize>,
}

impl DenseMask {
    pub fn zeros(tokens: usize) -> Self {
        Self { tokens, values: vec![0.0; tokens * tokens], guided: Vec::new() }
    }

    pub fn from_values(tokens: usize, values: Vec<f64>) -> Result<Self, AttentionError> {
        if values.len() != tokens * tokens {
            return Err(AttentionError::ShapeMismatch { what: "dense mask" });
        }
        let guided = (0..tokens).filter(|&i| values[i * tokens..(i + 1) * tokens].iter().any(|v| *v != 0.0)).collect();
        Ok(Self { tokens, values, guided })
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.tokens..(i + 1) * self.tokens]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.tokens + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[i * self.tokens + j] = value;
        let has = self.row(i).iter().any(|v| *v != 0.0);
        match (self.guided.binary_search(&i), has) {
            (Err(pos), true) => self.guided.insert(pos, i),
            (Ok(pos), false) => {
                self.guided.remove(pos);
            }
            _ => {}
        }
    }

    /// Rows with at least one nonzero entry, ascending.
    pub fn guided_rows(&self) -> &[usize] {
        &self.guided
    }

    pub fn is_zero(&self) -> bool {
        self.guided.is_empty()
    }
}

impl From<&GuidanceMask> for DenseMask {
    fn from(mask: &GuidanceMask) -> Self {
        let tokens = mask.tokens();
        let n = mask.block_size();
        let mut values = vec![0.0; tokens * tokens];
        for ((sf, df), block) in mask.blocks() {
            for (p, row) in block.chunks_exact(n).enumerate() {
                let base = (sf * n + p) * tokens + df * n;
                for (dst, v) in values[base..base + n].iter_mut().zip(row) {
                    *dst = *v as f64;
                }
            }
        }
        Self::from_values(tokens, values).expect("block layout matches token count")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax_rows(logits: &mut [f64], tokens: usize) {
    for row in logits.chunks_exact_mut(tokens) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = math::exp(*v - max);
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
}

/// `softmax(Q K^T / sqrt(d))`, row-wise.
pub fn attention_map(ctx: &AttentionContext) -> AttentionMap {
    let tokens = ctx.tokens();
    let mut values = ctx.logits();
    softmax_rows(&mut values, tokens);
    AttentionMap { tokens, values }
}

/// `softmax(Q K^T (1 + beta G) / sqrt(d))`. The bias scales the raw score,
/// so a negative score gets more negative where `G > 0`.
pub fn dit_biased_attention(
    ctx: &AttentionContext,
    mask: &DenseMask,
    beta: f64,
) -> Result<AttentionMap, AttentionError> {
    let tokens = ctx.tokens();
    if mask.tokens != tokens {
        return Err(AttentionError::ShapeMismatch { what: "mask and attention token counts" });
    }
    let mut values = ctx.logits();
    for (s, g) in values.iter_mut().zip(&mask.values) {
        *s *= 1.0 + beta * g;
    }
    softmax_rows(&mut values, tokens);
    Ok(AttentionMap { tokens, values })
}

/// Attention rows for the listed queries only (`rows.len() x tokens`),
/// optionally with the score bias applied.
pub(crate) fn attention_rows(ctx: &AttentionContext, rows: &[usize], bias: Option<(&DenseMask, f64)>) -> Vec<f64> {
    let (t, d) = (ctx.tokens(), ctx.dim);
    let scale = 1.0 / math::sqrt(d as f64);
    let mut out = vec![0.0; rows.len() * t];
    for (r, &i) in rows.iter().enumerate() {
        let qi = &ctx.q[i * d..(i + 1) * d];
        let row = &mut out[r * t..(r + 1) * t];
        for (j, o) in row.iter_mut().enumerate() {
            *o = dot(qi, &ctx.k[j * d..(j + 1) * d]) * scale;
        }
        if let Some((mask, beta)) = bias {
            for (o, g) in row.iter_mut().zip(mask.row(i)) {
                *o *= 1.0 + beta * g;
            }
        }
    }
    softmax_rows(&mut out, t);
    out
}

/// Loss and mean guided foreground mass from the guided rows of an attention map.
pub(crate) fn guided_summary(rows: &[f64], mask: &DenseMask, beta: f64, p: f64) -> (f64, f64) {
    let t = mask.tokens;
    let mut weighted = 0.0;
    let mut mass = 0.0;
    for (a, &i) in rows.chunks_exact(t).zip(&mask.guided) {
        for (a, g) in a.iter().zip(mask.row(i)) {
            weighted += a * g;
            if *g > 0.0 {
                mass += a;
            }
        }
    }
    let n = mask.guided.len();
    (1.0 - beta / p * weighted, if n == 0 { 0.0 } else { mass / n as f64 })
}

/// `1 - (beta / p) * sum(A * G)`.
pub fn unet_loss(attention: &AttentionMap, mask: &DenseMask, beta: f64, p: f64) -> Result<f64, AttentionError> {
    if mask.tokens != attention.tokens {
        return Err(AttentionError::ShapeMismatch { what: "mask and attention token counts" });
    }
    let total: f64 = attention.values.iter().zip(&mask.values).map(|(a, g)| a * g).sum();
    Ok(1.0 - beta / p * total)
}

/// Loss and its gradient with respect to the query and key matrices.
/// Only rows carrying guidance contribute, so only those are evaluated.
pub(crate) fn loss_gradient_qk(
    ctx: &AttentionContext,
    mask: &DenseMask,
    beta: f64,
    p: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>), AttentionError> {
    let (t, d) = (ctx.tokens(), ctx.dim);
    if mask.tokens != t {
        return Err(AttentionError::ShapeMismatch { what: "mask and attention token counts" });
    }
    let rows = attention_rows(ctx, &mask.guided, None);
    let (loss, _) = guided_summary(&rows, mask, beta, p);
    let coef = -beta / p;
    let scale = 1.0 / math::sqrt(d as f64);
    let mut dq = vec![0.0; t * d];
    let mut dk = vec![0.0; t * d];
    let mut ds = vec![0.0; t];
    for (a, &i) in rows.chunks_exact(t).zip(&mask.guided) {
        // Softmax Jacobian applied to the row of dL/dA = coef * G.
        let g = mask.row(i);
        let mean = coef * dot(a, g);
        for ((out, a), g) in ds.iter_mut().zip(a).zip(g) {
            *out = a * (g * coef - mean) * scale;
        }
        let qi = &ctx.q[i * d..(i + 1) * d];
        let dqi = &mut dq[i * d..(i + 1) * d];
        for (j, &s) in ds.iter().enumerate() {
            let kj = &ctx.k[j * d..(j + 1) * d];
            for (o, k) in dqi.iter_mut().zip(kj) {
                *o += s * k;
            }
            for (o, q) in dk[j * d..(j + 1) * d].iter_mut().zip(qi) {
                *o += s * q;
            }
        }
    }
    Ok((loss, dq, dk))
}
