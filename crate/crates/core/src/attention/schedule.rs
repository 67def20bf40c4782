use core::fmt;
use core::str::FromStr;

use super::AttentionError;
use crate::grid::TokenGrid;

/// Inclusive range of 1-based denoising steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRange {
    pub start: u32,
    pub end: u32,
}

impl StepRange {
    pub const fn new(start: u32, end: u32) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, step: u32) -> bool {
        self.start <= step && step <= self.end
    }
}

impl fmt::Display for StepRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for StepRange {
    type Err = AttentionError;

    /// Parses `A:B`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = AttentionError::InvalidConfig { what: "step range must look like A:B with 1 <= A <= B" };
        let (a, b) = s.split_once(':').ok_or(bad.clone())?;
        let start: u32 = a.trim().parse().map_err(|_| bad.clone())?;
        let end: u32 = b.trim().parse().map_err(|_| bad.clone())?;
        if start == 0 || start > end {
            return Err(bad);
        }
        Ok(Self { start, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuidanceMode {
    /// Gradient steps on the latent.
    UNet,
    /// Multiplicative bias on attention scores.
    DiT,
}

impl GuidanceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::UNet => "unet",
            Self::DiT => "dit",
        }
    }
}

impl FromStr for GuidanceMode {
    type Err = AttentionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "unet" => Ok(Self::UNet),
            "dit" => Ok(Self::DiT),
            _ => Err(AttentionError::InvalidConfig { what: "mode must be unet or dit" }),
        }
    }
}

/// What the loss divides the masked attention mass by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossNormalizer {
    /// All spatio-temporal tokens.
    #[default]
    Tokens,
    /// Pixels of a single frame.
    PixelsPerFrame,
}

impl LossNormalizer {
    pub fn value(self, grid: TokenGrid) -> f64 {
        match self {
            Self::Tokens => grid.tokens() as f64,
            Self::PixelsPerFrame => grid.pixels_per_frame() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceConfig {
    pub mode: GuidanceMode,
    pub beta: f64,
    pub step_range: StepRange,
    /// Latent step size; only used in U-Net mode.
    pub eta: f64,
    pub normalizer: LossNormalizer,
}

impl GuidanceConfig {
    pub const fn unet_default() -> Self {
        Self {
            mode: GuidanceMode::UNet,
            beta: 10.0,
            step_range: StepRange::new(1, 25),
            eta: 0.1,
            normalizer: LossNormalizer::Tokens,
        }
    }

    pub const fn dit_default() -> Self {
        Self {
            mode: GuidanceMode::DiT,
            beta: 0.15,
            step_range: StepRange::new(1, 10),
            eta: 0.1,
            normalizer: LossNormalizer::Tokens,
        }
    }

    pub fn for_mode(mode: GuidanceMode) -> Self {
        match mode {
            GuidanceMode::UNet => Self::unet_default(),
            GuidanceMode::DiT => Self::dit_default(),
        }
    }

    /// Checks the numeric fields; `total_steps` bounds the step range when known.
    pub fn validate(&self, total_steps: Option<u32>) -> Result<(), AttentionError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(AttentionError::InvalidConfig { what: "beta must be positive and finite" });
        }
        if self.mode == GuidanceMode::UNet && !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(AttentionError::InvalidConfig { what: "eta must be positive and finite" });
        }
        if self.step_range.start == 0 || self.step_range.start > self.step_range.end {
            return Err(AttentionError::InvalidConfig { what: "step range must satisfy 1 <= start <= end" });
        }
        if total_steps.is_some_and(|n| self.step_range.end > n) {
            return Err(AttentionError::InvalidConfig { what: "step range ends after the last step" });
        }
        Ok(())
    }
}

/// Whether guidance is applied at a 1-based denoising step.
pub fn guidance_schedule(step: u32, config: &GuidanceConfig) -> bool {
    config.step_range.contains(step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_windows() {
        let unet = GuidanceConfig::unet_default();
        let dit = GuidanceConfig::dit_default();
        assert!(guidance_schedule(25, &unet));
        assert!(!guidance_schedule(26, &unet));
        assert!(!guidance_schedule(11, &dit));
        assert!(guidance_schedule(1, &unet) && guidance_schedule(1, &dit));
    }

    #[test]
    fn parse_range() {
        assert_eq!("1:25".parse::<StepRange>().unwrap(), StepRange::new(1, 25));
        assert!("0:3".parse::<StepRange>().is_err());
        assert!("5:2".parse::<StepRange>().is_err());
        assert!("7".parse::<StepRange>().is_err());
    }

    #[test]
    fn validation() {
        assert!(GuidanceConfig::unet_default().validate(Some(50)).is_ok());
        assert!(GuidanceConfig::unet_default().validate(Some(20)).is_err());
        let bad = GuidanceConfig { beta: 0.0, ..GuidanceConfig::dit_default() };
        assert!(bad.validate(None).is_err());
    }
}
