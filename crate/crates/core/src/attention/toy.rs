use alloc::vec::Vec;

use super::{
    attention_rows, guidance_schedule, guided_summary, loss_gradient_qk, AttentionBackend, AttentionError,
    AttentionMap, DenseMask, GuidanceConfig, GuidanceMode, LatentState,
};

/// Loss at `state` and its gradient with respect to the latent.
pub fn loss_and_gradient<B: AttentionBackend + ?Sized>(
    backend: &B,
    state: &LatentState,
    mask: &DenseMask,
    beta: f64,
    p: f64,
) -> Result<(f64, Vec<f64>), AttentionError> {
    let ctx = backend.project(state)?;
    let (loss, dq, dk) = loss_gradient_qk(&ctx, mask, beta, p)?;
    Ok((loss, backend.pullback(state, &dq, &dk)))
}

/// One latent update `z - eta * grad L` at a 1-based denoising step.
/// Steps outside the configured range return the state unchanged.
pub fn unet_guidance_step<B: AttentionBackend + ?Sized>(
    backend: &B,
    state: &LatentState,
    mask: &DenseMask,
    config: &GuidanceConfig,
    step: u32,
) -> Result<LatentState, AttentionError> {
    if config.mode != GuidanceMode::UNet {
        return Err(AttentionError::InvalidConfig { what: "latent updates need unet mode" });
    }
    if !guidance_schedule(step, config) || mask.is_zero() {
        return Ok(state.clone());
    }
    let p = config.normalizer.value(state.grid);
    let (_, grad) = loss_and_gradient(backend, state, mask, config.beta, p)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(AttentionError::NonFiniteGradient);
    }
    let mut next = state.clone();
    for (z, g) in next.z.iter_mut().zip(&grad) {
        *z -= config.eta * g;
    }
    Ok(next)
}

/// Mean, over rows with any guidance, of the attention mass that lands on
/// the row's guided entries. Zero when the mask is empty.
pub fn foreground_mass(attention: &AttentionMap, mask: &DenseMask) -> f64 {
    let rows = mask.guided_rows();
    if rows.is_empty() {
        return 0.0;
    }
    let total: f64 = rows
        .iter()
        .map(|&i| attention.row(i).iter().zip(mask.row(i)).filter(|(_, g)| **g > 0.0).map(|(a, _)| a).sum::<f64>())
        .sum();
    total / rows.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: u32,
    pub loss: f64,
    pub fg_mass: f64,
}

/// Step-by-step guided run over a synthetic backend. Each item reports the
/// loss and foreground mass after that step.
pub struct ToyRun<'a, B: AttentionBackend + ?Sized> {
    backend: &'a B,
    mask: &'a DenseMask,
    config: GuidanceConfig,
    state: LatentState,
    step: u32,
    steps: u32,
    failed: bool,
}

impl<'a, B: AttentionBackend + ?Sized> ToyRun<'a, B> {
    pub fn new(backend: &'a B, state: LatentState, mask: &'a DenseMask, config: GuidanceConfig, steps: u32) -> Self {
        Self { backend, mask, config, state, step: 0, steps, failed: false }
    }

    pub fn state(&self) -> &LatentState {
        &self.state
    }

    pub fn into_state(self) -> LatentState {
        self.state
    }

    fn advance(&mut self) -> Result<TraceRow, AttentionError> {
        let step = self.step;
        let p = self.config.normalizer.value(self.state.grid);
        let bias = match self.config.mode {
            GuidanceMode::UNet => {
                self.state = unet_guidance_step(self.backend, &self.state, self.mask, &self.config, step)?;
                None
            }
            GuidanceMode::DiT => guidance_schedule(step, &self.config).then_some((self.mask, self.config.beta)),
        };
        let ctx = self.backend.project(&self.state)?;
        let rows = attention_rows(&ctx, self.mask.guided_rows(), bias);
        let (loss, fg_mass) = guided_summary(&rows, self.mask, self.config.beta, p);
        Ok(TraceRow { step, loss, fg_mass })
    }
}

impl<B: AttentionBackend + ?Sized> Iterator for ToyRun<'_, B> {
    type Item = Result<TraceRow, AttentionError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.step >= self.steps {
            return None;
        }
        self.step += 1;
        let row = self.advance();
        self.failed = row.is_err();
        Some(row)
    }
}

/// Runs `steps` denoising steps and collects the trace.
pub fn run_toy_denoise<B: AttentionBackend + ?Sized>(
    backend: &B,
    state: LatentState,
    mask: &DenseMask,
    config: &GuidanceConfig,
    steps: u32,
) -> Result<(Vec<TraceRow>, LatentState), AttentionError> {
    config.validate(None)?;
    let mut run = ToyRun::new(backend, state, mask, *config, steps);
    let trace = run.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok((trace, run.into_state()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::LinearProjectionBackend;
    use crate::grid::TokenGrid;

    fn fixture() -> (LinearProjectionBackend, LatentState, DenseMask) {
        let grid = TokenGrid::new(2, 2, 2);
        let backend = LinearProjectionBackend::seeded(3, 4, 1, 1.0).unwrap();
        let z = (0..24).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let state = LatentState::new(grid, 3, z).unwrap();
        let mut mask = DenseMask::zeros(8);
        for (i, j) in [(0, 1), (1, 0), (4, 5), (5, 4), (0, 4), (4, 0)] {
            mask.set(i, j, 2.0);
        }
        (backend, state, mask)
    }

    #[test]
    fn zero_mask_keeps_state() {
        let (b, s, _) = fixture();
        let next = unet_guidance_step(&b, &s, &DenseMask::zeros(8), &GuidanceConfig::unet_default(), 1).unwrap();
        assert_eq!(next, s);
        let (_, grad) = loss_and_gradient(&b, &s, &DenseMask::zeros(8), 10.0, 8.0).unwrap();
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn outside_window_keeps_state() {
        let (b, s, m) = fixture();
        let next = unet_guidance_step(&b, &s, &m, &GuidanceConfig::unet_default(), 26).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (b, s, m) = fixture();
        let (_, grad) = loss_and_gradient(&b, &s, &m, 10.0, 8.0).unwrap();
        let h = 1e-4;
        for (i, g) in grad.iter().enumerate() {
            let mut plus = s.clone();
            plus.z[i] += h;
            let mut minus = s.clone();
            minus.z[i] -= h;
            let lp = loss_and_gradient(&b, &plus, &m, 10.0, 8.0).unwrap().0;
            let lm = loss_and_gradient(&b, &minus, &m, 10.0, 8.0).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - g).abs() < 1e-6, "component {i}: {fd} vs {g}");
        }
    }

    #[test]
    fn trace_shapes() {
        let (b, s, m) = fixture();
        let (trace, _) = run_toy_denoise(&b, s.clone(), &m, &GuidanceConfig::unet_default(), 0).unwrap();
        assert!(trace.is_empty());
        let (trace, end) = run_toy_denoise(&b, s.clone(), &m, &GuidanceConfig::unet_default(), 30).unwrap();
        assert_eq!(trace.len(), 30);
        assert_eq!(trace.iter().map(|r| r.step).collect::<Vec<_>>(), (1..=30).collect::<Vec<_>>());
        assert!(trace.windows(2).all(|w| w[1].loss <= w[0].loss));
        assert_eq!(trace[25].loss, trace[29].loss);
        assert_ne!(end, s);
    }

    #[test]
    fn dit_run_adds_mass() {
        let (b, s, m) = fixture();
        let (biased, _) = run_toy_denoise(&b, s.clone(), &m, &GuidanceConfig::dit_default(), 12).unwrap();
        let plain_cfg =
            GuidanceConfig { step_range: crate::attention::StepRange::new(100, 100), ..GuidanceConfig::dit_default() };
        let (plain, _) = run_toy_denoise(&b, s, &m, &plain_cfg, 12).unwrap();
        assert!(biased[0].fg_mass != plain[0].fg_mass);
        assert_eq!(biased[11].fg_mass, plain[11].fg_mass);
    }
}
