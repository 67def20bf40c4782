//! Sweeps the UNet update size on the three-instance toy scene and reports
//! whether the loss trace stays monotone and how far the foreground
//! attention mass moves.
//!
//!     cargo run --release -p motionfactor-core --example eta_sweep -- 0.1 1 10 100

use motionfactor_core::attention::{
    attention_map, foreground_mass, run_toy_denoise, AttentionBackend, DenseMask, GuidanceConfig, LatentState,
    LinearProjectionBackend,
};
use motionfactor_core::features::{synthesize_features, SyntheticSceneSpec};
use motionfactor_core::guidance::{compile_guidance, GuidanceParams};
use motionfactor_core::layout::{plan_layout, PlannerConfig};
use motionfactor_core::lexicon::Lexicon;
use motionfactor_core::parser::parse_prompt;

fn main() {
    let etas: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("eta must be a number")).collect();
    let etas = if etas.is_empty() { vec![0.1, 1.0, 10.0, 100.0] } else { etas };

    let graph = parse_prompt("a parked car, a man walking and a flag waving", &Lexicon::builtin()).unwrap();
    let layout = plan_layout(&graph, 8, &PlannerConfig::default()).unwrap();
    let spec = SyntheticSceneSpec::with_default_signatures(layout.clone(), 7, 0.05, 4).unwrap();
    let volume = synthesize_features(&spec, 16, 16).unwrap().volume;
    let compiled = compile_guidance(&layout, &volume, &GuidanceParams::default()).unwrap();
    let mask = DenseMask::from(&compiled.composed);
    let backend = LinearProjectionBackend::seeded(4, 8, 11, 1.0).unwrap();
    let state = LatentState::from_volume(&volume);
    let unguided = foreground_mass(&attention_map(&backend.project(&state).unwrap()), &mask);
    println!("unguided foreground mass {unguided:.5}");

    for eta in etas {
        let config = GuidanceConfig { eta, ..GuidanceConfig::unet_default() };
        match run_toy_denoise(&backend, state.clone(), &mask, &config, config.step_range.end) {
            Ok((trace, _)) => {
                let monotone = trace.windows(2).all(|w| w[1].loss <= w[0].loss);
                let last = trace.last().unwrap();
                println!(
                    "eta {eta:>8}: loss {:.6} -> {:.6}  monotone {monotone:<5}  mass ratio {:.3}",
                    trace[0].loss,
                    last.loss,
                    last.fg_mass / unguided
                );
            }
            Err(e) => println!("eta {eta:>8}: {e}"),
        }
    }
}
