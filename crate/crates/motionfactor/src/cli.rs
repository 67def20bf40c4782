//! `motionfactor` command line: plan, synth, masks, guide, render.
//!
//! Every numeric option can also come from a `key=value` file given with
//! `--config`; flags on the command line win over the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use motionfactor_core::attention::{
    DenseMask, GuidanceConfig, GuidanceMode, LatentState, LinearProjectionBackend, StepRange, ToyRun,
};
use motionfactor_core::features::{synthesize_features, FeatureVolume, SyntheticSceneSpec};
use motionfactor_core::guidance::{compile_guidance, GuidanceMask, GuidanceParams};
use motionfactor_core::layout::{plan_layout, PlannerConfig, SceneLayout};
use motionfactor_core::parser::parse_prompt;
use serde::Serialize;

use crate::gmsk::{save_with_sidecar, MaskInputs, Sidecar};
use crate::json::{graph_to_json, layout_from_json, layout_to_json};
use crate::lexicon_file::lexicon_or_builtin;
use crate::planner::{PlannerClient, PlannerEndpointConfig, PlannerError};
use crate::render::{render, RenderStyle};
use crate::trace::{write_trace, TraceRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_REMOTE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Remote(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Remote(_) => EXIT_REMOTE,
        }
    }
}

fn data(context: impl Display) -> impl FnOnce(&dyn Display) -> CliError {
    move |e| CliError::Data(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "motionfactor", version, about = "Motion-factorized layout planning and attention guidance")]
pub struct Cli {
    /// key=value file supplying defaults for any option.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a prompt and write a scene layout as JSON.
    Plan(PlanArgs),
    /// Synthesize a feature volume (FVOL) from a layout.
    Synth(SynthArgs),
    /// Compile guidance masks (GMSK + JSON sidecars) and a summary.
    Masks(MasksArgs),
    /// Run the toy guided-denoising loop and write its trace as CSV.
    Guide(GuideArgs),
    /// Draw a layout as SVG panels or ASCII frames.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Lexicon TSV; the built-in lexicon otherwise.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Ask the planner endpoint (PLANNER_BASE_URL, PLANNER_API_KEY, PLANNER_MODEL).
    #[arg(long)]
    pub use_llm: bool,
    /// With --use-llm, fail instead of falling back to the local parser.
    #[arg(long)]
    pub no_fallback: bool,
    /// Also write the motion graph JSON here.
    #[arg(long)]
    pub graph_out: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Raster and channel count as HxWxC.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standard deviation of the Gaussian noise added to every value.
    #[arg(long)]
    pub noise: Option<f32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MasksArgs {
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Penalty sharpness for both box-center and deformation distances.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GuideArgs {
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// unet (latent gradient steps) or dit (score bias).
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Guided denoising steps as A:B (inclusive, 1-based).
    #[arg(long)]
    pub steps: Option<String>,
    /// Number of steps to run; the end of --steps by default.
    #[arg(long)]
    pub total_steps: Option<u32>,
    /// Seed of the query/key projection.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Attention head dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Write 0 in the wall_ms column so the trace is byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// svg or ascii.
    #[arg(long)]
    pub style: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `key=value` settings; `#` starts a comment.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

const CONFIG_KEYS: &[&str] = &[
    "prompt",
    "frames",
    "lexicon",
    "use_llm",
    "fallback",
    "planner_timeout",
    "planner_retries",
    "layout",
    "features",
    "grid",
    "seed",
    "noise",
    "alpha",
    "alpha_canvas",
    "alpha_pixel",
    "mode",
    "beta",
    "eta",
    "steps",
    "total_steps",
    "dim",
    "style",
    "out",
];

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
            let key = k.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", i + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The flag if given, else the file value, parsed.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Usage(format!("config {key}={v}: {e}"))))
            .transpose()
    }

    fn required<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.pick(key, flag)?.ok_or_else(|| CliError::Usage(format!("--{} is required", key.replace('_', "-"))))
    }

    fn switch(&self, key: &str, flag: bool) -> Result<bool, CliError> {
        Ok(flag || self.pick::<bool>(key, None)?.unwrap_or(false))
    }
}

/// Raster and channel count given as `HxWxC`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(['x', 'X']).collect();
        let nums: Result<Vec<usize>, _> = parts.iter().map(|p| p.trim().parse::<usize>()).collect();
        match nums.as_deref() {
            Ok([h, w, c]) if *h > 0 && *w > 0 && *c > 0 => Ok(Self { height: *h, width: *w, channels: *c }),
            _ => Err(format!("grid {s:?} must be HxWxC with positive integers")),
        }
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| data(path.display())(&e)),
        None => std::io::stdout().write_all(bytes).map_err(|e| CliError::Data(e.to_string())),
    }
}

fn read_layout(path: &Path) -> Result<SceneLayout, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| data(path.display())(&e))?;
    layout_from_json(&text).map_err(|e| data(path.display())(&e))
}

fn read_features(path: &Path) -> Result<FeatureVolume, CliError> {
    crate::fvol::load_volume(path).map_err(|e| data(path.display())(&e))
}

fn cmd_plan(args: PlanArgs, cfg: &ConfigFile) -> Result<(), CliError> {
    let prompt: String = cfg.required("prompt", args.prompt)?;
    let frames: usize = cfg.required("frames", args.frames)?;
    if frames == 0 {
        return Err(CliError::Usage("--frames must be at least 1".into()));
    }
    let lexicon_path: Option<PathBuf> = cfg.pick("lexicon", args.lexicon)?;
    let lexicon = lexicon_or_builtin(lexicon_path.as_deref()).map_err(|e| CliError::Data(e.to_string()))?;
    let planner = PlannerConfig::default();

    let (graph, layout) = if cfg.switch("use_llm", args.use_llm)? {
        let mut endpoint = PlannerEndpointConfig::from_env().map_err(|e| CliError::Remote(e.to_string()))?;
        endpoint.fallback_enabled = !args.no_fallback && cfg.pick("fallback", None::<bool>)?.unwrap_or(true);
        if let Some(secs) = cfg.pick::<f64>("planner_timeout", None)? {
            endpoint.timeout = Duration::try_from_secs_f64(secs).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        if let Some(n) = cfg.pick::<u32>("planner_retries", None)? {
            endpoint.max_retries = n;
        }
        log::warn!("planner endpoint mode: output is not reproducible");
        let client = PlannerClient::http(endpoint).map_err(|e| CliError::Usage(e.to_string()))?;
        let remote = |e: PlannerError| match e {
            PlannerError::Precondition(m) => CliError::Usage(m),
            PlannerError::FallbackFailed { .. } => CliError::Data(e.to_string()),
            other => CliError::Remote(other.to_string()),
        };
        let graph = client.request_graph(&prompt, &lexicon).map_err(remote)?;
        if let Some(cause) = &graph.fallback {
            log::warn!("motion graph came from the local parser ({cause})");
        }
        let layout = client.request_layout(&graph.value, frames, &planner).map_err(remote)?;
        if let Some(cause) = &layout.fallback {
            log::warn!("layout came from the local planner ({cause})");
        }
        (graph.value, layout.value)
    } else {
        let graph = parse_prompt(&prompt, &lexicon).map_err(|e| CliError::Data(e.to_string()))?;
        let layout = plan_layout(&graph, frames, &planner).map_err(|e| CliError::Data(e.to_string()))?;
        (graph, layout)
    };
    if let Some(path) = &args.graph_out {
        write_output(Some(path), (graph_to_json(&graph) + "\n").as_bytes())?;
    }
    let out: Option<PathBuf> = cfg.pick("out", args.out)?;
    write_output(out.as_deref(), (layout_to_json(&layout) + "\n").as_bytes())
}

fn cmd_synth(args: SynthArgs, cfg: &ConfigFile) -> Result<(), CliError> {
    let layout = read_layout(&cfg.required::<PathBuf>("layout", args.layout)?)?;
    let grid: GridSpec = cfg
        .pick("grid", args.grid.map(|g| g.parse()).transpose().map_err(CliError::Usage)?)?
        .unwrap_or(GridSpec { height: 16, width: 16, channels: 4 });
    let seed = cfg.pick("seed", args.seed)?.unwrap_or(0);
    let noise = cfg.pick("noise", args.noise)?.unwrap_or(0.0);
    let out: PathBuf = cfg.required("out", args.out)?;
    let spec = SyntheticSceneSpec::with_default_signatures(layout, seed, noise, grid.channels)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let synthesis = synthesize_features(&spec, grid.height, grid.width).map_err(|e| CliError::Data(e.to_string()))?;
    for o in &synthesis.overlaps {
        log::warn!("frame {}: track {} drawn over track {}", o.frame + 1, o.above, o.below);
    }
    crate::fvol::save_volume(&synthesis.volume, &out).map_err(|e| data(out.display())(&e))
}

fn guidance_params(cfg: &ConfigFile, alpha: Option<f64>) -> Result<GuidanceParams, CliError> {
    let mut params = GuidanceParams::default();
    if let Some(a) = cfg.pick("alpha", alpha)? {
        params.alpha_canvas = a;
        params.alpha_pixel = a;
    }
    if alpha.is_none() {
        params.alpha_canvas = cfg.pick("alpha_canvas", None)?.unwrap_or(params.alpha_canvas);
        params.alpha_pixel = cfg.pick("alpha_pixel", None)?.unwrap_or(params.alpha_pixel);
    }
    for a in [params.alpha_canvas, params.alpha_pixel] {
        if !(a > 0.0 && a.is_finite()) {
            return Err(CliError::Usage("--alpha must be positive".into()));
        }
    }
    Ok(params)
}

#[derive(Debug, Serialize)]
struct MaskEntry {
    file: String,
    #[serde(flatten)]
    sidecar: Sidecar,
}

#[derive(Debug, Serialize)]
struct OverlapSummary {
    entries: usize,
    entries_above_four: usize,
    max_value: f32,
}

#[derive(Debug, Serialize)]
struct MaskSummary {
    reference_frame: usize,
    masks: Vec<MaskEntry>,
    composed: MaskEntry,
    overlap: OverlapSummary,
}

fn mask_stem(mask: &GuidanceMask) -> String {
    match mask.instance() {
        Some(id) => format!("{}_{id}", mask.branch().tag()),
        None => mask.branch().tag().to_string(),
    }
}

fn cmd_masks(args: MasksArgs, cfg: &ConfigFile) -> Result<(), CliError> {
    let layout_path: PathBuf = cfg.required("layout", args.layout)?;
    let features_path: PathBuf = cfg.required("features", args.features)?;
    let params = guidance_params(cfg, args.alpha)?;
    let out: PathBuf = cfg.required("out", args.out)?;
    let layout = read_layout(&layout_path)?;
    let features = read_features(&features_path)?;
    let compiled = compile_guidance(&layout, &features, &params).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::create_dir_all(&out).map_err(|e| data(out.display())(&e))?;

    let inputs = MaskInputs {
        layout: Some(layout_path.display().to_string()),
        features: Some(features_path.display().to_string()),
        alpha_canvas: Some(params.alpha_canvas),
        alpha_pixel: Some(params.alpha_pixel),
        reference_frame: Some(compiled.reference_frame),
    };
    let save = |mask: &GuidanceMask| -> Result<MaskEntry, CliError> {
        let stem = mask_stem(mask);
        let sidecar = save_with_sidecar(mask, &out, &stem, inputs.clone()).map_err(|e| data(&stem)(&e))?;
        Ok(MaskEntry { file: format!("{stem}.gmsk"), sidecar })
    };
    let masks = compiled.masks.iter().map(save).collect::<Result<Vec<_>, _>>()?;
    let composed = save(&compiled.composed)?;
    if compiled.report.entries_above_four > 0 {
        log::warn!("{} composed entries exceed 4", compiled.report.entries_above_four);
    }
    let summary = MaskSummary {
        reference_frame: compiled.reference_frame,
        masks,
        composed,
        overlap: OverlapSummary {
            entries: compiled.report.overlapping_entries,
            entries_above_four: compiled.report.entries_above_four,
            max_value: compiled.report.max_value,
        },
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Data(e.to_string()))? + "\n";
    write_output(Some(&out.join("summary.json")), text.as_bytes())
}

fn cmd_guide(args: GuideArgs, cfg: &ConfigFile) -> Result<(), CliError> {
    let layout = read_layout(&cfg.required::<PathBuf>("layout", args.layout)?)?;
    let features = read_features(&cfg.required::<PathBuf>("features", args.features)?)?;
    let params = guidance_params(cfg, args.alpha)?;
    let mode: GuidanceMode = cfg
        .pick("mode", args.mode.map(|m| m.parse()).transpose().map_err(|e| CliError::Usage(format!("{e}")))?)?
        .unwrap_or(GuidanceMode::UNet);
    let mut config = GuidanceConfig::for_mode(mode);
    config.beta = cfg.pick("beta", args.beta)?.unwrap_or(config.beta);
    config.eta = cfg.pick("eta", args.eta)?.unwrap_or(config.eta);
    let steps = args.steps.map(|s| s.parse::<StepRange>()).transpose().map_err(|e| CliError::Usage(e.to_string()))?;
    config.step_range = cfg.pick("steps", steps)?.unwrap_or(config.step_range);
    let total = cfg.pick("total_steps", args.total_steps)?.unwrap_or(config.step_range.end);
    config.validate(Some(total)).map_err(|e| CliError::Usage(e.to_string()))?;
    let seed = cfg.pick("seed", args.seed)?.unwrap_or(0);
    let dim = cfg.pick("dim", args.dim)?.unwrap_or(8);

    let compiled = compile_guidance(&layout, &features, &params).map_err(|e| CliError::Data(e.to_string()))?;
    let mask = DenseMask::from(&compiled.composed);
    if mask.is_zero() {
        log::warn!("guidance mask is empty; the loss stays at 1");
    }
    let backend = LinearProjectionBackend::seeded(features.channels(), dim, seed, 1.0)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let state = LatentState::from_volume(&features);
    let started = Instant::now();
    let mut records = Vec::with_capacity(total as usize);
    for row in ToyRun::new(&backend, state, &mask, config, total) {
        let row = row.map_err(|e| CliError::Data(e.to_string()))?;
        let wall_ms = if args.no_timing { 0.0 } else { started.elapsed().as_secs_f64() * 1e3 };
        log::info!("step {}: loss {:.6} fg_mass {:.6}", row.step, row.loss, row.fg_mass);
        records.push(TraceRecord::new(row, wall_ms));
    }
    let mut buf = Vec::new();
    write_trace(&mut buf, &records).map_err(|e| CliError::Data(e.to_string()))?;
    let out: Option<PathBuf> = cfg.pick("out", args.out)?;
    write_output(out.as_deref(), &buf)
}

fn cmd_render(args: RenderArgs, cfg: &ConfigFile) -> Result<(), CliError> {
    let style: RenderStyle = cfg
        .pick("style", args.style.map(|s| s.parse()).transpose().map_err(CliError::Usage)?)?
        .unwrap_or(RenderStyle::Svg);
    let layout = read_layout(&cfg.required::<PathBuf>("layout", args.layout)?)?;
    let out: Option<PathBuf> = cfg.pick("out", args.out)?;
    write_output(out.as_deref(), render(&layout, style).as_bytes())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Plan(a) => cmd_plan(a, &cfg),
        Command::Synth(a) => cmd_synth(a, &cfg),
        Command::Masks(a) => cmd_masks(a, &cfg),
        Command::Guide(a) => cmd_guide(a, &cfg),
        Command::Render(a) => cmd_render(a, &cfg),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
