//! Command-line surface of the `pse` tool: label generation, progressive
//! scale expansion, evaluation, rendering, synthesis, augmentation and
//! benchmarking. The binary is a thin wrapper over [`Cli`] and [`run`].

mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pse_core::augment::{self, AugmentConfig, Sample};
use pse_core::bench::{run_bench, DEFAULT_REPEATS};
use pse_core::io::{self, DetectionsFile, Raster, ScoreStack, SynthSpec};
use pse_core::labelgen::generate_labels;
use pse_core::metrics::{evaluate, DEFAULT_IOU_THRESHOLD};
use pse_core::pse::{extract_detections, pse, ExtractConfig, ExtractMode, DEFAULT_MIN_AREA, DEFAULT_THRESHOLD};
use pse_core::KernelSpec;

use config::Config;

const DEFAULT_N: usize = 6;
const DEFAULT_M: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(name = "pse", version, about = "Kernel-based scene text detection tools")]
pub struct Cli {
    /// JSON file of default option values; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rasterize an annotation into nested kernel masks plus an ignore plane.
    Labelgen(LabelgenArgs),
    /// Run progressive scale expansion on a score stack and extract detections.
    #[command(alias = "detect")]
    Pse(PseArgs),
    /// Score detections against an annotation; prints a JSON report.
    Eval(EvalArgs),
    /// Render a label map or score stack to PNG.
    Render(RenderArgs),
    /// Build a synthetic score stack from a JSON shape list.
    Synth(SynthArgs),
    /// Augment an image and its labels.
    Augment(AugmentArgs),
    /// Time expansion on dense synthetic stacks of growing size.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Number of kernel scales.
    #[arg(long)]
    n: Option<usize>,
    /// Smallest kernel scale ratio, in (0, 1].
    #[arg(long)]
    m: Option<f64>,
}

impl KernelArgs {
    fn resolve(&self, cfg: &Config) -> Result<KernelSpec> {
        let n = self.n.or(cfg.n).unwrap_or(DEFAULT_N);
        let m = self.m.or(cfg.m).unwrap_or(DEFAULT_M);
        Ok(KernelSpec::new(n, m)?)
    }
}

#[derive(Debug, Args)]
struct LabelgenArgs {
    #[arg(long)]
    annotation: PathBuf,
    #[command(flatten)]
    kernels: KernelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Rect,
    Polygon,
}

impl From<Mode> for ExtractMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Rect => ExtractMode::Rect,
            Mode::Polygon => ExtractMode::Polygon,
        }
    }
}

#[derive(Debug, Args)]
struct PseArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Binarization threshold in [0, 1].
    #[arg(long)]
    threshold: Option<f32>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Drop instances smaller than this many map pixels.
    #[arg(long)]
    min_area: Option<usize>,
    /// Multiply output coordinates, e.g. 4 for quarter-resolution maps.
    #[arg(long)]
    scale: Option<f64>,
    /// Detections JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the label map here.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    dets: PathBuf,
    #[arg(long)]
    annotation: PathBuf,
    /// IoU needed for a match, in (0, 1).
    #[arg(long)]
    iou: Option<f64>,
    /// Report JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Label map or score stack.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    annotation: PathBuf,
    #[command(flatten)]
    kernels: KernelArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated rescale ratios.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    #[arg(long)]
    flip_prob: Option<f64>,
    /// Largest absolute rotation in degrees.
    #[arg(long)]
    max_rotation: Option<f64>,
    /// Output size as HxW.
    #[arg(long, value_parser = parse_size)]
    crop: Option<(usize, usize)>,
    #[arg(long)]
    out_image: PathBuf,
    #[arg(long)]
    out_labels: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated sizes, each HxW or a single side for squares.
    #[arg(long, value_delimiter = ',', value_parser = parse_size)]
    resolutions: Option<Vec<(usize, usize)>>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad size {s:?}: {e}"));
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((parse(h)?, parse(w)?)),
        None => parse(s).map(|v| (v, v)),
    }
}

/// Executes one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Labelgen(a) => labelgen(a, &cfg),
        Command::Pse(a) => detect(a, &cfg),
        Command::Eval(a) => eval(a, &cfg),
        Command::Render(a) => render(a),
        Command::Synth(a) => synth(a),
        Command::Augment(a) => augment_cmd(a, &cfg),
        Command::Bench(a) => bench(a, &cfg),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn with_path<T>(path: &Path, r: pse_core::Result<T>) -> Result<T> {
    r.with_context(|| format!("{}", path.display()))
}

fn labelgen(a: LabelgenArgs, cfg: &Config) -> Result<()> {
    let kernels = a.kernels.resolve(cfg)?;
    let ann = with_path(&a.annotation, io::read_annotation(&a.annotation))?;
    let labels = generate_labels(&ann, &kernels)?;
    for w in &labels.warnings {
        log::warn!("region {}: {}", w.region, w.message);
    }
    with_path(&a.out, io::write_score_stack(&a.out, &ScoreStack::from_labels(&labels)))
}

fn detect(a: PseArgs, cfg: &Config) -> Result<()> {
    let threshold = a.threshold.or(cfg.threshold).unwrap_or(DEFAULT_THRESHOLD);
    let extract = ExtractConfig {
        mode: a.mode.or(cfg.mode).map_or(ExtractMode::Rect, ExtractMode::from),
        min_area: a.min_area.or(cfg.min_area).unwrap_or(DEFAULT_MIN_AREA),
        scale: a.scale.or(cfg.scale).unwrap_or(1.0),
    };
    if !(extract.scale > 0.0 && extract.scale.is_finite()) {
        bail!("scale {} must be positive", extract.scale);
    }
    let stack = with_path(&a.scores, io::read_score_stack(&a.scores))?;
    let labels = pse(&stack.planes, threshold)?;
    if let Some(path) = &a.labels_out {
        with_path(path, io::write_label_map(path, &labels))?;
    }
    let (h, w) = stack.dims();
    let file = DetectionsFile {
        height: (h as f64 * extract.scale).round() as usize,
        width: (w as f64 * extract.scale).round() as usize,
        detections: extract_detections(&labels, &extract),
    };
    log::info!("{} labels, {} detections", labels.label_count(), file.detections.len());
    match &a.out {
        Some(path) => with_path(path, io::write_json(path, &file)),
        None => print_json(&file),
    }
}

fn eval(a: EvalArgs, cfg: &Config) -> Result<()> {
    let iou = a.iou.or(cfg.iou).unwrap_or(DEFAULT_IOU_THRESHOLD);
    let dets: DetectionsFile = with_path(&a.dets, io::read_json(&a.dets))?;
    let ann = with_path(&a.annotation, io::read_annotation(&a.annotation))?;
    if (dets.height, dets.width) != (ann.height, ann.width) {
        bail!(
            "detections are for a {}x{} image but the annotation is {}x{}",
            dets.height,
            dets.width,
            ann.height,
            ann.width
        );
    }
    let report = evaluate(&dets.detections, &ann, iou)?;
    match &a.out {
        Some(path) => with_path(path, io::write_json(path, &report)),
        None => print_json(&report),
    }
}

fn render(a: RenderArgs) -> Result<()> {
    let raster = with_path(&a.input, io::read_raster(&a.input))?;
    if let Raster::Scores(s) = &raster {
        log::info!("rendering full-scale plane of a {}-plane stack", s.n());
    }
    let png = io::render_raster(&raster)?;
    fs::write(&a.out, png).with_context(|| format!("{}", a.out.display()))
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec: SynthSpec = with_path(&a.spec, io::read_json(&a.spec))?;
    let stack = io::synthesize(&spec)?;
    with_path(&a.out, io::write_score_stack(&a.out, &stack))
}

fn augment_cmd(a: AugmentArgs, cfg: &Config) -> Result<()> {
    let defaults = AugmentConfig::default();
    let max_rot = a.max_rotation.or(cfg.max_rotation);
    let aug = AugmentConfig {
        scales: a.scales.or_else(|| cfg.scales.clone()).unwrap_or(defaults.scales),
        flip_prob: a.flip_prob.or(cfg.flip_prob).unwrap_or(defaults.flip_prob),
        rotate_range_deg: max_rot.map_or(defaults.rotate_range_deg, |r| (-r.abs(), r.abs())),
        crop_size: a.crop.or(cfg.crop).unwrap_or(defaults.crop_size),
        seed: a.seed.or(cfg.seed).unwrap_or(defaults.seed),
    };
    let kernels = a.kernels.resolve(cfg)?;
    let image = with_path(&a.image, io::read_image(&a.image))?;
    let ann = with_path(&a.annotation, io::read_annotation(&a.annotation))?;
    if (ann.height, ann.width) != image.dims() {
        bail!(
            "annotation is {}x{} but the image is {}x{}",
            ann.height,
            ann.width,
            image.height(),
            image.width()
        );
    }
    let sample = Sample::new(image, generate_labels(&ann, &kernels)?)?;
    let out = augment::augment(&sample, &aug)?;
    fs::write(&a.out_image, io::encode_image_png(&out.image)?).with_context(|| format!("{}", a.out_image.display()))?;
    with_path(&a.out_labels, io::write_score_stack(&a.out_labels, &ScoreStack::from_labels(&out.labels)))
}

fn bench(a: BenchArgs, cfg: &Config) -> Result<()> {
    let resolutions = a
        .resolutions
        .or_else(|| cfg.resolutions.clone())
        .unwrap_or_else(|| vec![(160, 160), (320, 320), (640, 640)]);
    let n = a.n.or(cfg.n).unwrap_or(DEFAULT_N);
    KernelSpec::new(n, DEFAULT_M)?;
    let repeats = a.repeats.or(cfg.repeats).unwrap_or(DEFAULT_REPEATS);
    let report = run_bench(&resolutions, n, repeats)?;
    if let Some(path) = &a.out {
        with_path(path, io::write_json(path, &report))?;
    }
    if a.json {
        print_json(&report)
    } else {
        print!("{}", report.table());
        Ok(())
    }
}
