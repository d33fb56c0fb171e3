//! `posegrid` command line.
//!
//! Exit codes: 0 success, 1 invalid input or arguments, 2 I/O failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use posegrid::harness::{self, render_overlay, Scene};
use posegrid::loss::{grad_check, loss_registry};
use posegrid::{decode, encode_stack, evaluate, fhm, Error, HeatmapStack, MaskMap, PipelineConfig, Pose, SkeletonSpec};

#[derive(Parser)]
#[command(name = "posegrid", version, about = "Heatmap encoding, decoding and evaluation for bottom-up pose grouping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pipeline config JSON; defaults apply to anything omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skeleton JSON; the 17-keypoint default when omitted.
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Person count; drawn from the configured range when omitted.
        #[arg(long)]
        persons: Option<usize>,
    },
    /// Encode poses into an FHM1 heatmap stack.
    Encode {
        #[command(flatten)]
        common: Common,
        /// Scene JSON or pose array.
        #[arg(long)]
        poses: PathBuf,
    },
    /// Decode an FHM1 heatmap stack into poses.
    Decode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        heatmap: PathBuf,
        /// Keep at most this many poses.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Compare the analytic loss gradient against finite differences.
    LossCheck {
        #[command(flatten)]
        common: Common,
        /// Prediction stack; random around the target when omitted.
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Target stack; encoded from a generated scene when omitted.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
    },
    /// Encode, perturb, decode and evaluate a batch of generated scenes.
    Roundtrip {
        #[command(flatten)]
        common: Common,
        /// Scene count; the configured value when omitted.
        #[arg(long)]
        scenes: Option<usize>,
        /// Worker threads; the configured value when omitted (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Include per-stage wall time in the report.
        #[arg(long)]
        timings: bool,
    },
    /// Score detections against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
    },
    /// Draw poses over a heatmap as a binary PPM.
    Render {
        #[command(flatten)]
        common: Common,
        /// Scene JSON or pose array.
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        heatmap: Option<PathBuf>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
    },
}

/// A scene file or a bare list of poses.
#[derive(Deserialize)]
#[serde(untagged)]
enum PoseSource {
    Scene(Scene),
    Poses(Vec<Pose>),
}

impl PoseSource {
    fn poses(self) -> Vec<Pose> {
        match self {
            PoseSource::Scene(s) => s.poses,
            PoseSource::Poses(p) => p,
        }
    }
}

/// One scene's poses or one list per scene.
#[derive(Deserialize)]
#[serde(untagged)]
enum Batch {
    Single(Vec<Pose>),
    Scenes(Vec<Vec<Pose>>),
    Scene(Scene),
}

impl Batch {
    fn scenes(self) -> Vec<Vec<Pose>> {
        match self {
            Batch::Single(p) => vec![p],
            Batch::Scenes(s) => s,
            Batch::Scene(s) => vec![s.poses],
        }
    }
}

fn with_path(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> posegrid::Result<String> {
    fs::read_to_string(path).map_err(with_path(path))
}

fn load_stack(path: &Path) -> posegrid::Result<HeatmapStack> {
    let file = fs::File::open(path).map_err(with_path(path))?;
    fhm::read_fhm(io::BufReader::new(file))
}

fn load_config(common: &Common) -> posegrid::Result<PipelineConfig> {
    match &common.config {
        Some(p) => PipelineConfig::from_json(&read_text(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_skeleton(common: &Common) -> posegrid::Result<SkeletonSpec> {
    match &common.skeleton {
        Some(p) => SkeletonSpec::from_json(&read_text(p)?),
        None => Ok(SkeletonSpec::default()),
    }
}

fn emit_bytes(out: Option<&Path>, bytes: &[u8]) -> posegrid::Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(with_path(p))?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> posegrid::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit_bytes(out, text.as_bytes())
}

fn run(cli: Cli) -> posegrid::Result<()> {
    match cli.command {
        Command::Gen { common, persons } => {
            let cfg = load_config(&common)?;
            let spec = load_skeleton(&common)?;
            let mut scene = harness::roundtrip::batch_scene(common.seed, 0, &spec, &cfg)?;
            if let Some(n) = persons {
                let stride = cfg.encoder.stride as usize;
                let canvas = (cfg.encoder.grid.width * stride, cfg.encoder.grid.height * stride);
                let mut constraints = cfg.harness.constraints;
                constraints.stride = cfg.encoder.stride;
                scene = harness::gen_scene(n, canvas, common.seed, &spec, &constraints)?;
                scene.noise = cfg.harness.noise;
            }
            emit_json(common.out.as_deref(), &scene)
        }
        Command::Encode { common, poses } => {
            let cfg = load_config(&common)?;
            let spec = load_skeleton(&common)?;
            let poses: PoseSource = serde_json::from_str(&read_text(&poses)?)?;
            let stack = encode_stack(&poses.poses(), &spec, &cfg.encoder, cfg.encoder.grid)?;
            let mut bytes = Vec::new();
            fhm::write_fhm(&mut bytes, &stack)?;
            emit_bytes(common.out.as_deref(), &bytes)
        }
        Command::Decode { common, heatmap, top } => {
            let cfg = load_config(&common)?;
            let spec = load_skeleton(&common)?;
            let stack = load_stack(&heatmap)?;
            let mut poses = decode(&stack, &spec, &cfg.decoder)?;
            poses.truncate(top);
            emit_json(common.out.as_deref(), &poses)
        }
        Command::LossCheck { common, pred, gt, step } => {
            let cfg = load_config(&common)?;
            let spec = load_skeleton(&common)?;
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::Config(format!("step {step} must be positive")));
            }
            let gt = match gt {
                Some(p) => load_stack(&p)?,
                None => {
                    let scene = harness::roundtrip::batch_scene(common.seed, 0, &spec, &cfg)?;
                    encode_stack(&scene.poses, &spec, &cfg.encoder, cfg.encoder.grid)?
                }
            };
            let pred = match pred {
                Some(p) => load_stack(&p)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(common.seed ^ 0x9e37_79b9);
                    let mut p = gt.clone();
                    for v in p.data.iter_mut() {
                        *v = (*v + rng.gen_range(-0.3..0.3)).clamp(0.0, 1.0);
                    }
                    p
                }
            };
            if !pred.same_shape(&gt) {
                return Err(Error::DimMismatch("prediction and target shapes differ".into()));
            }
            if pred.channels != spec.num_channels() {
                return Err(Error::ChannelMismatch {
                    expected: spec.num_channels(),
                    got: pred.channels,
                });
            }
            let loss = loss_registry().get(&cfg.loss.kind)?;
            let mask = MaskMap::ones(gt.dims);
            let report = grad_check(loss.as_ref(), &pred, &gt, &mask, &cfg.loss, spec.num_keypoints(), step)?;
            emit_json(common.out.as_deref(), &report)
        }
        Command::Roundtrip {
            common,
            scenes,
            workers,
            timings,
        } => {
            let cfg = load_config(&common)?;
            let spec = load_skeleton(&common)?;
            let count = scenes.unwrap_or(cfg.harness.scenes);
            let workers = workers.unwrap_or(cfg.harness.workers);
            let (report, _) = harness::run_batch(&spec, &cfg, common.seed, count, workers, timings)?;
            emit_json(common.out.as_deref(), &report)
        }
        Command::Eval {
            common,
            detections,
            ground_truth,
        } => {
            let cfg = load_config(&common)?;
            let dets: Batch = serde_json::from_str(&read_text(&detections)?)?;
            let gts: Batch = serde_json::from_str(&read_text(&ground_truth)?)?;
            let report = evaluate(&dets.scenes(), &gts.scenes(), &cfg.oks)?;
            emit_json(common.out.as_deref(), &report)
        }
        Command::Render {
            common,
            poses,
            heatmap,
            width,
            height,
        } => {
            let cfg = load_config(&common)?;
            let spec = load_skeleton(&common)?;
            let source: PoseSource = serde_json::from_str(&read_text(&poses)?)?;
            let stride = cfg.encoder.stride as usize;
            let (mut w, mut h) = (cfg.encoder.grid.width * stride, cfg.encoder.grid.height * stride);
            if let PoseSource::Scene(s) = &source {
                (w, h) = (s.width, s.height);
            }
            let (w, h) = (width.unwrap_or(w), height.unwrap_or(h));
            if w == 0 || h == 0 {
                return Err(Error::Config("canvas must be non-empty".into()));
            }
            let stack: Option<HeatmapStack> = heatmap.as_deref().map(load_stack).transpose()?;
            let img = render_overlay(w, h, &source.poses(), stack.as_ref(), &spec);
            emit_bytes(common.out.as_deref(), &img.to_ppm())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
