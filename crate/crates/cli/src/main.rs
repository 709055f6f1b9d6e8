//! `bmq` — batch front end for the boundary-aware mask quality toolkit.
//!
//! Exit codes: 0 success, 2 I/O, 3 malformed data, 4 contract violation,
//! 5 internal.

mod commands;
mod config;

use std::path::PathBuf;

use bmq_core::error::Error;
use bmq_core::synth::{DegradeSpec, MorphKind, SceneSpec, ShapeKind};
use clap::{Parser, Subcommand, ValueEnum};

use commands::{ExperimentArgs, SynthArgs};
use config::Config;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::from(&e)
    }
}

impl From<&Error> for CliError {
    fn from(e: &Error) -> Self {
        let code = match e {
            Error::Io(_) => 2,
            Error::Format(_) => 3,
            Error::Input(_) | Error::State(_) | Error::Generation(_) => 4,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScoreMode {
    Oracle,
    External,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RankMode {
    ClassOnly,
    Oracle,
    External,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MorphKindArg {
    None,
    Dilate,
    Erode,
    Mixed,
}

impl From<MorphKindArg> for MorphKind {
    fn from(v: MorphKindArg) -> Self {
        match v {
            MorphKindArg::None => MorphKind::None,
            MorphKindArg::Dilate => MorphKind::Dilate,
            MorphKindArg::Erode => MorphKind::Erode,
            MorphKindArg::Mixed => MorphKind::Mixed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ShapeArg {
    Rectangle,
    Ellipse,
    ConvexPolygon,
}

impl From<ShapeArg> for ShapeKind {
    fn from(v: ShapeArg) -> Self {
        match v {
            ShapeArg::Rectangle => ShapeKind::Rectangle,
            ShapeArg::Ellipse => ShapeKind::Ellipse,
            ShapeArg::ConvexPolygon => ShapeKind::ConvexPolygon,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bmq",
    about = "Boundary-aware instance-mask quality toolkit",
    version
)]
struct Cli {
    /// Configuration file (JSON); B2_CONFIG is consulted when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract boundary masks from ground-truth annotations.
    Boundary {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Augment predictions with quality scores (oracle or external).
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: ScoreMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-rank predictions by the chosen ranking policy.
    Rerank {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: RankMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// COCO-style AP of predictions against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble instance masks from a basis stack and attention records.
    Blend {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long)]
        attention: PathBuf,
        #[arg(long)]
        boxes: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value_t = 4)]
        stride: u32,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a deterministic synthetic corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 20)]
        scenes: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 2)]
        min_instances: usize,
        #[arg(long, default_value_t = 6)]
        max_instances: usize,
        #[arg(long, default_value_t = 3)]
        categories: usize,
        #[arg(long, value_enum, value_delimiter = ',',
              default_values_t = [ShapeArg::Rectangle, ShapeArg::Ellipse, ShapeArg::ConvexPolygon])]
        shapes: Vec<ShapeArg>,
        /// Also write degraded predictions.
        #[arg(long)]
        degrade: bool,
        #[arg(long)]
        degrade_seed: Option<u64>,
        #[arg(long, default_value_t = 0.05)]
        flip_prob: f64,
        #[arg(long, value_enum, default_value_t = MorphKindArg::Mixed)]
        morph_kind: MorphKindArg,
        #[arg(long, default_value_t = 2)]
        morph_radius: u8,
        #[arg(long, default_value_t = 0.15)]
        noise_sigma: f64,
    },
    /// Verify analytic loss gradients against finite differences.
    Gradcheck {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 16)]
        size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare ranking policies on a degraded synthetic corpus.
    Experiment {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        scenes: usize,
        #[arg(long, default_value_t = 96)]
        width: usize,
        #[arg(long, default_value_t = 96)]
        height: usize,
        #[arg(long, default_value_t = 2)]
        min_instances: usize,
        #[arg(long, default_value_t = 6)]
        max_instances: usize,
        #[arg(long, default_value_t = 3)]
        categories: usize,
        #[arg(long)]
        degrade_seed: Option<u64>,
        #[arg(long, default_value_t = 0.05)]
        flip_prob: f64,
        #[arg(long, value_enum, default_value_t = MorphKindArg::Mixed)]
        morph_kind: MorphKindArg,
        #[arg(long, default_value_t = 2)]
        morph_radius: u8,
        #[arg(long, default_value_t = 0.15)]
        noise_sigma: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = Config::load(cli.config.as_deref(), cli.jobs)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError {
            code: 5,
            message: format!("thread pool: {e}"),
        })?;
    pool.install(|| dispatch(cli.command, &cfg))
}

fn dispatch(command: Command, cfg: &Config) -> Result<(), CliError> {
    match command {
        Command::Boundary { gt, out } => commands::cmd_boundary(&gt, &out, cfg),
        Command::Score {
            pred,
            gt,
            mode,
            out,
        } => commands::cmd_score(&pred, gt.as_deref(), mode, &out, cfg),
        Command::Rerank {
            pred,
            gt,
            mode,
            out,
        } => commands::cmd_rerank(&pred, gt.as_deref(), mode, &out, cfg),
        Command::Eval { pred, gt, out } => commands::cmd_eval(&pred, &gt, &out, cfg),
        Command::Blend {
            stack,
            attention,
            boxes,
            width,
            height,
            stride,
            threshold,
            out,
        } => commands::cmd_blend(
            &stack, &attention, &boxes, width, height, stride, threshold, &out, cfg,
        ),
        Command::Synth {
            out,
            seed,
            scenes,
            width,
            height,
            min_instances,
            max_instances,
            categories,
            shapes,
            degrade,
            degrade_seed,
            flip_prob,
            morph_kind,
            morph_radius,
            noise_sigma,
        } => {
            let scene = SceneSpec {
                seed: seed.unwrap_or(cfg.seed),
                width,
                height,
                min_instances,
                max_instances,
                shapes: shapes.into_iter().map(Into::into).collect(),
                categories,
            };
            let degrade = degrade.then(|| DegradeSpec {
                seed: degrade_seed.unwrap_or(cfg.seed),
                flip_prob,
                morph_kind: morph_kind.into(),
                morph_radius,
                class_noise_sigma: noise_sigma,
            });
            commands::cmd_synth(
                &SynthArgs {
                    scenes,
                    scene,
                    degrade,
                },
                &out,
            )
        }
        Command::Gradcheck {
            seed,
            trials,
            size,
            out,
        } => commands::cmd_gradcheck(seed.unwrap_or(cfg.seed), trials, size, out.as_deref()),
        Command::Experiment {
            out,
            seed,
            scenes,
            width,
            height,
            min_instances,
            max_instances,
            categories,
            degrade_seed,
            flip_prob,
            morph_kind,
            morph_radius,
            noise_sigma,
        } => {
            let scene = SceneSpec {
                seed: seed.unwrap_or(cfg.seed),
                width,
                height,
                min_instances,
                max_instances,
                shapes: vec![
                    ShapeKind::Rectangle,
                    ShapeKind::Ellipse,
                    ShapeKind::ConvexPolygon,
                ],
                categories,
            };
            let degrade = DegradeSpec {
                seed: degrade_seed.unwrap_or(cfg.seed),
                flip_prob,
                morph_kind: morph_kind.into(),
                morph_radius,
                class_noise_sigma: noise_sigma,
            };
            commands::cmd_experiment(
                &ExperimentArgs {
                    scenes,
                    scene,
                    degrade,
                },
                &out,
                cfg,
            )
        }
    }
}
