use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polarfuse_core::harness::{
    run_bench, run_eval, run_generate, run_infer, run_train, run_warp, HarnessError, PipelineConfig,
};

/// Radar-camera fusion detector in the bird's-eye-view polar domain.
#[derive(Parser)]
#[command(name = "polarfuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML pipeline config; desk-scale defaults rooted at `--out` when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the run seed and the scene seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Without `--config`: run root holding `dataset/` and `run/`. With
    /// `--config`: replaces the dataset directory for `gen` and the output
    /// directory for the other commands.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic camera/radar dataset.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Number of frames.
        #[arg(long, default_value_t = 40)]
        frames: usize,
    },
    /// Train on the train split and write checkpoints.
    Train(Common),
    /// Detect on the configured split and write detections.csv.
    Infer(Common),
    /// Detect and score against ground truth.
    Eval(Common),
    /// Time forward pass plus decoding per frame.
    Bench(Common),
    /// Write BEV and polar warps of the camera frames.
    Warp(Common),
}

fn resolve(common: &Common, is_gen: bool) -> Result<PipelineConfig, HarnessError> {
    let mut cfg = match (&common.config, &common.out) {
        (Some(path), _) => PipelineConfig::load(path)?,
        (None, Some(out)) => PipelineConfig::desk(out),
        (None, None) => return Err(HarnessError::Config("either --config or --out is required".into())),
    };
    if let (Some(_), Some(out)) = (&common.config, &common.out) {
        if is_gen {
            cfg.paths.dataset = out.clone();
        } else {
            cfg.paths.output = out.clone();
        }
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.scene.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, HarnessError> {
    match cli.command {
        Command::Gen { common, frames } => {
            let cfg = resolve(&common, true)?;
            let m = run_generate(&cfg, frames)?;
            let objects: usize = m.frames.iter().map(|f| f.objects).sum();
            Ok(format!(
                "generated {} frames with {objects} vehicles in {}",
                m.frames.len(),
                cfg.paths.dataset.display()
            ))
        }
        Command::Train(common) => {
            let cfg = resolve(&common, false)?;
            let s = run_train(&cfg)?;
            let mut out = format!(
                "trained {} steps over {} epochs, final loss {:.6}, {} parameters, checkpoint {} ({} bytes)",
                s.report.steps.len(),
                s.report.epochs.len(),
                s.report.final_loss().unwrap_or(f64::NAN),
                s.parameters,
                s.checkpoint.display(),
                s.checkpoint_bytes
            );
            if let Some(v) = s.validation {
                out.push_str(&format!("\nvalidation: AP {:.2} AR {:.2} F1 {:.2}", v.ap, v.ar, v.f1));
            }
            Ok(out)
        }
        Command::Infer(common) => {
            let cfg = resolve(&common, false)?;
            let d = run_infer(&cfg)?;
            let n: usize = d.values().map(Vec::len).sum();
            Ok(format!(
                "{n} detections over {} frames written to {}",
                d.len(),
                cfg.paths.output.join("detections.csv").display()
            ))
        }
        Command::Eval(common) => {
            let cfg = resolve(&common, false)?;
            Ok(run_eval(&cfg)?.to_text().trim_end().to_owned())
        }
        Command::Bench(common) => {
            let cfg = resolve(&common, false)?;
            Ok(run_bench(&cfg)?.to_text().trim_end().to_owned())
        }
        Command::Warp(common) => {
            let cfg = resolve(&common, false)?;
            let files = run_warp(&cfg)?;
            Ok(format!("wrote {} files under {}", files.len(), cfg.paths.output.join("warp").display()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(if matches!(e, HarnessError::Config(_)) { 2 } else { 1 })
        }
    }
}
