//! Synthetic data generation, preprocessing, training, inference,
//! evaluation and benchmarking around the fusion network.

mod config;
mod dataset;
mod preprocess;
mod train;

pub use config::{
    CameraDomain, CameraSetup, EvalSection, OptimizerConfig, Paths, PipelineConfig, SplitConfig, SplitName,
};
pub use dataset::{
    frame_id, generate_synthetic_dataset, synthesize_frame, Dataset, Manifest, ManifestFrame, RadarLayout,
    SyntheticFrame, SyntheticSceneSpec, LABELS_FILE, MANIFEST_FILE,
};
pub use preprocess::{Preprocessor, Sample};
pub use train::{batch_inputs, inference_loss, EpochRecord, StepRecord, TrainReport, Trainer};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eval::{
    compute_metrics, decode_detections, write_detections, BenchmarkReport, Detection, EvalError, FrameLabels, GtObject,
    MetricsReport,
};
use crate::geometry::{GeometryError, PolarGridSpec, RgbImage};
use crate::net::{load_checkpoint, save_checkpoint, Model, NetError};
use crate::radar::{RadarError, RdTensor};
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("I/O: {0}")]
    Io(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("non-finite training state at epoch {epoch}, step {step}: {detail}")]
    NonFiniteLoss { epoch: usize, step: usize, detail: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Radar(#[from] RadarError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl HarnessError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Io(_) => "io",
            Self::Dataset(_) => "dataset",
            Self::NonFiniteLoss { .. } => "non_finite_loss",
            Self::Geometry(_) => "geometry",
            Self::Radar(_) => "radar",
            Self::Net(_) => "network",
            Self::Tensor(_) => "tensor",
            Self::Eval(_) => "eval",
        }
    }
}

/// Writes `bytes`, creating parent directories.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

/// Frame indices of each subset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, name: SplitName, n: usize) -> Vec<usize> {
        match name {
            SplitName::Train => self.train.clone(),
            SplitName::Val => self.val.clone(),
            SplitName::Test => self.test.clone(),
            SplitName::All => (0..n).collect(),
        }
    }
}

/// Seeded random partition with subset sizes rounded to the nearest frame.
/// Each subset keeps ascending frame order.
pub fn split_frames(n: usize, split: &SplitConfig, seed: u64) -> Splits {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((split.train * n as f64).round() as usize).min(n);
    let n_val = ((split.val * n as f64).round() as usize).min(n - n_train);
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Splits {
        train: sorted(&order[..n_train]),
        val: sorted(&order[n_train..n_train + n_val]),
        test: sorted(&order[n_train + n_val..]),
    }
}

/// Generates the dataset at `cfg.paths.dataset` and records the config there.
pub fn run_generate(cfg: &PipelineConfig, n_frames: usize) -> Result<Manifest, HarnessError> {
    cfg.validate()?;
    let m = generate_synthetic_dataset(cfg, n_frames, &cfg.paths.dataset)?;
    cfg.record_in(&cfg.paths.dataset)?;
    Ok(m)
}

/// Loads and preprocesses the frames at `indices`.
pub fn load_samples(cfg: &PipelineConfig, data: &Dataset, indices: &[usize]) -> Result<Vec<Sample>, HarnessError> {
    let pre = Preprocessor::new(cfg)?;
    indices
        .iter()
        .map(|&i| {
            let (img, rd) = data.load(i)?;
            pre.sample(&data.manifest.frames[i].id, &img, &rd, data.objects(i))
        })
        .collect()
}

/// Preprocesses in-memory frames.
pub fn prepare_frames(cfg: &PipelineConfig, frames: &[SyntheticFrame]) -> Result<Vec<Sample>, HarnessError> {
    let pre = Preprocessor::new(cfg)?;
    frames
        .iter()
        .map(|f| pre.sample(&f.id, &f.camera, &f.radar, f.objects.clone()))
        .collect()
}

/// Per-frame inference and decoding, in input order.
pub fn detect(model: &Model, samples: &[Sample], threshold: f64) -> Result<Vec<Vec<Detection>>, HarnessError> {
    let grid = model.config().output_grid;
    samples
        .iter()
        .map(|s| {
            let cam = s.camera.clone().reshape(&[1, s.camera.shape()[0], s.camera.shape()[1], s.camera.shape()[2]])?;
            let rad = s.radar.clone().reshape(&[1, s.radar.shape()[0], s.radar.shape()[1], s.radar.shape()[2]])?;
            let maps = model.predict(cam, rad)?;
            Ok(decode_detections(&maps[0], threshold, &grid)?)
        })
        .collect()
}

/// Detects on `samples` and scores against their labels.
pub fn evaluate_model(model: &Model, samples: &[Sample], eval: &EvalSection) -> Result<MetricsReport, HarnessError> {
    let dets = detect(model, samples, eval.decode_threshold)?;
    let frames: Vec<(Vec<Detection>, Vec<GtObject>)> =
        dets.into_iter().zip(samples).map(|(d, s)| (d, s.objects.clone())).collect();
    Ok(compute_metrics(&frames, &eval.matching)?)
}

/// Outcome of [`run_train`].
#[derive(Debug)]
pub struct TrainSummary {
    pub report: TrainReport,
    pub checkpoint: PathBuf,
    pub checkpoint_bytes: u64,
    pub parameters: usize,
    pub validation: Option<MetricsReport>,
}

/// Trains on the train split, writing per-epoch checkpoints under
/// `output/checkpoints`, the final model to `paths.checkpoint`, and a loss
/// log to `output/train_log.csv`.
pub fn run_train(cfg: &PipelineConfig) -> Result<TrainSummary, HarnessError> {
    cfg.validate()?;
    let data = Dataset::open(&cfg.paths.dataset, cfg)?;
    let splits = split_frames(data.len(), &cfg.split, cfg.seed);
    if splits.train.is_empty() {
        return Err(HarnessError::Dataset("train split is empty".into()));
    }
    cfg.record_in(&cfg.paths.output)?;
    let train = load_samples(cfg, &data, &splits.train)?;
    let mut net = cfg.network.clone();
    net.seed = cfg.seed;
    let mut model = Model::new(&net)?;
    let mut trainer = Trainer::new(&model, &cfg.optimizer, &cfg.loss, cfg.seed);
    let ckpt_dir = cfg.paths.output.join("checkpoints");
    let mut last_bytes = 0;
    let every = cfg.optimizer.checkpoint_every;
    let report = trainer.train(&mut model, &train, |rec, m, last| {
        log::info!("epoch {} lr {:.3e} mean loss {:.6}", rec.epoch, rec.learning_rate, rec.mean_loss);
        if last || (rec.epoch + 1) % every == 0 {
            std::fs::create_dir_all(&ckpt_dir).map_err(|e| HarnessError::Io(format!("{}: {e}", ckpt_dir.display())))?;
            last_bytes = save_checkpoint(m, ckpt_dir.join(format!("epoch_{:04}.pfn", rec.epoch)))?;
        }
        Ok(())
    })?;
    if let Some(dir) = cfg.paths.checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    }
    let checkpoint_bytes = save_checkpoint(&model, &cfg.paths.checkpoint)?;
    debug_assert!(last_bytes == 0 || last_bytes == checkpoint_bytes);
    let mut log = String::from("step,epoch,learning_rate,loss,focal,regression\n");
    for s in &report.steps {
        log.push_str(&format!("{},{},{},{},{},{}\n", s.step, s.epoch, s.learning_rate, s.loss, s.focal, s.regression));
    }
    write_file(&cfg.paths.output.join("train_log.csv"), log.as_bytes())?;
    let validation = if splits.val.is_empty() {
        None
    } else {
        let val = load_samples(cfg, &data, &splits.val)?;
        let r = evaluate_model(&model, &val, &cfg.eval)?;
        write_file(&cfg.paths.output.join("val_metrics.txt"), r.to_text().as_bytes())?;
        Some(r)
    };
    Ok(TrainSummary {
        report,
        checkpoint: cfg.paths.checkpoint.clone(),
        checkpoint_bytes,
        parameters: model.count_parameters(),
        validation,
    })
}

fn open_model(cfg: &PipelineConfig) -> Result<Model, HarnessError> {
    if !cfg.paths.checkpoint.is_file() {
        return Err(HarnessError::Io(format!("checkpoint {} not found", cfg.paths.checkpoint.display())));
    }
    let model = load_checkpoint(&cfg.paths.checkpoint)?;
    let (a, b) = (model.config(), &cfg.network);
    if a.camera_input != b.camera_input || a.radar_input != b.radar_input || a.output_grid != b.output_grid || a.n_rx != b.n_rx || a.n_tx != b.n_tx {
        return Err(HarnessError::Config("checkpoint network layout differs from the config".into()));
    }
    Ok(model)
}

/// Detections and labels of the configured split.
fn infer_split(cfg: &PipelineConfig) -> Result<(Vec<Sample>, Vec<Vec<Detection>>), HarnessError> {
    cfg.validate()?;
    let model = open_model(cfg)?;
    let data = Dataset::open(&cfg.paths.dataset, cfg)?;
    let idx = split_frames(data.len(), &cfg.split, cfg.seed).get(cfg.eval.split, data.len());
    let samples = load_samples(cfg, &data, &idx)?;
    let dets = detect(&model, &samples, cfg.eval.decode_threshold)?;
    cfg.record_in(&cfg.paths.output)?;
    let labels: FrameLabels<Detection> = samples.iter().zip(&dets).map(|(s, d)| (s.id.clone(), d.clone())).collect();
    write_detections(&cfg.paths.output.join("detections.csv"), &labels)?;
    Ok((samples, dets))
}

/// Writes `output/detections.csv` for the configured split.
pub fn run_infer(cfg: &PipelineConfig) -> Result<FrameLabels<Detection>, HarnessError> {
    let (samples, dets) = infer_split(cfg)?;
    Ok(samples.into_iter().zip(dets).map(|(s, d)| (s.id, d)).collect())
}

/// Inference plus scoring; writes `metrics.txt` and `metrics.kv`.
pub fn run_eval(cfg: &PipelineConfig) -> Result<MetricsReport, HarnessError> {
    let (samples, dets) = infer_split(cfg)?;
    let frames: Vec<_> = dets.into_iter().zip(&samples).map(|(d, s)| (d, s.objects.clone())).collect();
    let report = compute_metrics(&frames, &cfg.eval.matching)?;
    let mut kv = report.to_key_values();
    kv.push_str(&format!("loss_alpha={}\ncamera_domain={:?}\n", cfg.loss.alpha, cfg.camera_domain));
    write_file(&cfg.paths.output.join("metrics.txt"), report.to_text().as_bytes())?;
    write_file(&cfg.paths.output.join("metrics.kv"), kv.as_bytes())?;
    Ok(report)
}

/// Times preprocessing and forward+decode separately for every frame.
pub fn benchmark(
    model: &Model,
    pre: &Preprocessor,
    frames: &[(RgbImage, RdTensor)],
    threshold: f64,
    model_bytes: u64,
) -> Result<BenchmarkReport, HarnessError> {
    let grid = model.config().output_grid;
    let (mut pre_t, mut run_t) = (Vec::new(), Vec::new());
    for (img, rd) in frames {
        let t0 = Instant::now();
        let cam = pre.camera_tensor(img)?;
        let rad = pre.radar_tensor(rd)?;
        pre_t.push(t0.elapsed().as_secs_f64());
        let cam = cam.clone().reshape(&[1, cam.shape()[0], cam.shape()[1], cam.shape()[2]])?;
        let rad = rad.clone().reshape(&[1, rad.shape()[0], rad.shape()[1], rad.shape()[2]])?;
        let t1 = Instant::now();
        let maps = model.predict(cam, rad)?;
        let dets = decode_detections(&maps[0], threshold, &grid)?;
        run_t.push(t1.elapsed().as_secs_f64());
        std::hint::black_box(dets);
    }
    Ok(BenchmarkReport::from_timings(&run_t, &pre_t, model.count_parameters(), model_bytes)?)
}

/// Benchmarks the checkpoint on `eval.bench_frames` frames of the configured
/// split, cycling through it if it is shorter.
pub fn run_bench(cfg: &PipelineConfig) -> Result<BenchmarkReport, HarnessError> {
    cfg.validate()?;
    if cfg.eval.bench_frames < 2 {
        return Err(HarnessError::Config("bench_frames must be at least 2".into()));
    }
    let model = open_model(cfg)?;
    let bytes = std::fs::metadata(&cfg.paths.checkpoint)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", cfg.paths.checkpoint.display())))?
        .len();
    let data = Dataset::open(&cfg.paths.dataset, cfg)?;
    let idx = split_frames(data.len(), &cfg.split, cfg.seed).get(cfg.eval.split, data.len());
    if idx.is_empty() {
        return Err(HarnessError::Dataset("no frames to benchmark".into()));
    }
    let frames = idx
        .iter()
        .cycle()
        .take(cfg.eval.bench_frames)
        .map(|&i| data.load(i))
        .collect::<Result<Vec<_>, _>>()?;
    let report = benchmark(&model, &Preprocessor::new(cfg)?, &frames, cfg.eval.decode_threshold, bytes)?;
    cfg.record_in(&cfg.paths.output)?;
    write_file(&cfg.paths.output.join("bench.txt"), report.to_text().as_bytes())?;
    write_file(&cfg.paths.output.join("bench.kv"), report.to_key_values().as_bytes())?;
    Ok(report)
}

pub const GT_COLOR: [f32; 3] = [0.0, 1.0, 0.0];
pub const PREDICTION_COLOR: [f32; 3] = [0.0, 0.0, 1.0];

/// Pixel `(row, col)` of the display image for raster cell `(i, j)`;
/// display images put the nearest range at the bottom.
pub fn overlay_pixel(grid: &PolarGridSpec, i: usize, j: usize) -> (usize, usize) {
    (grid.n_range - 1 - i, j)
}

/// Draws ground truth (green) then predictions (blue) as plus-shaped marks
/// centred on their raster cells, flips to display orientation and writes a
/// PPM. Returns the drawn image.
pub fn export_polar_overlay(
    raster: &RgbImage,
    grid: &PolarGridSpec,
    detections: &[Detection],
    gts: &[GtObject],
    path: &Path,
) -> Result<RgbImage, HarnessError> {
    if (raster.height(), raster.width()) != (grid.n_range, grid.n_azimuth) {
        return Err(HarnessError::Config(format!(
            "raster {}×{} does not match the {}×{} polar grid",
            raster.height(),
            raster.width(),
            grid.n_range,
            grid.n_azimuth
        )));
    }
    let mut img = raster.clone();
    let mut mark = |r: f64, a: f64, color: [f32; 3]| {
        if let Some((i, j)) = grid.bin_of(r, a) {
            for (di, dj) in [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni >= 0 && nj >= 0 && (ni as usize) < grid.n_range && (nj as usize) < grid.n_azimuth {
                    img.set(ni as usize, nj as usize, color);
                    img.set_valid(ni as usize, nj as usize, true);
                }
            }
        }
    };
    for g in gts {
        mark(g.range, g.azimuth, GT_COLOR);
    }
    for d in detections {
        mark(d.range, d.azimuth, PREDICTION_COLOR);
    }
    let display = img.flipped_vertically();
    write_file(path, &display.to_ppm()?)?;
    Ok(display)
}

/// Geometry-only debug output for every frame of the configured split:
/// BEV warp, its coverage mask, and the camera raster with ground truth.
pub fn run_warp(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, HarnessError> {
    cfg.validate()?;
    let data = Dataset::open(&cfg.paths.dataset, cfg)?;
    let idx = split_frames(data.len(), &cfg.split, cfg.seed).get(cfg.eval.split, data.len());
    let camera = cfg.camera.model()?;
    let pre = Preprocessor::new(&PipelineConfig {
        camera_domain: CameraDomain::Polar,
        ..cfg.clone()
    })?;
    let dir = cfg.paths.output.join("warp");
    cfg.record_in(&cfg.paths.output)?;
    let mut written = Vec::new();
    for i in idx {
        let id = &data.manifest.frames[i].id;
        let (img, _) = data.load(i)?;
        let bev = crate::geometry::image_to_bev_cartesian(&img, &camera, &cfg.bev)?;
        let bev_path = dir.join(format!("{id}_bev.ppm"));
        write_file(&bev_path, &bev.to_ppm()?)?;
        let mask_path = dir.join(format!("{id}_bev_mask.pgm"));
        write_file(&mask_path, &bev.mask_to_pgm()?)?;
        let raster = pre.camera_raster(&img)?;
        let polar_path = dir.join(format!("{id}_polar.ppm"));
        export_polar_overlay(&raster, &cfg.polar, &[], &data.objects(i), &polar_path)?;
        written.extend([bev_path, mask_path, polar_path]);
    }
    Ok(written)
}
