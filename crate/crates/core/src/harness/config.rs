use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::SyntheticSceneSpec;
use super::HarnessError;
use crate::eval::EvalConfig;
use crate::geometry::{intrinsics, BevGridSpec, Calibration, CameraModel, PolarGridSpec};
use crate::loss::LossConfig;
use crate::net::NetworkConfig;
use crate::radar::MimoConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub dataset: PathBuf,
    /// Checkpoint read by `infer`, `eval` and `bench`; written by `train`.
    pub checkpoint: PathBuf,
    pub output: PathBuf,
}

/// Pinhole camera and rendered image size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSetup {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Mounting height above the ground, metres.
    pub height: f64,
    /// Downward tilt, degrees.
    pub pitch_deg: f64,
    pub image_width: usize,
    pub image_height: usize,
}

impl CameraSetup {
    pub fn model(&self) -> Result<CameraModel, HarnessError> {
        Ok(CameraModel::new(intrinsics(self.fx, self.fy, self.cx, self.cy), self.height, self.pitch_deg)?)
    }

    pub fn calibration(&self, grid: &BevGridSpec) -> Calibration {
        Calibration {
            intrinsics: intrinsics(self.fx, self.fy, self.cx, self.cy),
            height: self.height,
            pitch_deg: self.pitch_deg,
            grid: *grid,
        }
    }
}

/// Representation of the camera branch input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraDomain {
    /// Range-azimuth raster, row 0 at the nearest range.
    Polar,
    /// Cartesian BEV raster resized to the network input, row 0 at `xmin`.
    Cartesian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// Multiplier applied every `decay_every` epochs.
    pub decay: f64,
    pub decay_every: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many Adam steps, whatever the epoch count.
    pub max_steps: Option<usize>,
    /// Write a checkpoint every this many epochs (the last one always).
    pub checkpoint_every: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            decay: 0.9,
            decay_every: 10,
            batch_size: 4,
            epochs: 100,
            max_steps: None,
            checkpoint_every: 1,
        }
    }
}

impl OptimizerConfig {
    /// `lr₀ · decay^⌊epoch / decay_every⌋`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay.powi((epoch / self.decay_every) as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

/// Which dataset frames a command processes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Val,
    Test,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Minimum confidence kept when decoding maps.
    pub decode_threshold: f64,
    /// Frames scored by `infer` and `eval`.
    pub split: SplitName,
    /// Timed frames for `bench`.
    pub bench_frames: usize,
    #[serde(flatten)]
    pub matching: EvalConfig,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            decode_threshold: 0.1,
            split: SplitName::Test,
            bench_frames: 20,
            matching: EvalConfig::default(),
        }
    }
}

/// Everything a run needs. Stored as TOML with one table per section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub camera_domain: CameraDomain,
    pub paths: Paths,
    pub camera: CameraSetup,
    /// Ground window of the Cartesian BEV warp.
    pub bev: BevGridSpec,
    /// Range-azimuth raster fed to the camera branch.
    pub polar: PolarGridSpec,
    pub mimo: MimoConfig,
    pub network: NetworkConfig,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub split: SplitConfig,
    pub eval: EvalSection,
    pub scene: SyntheticSceneSpec,
}

impl PipelineConfig {
    /// Desk-scale setup: width-1/8 network on 64×32 inputs, 512×256 camera
    /// frames, 16×28 output cells.
    pub fn desk(root: impl AsRef<Path>) -> Self {
        let root = root.as_ref();
        let network = NetworkConfig::desk();
        let [rows, cols] = network.camera_input;
        let grid = network.output_grid;
        let polar = PolarGridSpec {
            n_range: rows,
            n_azimuth: cols,
            range_res: grid.range_res * grid.n_range as f64 / rows as f64,
            azimuth_res: grid.azimuth_res * grid.n_azimuth as f64 / cols as f64,
            azimuth_center: cols as f64 / 2.0,
        };
        let mimo = MimoConfig::new(network.n_tx, network.radar_input[1]);
        Self {
            seed: 7,
            camera_domain: CameraDomain::Polar,
            paths: Paths {
                dataset: root.join("dataset"),
                checkpoint: root.join("run").join("model.pfn"),
                output: root.join("run"),
            },
            camera: CameraSetup {
                fx: 256.0,
                fy: 256.0,
                cx: 255.5,
                cy: 127.5,
                height: 2.0,
                pitch_deg: 4.0,
                image_width: 512,
                image_height: 256,
            },
            bev: BevGridSpec {
                xmin: 2.0,
                xmax: 52.0,
                ymin: -36.0,
                ymax: 36.0,
                nrows: 250,
                ncols: 288,
            },
            polar,
            mimo,
            network,
            loss: LossConfig::default(),
            optimizer: OptimizerConfig::default(),
            split: SplitConfig::default(),
            eval: EvalSection::default(),
            scene: SyntheticSceneSpec::default(),
        }
    }

    /// Range resolution of the radar cube, metres per bin.
    pub fn radar_range_res(&self) -> f64 {
        let g = &self.network.output_grid;
        g.range_res * g.n_range as f64 / self.network.radar_input[0] as f64
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.network.validate()?;
        self.loss.validate().map_err(HarnessError::Config)?;
        self.bev.validate()?;
        self.polar.validate()?;
        self.mimo.validate()?;
        self.eval.matching.template.validate()?;
        self.camera.model()?;
        let [rows, cols] = self.network.camera_input;
        let [rr, rd] = self.network.radar_input;
        if self.camera.image_width == 0 || self.camera.image_height == 0 {
            return bad("camera image size must be positive".into());
        }
        if self.camera_domain == CameraDomain::Polar && (self.polar.n_range, self.polar.n_azimuth) != (rows, cols) {
            return bad(format!(
                "polar raster {}×{} must match the camera input {rows}×{cols}",
                self.polar.n_range, self.polar.n_azimuth
            ));
        }
        if self.mimo.n_tx != self.network.n_tx || self.mimo.d_max != rd {
            return bad(format!(
                "mimo (n_tx {}, D_max {}) must match the network's n_tx {} and {rd} Doppler bins",
                self.mimo.n_tx, self.mimo.d_max, self.network.n_tx
            ));
        }
        if rr == 0 {
            return bad("radar range bins must be positive".into());
        }
        let sum = self.split.train + self.split.val + self.split.test;
        if (sum - 1.0).abs() > 1e-9 || [self.split.train, self.split.val, self.split.test].iter().any(|f| *f < 0.0) {
            return bad(format!("split fractions must be non-negative and sum to 1, got {sum}"));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0) || !(o.decay > 0.0 && o.decay <= 1.0) || o.decay_every == 0 || o.batch_size == 0 || o.checkpoint_every == 0 {
            return bad(format!("optimizer settings out of range: {o:?}"));
        }
        let t = self.eval.decode_threshold;
        if !(t > 0.0 && t < 1.0) {
            return bad(format!("decode threshold {t} outside (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.eval.matching.iou_threshold) {
            return bad(format!("IoU threshold {}", self.eval.matching.iou_threshold));
        }
        self.scene.validate(self)?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let cfg = Self::from_toml(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        super::write_file(path.as_ref(), self.to_toml()?.as_bytes())
    }

    /// Writes the resolved config to `dir/resolved_config.toml`.
    pub fn record_in(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
        self.save(dir.join("resolved_config.toml"))
    }
}
