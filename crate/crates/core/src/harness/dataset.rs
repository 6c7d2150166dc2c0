use std::path::{Path, PathBuf};

use num_complex::Complex32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{CameraSetup, PipelineConfig};
use super::{write_file, HarnessError};
use crate::eval::{read_ground_truth, write_ground_truth, FrameLabels, GtObject};
use crate::geometry::{render_camera_frame, GroundScene, Marker, RgbImage};
use crate::radar::{load_rd_tensor, save_rd_tensor, synth_rd_scene, RadarTargetSpec, RdTensor};

/// Randomised scene content: painted vehicle footprints for the camera and
/// point targets for the radar, at shared polar coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSceneSpec {
    pub vehicles_min: usize,
    pub vehicles_max: usize,
    pub range_min: f64,
    pub range_max: f64,
    pub azimuth_min: f64,
    pub azimuth_max: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Radar target magnitude bounds.
    pub amplitude_min: f32,
    pub amplitude_max: f32,
    pub noise_sigma: f32,
    pub ground: [f32; 3],
    pub checker: [f32; 3],
    pub checker_size: f64,
    pub sky: [f32; 3],
    pub vehicle_colors: Vec<[f32; 3]>,
    pub supersample: usize,
    pub seed: u64,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            vehicles_min: 1,
            vehicles_max: 4,
            range_min: 6.0,
            range_max: 46.0,
            azimuth_min: -35.0,
            azimuth_max: 35.0,
            vehicle_length: 4.0,
            vehicle_width: 1.8,
            amplitude_min: 1.0,
            amplitude_max: 2.0,
            noise_sigma: 0.05,
            ground: [0.32, 0.33, 0.35],
            checker: [0.42, 0.42, 0.40],
            checker_size: 2.0,
            sky: [0.6, 0.75, 0.95],
            vehicle_colors: vec![[0.95, 0.15, 0.1], [0.95, 0.9, 0.1], [0.1, 0.3, 0.95], [0.95, 0.95, 0.95]],
            supersample: 3,
            seed: 1,
        }
    }
}

impl SyntheticSceneSpec {
    /// Checks that every placement the bounds allow fits the camera window,
    /// the radar cube and the output grid.
    pub fn validate(&self, cfg: &PipelineConfig) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(format!("scene: {m}")));
        if self.vehicles_min > self.vehicles_max {
            return bad(format!("vehicles_min {} > vehicles_max {}", self.vehicles_min, self.vehicles_max));
        }
        if !(self.range_min > 0.0 && self.range_min < self.range_max) || !(self.azimuth_min < self.azimuth_max) {
            return bad("placement bounds are empty".into());
        }
        if self.azimuth_min <= -90.0 || self.azimuth_max >= 90.0 {
            return bad("azimuth bounds must stay inside (-90, 90)".into());
        }
        if !(self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return bad("vehicle size must be positive".into());
        }
        if !(self.amplitude_min > 0.0 && self.amplitude_min <= self.amplitude_max) || !(self.noise_sigma >= 0.0) {
            return bad("radar amplitude/noise out of range".into());
        }
        if self.vehicle_colors.is_empty() || self.supersample == 0 || !(self.checker_size > 0.0) {
            return bad("rendering parameters out of range".into());
        }
        let radar_extent = cfg.radar_range_res() * cfg.network.radar_input[0] as f64;
        let g = &cfg.network.output_grid;
        if self.range_max >= radar_extent.min(g.max_range()) {
            return bad(format!("range_max {} beyond the radar/grid extent {radar_extent}", self.range_max));
        }
        let (lo, hi) = g.azimuth_span();
        if self.azimuth_min < lo || self.azimuth_max >= hi {
            return bad(format!("azimuth bounds exceed the output grid [{lo}, {hi})"));
        }
        let w = &cfg.bev;
        for r in [self.range_min, self.range_max] {
            for a in [self.azimuth_min, self.azimuth_max, 0.0f64.clamp(self.azimuth_min, self.azimuth_max)] {
                let (x, y) = (r * a.to_radians().cos(), r * a.to_radians().sin());
                if x - self.vehicle_length / 2.0 < w.xmin
                    || x + self.vehicle_length / 2.0 > w.xmax
                    || y - self.vehicle_width / 2.0 < w.ymin
                    || y + self.vehicle_width / 2.0 > w.ymax
                {
                    return bad(format!("a vehicle at ({r} m, {a}°) leaves the BEV window"));
                }
            }
        }
        Ok(())
    }
}

/// One generated frame held in memory.
#[derive(Clone, Debug)]
pub struct SyntheticFrame {
    pub id: String,
    pub objects: Vec<GtObject>,
    /// Camera frame after 8-bit quantisation, as stored on disk.
    pub camera: RgbImage,
    pub radar: RdTensor,
}

pub fn frame_id(index: usize) -> String {
    format!("frame_{index:05}")
}

/// Vehicle centres for one frame. Objects occupy distinct output cells
/// that are not 8-neighbours of each other, and their footprints do not
/// overlap.
fn place_vehicles(spec: &SyntheticSceneSpec, cfg: &PipelineConfig, rng: &mut ChaCha8Rng) -> Vec<GtObject> {
    let grid = &cfg.network.output_grid;
    let count = rng.random_range(spec.vehicles_min..=spec.vehicles_max);
    let mut placed: Vec<(GtObject, (usize, usize))> = Vec::new();
    let mut attempts = 0;
    while placed.len() < count && attempts < 1000 {
        attempts += 1;
        let r = rng.random_range(spec.range_min..spec.range_max);
        let a = rng.random_range(spec.azimuth_min..spec.azimuth_max);
        let Some(cell) = grid.bin_of(r, a) else { continue };
        let (x, y) = (r * a.to_radians().cos(), r * a.to_radians().sin());
        let clear = placed.iter().all(|(o, c)| {
            let (ox, oy) = (o.range * o.azimuth.to_radians().cos(), o.range * o.azimuth.to_radians().sin());
            let far_cells = c.0.abs_diff(cell.0) >= 2 || c.1.abs_diff(cell.1) >= 2;
            let apart = (x - ox).abs() > spec.vehicle_length || (y - oy).abs() > spec.vehicle_width;
            far_cells && apart
        });
        if clear {
            placed.push((GtObject::new(r, a), cell));
        }
    }
    placed.into_iter().map(|(o, _)| o).collect()
}

/// Deterministic frame `index` of the dataset described by `cfg.scene`.
pub fn synthesize_frame(cfg: &PipelineConfig, index: usize) -> Result<SyntheticFrame, HarnessError> {
    let spec = &cfg.scene;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let objects = place_vehicles(spec, cfg, &mut rng);

    let markers = objects
        .iter()
        .map(|o| {
            let t = o.azimuth.to_radians();
            Marker {
                x: o.range * t.cos(),
                y: o.range * t.sin(),
                length: spec.vehicle_length,
                width: spec.vehicle_width,
                color: spec.vehicle_colors[rng.random_range(0..spec.vehicle_colors.len())],
            }
        })
        .collect();
    let scene = GroundScene {
        ground: spec.ground,
        checker: Some((spec.checker, spec.checker_size)),
        sky: spec.sky,
        markers,
    };
    let cam = &cfg.camera;
    let rendered = render_camera_frame(&scene, &cam.model()?, cam.image_height, cam.image_width, spec.supersample);
    let camera = RgbImage::from_ppm(&rendered.to_ppm()?)?;

    let res = cfg.radar_range_res();
    let n_doppler = cfg.mimo.d_max;
    let targets: Vec<RadarTargetSpec> = objects
        .iter()
        .map(|o| {
            let mag = rng.random_range(spec.amplitude_min..=spec.amplitude_max);
            let phase = rng.random_range(0.0..std::f32::consts::TAU);
            RadarTargetSpec::at_azimuth(
                (o.range / res).floor() as usize,
                rng.random_range(0..n_doppler),
                Complex32::from_polar(mag, phase),
                o.azimuth,
            )
        })
        .collect();
    let noise_seed = rng.random();
    let radar = synth_rd_scene(
        &targets,
        cfg.network.radar_input[0],
        cfg.network.n_rx,
        &cfg.mimo,
        spec.noise_sigma,
        noise_seed,
    )?;
    Ok(SyntheticFrame {
        id: frame_id(index),
        objects,
        camera,
        radar,
    })
}

/// Radar cube layout recorded in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarLayout {
    pub n_range: usize,
    pub n_doppler: usize,
    pub n_rx: usize,
    pub n_tx: usize,
    pub range_res: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFrame {
    pub id: String,
    /// Paths relative to the dataset directory.
    pub camera: String,
    pub radar: String,
    pub objects: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub labels: String,
    pub camera: CameraSetup,
    pub radar: RadarLayout,
    pub scene: SyntheticSceneSpec,
    pub frames: Vec<ManifestFrame>,
}

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const LABELS_FILE: &str = "gt.csv";

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| HarnessError::Dataset(format!("{}: {e}", path.display())))
    }
}

/// Writes `n_frames` frames, the label CSV and the manifest under `out_dir`.
/// With zero frames only the manifest and an empty label file are written.
pub fn generate_synthetic_dataset(cfg: &PipelineConfig, n_frames: usize, out_dir: &Path) -> Result<Manifest, HarnessError> {
    cfg.validate()?;
    let mut labels = FrameLabels::new();
    let mut frames = Vec::with_capacity(n_frames);
    if n_frames > 0 {
        std::fs::create_dir_all(out_dir.join("frames")).map_err(|e| HarnessError::Io(format!("{}: {e}", out_dir.display())))?;
    }
    for index in 0..n_frames {
        let f = synthesize_frame(cfg, index)?;
        let camera = format!("frames/{}_camera.ppm", f.id);
        let radar = format!("frames/{}_radar.rdt", f.id);
        write_file(&out_dir.join(&camera), &f.camera.to_ppm()?)?;
        save_rd_tensor(&f.radar, out_dir.join(&radar))?;
        frames.push(ManifestFrame {
            id: f.id.clone(),
            camera,
            radar,
            objects: f.objects.len(),
        });
        labels.insert(f.id, f.objects);
    }
    let manifest = Manifest {
        labels: LABELS_FILE.into(),
        camera: cfg.camera.clone(),
        radar: RadarLayout {
            n_range: cfg.network.radar_input[0],
            n_doppler: cfg.mimo.d_max,
            n_rx: cfg.network.n_rx,
            n_tx: cfg.network.n_tx,
            range_res: cfg.radar_range_res(),
        },
        scene: cfg.scene.clone(),
        frames,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::Io(format!("{}: {e}", out_dir.display())))?;
    write_ground_truth(&out_dir.join(LABELS_FILE), &labels)?;
    let text = toml::to_string(&manifest).map_err(|e| HarnessError::Dataset(e.to_string()))?;
    write_file(&out_dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

/// A dataset on disk: manifest plus labels.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub labels: FrameLabels<GtObject>,
}

impl Dataset {
    /// Opens `dir` and checks that its layout matches `cfg`.
    pub fn open(dir: &Path, cfg: &PipelineConfig) -> Result<Self, HarnessError> {
        let manifest = Manifest::load(dir)?;
        let r = &manifest.radar;
        let want = [cfg.network.radar_input[0], cfg.mimo.d_max, cfg.network.n_rx, cfg.network.n_tx];
        if [r.n_range, r.n_doppler, r.n_rx, r.n_tx] != want {
            return Err(HarnessError::Dataset(format!(
                "radar layout {}×{}×{} with {} transmitters does not match the config {want:?}",
                r.n_range, r.n_doppler, r.n_rx, r.n_tx
            )));
        }
        if manifest.camera.image_width != cfg.camera.image_width || manifest.camera.image_height != cfg.camera.image_height {
            return Err(HarnessError::Dataset("camera image size differs from the config".into()));
        }
        let labels = read_ground_truth(&dir.join(&manifest.labels))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frames.is_empty()
    }

    pub fn objects(&self, index: usize) -> Vec<GtObject> {
        self.labels.get(&self.manifest.frames[index].id).cloned().unwrap_or_default()
    }

    /// Camera frame and radar cube of frame `index`.
    pub fn load(&self, index: usize) -> Result<(RgbImage, RdTensor), HarnessError> {
        let f = &self.manifest.frames[index];
        let r = &self.manifest.radar;
        let camera = RgbImage::load_ppm(self.dir.join(&f.camera))?;
        let radar = load_rd_tensor(self.dir.join(&f.radar), r.n_tx, Some([r.n_range, r.n_doppler, r.n_rx]))?;
        Ok((camera, radar))
    }
}
