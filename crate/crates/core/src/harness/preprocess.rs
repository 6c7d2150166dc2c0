use super::config::{CameraDomain, PipelineConfig};
use super::HarnessError;
use crate::eval::GtObject;
use crate::geometry::{
    bev_cartesian_to_polar, image_to_bev_cartesian, BevGridSpec, CameraModel, RgbImage, SplineOrder,
};
use crate::loss::TargetMaps;
use crate::radar::{mimo_reorganize, stack_complex_channels, RdTensor};
use crate::Tensor;

/// Network-ready inputs and targets of one frame.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    /// `3×H×W` camera raster.
    pub camera: Tensor<f32>,
    /// `2·n_rx·n_tx × R × D` MIMO-gathered radar cube.
    pub radar: Tensor<f32>,
    pub objects: Vec<GtObject>,
    pub targets: TargetMaps<f32>,
}

/// Camera warps and radar reorganisation for a fixed configuration.
#[derive(Clone, Debug)]
pub struct Preprocessor {
    cfg: PipelineConfig,
    camera: CameraModel,
}

impl Preprocessor {
    pub fn new(cfg: &PipelineConfig) -> Result<Self, HarnessError> {
        Ok(Self {
            camera: cfg.camera.model()?,
            cfg: cfg.clone(),
        })
    }

    /// Camera raster in the configured domain, before tensor conversion.
    /// Polar rasters have row 0 at the nearest range; Cartesian ones are
    /// flipped to match, with row 0 at `xmin`.
    pub fn camera_raster(&self, img: &RgbImage) -> Result<RgbImage, HarnessError> {
        let c = &self.cfg.camera;
        if (img.height(), img.width()) != (c.image_height, c.image_width) {
            return Err(HarnessError::Dataset(format!(
                "camera frame is {}×{}, expected {}×{}",
                img.width(),
                img.height(),
                c.image_width,
                c.image_height
            )));
        }
        match self.cfg.camera_domain {
            CameraDomain::Polar => {
                let bev = image_to_bev_cartesian(img, &self.camera, &self.cfg.bev)?;
                Ok(bev_cartesian_to_polar(&bev, &self.cfg.bev, &self.cfg.polar, SplineOrder::Cubic)?)
            }
            CameraDomain::Cartesian => {
                let [rows, cols] = self.cfg.network.camera_input;
                let b = &self.cfg.bev;
                let grid = BevGridSpec::new([b.xmin, b.xmax, b.ymin, b.ymax], [rows, cols])?;
                Ok(image_to_bev_cartesian(img, &self.camera, &grid)?.flipped_vertically())
            }
        }
    }

    /// `3×H×W` tensor with uncovered pixels set to zero.
    pub fn camera_tensor(&self, img: &RgbImage) -> Result<Tensor<f32>, HarnessError> {
        let raster = self.camera_raster(img)?;
        let (h, w) = (raster.height(), raster.width());
        let mut data = raster.to_chw();
        for (k, v) in data.iter_mut().enumerate() {
            if !raster.mask()[k % (h * w)] {
                *v = 0.0;
            }
        }
        Ok(Tensor::new(&[3, h, w], data)?)
    }

    pub fn radar_tensor(&self, rd: &RdTensor) -> Result<Tensor<f32>, HarnessError> {
        let [r, d] = self.cfg.network.radar_input;
        if rd.dims() != [r, d, self.cfg.network.n_rx] || rd.n_tx != self.cfg.network.n_tx {
            return Err(HarnessError::Dataset(format!(
                "radar cube {:?} with {} transmitters does not match the config",
                rd.dims(),
                rd.n_tx
            )));
        }
        Ok(mimo_reorganize(&stack_complex_channels(rd), &self.cfg.mimo)?)
    }

    pub fn sample(&self, id: &str, img: &RgbImage, rd: &RdTensor, objects: Vec<GtObject>) -> Result<Sample, HarnessError> {
        let pairs: Vec<(f64, f64)> = objects.iter().map(|o| (o.range, o.azimuth)).collect();
        Ok(Sample {
            id: id.to_owned(),
            camera: self.camera_tensor(img)?,
            radar: self.radar_tensor(rd)?,
            targets: TargetMaps::from_objects(&pairs, &self.cfg.network.output_grid),
            objects,
        })
    }
}
