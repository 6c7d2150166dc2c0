use serde::{Deserialize, Serialize};

use super::NetError;
use crate::geometry::PolarGridSpec;

/// Residual block layout used in both encoders.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Two 3×3 conv + batch-norm layers with an identity or 1×1 projection
    /// shortcut.
    #[default]
    Basic,
}

/// Architecture hyper-parameters. Channel counts are given at full width
/// and multiplied by `width` (rounded up) when the model is built; spatial
/// sizes are never scaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Channel multiplier in (0, 1].
    pub width: f64,
    /// Camera polar raster `[range rows, azimuth columns]`.
    pub camera_input: [usize; 2],
    /// Radar cube `[range bins, Doppler bins]`.
    pub radar_input: [usize; 2],
    pub n_rx: usize,
    pub n_tx: usize,
    pub block: BlockKind,
    pub stage_blocks: [usize; 4],
    pub pre_width: usize,
    pub stage_widths: [usize; 4],
    /// Radar decoder widths after the first and second upsampling.
    pub radar_decoder_widths: [usize; 2],
    pub c_cam: usize,
    pub c_rad: usize,
    pub head_filters: Vec<usize>,
    /// Detection grid; its size is the head's spatial output.
    pub output_grid: PolarGridSpec,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    pub seed: u64,
}

impl NetworkConfig {
    /// 512×256 camera raster, 512×256×16 radar cube with 12 transmitters,
    /// 128×224 output grid.
    pub fn full() -> Self {
        Self {
            width: 1.0,
            camera_input: [512, 256],
            radar_input: [512, 256],
            n_rx: 16,
            n_tx: 12,
            block: BlockKind::Basic,
            stage_blocks: [3, 6, 6, 3],
            pre_width: 32,
            stage_widths: [32, 64, 96, 128],
            radar_decoder_widths: [64, 64],
            c_cam: 128,
            c_rad: 128,
            head_filters: vec![144, 96, 96, 96],
            output_grid: PolarGridSpec::detection_default(),
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            seed: 0,
        }
    }

    /// Width 1/8 on a 64×32 camera raster and a 64×32×4 radar cube with 3
    /// transmitters; 16×28 output cells of 3.2 m × 3.2°.
    pub fn desk() -> Self {
        Self {
            width: 0.125,
            camera_input: [64, 32],
            radar_input: [64, 32],
            n_rx: 4,
            n_tx: 3,
            output_grid: PolarGridSpec {
                n_range: 16,
                n_azimuth: 28,
                range_res: 3.2,
                azimuth_res: 3.2,
                azimuth_center: 14.0,
            },
            ..Self::full()
        }
    }

    pub fn scaled(&self, channels: usize) -> usize {
        ((channels as f64 * self.width).ceil() as usize).max(1)
    }

    pub fn grid(&self) -> [usize; 2] {
        [self.output_grid.n_range, self.output_grid.n_azimuth]
    }

    /// Channels entering the radar pre-encoder after the MIMO gather.
    pub fn radar_channels(&self) -> usize {
        2 * self.n_rx * self.n_tx
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Config(m));
        if !(self.width > 0.0 && self.width <= 1.0) {
            return bad(format!("width {} outside (0, 1]", self.width));
        }
        if self.stage_blocks.contains(&0) {
            return bad(format!("every stage needs at least one block: {:?}", self.stage_blocks));
        }
        let widths = [self.pre_width, self.c_cam, self.c_rad]
            .into_iter()
            .chain(self.stage_widths)
            .chain(self.radar_decoder_widths);
        if widths.into_iter().any(|c| c == 0) || self.head_filters.contains(&0) {
            return bad("channel counts must be positive".into());
        }
        if self.head_filters.is_empty() {
            return bad("head needs at least one conv layer".into());
        }
        if self.n_rx == 0 || self.n_tx == 0 {
            return bad("n_rx and n_tx must be positive".into());
        }
        if !(self.bn_eps > 0.0) || !(0.0..=1.0).contains(&self.bn_momentum) {
            return bad(format!("batch-norm eps {} / momentum {}", self.bn_eps, self.bn_momentum));
        }
        self.output_grid
            .validate()
            .map_err(|e| NetError::Config(format!("output grid: {e}")))?;
        for (name, [h, w]) in [("camera_input", self.camera_input), ("radar_input", self.radar_input)] {
            if h == 0 || w == 0 || h % 16 != 0 || w % 16 != 0 {
                return bad(format!("{name} {h}×{w} must be a positive multiple of 16 on both axes"));
            }
        }
        let [gr, _] = self.grid();
        if self.camera_input[0] / 4 != gr || self.radar_input[0] / 4 != gr {
            return bad(format!(
                "range rows /4 must equal the output grid's {gr} range bins (camera {}, radar {})",
                self.camera_input[0], self.radar_input[0]
            ));
        }
        Ok(())
    }

    /// Compact TOML text, used as the checkpoint config block.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self, NetError> {
        let cfg: Self = toml::from_str(text).map_err(|e| NetError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        NetworkConfig::full().validate().unwrap();
        NetworkConfig::desk().validate().unwrap();
        let d = NetworkConfig::desk();
        assert_eq!(d.scaled(144), 18);
        assert_eq!(d.scaled(96), 12);
        assert_eq!(d.scaled(1), 1);
        assert_eq!(NetworkConfig::full().radar_channels(), 384);
    }

    #[test]
    fn grid_arithmetic_is_checked() {
        let mut c = NetworkConfig::desk();
        c.camera_input = [48, 32];
        assert!(c.validate().is_err());
        let mut c = NetworkConfig::desk();
        c.radar_input = [72, 32];
        assert!(c.validate().is_err());
        let mut c = NetworkConfig::desk();
        c.width = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = NetworkConfig::desk();
        let text = c.to_toml();
        assert_eq!(NetworkConfig::from_toml(&text).unwrap(), c);
        assert_eq!(NetworkConfig::from_toml(&text).unwrap().to_toml(), text);
    }
}
