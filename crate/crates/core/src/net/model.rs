use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::NetworkConfig;
use super::layers::{BasicBlock, Builder, Conv, ConvBn, ConvTranspose, Forward, ParamStore};
use super::NetError;
use crate::tensor::{ConvSpec, Tensor, Var};

/// Swaps channels with width: `N×C×H×W → N×W×H×C`. Its own inverse.
pub const SWAP_CHANNELS_WIDTH: [usize; 4] = [0, 3, 2, 1];

/// Head outputs for one frame: occupancy probabilities `1×G_r×G_a` and
/// regressed `(range m, azimuth deg)` as `2×G_r×G_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionMapPair {
    pub cls: Tensor<f32>,
    pub reg: Tensor<f32>,
}

/// Graph handles of a batched forward pass.
#[derive(Clone, Copy, Debug)]
pub struct HeadOutput {
    pub cls: Var,
    pub reg: Var,
}

/// Pre-encoder plus four strided residual stages.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub pre: ConvBn,
    pub stages: Vec<Vec<BasicBlock>>,
}

impl Encoder {
    fn build(b: &mut Builder<'_>, branch: &str, input: usize, cfg: &NetworkConfig) -> Self {
        let pre_width = cfg.scaled(cfg.pre_width);
        let pre = b.conv_bn(
            &format!("{branch}.pre_encoder"),
            ConvSpec::new(input, pre_width, 3).padding(1, 1),
        );
        let mut channels = pre_width;
        let mut stages = Vec::new();
        for (s, (&blocks, &width)) in cfg.stage_blocks.iter().zip(&cfg.stage_widths).enumerate() {
            let width = cfg.scaled(width);
            let stage = (0..blocks)
                .map(|k| {
                    let name = format!("{branch}.encoder.stage{}.block{k}", s + 1);
                    let (i, stride) = if k == 0 { (channels, 2) } else { (width, 1) };
                    b.basic_block(&name, i, width, stride)
                })
                .collect();
            stages.push(stage);
            channels = width;
        }
        Self { pre, stages }
    }

    /// Returns `[x0, x1, x2, x3, x4]`: the pre-encoder output and each
    /// stage's output, at strides 1, 2, 4, 8, 16.
    pub fn forward(&self, f: &mut Forward<'_>, x: Var) -> Result<Vec<Var>, NetError> {
        let mut feats = vec![self.pre.forward_relu(f, x)?];
        for stage in &self.stages {
            let mut y = *feats.last().expect("non-empty");
            for block in stage {
                y = block.forward(f, y)?;
            }
            feats.push(y);
        }
        Ok(feats)
    }
}

#[derive(Clone, Debug)]
pub struct CameraDecoder {
    pub up4: ConvTranspose,
    pub block3: BasicBlock,
    pub up3: ConvTranspose,
    pub block2: BasicBlock,
    /// 1×1 conv applied with azimuth as the channel axis.
    pub expand: Conv,
}

impl CameraDecoder {
    fn build(b: &mut Builder<'_>, cfg: &NetworkConfig) -> Self {
        let [w2, w3, w4] = [1, 2, 3].map(|s| cfg.scaled(cfg.stage_widths[s]));
        let up = |i, o| ConvSpec::new(i, o, 2).stride(2, 2);
        Self {
            up4: b.conv_transpose("camera.decoder.up4", up(w4, w3)),
            block3: b.basic_block("camera.decoder.block3", 2 * w3, w3, 1),
            up3: b.conv_transpose("camera.decoder.up3", up(w3, w2)),
            block2: b.basic_block("camera.decoder.block2", 2 * w2, cfg.scaled(cfg.c_cam), 1),
            expand: b.conv(
                "camera.decoder.expand",
                ConvSpec::new(cfg.camera_input[1] / 4, cfg.output_grid.n_azimuth, 1),
            ),
        }
    }

    /// Upsamples to stride 4 with skips, then widens the azimuth axis to
    /// the output grid through a channel swap.
    pub fn forward(&self, f: &mut Forward<'_>, feats: &[Var]) -> Result<Var, NetError> {
        let u = self.up4.forward(f, feats[4])?;
        let u = f.graph.concat_channels(u, feats[3])?;
        let u = self.block3.forward(f, u)?;
        let u = self.up3.forward(f, u)?;
        let u = f.graph.concat_channels(u, feats[2])?;
        let u = self.block2.forward(f, u)?;
        let swapped = f.graph.permute(u, &SWAP_CHANNELS_WIDTH)?;
        let expanded = self.expand.forward(f, swapped)?;
        Ok(f.graph.permute(expanded, &SWAP_CHANNELS_WIDTH)?)
    }
}

#[derive(Clone, Debug)]
pub struct RadarDecoder {
    /// 1×1 projections of x4, x3, x2 onto the azimuth bins.
    pub project: [Conv; 3],
    pub up4: ConvTranspose,
    pub block3: BasicBlock,
    pub up3: ConvTranspose,
    pub block2: BasicBlock,
}

impl RadarDecoder {
    fn build(b: &mut Builder<'_>, cfg: &NetworkConfig) -> Self {
        let ga = cfg.output_grid.n_azimuth;
        let d = cfg.radar_input[1];
        let [d3, d2] = cfg.radar_decoder_widths.map(|c| cfg.scaled(c));
        let up = |i, o| ConvSpec::new(i, o, 2).kernel2(2, 1).stride(2, 1);
        let project = [4, 3, 2].map(|s| {
            b.conv(
                &format!("radar.decoder.project{s}"),
                ConvSpec::new(cfg.scaled(cfg.stage_widths[s - 1]), ga, 1),
            )
        });
        Self {
            project,
            up4: b.conv_transpose("radar.decoder.up4", up(d / 16, d3)),
            block3: b.basic_block("radar.decoder.block3", d3 + d / 8, d3, 1),
            up3: b.conv_transpose("radar.decoder.up3", up(d3, d2)),
            block2: b.basic_block("radar.decoder.block2", d2 + d / 4, cfg.scaled(cfg.c_rad), 1),
        }
    }

    /// Projects features onto azimuth bins, swaps so Doppler becomes the
    /// channel axis and azimuth the width, then upsamples along range.
    pub fn forward(&self, f: &mut Forward<'_>, feats: &[Var]) -> Result<Var, NetError> {
        let mut swapped = Vec::with_capacity(3);
        for (proj, &x) in self.project.iter().zip(&[feats[4], feats[3], feats[2]]) {
            let p = proj.forward(f, x)?;
            swapped.push(f.graph.permute(p, &SWAP_CHANNELS_WIDTH)?);
        }
        let u = self.up4.forward(f, swapped[0])?;
        let u = f.graph.concat_channels(u, swapped[1])?;
        let u = self.block3.forward(f, u)?;
        let u = self.up3.forward(f, u)?;
        let u = f.graph.concat_channels(u, swapped[2])?;
        self.block2.forward(f, u)
    }
}

#[derive(Clone, Debug)]
pub struct Head {
    pub layers: Vec<ConvBn>,
    pub cls: Conv,
    pub reg: Conv,
}

/// Prior probability encoded in the initial classification bias.
const CLS_PRIOR: f32 = 0.01;

impl Head {
    fn build(b: &mut Builder<'_>, cfg: &NetworkConfig) -> Self {
        let mut channels = cfg.scaled(cfg.c_cam) + cfg.scaled(cfg.c_rad);
        let mut layers = Vec::new();
        for (k, &filters) in cfg.head_filters.iter().enumerate() {
            let filters = cfg.scaled(filters);
            layers.push(b.conv_bn(
                &format!("head.layer{}", k + 1),
                ConvSpec::new(channels, filters, 3).padding(1, 1),
            ));
            channels = filters;
        }
        let cls = b.conv("head.cls", ConvSpec::new(channels, 1, 3).padding(1, 1));
        let reg = b.conv("head.reg", ConvSpec::new(channels, 2, 3).padding(1, 1));
        let bias = cls.bias.expect("cls conv has a bias");
        b.store.get_mut(bias).value = Tensor::full(&[1], -((1.0 - CLS_PRIOR) / CLS_PRIOR).ln());
        Self { layers, cls, reg }
    }
}

/// Dual-branch camera/radar detector.
#[derive(Clone, Debug)]
pub struct Model {
    config: NetworkConfig,
    store: ParamStore,
    pub camera_encoder: Encoder,
    pub camera_decoder: CameraDecoder,
    pub radar_encoder: Encoder,
    pub radar_decoder: RadarDecoder,
    pub head: Head,
}

impl Model {
    /// Named parameter groups, usable as [`Model::freeze`] prefixes.
    pub const SUBMODULES: [&'static str; 7] = [
        "camera.pre_encoder",
        "camera.encoder",
        "camera.decoder",
        "radar.pre_encoder",
        "radar.encoder",
        "radar.decoder",
        "head",
    ];

    /// Builds the network with weights drawn from `cfg.seed`.
    pub fn new(cfg: &NetworkConfig) -> Result<Self, NetError> {
        cfg.validate()?;
        let mut store = ParamStore::default();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut b = Builder {
            store: &mut store,
            rng: &mut rng,
            bn_eps: cfg.bn_eps,
            bn_momentum: cfg.bn_momentum,
        };
        let camera_encoder = Encoder::build(&mut b, "camera", 3, cfg);
        let camera_decoder = CameraDecoder::build(&mut b, cfg);
        let radar_encoder = Encoder::build(&mut b, "radar", cfg.radar_channels(), cfg);
        let radar_decoder = RadarDecoder::build(&mut b, cfg);
        let head = Head::build(&mut b, cfg);
        Ok(Self {
            config: cfg.clone(),
            store,
            camera_encoder,
            camera_decoder,
            radar_encoder,
            radar_decoder,
            head,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Trainable, unfrozen element count.
    pub fn count_parameters(&self) -> usize {
        self.store.count_trainable()
    }

    /// Element count of trainable tensors under `prefix`, frozen or not.
    pub fn submodule_size(&self, prefix: &str) -> usize {
        self.store
            .iter()
            .filter(|p| p.name.starts_with(prefix) && p.kind == super::ParamKind::Trainable)
            .map(|p| p.value.numel())
            .sum()
    }

    pub fn freeze(&mut self, prefix: &str) -> usize {
        self.store.set_frozen(prefix, true)
    }

    pub fn unfreeze(&mut self, prefix: &str) -> usize {
        self.store.set_frozen(prefix, false)
    }

    pub fn forward_context(&self, training: bool) -> Forward<'_> {
        Forward::new(&self.store, training)
    }

    fn check_input(&self, t: &Tensor<f32>, channels: usize, hw: [usize; 2], what: &str) -> Result<usize, NetError> {
        match *t.shape() {
            [n, c, h, w] if c == channels && [h, w] == hw && n > 0 => Ok(n),
            _ => Err(NetError::Input(format!(
                "{what} must be N×{channels}×{}×{}, got {:?}",
                hw[0],
                hw[1],
                t.shape()
            ))),
        }
    }

    /// Camera stage features `[x0..x4]` for an `N×3×H×W` polar raster.
    pub fn camera_encoder_forward(&self, f: &mut Forward<'_>, image: Tensor<f32>) -> Result<Vec<Var>, NetError> {
        self.check_input(&image, 3, self.config.camera_input, "camera input")?;
        let x = f.input(image);
        self.camera_encoder.forward(f, x)
    }

    pub fn camera_decoder_forward(&self, f: &mut Forward<'_>, feats: &[Var]) -> Result<Var, NetError> {
        self.camera_decoder.forward(f, feats)
    }

    /// Radar features on the output grid from a MIMO-gathered cube
    /// `N×(2·n_rx·n_tx)×R×D`.
    pub fn radar_branch_forward(&self, f: &mut Forward<'_>, radar: Tensor<f32>) -> Result<Var, NetError> {
        self.check_input(&radar, self.config.radar_channels(), self.config.radar_input, "radar input")?;
        let x = f.input(radar);
        let feats = self.radar_encoder.forward(f, x)?;
        self.radar_decoder.forward(f, &feats)
    }

    /// Concatenates branch features and runs the detection head. The
    /// regression output is `cell centre + cell size · raw`, so it holds
    /// absolute range (m) and azimuth (deg).
    pub fn fuse_and_detect(&self, f: &mut Forward<'_>, cam: Var, rad: Var) -> Result<HeadOutput, NetError> {
        let [gr, ga] = self.config.grid();
        for (what, v) in [("camera", cam), ("radar", rad)] {
            let s = f.value(v).shape();
            if s.len() != 4 || s[2] != gr || s[3] != ga {
                return Err(NetError::Input(format!("{what} features {s:?} are not on the {gr}×{ga} grid")));
            }
        }
        let n = f.value(cam).shape()[0];
        let mut x = f.graph.concat_channels(cam, rad)?;
        for layer in &self.head.layers {
            x = layer.forward_relu(f, x)?;
        }
        let logits = self.head.cls.forward(f, x)?;
        let cls = f.graph.sigmoid(logits);
        let raw = self.head.reg.forward(f, x)?;
        let (prior, scale) = self.regression_prior(n);
        let scale = f.input(scale);
        let prior = f.input(prior);
        let scaled = f.graph.mul(raw, scale)?;
        let reg = f.graph.add(scaled, prior)?;
        Ok(HeadOutput { cls, reg })
    }

    /// Cell-centre `(range, azimuth)` and cell size, broadcast to `N×2×G_r×G_a`.
    fn regression_prior(&self, n: usize) -> (Tensor<f32>, Tensor<f32>) {
        let g = &self.config.output_grid;
        let shape = [n, 2, g.n_range, g.n_azimuth];
        let prior = Tensor::from_fn(&shape, |i| {
            if i[1] == 0 {
                g.range_of(i[2]) as f32
            } else {
                g.azimuth_of(i[3]) as f32
            }
        });
        let scale = Tensor::from_fn(&shape, |i| if i[1] == 0 { g.range_res as f32 } else { g.azimuth_res as f32 });
        (prior, scale)
    }

    /// Full forward pass on a batch.
    pub fn forward(&self, f: &mut Forward<'_>, camera: Tensor<f32>, radar: Tensor<f32>) -> Result<HeadOutput, NetError> {
        let nc = self.check_input(&camera, 3, self.config.camera_input, "camera input")?;
        let nr = self.check_input(&radar, self.config.radar_channels(), self.config.radar_input, "radar input")?;
        if nc != nr {
            return Err(NetError::Input(format!("batch sizes differ: camera {nc}, radar {nr}")));
        }
        let feats = self.camera_encoder_forward(f, camera)?;
        let cam = self.camera_decoder_forward(f, &feats)?;
        let rad = self.radar_branch_forward(f, radar)?;
        self.fuse_and_detect(f, cam, rad)
    }

    /// Inference with running batch-norm statistics; one map pair per item.
    pub fn predict(&self, camera: Tensor<f32>, radar: Tensor<f32>) -> Result<Vec<DetectionMapPair>, NetError> {
        let mut f = self.forward_context(false);
        let out = self.forward(&mut f, camera, radar)?;
        Ok(split_maps(f.value(out.cls), f.value(out.reg)))
    }
}

/// Splits batched `N×1×G×G` / `N×2×G×G` maps into per-frame pairs.
pub fn split_maps(cls: &Tensor<f32>, reg: &Tensor<f32>) -> Vec<DetectionMapPair> {
    (0..cls.shape()[0])
        .map(|n| DetectionMapPair {
            cls: cls.batch_item(n),
            reg: reg.batch_item(n),
        })
        .collect()
}
