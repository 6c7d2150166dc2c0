//! The dual-branch fusion network, its parameters and checkpoints.

mod checkpoint;
mod config;
mod layers;
mod model;

use thiserror::Error;

use crate::radar::RadarError;
use crate::tensor::TensorError;

pub use checkpoint::{checkpoint_bytes, load_checkpoint, model_from_bytes, save_checkpoint, CHECKPOINT_MAGIC};
pub use config::{BlockKind, NetworkConfig};
pub use layers::{
    apply_bn_stats, BasicBlock, BatchNorm, Conv, ConvBn, ConvTranspose, Forward, Param, ParamKind, ParamStore,
};
pub use model::{
    split_maps, CameraDecoder, DetectionMapPair, Encoder, Head, HeadOutput, Model, RadarDecoder, SWAP_CHANNELS_WIDTH,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("network config: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Format(#[from] RadarError),
}
