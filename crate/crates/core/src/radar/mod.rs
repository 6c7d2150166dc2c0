//! Range-Doppler radar input: storage, channel stacking, the MIMO Doppler
//! gather and a bin-level scene synthesiser.

pub(crate) mod io;
mod mimo;
mod rd;
mod synth;

use thiserror::Error;

pub use io::{read_tensor_file, write_tensor_file, TensorFile, TENSOR_MAGIC};
pub use mimo::{mimo_reorganize, mimo_reorganize_conv, DopplerWrap, MimoConfig};
pub use rd::{load_rd_tensor, save_rd_tensor, stack_complex_channels, unstack_complex_channels, RdTensor};
pub use synth::{synth_rd_scene, RadarTargetSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadarError {
    #[error("bad magic {found:?}, expected \"RDT1\"")]
    BadMagic { found: Vec<u8> },
    #[error("file truncated at byte offset {offset}: {what} needs {needed} more bytes, {available} available")]
    Truncated {
        offset: usize,
        what: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("{extra} trailing bytes after payload at byte offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("unknown dtype tag {0}")]
    UnknownDtype(u8),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid MIMO configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite sample at flat index {0}")]
    NonFinite(usize),
    #[error("target {index} out of bounds: {detail}")]
    TargetOutOfBounds { index: usize, detail: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for RadarError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
