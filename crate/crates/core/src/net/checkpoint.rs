//! `PFN1` checkpoints.
//!
//! Little-endian layout: magic `PFN1`; `u32` length and UTF-8 TOML text of
//! the [`NetworkConfig`]; `u32` tensor count; then per tensor a `u32` name
//! length, the UTF-8 name and the tensor as an `RDT1` f32 record. Batch-norm
//! running statistics are included.

use std::path::Path;

use super::{Model, NetError, NetworkConfig};
use crate::radar::io::{read_tensor, Reader};
use crate::radar::{write_tensor_file, TensorFile};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PFN1";

pub fn checkpoint_bytes(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let cfg = model.config().to_toml();
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg.as_bytes());
    out.extend_from_slice(&(model.store().len() as u32).to_le_bytes());
    for p in model.store().iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        let t = TensorFile::F32 {
            shape: p.value.shape().to_vec(),
            data: p.value.data().to_vec(),
        };
        write_tensor_file(&t, &mut out).expect("parameter shapes fit in u32");
    }
    out
}

/// Rebuilds a model from checkpoint bytes. Every stored tensor must match a
/// parameter of the rebuilt model by name and shape, and every parameter
/// must be present.
pub fn model_from_bytes(bytes: &[u8]) -> Result<Model, NetError> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(NetError::Checkpoint(format!("bad magic {magic:?}, expected \"PFN1\"")));
    }
    let len = r.u32("config length")? as usize;
    let text = std::str::from_utf8(r.take(len, "config block")?)
        .map_err(|e| NetError::Checkpoint(format!("config block is not UTF-8: {e}")))?;
    let cfg = NetworkConfig::from_toml(text)?;
    let mut model = Model::new(&cfg)?;
    let count = r.u32("tensor count")? as usize;
    if count != model.store().len() {
        return Err(NetError::Checkpoint(format!(
            "{count} tensors stored, model has {}",
            model.store().len()
        )));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let at = r.offset();
        let n = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(n, "name")?)
            .map_err(|e| NetError::Checkpoint(format!("name at byte offset {at} is not UTF-8: {e}")))?
            .to_owned();
        let idx = model
            .store()
            .find(&name)
            .ok_or_else(|| NetError::Checkpoint(format!("unknown tensor `{name}`")))?;
        let (shape, data) = match read_tensor(&mut r)? {
            TensorFile::F32 { shape, data } => (shape, data),
            other => {
                return Err(NetError::Checkpoint(format!("`{name}` stored as {}", other.dtype_name())));
            }
        };
        let param = model.store_mut().get_mut(idx);
        if shape != param.value.shape() {
            return Err(NetError::Checkpoint(format!(
                "`{name}` has shape {shape:?}, model expects {:?}",
                param.value.shape()
            )));
        }
        if seen[idx] {
            return Err(NetError::Checkpoint(format!("`{name}` stored twice")));
        }
        seen[idx] = true;
        param.value = Tensor::new(&shape, data)?;
    }
    if r.remaining() > 0 {
        return Err(NetError::Checkpoint(format!(
            "{} trailing bytes at byte offset {}",
            r.remaining(),
            r.offset()
        )));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<u64, NetError> {
    let bytes = checkpoint_bytes(model);
    std::fs::write(path, &bytes).map_err(|e| NetError::Checkpoint(e.to_string()))?;
    Ok(bytes.len() as u64)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model, NetError> {
    let bytes = std::fs::read(path).map_err(|e| NetError::Checkpoint(e.to_string()))?;
    model_from_bytes(&bytes)
}
