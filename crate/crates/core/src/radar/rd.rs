use std::path::Path;

use num_complex::Complex32;

use super::io::{read_tensor_file, write_tensor_file, TensorFile};
use super::RadarError;
use crate::tensor::Tensor;

/// Complex range-Doppler cube indexed `[range][doppler][rx]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RdTensor {
    n_range: usize,
    n_doppler: usize,
    n_rx: usize,
    /// Transmitters whose Doppler-shifted copies the cube contains.
    pub n_tx: usize,
    data: Vec<Complex32>,
}

impl RdTensor {
    pub fn zeros(n_range: usize, n_doppler: usize, n_rx: usize, n_tx: usize) -> Self {
        Self {
            n_range,
            n_doppler,
            n_rx,
            n_tx,
            data: vec![Complex32::new(0.0, 0.0); n_range * n_doppler * n_rx],
        }
    }

    /// 512 range × 256 Doppler × 16 rx with 12 transmitters.
    pub fn full_size() -> Self {
        Self::zeros(512, 256, 16, 12)
    }

    pub fn from_data(dims: [usize; 3], n_tx: usize, data: Vec<Complex32>) -> Result<Self, RadarError> {
        if dims.iter().product::<usize>() != data.len() {
            return Err(RadarError::ShapeMismatch(format!("{dims:?} vs {} samples", data.len())));
        }
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(RadarError::NonFinite(i));
        }
        Ok(Self {
            n_range: dims[0],
            n_doppler: dims[1],
            n_rx: dims[2],
            n_tx,
            data,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n_range, self.n_doppler, self.n_rx]
    }

    pub fn n_range(&self) -> usize {
        self.n_range
    }

    pub fn n_doppler(&self) -> usize {
        self.n_doppler
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn data(&self) -> &[Complex32] {
        &self.data
    }

    fn index(&self, r: usize, d: usize, rx: usize) -> usize {
        debug_assert!(r < self.n_range && d < self.n_doppler && rx < self.n_rx);
        (r * self.n_doppler + d) * self.n_rx + rx
    }

    pub fn get(&self, r: usize, d: usize, rx: usize) -> Complex32 {
        self.data[self.index(r, d, rx)]
    }

    pub fn set(&mut self, r: usize, d: usize, rx: usize, z: Complex32) {
        let i = self.index(r, d, rx);
        self.data[i] = z;
    }

    pub fn add(&mut self, r: usize, d: usize, rx: usize, z: Complex32) {
        let i = self.index(r, d, rx);
        self.data[i] += z;
    }

    /// Total power `Σ|z|²`.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr() as f64).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_tensor_file(
            &TensorFile::Complex32 {
                shape: self.dims().to_vec(),
                data: self.data.clone(),
            },
            &mut out,
        )
        .expect("dimensions fit in u32");
        out
    }

    /// Parses an `RDT1` complex rank-3 tensor. `n_tx` is not stored in the
    /// file and must be supplied.
    pub fn from_bytes(bytes: &[u8], n_tx: usize) -> Result<Self, RadarError> {
        match read_tensor_file(bytes)? {
            TensorFile::Complex32 { shape, data } if shape.len() == 3 => {
                Self::from_data([shape[0], shape[1], shape[2]], n_tx, data)
            }
            other => Err(RadarError::ShapeMismatch(format!(
                "expected a complex rank-3 tensor, got {} with shape {:?}",
                other.dtype_name(),
                other.shape()
            ))),
        }
    }
}

pub fn save_rd_tensor(rd: &RdTensor, path: impl AsRef<Path>) -> Result<(), RadarError> {
    Ok(std::fs::write(path, rd.to_bytes())?)
}

/// Loads a cube and, when `expected` is given, checks its dimensions.
pub fn load_rd_tensor(path: impl AsRef<Path>, n_tx: usize, expected: Option<[usize; 3]>) -> Result<RdTensor, RadarError> {
    let rd = RdTensor::from_bytes(&std::fs::read(path)?, n_tx)?;
    match expected {
        Some(dims) if dims != rd.dims() => Err(RadarError::ShapeMismatch(format!(
            "expected {dims:?}, file holds {:?}",
            rd.dims()
        ))),
        _ => Ok(rd),
    }
}

/// `2·n_rx × range × Doppler` real tensor: channel `2c` is the real part of
/// receiver `c` and channel `2c + 1` its imaginary part.
pub fn stack_complex_channels(rd: &RdTensor) -> Tensor<f32> {
    let [nr, nd, nrx] = rd.dims();
    let plane = nr * nd;
    let mut out = vec![0.0f32; 2 * nrx * plane];
    for r in 0..nr {
        for d in 0..nd {
            for (c, z) in rd.data[(r * nd + d) * nrx..(r * nd + d + 1) * nrx].iter().enumerate() {
                out[2 * c * plane + r * nd + d] = z.re;
                out[(2 * c + 1) * plane + r * nd + d] = z.im;
            }
        }
    }
    Tensor::new(&[2 * nrx, nr, nd], out).expect("sizes agree")
}

/// Inverse of [`stack_complex_channels`].
pub fn unstack_complex_channels(t: &Tensor<f32>, n_tx: usize) -> Result<RdTensor, RadarError> {
    let s = t.shape();
    if s.len() != 3 || s[0] % 2 != 0 {
        return Err(RadarError::ShapeMismatch(format!("cannot unstack shape {s:?}")));
    }
    let (nrx, nr, nd) = (s[0] / 2, s[1], s[2]);
    let plane = nr * nd;
    let v = t.data();
    let mut rd = RdTensor::zeros(nr, nd, nrx, n_tx);
    for c in 0..nrx {
        for p in 0..plane {
            rd.set(p / nd, p % nd, c, Complex32::new(v[2 * c * plane + p], v[(2 * c + 1) * plane + p]));
        }
    }
    Ok(rd)
}
