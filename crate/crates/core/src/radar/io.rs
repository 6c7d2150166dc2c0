//! `RDT1` tensor files.
//!
//! Little-endian layout:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `RDT1` |
//! | 4 | 4 | `u32` rank `n` |
//! | 8 | 4·n | `u32` dimensions, outermost first |
//! | 8+4n | 1 | dtype tag: 0 complex f32 (re, im interleaved), 1 f32, 2 f64 |
//! | 9+4n | … | row-major payload |

use num_complex::Complex32;

use super::RadarError;

pub const TENSOR_MAGIC: &[u8; 4] = b"RDT1";

#[derive(Clone, Debug, PartialEq)]
pub enum TensorFile {
    Complex32 { shape: Vec<usize>, data: Vec<Complex32> },
    F32 { shape: Vec<usize>, data: Vec<f32> },
    F64 { shape: Vec<usize>, data: Vec<f64> },
}

impl TensorFile {
    pub fn shape(&self) -> &[usize] {
        match self {
            Self::Complex32 { shape, .. } | Self::F32 { shape, .. } | Self::F64 { shape, .. } => shape,
        }
    }

    pub fn dtype_name(&self) -> &'static str {
        match self {
            Self::Complex32 { .. } => "complex f32",
            Self::F32 { .. } => "f32",
            Self::F64 { .. } => "f64",
        }
    }

    fn tag(&self) -> u8 {
        match self {
            Self::Complex32 { .. } => 0,
            Self::F32 { .. } => 1,
            Self::F64 { .. } => 2,
        }
    }

    fn len(&self) -> usize {
        match self {
            Self::Complex32 { data, .. } => data.len(),
            Self::F32 { data, .. } => data.len(),
            Self::F64 { data, .. } => data.len(),
        }
    }

    pub fn header_len(rank: usize) -> usize {
        9 + 4 * rank
    }

    pub fn encoded_len(&self) -> usize {
        let elem = match self {
            Self::Complex32 { .. } | Self::F64 { .. } => 8,
            Self::F32 { .. } => 4,
        };
        Self::header_len(self.shape().len()) + elem * self.len()
    }
}

pub fn write_tensor_file(t: &TensorFile, out: &mut Vec<u8>) -> Result<(), RadarError> {
    if t.shape().iter().product::<usize>() != t.len() {
        return Err(RadarError::ShapeMismatch(format!("shape {:?} vs {} elements", t.shape(), t.len())));
    }
    out.reserve(t.encoded_len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        let d = u32::try_from(d).map_err(|_| RadarError::ShapeMismatch(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.push(t.tag());
    match t {
        TensorFile::Complex32 { data, .. } => {
            for z in data {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        TensorFile::F32 { data, .. } => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        TensorFile::F64 { data, .. } => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(())
}

/// Byte cursor that reports the offset of any short read.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], RadarError> {
        if self.remaining() < n {
            return Err(RadarError::Truncated {
                offset: self.pos,
                what,
                needed: n,
                available: self.remaining(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self, what: &'static str) -> Result<u32, RadarError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

/// Reads one tensor starting at the reader's position.
pub(crate) fn read_tensor(r: &mut Reader<'_>) -> Result<TensorFile, RadarError> {
    let magic = r.take(4, "magic")?;
    if magic != TENSOR_MAGIC {
        return Err(RadarError::BadMagic { found: magic.to_vec() });
    }
    let rank = r.u32("rank")? as usize;
    if rank > 8 {
        return Err(RadarError::ShapeMismatch(format!("rank {rank} is not supported")));
    }
    let shape = (0..rank).map(|_| r.u32("dimension").map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    let tag = r.take(1, "dtype tag")?[0];
    let count = shape
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| RadarError::ShapeMismatch(format!("shape {shape:?} overflows")))?;
    let f32s = |b: &[u8]| -> Vec<f32> { b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect() };
    Ok(match tag {
        0 => {
            let raw = f32s(r.take(count * 8, "complex payload")?);
            let data = raw.chunks_exact(2).map(|p| Complex32::new(p[0], p[1])).collect();
            TensorFile::Complex32 { shape, data }
        }
        1 => TensorFile::F32 {
            shape,
            data: f32s(r.take(count * 4, "f32 payload")?),
        },
        2 => TensorFile::F64 {
            shape,
            data: r
                .take(count * 8, "f64 payload")?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        },
        t => return Err(RadarError::UnknownDtype(t)),
    })
}

/// Parses a buffer holding exactly one tensor.
pub fn read_tensor_file(bytes: &[u8]) -> Result<TensorFile, RadarError> {
    let mut r = Reader::new(bytes);
    let t = read_tensor(&mut r)?;
    if r.remaining() > 0 {
        return Err(RadarError::TrailingBytes {
            offset: r.offset(),
            extra: r.remaining(),
        });
    }
    Ok(t)
}
